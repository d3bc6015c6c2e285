"""Per-round performance measures and regret certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import Box, StrategyPair
from .payoff import Payoff
from .saddle import best_response_max, best_response_min

CERTIFICATE_TOL = 1e-6


def dual_gap_increment(f: Payoff, play: StrategyPair, competitor: StrategyPair) -> float:
    """``f(x_t, v_t) - f(u_t, y_t)``."""
    return f.value(play.x, competitor.y) - f.value(competitor.x, play.y)


def residual_increment(f: Payoff, play: StrategyPair, X: Box, Y: Box) -> float:
    """Saddle-point residual ``max_y f(x_t, y) - min_x f(x, y_t)`` (comparator-free)."""
    return best_response_max(f, play.x, Y) - best_response_min(f, play.y, X)


def tracking_error_increment(play: StrategyPair, saddle: StrategyPair) -> float:
    """``max(||x_t - x*||, ||y_t - y*||)``."""
    return max(float(np.linalg.norm(play.x - saddle.x)), float(np.linalg.norm(play.y - saddle.y)))


def _move(new: StrategyPair, old: Optional[StrategyPair]) -> tuple[float, float]:
    if old is None:
        # first round: the previous point is taken equal to the current one
        return 0.0, 0.0
    return float(np.linalg.norm(new.x - old.x)), float(np.linalg.norm(new.y - old.y))


@dataclass
class MetricsAccumulator:
    """Cumulative measures of one run.

    The signed NE sum and the tracking error are accumulated separately so
    that cancellation inside NE-regret is visible.
    """

    t: int = 0
    dual_gap: float = 0.0
    ne_sum: float = 0.0
    residual: float = 0.0
    tracking_error: float = 0.0
    P: float = 0.0
    P_inf: float = 0.0
    temporal_variability: float = 0.0
    predictor_variability: float = 0.0
    last_competitor: Optional[StrategyPair] = field(default=None, repr=False)
    last_saddle: Optional[StrategyPair] = field(default=None, repr=False)

    def path_length_update(self, competitor: StrategyPair) -> float:
        inc = sum(_move(competitor, self.last_competitor))
        self.P += inc
        self.last_competitor = competitor
        return inc

    def path_length_inf_update(self, saddle: StrategyPair) -> float:
        inc = max(_move(saddle, self.last_saddle))
        self.P_inf += inc
        self.last_saddle = saddle
        return inc

    def record(self, f: Payoff, play: StrategyPair, competitor: StrategyPair, saddle: StrategyPair,
               X: Box, Y: Box, residual: bool = True) -> None:
        """Add one round's increments (path lengths included)."""
        self.t += 1
        self.dual_gap += dual_gap_increment(f, play, competitor)
        self.ne_sum += f.value(play.x, play.y) - f.value(saddle.x, saddle.y)
        self.tracking_error += tracking_error_increment(play, saddle)
        if residual:
            self.residual += residual_increment(f, play, X, Y)
        self.path_length_update(competitor)
        self.path_length_inf_update(saddle)

    @property
    def ne_regret(self) -> float:
        return abs(self.ne_sum)

    def average(self, name: str) -> float:
        if self.t == 0:
            return math.nan
        return getattr(self, name) / self.t


def ne_regret(acc: MetricsAccumulator) -> float:
    """``|sum f_t(x_t, y_t) - sum f_t(x*_t, y*_t)|``; ``acc.ne_sum`` keeps the sign."""
    return acc.ne_regret


def path_length_update(acc: MetricsAccumulator, competitor_t: StrategyPair, competitor_prev=None) -> MetricsAccumulator:
    if competitor_prev is not None:
        acc.last_competitor = competitor_prev
    acc.path_length_update(competitor_t)
    return acc


def path_length_inf_update(acc: MetricsAccumulator, saddle_t: StrategyPair, saddle_prev=None) -> MetricsAccumulator:
    if saddle_prev is not None:
        acc.last_saddle = saddle_prev
    acc.path_length_inf_update(saddle_t)
    return acc


@dataclass(frozen=True)
class Certificate:
    metric: float
    bound: float
    satisfied: bool


def check_certificate(metric: float, bound: float, tol: float = CERTIFICATE_TOL) -> Certificate:
    return Certificate(metric, bound, bool(metric <= bound + tol))


def bound_certificate(learner, acc: MetricsAccumulator, tol: float = CERTIFICATE_TOL) -> Certificate:
    """Compare the run's metric with the learner's bound.

    Duality-gap learners are held to the cumulative duality gap, NE learners
    to the absolute signed NE sum.
    """
    metric = acc.dual_gap if learner.kind == "dual-gap" else abs(acc.ne_sum)
    return check_certificate(metric, learner.bound_rhs(), tol)
