"""Online learners for time-varying convex-concave games.

Four algorithms share one round protocol::

    pair = learner.play(h)       # h: predicted payoff (optimistic learners only)
    learner.update(f)            # the true payoff is revealed
    learner.observe(comparator)  # competitor (duality-gap learners) or saddle (NE learners)

=============  ===========================================  ====================
name           update                                       step-size tuned by
=============  ===========================================  ====================
iomda          implicit joint proximal step on ``f``        duality gap
optiomda       optimistic step on ``h``, correction on f    duality gap
ne-iomda       implicit joint proximal step on ``f``        NE-regret
ne-optiomda    optimistic step on ``h``, correction on f    NE-regret
=============  ===========================================  ====================

Step sizes satisfy ``(K + L P) / eta_t = epsilon + (accumulated deltas)``
where ``K`` is ``C``, ``2 D^2`` or ``D^2`` depending on the algorithm and
``P`` is a path-length budget; :class:`Doubling` removes the need to know
``P`` in advance.
"""

from __future__ import annotations

import copy
import math
from collections import deque
from typing import Callable, Optional

import numpy as np

from .domain import Box, Regularizer, RegularizerConstants, StrategyPair, bregman, derive_constants
from .payoff import Payoff, zero_payoff
from .saddle import DEFAULT_SOLVER, SolverConfig, prox_max, prox_min, solve_regularized_saddle

DUAL_GAP = "dual-gap"
NE = "ne"

DELTA_SLACK = 1e-9
DELTA_FATAL = 1e-6


class InvariantViolation(RuntimeError):
    """A quantity the analysis guarantees (positivity, monotonicity) failed."""


class ProtocolError(RuntimeError):
    """Round methods were called out of order."""


class ExactSum:
    """Running sum without rounding drift (Shewchuk partials, as in ``math.fsum``)."""

    __slots__ = ("partials",)

    def __init__(self):
        self.partials: list[float] = []

    def add(self, x: float) -> None:
        x = float(x)
        i = 0
        for y in self.partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                self.partials[i] = lo
                i += 1
            x = hi
        self.partials[i:] = [x]

    @property
    def value(self) -> float:
        return math.fsum(self.partials)


def _step(x_new: StrategyPair, x_old: StrategyPair) -> tuple[float, float]:
    return float(np.linalg.norm(x_new.x - x_old.x)), float(np.linalg.norm(x_new.y - x_old.y))


class LagPredictor:
    """``h_t = f_{t-k}``; the zero payoff while fewer than `k` payoffs are known."""

    def __init__(self, k: int, dim_x: int = 1, dim_y: int = 1):
        if k < 1:
            raise ValueError("predictor lag must be at least 1")
        self.k = k
        self._history: deque = deque(maxlen=k)
        self._default = zero_payoff(dim_x, dim_y)

    def predict(self) -> Payoff:
        if len(self._history) < self.k:
            return self._default
        return self._history[0]

    def push(self, f: Payoff) -> None:
        self._history.append(f)


class Learner:
    """Shared plumbing: schedule constants, path length and round-phase checks.

    Parameters
    ----------
    X, Y : Box
        Action boxes of the minimizing and maximizing player.
    start : StrategyPair
        Initial iterate (the first play for implicit learners, the first
        auxiliary point for optimistic ones).
    P : float
        Path-length budget entering the step size.
    epsilon : float
        Offset keeping the first step size finite.
    """

    name = "learner"
    kind = DUAL_GAP
    optimistic = False

    def __init__(self, X: Box, Y: Box, start: StrategyPair, *, P: float = 1.0, epsilon: float = 0.1,
                 reg: Regularizer = Regularizer(), consts: Optional[RegularizerConstants] = None,
                 solver: SolverConfig = DEFAULT_SOLVER):
        if not epsilon > 0:
            raise ValueError("epsilon must be positive")
        if P < 0:
            raise ValueError("path-length budget must be nonnegative")
        self.X, self.Y = X, Y
        self.reg = reg
        self.consts = consts if consts is not None else derive_constants(reg, X, Y)
        self.epsilon = float(epsilon)
        self.P = float(P)
        self.solver = solver
        self.t = 0
        self.eta = math.nan
        self.path_length = 0.0
        self._last_comparator: Optional[StrategyPair] = None
        self._phase = "play"
        if not (X.contains(start.x) and Y.contains(start.y)):
            raise ValueError("start point lies outside the action boxes")

    # -- schedule -----------------------------------------------------------
    @property
    def numerator(self) -> float:
        return self.schedule_constant + self.consts.L * self.P

    @property
    def schedule_constant(self) -> float:
        raise NotImplementedError

    def _eta_from(self, accumulated: float) -> float:
        eta = self.numerator / (self.epsilon + accumulated)
        if not eta > 0:
            raise InvariantViolation(f"non-positive learning rate {eta} at round {self.t}")
        if eta > self.eta * (1 + 1e-15) and not math.isnan(self.eta):
            raise InvariantViolation(f"learning rate increased at round {self.t}")
        return eta

    # -- protocol -----------------------------------------------------------
    def _enter(self, phase: str, nxt: str) -> None:
        if self._phase != phase:
            raise ProtocolError(f"{phase}() called during the {self._phase} phase")
        self._phase = nxt

    def play(self, h: Optional[Payoff] = None) -> StrategyPair:
        raise NotImplementedError

    def update(self, f: Payoff) -> None:
        raise NotImplementedError

    def observe(self, comparator: StrategyPair) -> float:
        """Record the round's comparator; returns the path-length increment."""
        self._enter("observe", "play")
        if self._last_comparator is None:
            inc = 0.0
        elif self.kind == DUAL_GAP:
            inc = sum(_step(comparator, self._last_comparator))
        else:
            inc = max(_step(comparator, self._last_comparator))
        self.path_length += inc
        self._last_comparator = comparator
        self._after_observe(comparator)
        return inc

    def _after_observe(self, comparator: StrategyPair) -> None:
        pass

    @property
    def delta_sum(self) -> float:
        raise NotImplementedError

    def bound_rhs(self) -> float:
        """Right-hand side of the regret certificate after the last observed round."""
        if self.t == 0:
            return 0.0
        return (self.schedule_constant + self.consts.L * self.path_length) / self.eta + self.certificate_slack()

    def certificate_slack(self) -> float:
        return self.delta_sum

    def warm_start(self) -> StrategyPair:
        """Point from which a fresh learner should continue."""
        raise NotImplementedError

    def clone(self) -> "Learner":
        return copy.deepcopy(self)


class IOMDA(Learner):
    """Implicit online mirror descent-ascent tuned by the duality gap.

    The correction term for round ``t`` needs the competitor of round
    ``t + 1``, so it is computed one round late and the step size lags two
    rounds behind. ``Sigma_t = (sum_{s<=t} delta_s)_+`` and
    ``Delta_t = (Sigma_t - max_{s<t} Sigma_s)_+``; the partial sums of
    ``Delta`` therefore equal the running maximum of ``Sigma``.
    """

    name = "iomda"
    kind = DUAL_GAP

    def __init__(self, X, Y, start, **kw):
        super().__init__(X, Y, start, **kw)
        self.current = start
        self.next: Optional[StrategyPair] = None
        self.deltas: list[float] = []
        self.Deltas: list[float] = []
        self._delta_sum = ExactSum()
        self._Delta_sum = ExactSum()
        self.sigma_max = 0.0
        self._prev = None  # (f, play, competitor, eta) of the previous round
        self._f = None

    @property
    def schedule_constant(self) -> float:
        return self.consts.C

    def play(self, h=None) -> StrategyPair:
        self._enter("play", "update")
        self.t += 1
        # Delta of round t-1 is not known yet: the schedule runs to t-2
        self.eta = self._eta_from(self._Delta_sum.value)
        return self.current

    def update(self, f: Payoff) -> None:
        self._enter("update", "observe")
        self._f = f
        self.next = solve_regularized_saddle(f, self.current, self.eta, self.X, self.Y, self.solver)

    def _delta(self, f, play, comp, eta, nxt_play, nxt_comp) -> float:
        x, y = play.x, play.y
        u, v = comp.x, comp.y
        return (
            f.value(x, v)
            - f.value(nxt_play.x, nxt_comp.y)
            + f.value(nxt_comp.x, nxt_play.y)
            - f.value(u, y)
            - (bregman(self.reg, nxt_play.x, x) + bregman(self.reg, nxt_play.y, y)) / eta
        )

    def _after_observe(self, comp: StrategyPair) -> None:
        if self._prev is not None:
            f_p, play_p, comp_p, eta_p = self._prev
            d = self._delta(f_p, play_p, comp_p, eta_p, self.current, comp)
            self.deltas.append(d)
            self._delta_sum.add(d)
            sigma = max(self._delta_sum.value, 0.0)
            Delta = max(sigma - self.sigma_max, 0.0)
            self.Deltas.append(Delta)
            if Delta > 0:
                self._Delta_sum.add(sigma)
                self._Delta_sum.add(-self.sigma_max)
                self.sigma_max = sigma
        self._prev = (self._f, self.current, comp, self.eta)
        self.current = self.next
        self.next = None

    def provisional_delta(self) -> float:
        """Correction of the last observed round, taking the next competitor equal to the last."""
        if self._prev is None:
            return 0.0
        f_p, play_p, comp_p, eta_p = self._prev
        return self._delta(f_p, play_p, comp_p, eta_p, self.current, comp_p)

    @property
    def delta_sum(self) -> float:
        return self._delta_sum.value

    @property
    def Delta_sum(self) -> float:
        return self._Delta_sum.value

    def certificate_slack(self) -> float:
        return self._delta_sum.value + self.provisional_delta()

    def warm_start(self) -> StrategyPair:
        return self.current


class OptIOMDA(Learner):
    """Optimistic implicit mirror descent-ascent tuned by the duality gap.

    Plays the regularized saddle of the prediction ``h`` around the auxiliary
    point, then moves the auxiliary point with one proximal step per player on
    the revealed payoff.
    """

    name = "optiomda"
    kind = DUAL_GAP
    optimistic = True

    def __init__(self, X, Y, start, **kw):
        super().__init__(X, Y, start, **kw)
        self.aux = start
        self.current: Optional[StrategyPair] = None
        self.deltas: list[float] = []
        self.raw_deltas: list[float] = []
        self._delta_sum = ExactSum()
        self._h: Optional[Payoff] = None
        self.min_part = 0.0

    @property
    def schedule_constant(self) -> float:
        return 2.0 * self.consts.D_sq

    def play(self, h: Optional[Payoff] = None) -> StrategyPair:
        if h is None:
            raise ValueError(f"{self.name} needs a predicted payoff")
        self._enter("play", "update")
        self.t += 1
        self.eta = self._eta_from(self._delta_sum.value)
        self._h = h
        self.current = solve_regularized_saddle(h, self.aux, self.eta, self.X, self.Y, self.solver)
        return self.current

    def _prox(self, f: Payoff) -> StrategyPair:
        x, y = self.current.x, self.current.y
        x_new = prox_min(f.slice_x(y), self.aux.x, self.eta, self.X, self.solver)
        y_new = prox_max(f.slice_y(x), self.aux.y, self.eta, self.Y, self.solver)
        return StrategyPair(x_new, y_new)

    def _parts(self, f: Payoff, h: Payoff, aux: StrategyPair) -> tuple[float, float]:
        """The x-side and y-side corrections."""
        x, y = self.current.x, self.current.y
        dx = f.value(x, y) - h.value(x, y) + h.value(aux.x, y) - f.value(aux.x, y) - bregman(self.reg, aux.x, x) / self.eta
        dy = h.value(x, y) - f.value(x, y) + f.value(x, aux.y) - h.value(x, aux.y) - bregman(self.reg, aux.y, y) / self.eta
        return dx, dy

    def _combine(self, dx: float, dy: float) -> float:
        # the f(x_t, y_t) and h(x_t, y_t) terms cancel in the sum
        return dx + dy

    def update(self, f: Payoff) -> None:
        self._enter("update", "observe")
        new_aux = self._prox(f)
        dx, dy = self._parts(f, self._h, new_aux)
        if min(dx, dy) < -DELTA_FATAL:
            raise InvariantViolation(f"{self.name}: negative correction {min(dx, dy):.3e} at round {self.t}")
        d = self._combine(dx, dy)
        self.raw_deltas.append(d)
        self.min_part = min(self.min_part, dx, dy)
        if d < -DELTA_FATAL:
            raise InvariantViolation(f"{self.name}: correction {d:.3e} at round {self.t}")
        # tiny negatives are rounding; the analysis guarantees d >= 0
        d = max(d, 0.0)
        self.deltas.append(d)
        self._delta_sum.add(d)
        self.aux = new_aux

    @property
    def delta_sum(self) -> float:
        return self._delta_sum.value

    def warm_start(self) -> StrategyPair:
        return self.aux


class NeIOMDA(IOMDA):
    """Implicit mirror descent-ascent tuned by NE-regret.

    ``S^x`` and ``S^y`` accumulate the one-sided progress terms,
    ``Sigma_t = max(S^x_+, S^y_+)`` and ``delta_t = (Sigma_t - max_{s<t} Sigma_s)_+``.
    """

    name = "ne-iomda"
    kind = NE

    def __init__(self, X, Y, start, **kw):
        super().__init__(X, Y, start, **kw)
        self._Sx = ExactSum()
        self._Sy = ExactSum()

    @property
    def schedule_constant(self) -> float:
        return self.consts.D_sq

    def play(self, h=None) -> StrategyPair:
        self._enter("play", "update")
        self.t += 1
        self.eta = self._eta_from(self._Delta_sum.value)
        return self.current

    def update(self, f: Payoff) -> None:
        super().update(f)
        cur, nxt = self.current, self.next
        f_cur = f.value(cur.x, cur.y)
        f_nxt = f.value(nxt.x, nxt.y)
        self._Sx.add(f_cur)
        self._Sx.add(-f_nxt)
        self._Sx.add(-bregman(self.reg, nxt.x, cur.x) / self.eta)
        self._Sy.add(f_nxt)
        self._Sy.add(-f_cur)
        self._Sy.add(-bregman(self.reg, nxt.y, cur.y) / self.eta)
        sigma = max(self._Sx.value, self._Sy.value, 0.0)
        d = max(sigma - self.sigma_max, 0.0)
        self.deltas.append(d)
        if d > 0:
            self._Delta_sum.add(sigma)
            self._Delta_sum.add(-self.sigma_max)
            self.sigma_max = sigma

    def _after_observe(self, comparator: StrategyPair) -> None:
        self.current = self.next
        self.next = None

    @property
    def S(self) -> tuple[float, float]:
        return self._Sx.value, self._Sy.value

    @property
    def delta_sum(self) -> float:
        return self._Delta_sum.value

    def certificate_slack(self) -> float:
        return max(self.S)


class NeOptIOMDA(OptIOMDA):
    """Optimistic implicit mirror descent-ascent tuned by NE-regret; ``delta = max(delta^x, delta^y)``."""

    name = "ne-optiomda"
    kind = NE

    @property
    def schedule_constant(self) -> float:
        return self.consts.D_sq

    def _combine(self, dx: float, dy: float) -> float:
        return max(dx, dy)


LEARNERS = {cls.name: cls for cls in (IOMDA, OptIOMDA, NeIOMDA, NeOptIOMDA)}


class Doubling:
    """Restart wrapper that doubles the path-length budget whenever it is exceeded.

    The observed path length is cumulative over the whole run (sum of
    competitor moves for duality-gap learners, max of saddle moves for NE
    learners). On a transition the budget doubles once, a fresh inner learner
    is built with its accumulators at ``epsilon`` and warm-started from the
    inner learner's pending iterate.

    Parameters
    ----------
    factory : callable
        ``factory(P, start) -> Learner``.
    initial_P : float
        Budget of the first stage.
    start : StrategyPair
        Initial point of the first stage.
    """

    def __init__(self, factory: Callable[[float, StrategyPair], Learner], initial_P: float, start: StrategyPair):
        if not initial_P > 0:
            raise ValueError("initial_P must be positive")
        self.factory = factory
        self.budget = float(initial_P)
        self.stage = 0
        self.inner = factory(self.budget, start)
        self.path_length = 0.0
        self.transitions: list[int] = []
        self.closed_bounds = 0.0
        self.last_closed_bound = math.nan
        self._last_comparator: Optional[StrategyPair] = None
        self._t = 0

    # forwarded attributes
    @property
    def kind(self) -> str:
        return self.inner.kind

    @property
    def optimistic(self) -> bool:
        return self.inner.optimistic

    @property
    def name(self) -> str:
        return self.inner.name

    @property
    def eta(self) -> float:
        return self.inner.eta

    def play(self, h: Optional[Payoff] = None) -> StrategyPair:
        self._t += 1
        return self.inner.play(h)

    def update(self, f: Payoff) -> None:
        self.inner.update(f)

    def observe(self, comparator: StrategyPair) -> bool:
        """Forward the comparator; returns True when a new stage was opened."""
        self.inner.observe(comparator)
        if self._last_comparator is None:
            inc = 0.0
        elif self.kind == DUAL_GAP:
            inc = sum(_step(comparator, self._last_comparator))
        else:
            inc = max(_step(comparator, self._last_comparator))
        self._last_comparator = comparator
        return self.record_path(inc)

    def record_path(self, increment: float) -> bool:
        self.path_length += increment
        if self.path_length <= self.budget:
            return False
        self.last_closed_bound = self.inner.bound_rhs()
        self.closed_bounds += self.last_closed_bound
        self.budget *= 2.0
        self.stage += 1
        self.transitions.append(self._t)
        self.inner = self.factory(self.budget, self.inner.warm_start())
        return True

    def bound_rhs(self) -> float:
        """Sum of the stage certificates; bounds the whole-run metric."""
        return self.closed_bounds + self.inner.bound_rhs()


def make_learner(name: str, X: Box, Y: Box, start: StrategyPair, *, initial_P: float = 1.0,
                 doubling: bool = True, **kw):
    """Build a learner by name, wrapped in :class:`Doubling` unless ``doubling=False``."""
    try:
        cls = LEARNERS[name]
    except KeyError:
        raise ValueError(f"unknown learner {name!r}; choose from {sorted(LEARNERS)}") from None
    if not doubling:
        return cls(X, Y, start, P=initial_P, **kw)
    return Doubling(lambda P, s: cls(X, Y, s, P=P, **kw), initial_P, start)


# -- functional round API ---------------------------------------------------

def iomda_round(state: IOMDA, f_t: Payoff, competitor: StrategyPair):
    """One round of :class:`IOMDA` on a copy of `state`.

    Returns ``(play, next_state, delta_prev)`` where ``delta_prev`` is the
    correction of the previous round (None on the first round).
    """
    s = state.clone()
    n = len(s.deltas)
    pair = s.play()
    s.update(f_t)
    s.observe(competitor)
    return pair, s, (s.deltas[-1] if len(s.deltas) > n else None)


def optiomda_round(state: OptIOMDA, h_t: Payoff, f_t: Payoff, competitor: Optional[StrategyPair] = None):
    """One round of :class:`OptIOMDA` on a copy of `state`; returns ``(play, next_state, delta_t)``."""
    s = state.clone()
    pair = s.play(h_t)
    s.update(f_t)
    s.observe(competitor if competitor is not None else pair)
    return pair, s, s.deltas[-1]


def iomda_ne_round(state: NeIOMDA, f_t: Payoff, saddle_t: StrategyPair):
    """One round of :class:`NeIOMDA` on a copy of `state`; returns ``(play, next_state)``."""
    s = state.clone()
    pair = s.play()
    s.update(f_t)
    s.observe(saddle_t)
    return pair, s


def optiomda_ne_round(state: NeOptIOMDA, h_t: Payoff, f_t: Payoff, saddle_t: StrategyPair):
    """One round of :class:`NeOptIOMDA` on a copy of `state`; returns ``(play, next_state)``."""
    s = state.clone()
    pair = s.play(h_t)
    s.update(f_t)
    s.observe(saddle_t)
    return pair, s


def doubling_wrap(factory: Callable[[float, StrategyPair], Learner], initial_P: float, start: StrategyPair) -> Doubling:
    return Doubling(factory, initial_P, start)
