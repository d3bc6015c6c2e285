"""Synthetic environments: a moving saddle point drives a quadratic payoff stream.

Cases I-III place the saddle at ``z2(t) exp(i theta(t))`` in the complex
plane (real part for x, imaginary part for y) with ``z1 = ln(1 + t)`` and
``z2 = ln ln(e + t)``:

====  ==================================  =============================
case  angle ``theta(t)``                  behaviour
====  ==================================  =============================
I     ``z1(t)``                           slowly spiralling outwards
II    ``pi (t mod 2) + z2(t)``            alternates between 2 branches
III   ``2 pi / 3 (t mod 3) + z2(t)``      cycles through 3 branches
====  ==================================  =============================

Case IV is adaptive: each coordinate of the saddle sits at ``+1`` when the
learner's coordinate is negative and at ``-1`` otherwise, and the competitor
is the saddle shrunk by ``1/t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Box, StrategyPair
from .payoff import Payoff, quadratic_from_saddle

CASES = ("I", "II", "III", "IV")
DEFAULT_BOX = Box.cube(-4.0, 4.0)

_ALIASES = {"1": "I", "2": "II", "3": "III", "4": "IV"}


def normalize_case(case) -> str:
    """Accept ``"I"``..``"IV"`` or ``1``..``4``."""
    key = str(case).strip().upper()
    key = _ALIASES.get(key, key)
    if key not in CASES:
        raise ValueError(f"unknown case {case!r}; expected one of {CASES} or 1-4")
    return key


def z1(t: int) -> float:
    return math.log1p(t)


def z2(t: int) -> float:
    return math.log(math.log(math.e + t))


def _polar(r: float, theta: float) -> StrategyPair:
    return StrategyPair(r * math.cos(theta), r * math.sin(theta))


def _sign_flip(v: np.ndarray) -> np.ndarray:
    # tie at exactly 0 takes the >= 0 branch
    return np.where(v < 0, 1.0, -1.0)


def saddle_at(case, t: int, play: StrategyPair | None = None) -> StrategyPair:
    """Saddle point of round `t` (1-based); Case IV needs the learner's play."""
    case = normalize_case(case)
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    if case == "I":
        return _polar(z2(t), z1(t))
    if case == "II":
        # integer multiples reduced before adding the drift
        return _polar(z2(t), math.pi * (t % 2) + z2(t))
    if case == "III":
        return _polar(z2(t), 2.0 * math.pi / 3.0 * (t % 3) + z2(t))
    if play is None:
        raise ValueError("case IV needs the current play")
    return StrategyPair(_sign_flip(play.x), _sign_flip(play.y))


def payoff_at(case, t: int, play: StrategyPair | None = None) -> Payoff:
    s = saddle_at(case, t, play)
    return quadratic_from_saddle(s.x, s.y)


def competitor_at(case, t: int, saddle: StrategyPair) -> StrategyPair:
    """Designated competitor: the saddle itself, or the saddle over `t` in Case IV."""
    if normalize_case(case) == "IV":
        return saddle.scaled(1.0 / t)
    return saddle


@dataclass(frozen=True)
class Round:
    payoff: Payoff
    saddle: StrategyPair
    competitor: StrategyPair


class Environment:
    """Round generator for one case.

    Only the current play is visible to the environment, never learner state.
    """

    def __init__(self, case, X: Box = DEFAULT_BOX, Y: Box = DEFAULT_BOX):
        self.case = normalize_case(case)
        self.X, self.Y = X, Y

    @property
    def adaptive(self) -> bool:
        return self.case == "IV"

    def reveal(self, t: int, play: StrategyPair) -> Round:
        s = saddle_at(self.case, t, play)
        return Round(quadratic_from_saddle(s.x, s.y), s, competitor_at(self.case, t, s))

    def __repr__(self):
        return f"Environment(case={self.case})"
