"""Boxes, strategy pairs, regularizers and Bregman divergences."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Raised when a point does not live in the expected ambient space."""


def as_point(p) -> np.ndarray:
    """Return `p` as a read-only 1-d float array (scalars become length 1)."""
    arr = np.array(p, dtype=float).reshape(-1)
    arr.flags.writeable = False
    return arr


def _check_dim(p: np.ndarray, dim: int, what: str = "point") -> None:
    if p.shape != (dim,):
        raise DimensionError(f"{what} has shape {p.shape}, expected ({dim},)")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo, hi]`` in R^n."""

    lo: np.ndarray
    hi: np.ndarray

    def __init__(self, lo, hi):
        lo = as_point(lo)
        hi = as_point(hi)
        if lo.shape != hi.shape:
            raise DimensionError(f"lo {lo.shape} and hi {hi.shape} differ")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ValueError("box requires lo[i] <= hi[i] for every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int = 1) -> "Box":
        return cls(np.full(dim, lo), np.full(dim, hi))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    @property
    def center(self) -> np.ndarray:
        return as_point((self.lo + self.hi) / 2)

    @property
    def diameter(self) -> float:
        """Euclidean length of the main diagonal."""
        return float(np.linalg.norm(self.hi - self.lo))

    def contains(self, p, atol: float = 0.0) -> bool:
        p = as_point(p)
        _check_dim(p, self.dim)
        return bool(np.all(p >= self.lo - atol) and np.all(p <= self.hi + atol))

    def vertices(self) -> np.ndarray:
        """All 2^n corners, one per row."""
        grids = np.meshgrid(*[(lo, hi) for lo, hi in zip(self.lo, self.hi)], indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=-1)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return as_point(rng.uniform(self.lo, self.hi))

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


def project(domain: Box, p) -> np.ndarray:
    """Euclidean projection onto a box, i.e. a coordinatewise clamp."""
    p = as_point(p)
    _check_dim(p, domain.dim)
    return as_point(np.minimum(np.maximum(p, domain.lo), domain.hi))


@dataclass(frozen=True)
class StrategyPair:
    """Joint play ``(x, y)`` of the minimizing and the maximizing player."""

    x: np.ndarray
    y: np.ndarray

    def __init__(self, x, y):
        object.__setattr__(self, "x", as_point(x))
        object.__setattr__(self, "y", as_point(y))

    @classmethod
    def inside(cls, x, y, X: Box, Y: Box) -> "StrategyPair":
        """Construct a pair, refusing points outside ``X x Y``."""
        pair = cls(x, y)
        if not (X.contains(pair.x) and Y.contains(pair.y)):
            raise ValueError(f"{pair} lies outside the joint action box")
        return pair

    def scaled(self, factor: float) -> "StrategyPair":
        return StrategyPair(self.x * factor, self.y * factor)

    def as_tuple(self) -> tuple:
        return tuple(self.x.tolist()), tuple(self.y.tolist())

    def __eq__(self, other):
        if not isinstance(other, StrategyPair):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)

    def __hash__(self):
        return hash((self.x.tobytes(), self.y.tobytes()))

    def __repr__(self):
        return f"StrategyPair(x={self.x.tolist()}, y={self.y.tolist()})"


SQUARED_NORM = "squared-norm"


@dataclass(frozen=True)
class Regularizer:
    """A 1-strongly-convex mirror map. Only ``phi(x) = ||x||^2 / 2`` ships."""

    kind: str = SQUARED_NORM

    def __post_init__(self):
        if self.kind != SQUARED_NORM:
            raise ValueError(f"unsupported regularizer kind {self.kind!r}")

    def value(self, x) -> float:
        x = as_point(x)
        return 0.5 * float(x @ x)

    def mirror(self, z) -> np.ndarray:
        """Gradient of the mirror map at `z`."""
        return as_point(z)

    def conjugate(self, theta) -> float:
        theta = as_point(theta)
        return 0.5 * float(theta @ theta)


def bregman(reg: Regularizer, x, z) -> float:
    """Bregman divergence ``B(x, grad phi(z)) = phi(x) + phi*(grad phi(z)) - <grad phi(z), x>``.

    For the squared norm this is ``||x - z||^2 / 2``; the difference form is
    used directly because the Fenchel form cancels catastrophically.
    """
    x = as_point(x)
    z = as_point(z)
    if x.shape != z.shape:
        raise DimensionError(f"bregman arguments have shapes {x.shape} and {z.shape}")
    d = x - z
    return 0.5 * float(d @ d)


@dataclass(frozen=True)
class RegularizerConstants:
    """Constants entering every learning-rate schedule and bound.

    ``D_sq`` is the supremum of the Bregman divergence over the domain, ``L`` its
    Lipschitz constant in the first argument, ``D = sqrt(D_sq)`` and
    ``C = 2 D (D + sqrt(2) L)``.
    """

    D_sq: float
    L: float

    @property
    def D(self) -> float:
        return math.sqrt(self.D_sq)

    @property
    def C(self) -> float:
        D = self.D
        return 2.0 * D * (D + math.sqrt(2.0) * self.L)

    def combine(self, other: "RegularizerConstants") -> "RegularizerConstants":
        """Joint constants for the two players: coordinatewise maximum."""
        return RegularizerConstants(max(self.D_sq, other.D_sq), max(self.L, other.L))


def derive_constants(reg: Regularizer, domain: Box, other: Box | None = None) -> RegularizerConstants:
    """Supremum and Lipschitz constant of the Bregman divergence over `domain`.

    With a second box the joint (max over both players) constants are returned.
    """
    if not domain.bounded:
        raise ValueError("constants need a bounded domain")
    # sup_{x,z} ||x-z||^2/2 is attained at opposite corners; the gradient in x is x-z.
    diam = domain.diameter
    consts = RegularizerConstants(D_sq=0.5 * diam * diam, L=diam)
    if other is not None:
        consts = consts.combine(derive_constants(reg, other))
    return consts
