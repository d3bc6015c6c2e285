"""Convex-concave payoff functions.

Every shipped family (saddle-centred quadratic, bilinear, the zero payoff) is a
quadratic polynomial in the joint variable ``z = (x, y)``::

    f(z) = 1/2 z^T H z + l^T z + c

which makes the sup-distance between payoffs, gradient bounds and best
responses computable exactly over boxes. Custom payoffs carry closures and
caller-declared constants instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .domain import Box, DimensionError, StrategyPair, as_point

QUADRATIC_SADDLE = "quadratic-saddle"
BILINEAR = "bilinear"
CUSTOM = "custom"

# face enumeration visits 3^k faces of the joint box
_MAX_FACE_DIM = 8
_MAX_GRID_POINTS = 4_000_000


class PayoffError(ValueError):
    pass


@dataclass(frozen=True)
class QuadraticForm:
    """``g(z) = 1/2 z^T H z + l^T z + c`` on R^k."""

    H: np.ndarray
    l: np.ndarray
    c: float

    @property
    def dim(self) -> int:
        return self.l.shape[0]

    def value(self, z) -> np.ndarray | float:
        z = np.asarray(z, dtype=float)
        out = 0.5 * np.sum((z @ self.H) * z, axis=-1) + z @ self.l + self.c
        return float(out) if np.ndim(out) == 0 else out

    def grad(self, z) -> np.ndarray:
        return as_point(self.H @ as_point(z) + self.l)

    def __sub__(self, other: "QuadraticForm") -> "QuadraticForm":
        return QuadraticForm(self.H - other.H, self.l - other.l, self.c - other.c)

    def __neg__(self) -> "QuadraticForm":
        return QuadraticForm(-self.H, -self.l, -self.c)

    @property
    def is_affine(self) -> bool:
        return not np.any(self.H)


def quadratic_extremes(form: QuadraticForm, lo: np.ndarray, hi: np.ndarray):
    """Exact min and max of a quadratic over the box ``[lo, hi]``.

    Enumerates every face of the box (each coordinate pinned low, pinned high
    or free) and keeps the stationary point of the restriction when it is
    unique and feasible. Faces with a singular restricted Hessian are skipped:
    on them the extremal value is also reached on a lower-dimensional face.

    Returns ``(min_value, argmin, max_value, argmax)``.
    """
    k = form.dim
    if k > _MAX_FACE_DIM:
        raise PayoffError(f"face enumeration limited to {_MAX_FACE_DIM} joint dimensions, got {k}")
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    best_min, arg_min = math.inf, None
    best_max, arg_max = -math.inf, None
    for assign in itertools.product((0, 1, 2), repeat=k):
        assign = np.array(assign)
        z = np.where(assign == 1, hi, lo).astype(float)
        free = np.flatnonzero(assign == 2)
        if free.size:
            if np.any(lo[free] == hi[free]):
                continue
            fixed = np.flatnonzero(assign != 2)
            Hff = form.H[np.ix_(free, free)]
            rhs = -(form.l[free] + form.H[np.ix_(free, fixed)] @ z[fixed])
            if np.linalg.matrix_rank(Hff) < free.size:
                continue
            sol = np.linalg.solve(Hff, rhs)
            span = hi[free] - lo[free]
            slack = 1e-12 * np.maximum(span, 1.0)
            if np.any(sol < lo[free] - slack) or np.any(sol > hi[free] + slack):
                continue
            z[free] = np.clip(sol, lo[free], hi[free])
        val = form.value(z)
        if val < best_min:
            best_min, arg_min = val, z.copy()
        if val > best_max:
            best_max, arg_max = val, z.copy()
    return best_min, arg_min, best_max, arg_max


@lru_cache(maxsize=64)
def _joint_vertices(X: Box, Y: Box) -> np.ndarray:
    return Box(np.concatenate([X.lo, Y.lo]), np.concatenate([X.hi, Y.hi])).vertices()


class Slice:
    """A function of one player's variable with the other player's frozen.

    Quadratic slices expose ``hess``/``lin``/``const``; closure slices expose
    only ``value`` and ``grad`` plus a curvature bound for iterative solvers.
    """

    def __init__(self, value=None, grad=None, *, hess=None, lin=None, const=0.0, curvature=None):
        if hess is not None:
            self.hess = np.atleast_2d(np.asarray(hess, dtype=float))
            self.lin = as_point(lin)
            self.const = float(const)
            self._curvature = None
        else:
            if value is None or grad is None:
                raise PayoffError("closure slice needs both value and grad")
            self.hess = None
            self._value = value
            self._grad = grad
            self._curvature = curvature
        self.is_quadratic = hess is not None

    @property
    def curvature(self) -> float | None:
        """Lipschitz constant of the gradient (spectral norm for quadratics)."""
        if self._curvature is None and self.is_quadratic:
            self._curvature = float(np.linalg.norm(self.hess, 2))
        return self._curvature

    def value(self, v) -> float:
        if self.is_quadratic:
            v = as_point(v)
            return 0.5 * float(v @ self.hess @ v) + float(self.lin @ v) + self.const
        return float(self._value(as_point(v)))

    def grad(self, v) -> np.ndarray:
        if self.is_quadratic:
            v = as_point(v)
            return as_point(self.hess @ v + self.lin)
        return as_point(self._grad(as_point(v)))

    def negate(self) -> "Slice":
        if self.is_quadratic:
            return Slice(hess=-self.hess, lin=-self.lin, const=-self.const)
        return Slice(lambda v: -self._value(v), lambda v: -np.asarray(self._grad(v)), curvature=self.curvature)

    @property
    def is_separable(self) -> bool:
        """Diagonal Hessian: box problems split into independent 1-d problems."""
        if not self.is_quadratic:
            return False
        h = self.hess
        return h.shape[0] == 1 or not np.any(h[~np.eye(h.shape[0], dtype=bool)])


def quadratic_slice(hess, lin, const: float = 0.0) -> Slice:
    """``g(v) = 1/2 v^T hess v + lin^T v + const``; scalars are accepted for 1-d."""
    lin = as_point(lin)
    hess = np.asarray(hess, dtype=float)
    if hess.ndim == 0:
        hess = hess * np.eye(lin.shape[0])
    return Slice(hess=hess, lin=lin, const=const)


@dataclass(frozen=True, eq=False)
class Payoff:
    """A convex-concave payoff ``f(x, y)``; x minimizes, y maximizes.

    Build instances with :func:`quadratic_from_saddle`, :func:`bilinear`,
    :func:`zero_payoff` or :func:`custom`.
    """

    family: str
    dim_x: int
    dim_y: int
    form: Optional[QuadraticForm] = None
    params: dict = field(default_factory=dict)
    value_fn: Optional[Callable] = None
    partials_fn: Optional[Callable] = None
    declared_G: Optional[tuple] = None
    declared_M: Optional[float] = None
    curvature: Optional[float] = None

    # -- evaluation ---------------------------------------------------------
    def value(self, x, y):
        """Evaluate ``f``; broadcasts over leading axes (last axis = coordinates)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim == 0:
            x = x[None]
        if y.ndim == 0:
            y = y[None]
        if self.family == QUADRATIC_SADDLE:
            dx = x - self.params["a"]
            dy = y - self.params["b"]
            out = 0.5 * np.sum(dx * dx, axis=-1) - 0.5 * np.sum(dy * dy, axis=-1) + np.sum(dx * dy, axis=-1)
        elif self.form is not None:
            out = self._poly_value(x, y)
        else:
            out = self.value_fn(x, y)
        return float(out) if np.ndim(out) == 0 else np.asarray(out)

    __call__ = value

    def _poly_value(self, x, y):
        n = self.dim_x
        H, l, c = self.form.H, self.form.l, self.form.c
        Hxx, Hxy, Hyy = H[:n, :n], H[:n, n:], H[n:, n:]
        return (
            0.5 * np.sum((x @ Hxx) * x, axis=-1)
            + 0.5 * np.sum((y @ Hyy) * y, axis=-1)
            + np.sum((x @ Hxy) * y, axis=-1)
            + x @ l[:n]
            + y @ l[n:]
            + c
        )

    def partials(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """``(df/dx, df/dy)``; ``df/dy`` is the ascent direction of player 2."""
        x = as_point(x)
        y = as_point(y)
        self._check_point(x, y)
        if self.family == QUADRATIC_SADDLE:
            dx = x - self.params["a"]
            dy = y - self.params["b"]
            return as_point(dx + dy), as_point(dx - dy)
        if self.form is not None:
            g = self.form.grad(np.concatenate([x, y]))
            return as_point(g[: self.dim_x]), as_point(g[self.dim_x :])
        if self.partials_fn is None:
            raise PayoffError("custom payoff has no partials closure")
        gx, gy = self.partials_fn(x, y)
        return as_point(gx), as_point(gy)

    def _check_point(self, x, y):
        if x.shape != (self.dim_x,) or y.shape != (self.dim_y,):
            raise DimensionError(
                f"payoff expects x in R^{self.dim_x}, y in R^{self.dim_y}; got {x.shape}, {y.shape}"
            )

    # -- slices -------------------------------------------------------------
    def slice_x(self, y) -> Slice:
        """``x -> f(x, y)`` for fixed y."""
        y = as_point(y)
        if self.form is not None:
            n = self.dim_x
            H, l, c = self.form.H, self.form.l, self.form.c
            lin = H[:n, n:] @ y + l[:n]
            const = 0.5 * float(y @ H[n:, n:] @ y) + float(l[n:] @ y) + c
            return Slice(hess=H[:n, :n], lin=lin, const=const)
        return Slice(
            lambda v: self.value(v, y), lambda v: self.partials(v, y)[0], curvature=self.curvature
        )

    def slice_y(self, x) -> Slice:
        """``y -> f(x, y)`` for fixed x."""
        x = as_point(x)
        if self.form is not None:
            n = self.dim_x
            H, l, c = self.form.H, self.form.l, self.form.c
            lin = H[:n, n:].T @ x + l[n:]
            const = 0.5 * float(x @ H[:n, :n] @ x) + float(l[:n] @ x) + c
            return Slice(hess=H[n:, n:], lin=lin, const=const)
        return Slice(
            lambda v: self.value(x, v), lambda v: self.partials(x, v)[1], curvature=self.curvature
        )

    # -- structure ----------------------------------------------------------
    @property
    def saddle(self) -> Optional[StrategyPair]:
        """Unconstrained saddle point when the family pins one down."""
        if self.family == QUADRATIC_SADDLE:
            return StrategyPair(self.params["a"], self.params["b"])
        return None

    @property
    def curvature_bound(self) -> float:
        """Lipschitz constant of ``(df/dx, -df/dy)``."""
        if self.form is not None:
            return float(np.linalg.norm(self.form.H, 2))
        if self.curvature is None:
            raise PayoffError("custom payoff needs a declared curvature bound for iterative solves")
        return float(self.curvature)

    def __repr__(self):
        if self.family == QUADRATIC_SADDLE:
            return f"Payoff(quadratic-saddle, a={self.params['a'].tolist()}, b={self.params['b'].tolist()})"
        if self.family == BILINEAR:
            return f"Payoff(bilinear, A={self.params['A'].tolist()})"
        return "Payoff(custom)"


def quadratic_from_saddle(a, b) -> Payoff:
    """``f(x,y) = 1/2||x-a||^2 - 1/2||y-b||^2 + <x-a, y-b>``, saddle at ``(a, b)``."""
    a = as_point(a)
    b = as_point(b)
    if a.shape != b.shape:
        raise DimensionError("the quadratic family couples x and y coordinatewise; dims must match")
    n = a.shape[0]
    eye = np.eye(n)
    H = np.block([[eye, eye], [eye, -eye]])
    l = np.concatenate([-a - b, b - a])
    c = 0.5 * float(a @ a) - 0.5 * float(b @ b) + float(a @ b)
    return Payoff(QUADRATIC_SADDLE, n, n, QuadraticForm(H, l, c), {"a": a, "b": b})


def bilinear(A) -> Payoff:
    """``f(x, y) = x^T A y`` (online matrix games)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, m = A.shape
    H = np.block([[np.zeros((n, n)), A], [A.T, np.zeros((m, m))]])
    return Payoff(BILINEAR, n, m, QuadraticForm(H, np.zeros(n + m), 0.0), {"A": A})


def zero_payoff(dim_x: int = 1, dim_y: int = 1) -> Payoff:
    """The constant-zero payoff, used as the predictor before any history exists."""
    return bilinear(np.zeros((dim_x, dim_y)))


def custom(value, partials, *, dim_x: int = 1, dim_y: int = 1, G_X: float, G_Y: float,
           M: float, curvature: float | None = None) -> Payoff:
    """Payoff given by closures.

    `value(x, y)` must broadcast over leading axes. The gradient bounds `G_X`,
    `G_Y` and the value bound `M` are caller obligations and are not checked.
    """
    return Payoff(CUSTOM, dim_x, dim_y, value_fn=value, partials_fn=partials,
                  declared_G=(float(G_X), float(G_Y)), declared_M=float(M), curvature=curvature)


def partials(f: Payoff, x, y) -> tuple[np.ndarray, np.ndarray]:
    return f.partials(x, y)


def _joint_box(X: Box, Y: Box) -> tuple[np.ndarray, np.ndarray]:
    return np.concatenate([X.lo, Y.lo]), np.concatenate([X.hi, Y.hi])


def _grid_axes(lo, hi, resolution):
    axes = []
    for a, b in zip(lo, hi):
        n = max(int(math.ceil((b - a) / resolution)), 0) + 1
        axes.append(np.linspace(a, b, n))
    return axes


def _grid_max_abs(fn, X: Box, Y: Box, resolution: float) -> float:
    xs = np.stack(np.meshgrid(*_grid_axes(X.lo, X.hi, resolution), indexing="ij"), -1).reshape(-1, X.dim)
    ys = np.stack(np.meshgrid(*_grid_axes(Y.lo, Y.hi, resolution), indexing="ij"), -1).reshape(-1, Y.dim)
    if xs.shape[0] * ys.shape[0] > _MAX_GRID_POINTS:
        raise PayoffError("grid too large; raise the resolution")
    vals = fn(xs[:, None, :], ys[None, :, :])
    return float(np.max(np.abs(vals)))


def rho_distance(f: Payoff, g: Payoff, X: Box, Y: Box, resolution: float = 1e-2) -> float:
    """Sup-norm distance ``max_{x in X, y in Y} |f(x,y) - g(x,y)|``.

    Exact for the polynomial families: an affine difference (two members of the
    quadratic family) is maximized over box corners, a general quadratic
    difference by face enumeration. Custom payoffs fall back to a dense grid
    at `resolution`, which only gives a lower bound.
    """
    if f is g:
        return 0.0
    if f.form is not None and g.form is not None:
        diff = f.form - g.form
        if diff.is_affine:
            vals = _joint_vertices(X, Y) @ diff.l + diff.c
            return float(np.max(np.abs(vals)))
        lo, hi = _joint_box(X, Y)
        vmin, _, vmax, _ = quadratic_extremes(diff, lo, hi)
        return float(max(abs(vmin), abs(vmax)))
    return _grid_max_abs(lambda x, y: f.value(x, y) - g.value(x, y), X, Y, resolution)


def gradient_bounds(f: Payoff, X: Box, Y: Box) -> tuple[float, float]:
    """Upper bounds ``(G_X, G_Y)`` on ``||df/dx||`` and ``||df/dy||`` over ``X x Y``.

    For the quadratic family the bound is uniform over every member whose
    saddle lies in the box: ``||(x-a) + (y-b)|| <= diam X + diam Y``. Other
    polynomial families are bounded exactly by vertex enumeration (the partials
    are affine, their norms convex). Custom payoffs return declared values.
    """
    if f.family == QUADRATIC_SADDLE:
        g = X.diameter + Y.diameter
        return g, g
    if f.form is not None:
        V = _joint_vertices(X, Y)
        grads = V @ f.form.H + f.form.l
        gx = np.linalg.norm(grads[:, : f.dim_x], axis=1)
        gy = np.linalg.norm(grads[:, f.dim_x :], axis=1)
        return float(gx.max(initial=0.0)), float(gy.max(initial=0.0))
    if f.declared_G is None:
        raise PayoffError("custom payoffs must declare G_X and G_Y")
    return f.declared_G


def payoff_bound(f: Payoff, X: Box, Y: Box) -> float:
    """``M = max |f|`` over ``X x Y`` (declared for custom payoffs)."""
    if f.form is not None:
        lo, hi = _joint_box(X, Y)
        vmin, _, vmax, _ = quadratic_extremes(f.form, lo, hi)
        return float(max(abs(vmin), abs(vmax)))
    if f.declared_M is None:
        raise PayoffError("custom payoffs must declare M")
    return f.declared_M
