"""Saddle-point sub-solvers.

* :func:`solve_regularized_saddle` -- the joint proximal step of implicit
  mirror descent-ascent, ``argmin_x max_y f(x,y) + B(x,x0)/eta - B(y,y0)/eta``.
* :func:`prox_min` / :func:`prox_max` -- one-player proximal steps.
* :func:`best_response_min` / :func:`best_response_max` -- inner problems of
  the saddle-point residual.
* :func:`grid_oracle_saddle` -- brute-force minimax over a grid, used only to
  verify the others.

Polynomial payoffs are solved exactly (linear KKT systems on box faces);
closure payoffs go through projected extragradient / projected gradient.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .domain import Box, StrategyPair, as_point, project
from .payoff import (
    Payoff,
    PayoffError,
    QuadraticForm,
    Slice,
    _MAX_FACE_DIM,
    _grid_axes,
    quadratic_extremes,
)


class SolverError(RuntimeError):
    """An iterative solve stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule and step for iterative sub-solves.

    Parameters
    ----------
    tol : float
        Threshold on the scaled projected-gradient residual
        ``||z - P(z - s G(z))|| / s``.
    max_iters : int
        Iteration cap; exceeding it raises :class:`SolverError`.
    step : float
        Fraction of the stability limit ``1 / Lipschitz`` used as step size.
    """

    tol: float = 1e-9
    max_iters: int = 10_000
    step: float = 0.9

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.step > 0:
            raise ValueError("step must be positive")


DEFAULT_SOLVER = SolverConfig()


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not eta > 0 or not np.isfinite(eta):
        raise ValueError(f"learning rate must be positive and finite, got {eta}")
    return eta


# --------------------------------------------------------------------------
# joint regularized saddle
# --------------------------------------------------------------------------

def regularized_objective(f: Payoff, anchor: StrategyPair, eta: float):
    """``F(x, y) = f(x, y) + ||x - x0||^2 / (2 eta) - ||y - y0||^2 / (2 eta)``, broadcasting."""
    x0, y0 = anchor.x, anchor.y

    def F(x, y):
        dx = np.asarray(x, dtype=float) - x0
        dy = np.asarray(y, dtype=float) - y0
        return f.value(x, y) + (np.sum(dx * dx, axis=-1) - np.sum(dy * dy, axis=-1)) / (2.0 * eta)

    return F


def _kkt_system(f: Payoff, anchor: StrategyPair, eta: float):
    """Matrix ``K`` and right-hand side ``r`` with ``K z - r = (dF/dx, dF/dy)``."""
    n, m = f.dim_x, f.dim_y
    H, l = f.form.H, f.form.l
    K = H.copy()
    K[:n, :n] += np.eye(n) / eta
    K[n:, n:] -= np.eye(m) / eta
    r = np.concatenate([anchor.x / eta - l[:n], -anchor.y / eta - l[n:]])
    return K, r


def _natural_residual(g: np.ndarray, z: np.ndarray, n: int, lo, hi) -> float:
    """``||z - P(z - G(z))||`` with ``G = (dF/dx, -dF/dy)``."""
    G = g.copy()
    G[n:] = -G[n:]
    return float(np.linalg.norm(z - np.clip(z - G, lo, hi)))


def _face_saddle(K, r, n, lo, hi):
    """Exact saddle of a strongly-convex-concave quadratic on a box.

    Each coordinate is pinned low, pinned high or left free; the free block of
    the stationarity system is solved and the candidate with the smallest
    natural residual wins (zero exactly at the unique saddle).
    """
    k = K.shape[0]
    if k > _MAX_FACE_DIM:
        raise PayoffError(f"face enumeration limited to {_MAX_FACE_DIM} joint dimensions, got {k}")
    best, best_res = None, np.inf
    for assign in itertools.product((0, 1, 2), repeat=k):
        assign = np.array(assign)
        z = np.where(assign == 1, hi, lo).astype(float)
        free = np.flatnonzero(assign == 2)
        if free.size:
            if np.any(lo[free] == hi[free]):
                continue
            fixed = np.flatnonzero(assign != 2)
            Kff = K[np.ix_(free, free)]
            rhs = r[free] - K[np.ix_(free, fixed)] @ z[fixed]
            try:
                z[free] = np.clip(np.linalg.solve(Kff, rhs), lo[free], hi[free])
            except np.linalg.LinAlgError:
                continue
        res = _natural_residual(K @ z - r, z, n, lo, hi)
        if res < best_res:
            best, best_res = z, res
    return best, best_res


def _extragradient(grad_fn, z0, lo, hi, step, cfg: SolverConfig):
    """Projected extragradient for a monotone operator ``grad_fn`` on a box."""
    z = np.clip(z0, lo, hi)
    res = np.inf
    for it in range(1, cfg.max_iters + 1):
        g = grad_fn(z)
        z_half = np.clip(z - step * g, lo, hi)
        res = float(np.linalg.norm(z - z_half)) / step
        if res < cfg.tol:
            return z, res
        z = np.clip(z - step * grad_fn(z_half), lo, hi)
    raise SolverError("extragradient did not converge", res, cfg.max_iters)


def solve_regularized_saddle(
    f: Payoff,
    anchor: StrategyPair,
    eta: float,
    X: Box,
    Y: Box,
    cfg: SolverConfig = DEFAULT_SOLVER,
    method: str = "auto",
) -> StrategyPair:
    """Saddle point of ``F = f + B(., x0)/eta - B(., y0)/eta`` over ``X x Y``.

    ``F`` is ``1/eta``-strongly convex-concave, so the saddle is unique.

    Parameters
    ----------
    method : {"auto", "extragradient"}
        ``"auto"`` solves polynomial payoffs exactly: the unconstrained
        stationarity system first, then box faces if that point is infeasible.
        ``"extragradient"`` forces the iterative path (closure payoffs always
        take it).
    """
    eta = _check_eta(eta)
    n = f.dim_x
    lo = np.concatenate([X.lo, Y.lo])
    hi = np.concatenate([X.hi, Y.hi])

    if f.form is not None and method == "auto":
        K, r = _kkt_system(f, anchor, eta)
        try:
            z = np.linalg.solve(K, r)
        except np.linalg.LinAlgError:
            z = None
        if z is not None and np.all(z >= lo) and np.all(z <= hi):
            return StrategyPair(z[:n], z[n:])
        z, _ = _face_saddle(K, r, n, lo, hi)
        return StrategyPair(z[:n], z[n:])
    if method not in ("auto", "extragradient"):
        raise ValueError(f"unknown method {method!r}")

    x0, y0 = anchor.x, anchor.y

    def G(z):
        gx, gy = f.partials(z[:n], z[n:])
        return np.concatenate([gx + (z[:n] - x0) / eta, -(gy - (z[n:] - y0) / eta)])

    lam = f.curvature_bound
    step = cfg.step * eta / (1.0 + eta * lam)
    z, _ = _extragradient(G, np.concatenate([x0, y0]), lo, hi, step, cfg)
    return StrategyPair(z[:n], z[n:])


# --------------------------------------------------------------------------
# one-player problems
# --------------------------------------------------------------------------

def _projected_gradient(grad_fn, v0, lo, hi, step, cfg: SolverConfig):
    v = np.clip(v0, lo, hi)
    res = np.inf
    for it in range(1, cfg.max_iters + 1):
        v_new = np.clip(v - step * grad_fn(v), lo, hi)
        res = float(np.linalg.norm(v - v_new)) / step
        v = v_new
        if res < cfg.tol:
            return v
    raise SolverError("projected gradient did not converge", res, cfg.max_iters)


def prox_min(g: Slice, anchor, eta: float, X: Box, cfg: SolverConfig = DEFAULT_SOLVER) -> np.ndarray:
    """``argmin_{v in X} g(v) + ||v - anchor||^2 / (2 eta)`` for convex `g`."""
    eta = _check_eta(eta)
    a = as_point(anchor)
    if g.is_quadratic:
        if g.is_separable:
            # independent 1-d strongly convex quadratics: clamp is exact
            curv = np.diag(g.hess) + 1.0 / eta
            if np.any(curv <= 0):
                raise ValueError("prox objective is not strongly convex")
            return project(X, (a / eta - g.lin) / curv)
        form = QuadraticForm(g.hess + np.eye(len(a)) / eta, g.lin - a / eta, 0.0)
        if form.dim <= _MAX_FACE_DIM:
            return as_point(quadratic_extremes(form, X.lo, X.hi)[1])
    lam = g.curvature if g.curvature is not None else 0.0
    step = cfg.step * eta / (1.0 + eta * lam)
    v = _projected_gradient(lambda v: g.grad(v) + (v - a) / eta, a, X.lo, X.hi, step, cfg)
    return as_point(v)


def prox_max(g: Slice, anchor, eta: float, Y: Box, cfg: SolverConfig = DEFAULT_SOLVER) -> np.ndarray:
    """``argmax_{v in Y} g(v) - ||v - anchor||^2 / (2 eta)`` for concave `g`."""
    return prox_min(g.negate(), anchor, eta, Y, cfg)


def _minimize_slice(g: Slice, box: Box, resolution: float) -> tuple[float, np.ndarray]:
    if g.is_quadratic:
        if g.is_separable:
            h = np.diag(g.hess)
            v = np.empty_like(g.lin)
            for i, (hi_, li, lo_b, hi_b) in enumerate(zip(h, g.lin, box.lo, box.hi)):
                if hi_ > 0:
                    v[i] = min(max(-li / hi_, lo_b), hi_b)
                elif hi_ == 0:
                    v[i] = lo_b if li >= 0 else hi_b
                else:
                    # concave coordinate: the better endpoint
                    at_lo = 0.5 * hi_ * lo_b * lo_b + li * lo_b
                    at_hi = 0.5 * hi_ * hi_b * hi_b + li * hi_b
                    v[i] = lo_b if at_lo <= at_hi else hi_b
            return g.value(v), as_point(v)
        vmin, arg, _, _ = quadratic_extremes(QuadraticForm(g.hess, g.lin, g.const), box.lo, box.hi)
        return float(vmin), as_point(arg)
    axes = _grid_axes(box.lo, box.hi, resolution)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, box.dim)
    vals = np.array([g.value(p) for p in pts])
    i = int(np.argmin(vals))
    return float(vals[i]), as_point(pts[i])


def best_response_min(f: Payoff, y, X: Box, resolution: float = 1e-3, return_point: bool = False):
    """``min_{x in X} f(x, y)``; exact for polynomial payoffs, grid for closures."""
    val, arg = _minimize_slice(f.slice_x(y), X, resolution)
    return (val, arg) if return_point else val


def best_response_max(f: Payoff, x, Y: Box, resolution: float = 1e-3, return_point: bool = False):
    """``max_{y in Y} f(x, y)``; exact for polynomial payoffs, grid for closures."""
    val, arg = _minimize_slice(f.slice_y(x).negate(), Y, resolution)
    return (-val, arg) if return_point else -val


# --------------------------------------------------------------------------
# brute-force oracle
# --------------------------------------------------------------------------

def _grid_points(box: Box, resolution: float, window=None) -> np.ndarray:
    lo, hi = box.lo, box.hi
    if window is not None:
        center, half = as_point(window[0]), float(window[1])
        lo = np.maximum(lo, center - half)
        hi = np.minimum(hi, center + half)
    axes = _grid_axes(lo, hi, resolution)
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, box.dim)


def grid_oracle_saddle(
    fn,
    X: Box,
    Y: Box,
    resolution: float,
    max_points: int = 100_000_000,
    chunk: int = 4_000_000,
    window: StrategyPair | None = None,
    half_width: float | None = None,
) -> StrategyPair:
    """Minimax by exhaustive grid search.

    Returns ``x = argmin_x max_y fn(x, y)`` and ``y = argmax_y min_x fn(x, y)``
    over grids of spacing `resolution` (both ends included). For smooth
    strongly-convex-concave `fn` the error is O(resolution).

    Parameters
    ----------
    fn : callable
        ``fn(x, y)`` broadcasting over leading axes, last axis = coordinates.
    window, half_width : optional
        Restrict each grid to a cube of half-width `half_width` around
        `window` (intersected with the box).
    """
    if X.dim > 2 or Y.dim > 2:
        raise ValueError("grid oracle supports at most 2 dimensions per player")
    wx = (window.x, half_width) if window is not None else None
    wy = (window.y, half_width) if window is not None else None
    xs = _grid_points(X, resolution, wx)
    ys = _grid_points(Y, resolution, wy)
    if xs.shape[0] * ys.shape[0] > max_points:
        raise ValueError(f"grid of {xs.shape[0] * ys.shape[0]} points exceeds max_points={max_points}")
    rows = max(1, chunk // ys.shape[0])
    row_max = np.empty(xs.shape[0])
    col_min = np.full(ys.shape[0], np.inf)
    for start in range(0, xs.shape[0], rows):
        block = np.asarray(fn(xs[start : start + rows, None, :], ys[None, :, :]), dtype=float)
        block = np.broadcast_to(block, (min(rows, xs.shape[0] - start), ys.shape[0]))
        row_max[start : start + rows] = block.max(axis=1)
        np.minimum(col_min, block.min(axis=0), out=col_min)
    return StrategyPair(xs[int(np.argmin(row_max))], ys[int(np.argmax(col_min))])
