import numpy as np
import pytest

from occo.domain import Box, StrategyPair
from occo.payoff import bilinear, custom, quadratic_from_saddle, quadratic_slice
from occo.saddle import (
    SolverConfig,
    SolverError,
    best_response_max,
    best_response_min,
    grid_oracle_saddle,
    prox_max,
    prox_min,
    regularized_objective,
    solve_regularized_saddle,
)

BOX = Box.cube(-4.0, 4.0)
F0 = quadratic_from_saddle(0.0, 0.0)


def test_solver_config_validation():
    for kw in ({"tol": 0}, {"max_iters": 0}, {"step": -1}):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


def test_regularized_saddle_fixed_point():
    assert solve_regularized_saddle(F0, StrategyPair(0, 0), 1.0, BOX, BOX) == StrategyPair(0.0, 0.0)


def test_regularized_saddle_hand_solve():
    # 2x + y = 1, x - 2y = 0
    z = solve_regularized_saddle(F0, StrategyPair(1.0, 0.0), 1.0, BOX, BOX)
    assert z.x[0] == pytest.approx(0.4, abs=1e-15)
    assert z.y[0] == pytest.approx(0.2, abs=1e-15)
    g = grid_oracle_saddle(regularized_objective(F0, StrategyPair(1.0, 0.0), 1.0), BOX, BOX, 1e-3)
    assert abs(g.x[0] - 0.4) <= 2e-3 and abs(g.y[0] - 0.2) <= 2e-3


def test_regularized_saddle_boundary_case_against_grid():
    anchor = StrategyPair(100.0, 0.0)
    z = solve_regularized_saddle(F0, anchor, 1.0, BOX, BOX)
    g = grid_oracle_saddle(regularized_objective(F0, anchor, 1.0), BOX, BOX, 1e-3)
    assert np.allclose([z.x[0], z.y[0]], [4.0, 2.0], atol=1e-12)
    assert abs(z.x[0] - g.x[0]) <= 1e-9 + 1e-3 and abs(z.y[0] - g.y[0]) <= 1e-9 + 1e-3


def test_invalid_eta():
    with pytest.raises(ValueError):
        solve_regularized_saddle(F0, StrategyPair(0, 0), 0.0, BOX, BOX)


def _certificate(f, anchor, eta, z, rng, tol=1e-8):
    F = regularized_objective(f, anchor, eta)
    star = F(z.x, z.y)
    for _ in range(100):
        x, y = rng.uniform(BOX.lo, BOX.hi), rng.uniform(BOX.lo, BOX.hi)
        assert F(z.x, y) - tol <= star <= F(x, z.y) + tol


def test_saddle_certificate_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.uniform(-4, 4, 2)
        anchor = StrategyPair(*rng.uniform(-40, 40, 2))
        eta = 10 ** rng.uniform(-3, 3)
        f = quadratic_from_saddle(a, b)
        _certificate(f, anchor, eta, solve_regularized_saddle(f, anchor, eta, BOX, BOX), rng)


def test_closed_form_and_extragradient_agree():
    rng = np.random.default_rng(1)
    cfg = SolverConfig(tol=1e-11, max_iters=100_000)
    for _ in range(10):
        a, b = rng.uniform(-2, 2, 2)
        anchor = StrategyPair(*rng.uniform(-8, 8, 2))
        eta = 10 ** rng.uniform(-2, 1)
        f = quadratic_from_saddle(a, b)
        exact = solve_regularized_saddle(f, anchor, eta, BOX, BOX)
        it = solve_regularized_saddle(f, anchor, eta, BOX, BOX, cfg, method="extragradient")
        assert np.allclose(exact.x, it.x, atol=1e-9) and np.allclose(exact.y, it.y, atol=1e-9)


def test_two_dimensional_face_solve():
    X = Box.cube(-1.0, 1.0, 2)
    f = bilinear(np.array([[2.0, -1.0], [0.5, 1.0]]))
    anchor = StrategyPair([3.0, -2.0], [0.5, 4.0])
    z = solve_regularized_saddle(f, anchor, 2.0, X, X)
    it = solve_regularized_saddle(f, anchor, 2.0, X, X, SolverConfig(tol=1e-12, max_iters=200_000),
                                  method="extragradient")
    assert np.allclose(z.x, it.x, atol=1e-9) and np.allclose(z.y, it.y, atol=1e-9)


def test_custom_payoff_uses_extragradient():
    a, b = 0.3, -0.2
    f = custom(
        lambda x, y: 0.5 * (x[..., 0] - a) ** 2 - 0.5 * (y[..., 0] - b) ** 2,
        lambda x, y: (x - a, -(y - b)),
        G_X=8.3, G_Y=8.2, M=64.0, curvature=1.0,
    )
    z = solve_regularized_saddle(f, StrategyPair(1.0, 1.0), 1.0, BOX, BOX)
    # stationarity: x - a + (x - 1) = 0, -(y - b) - (y - 1) = 0
    assert z.x[0] == pytest.approx((a + 1) / 2, abs=1e-8)
    assert z.y[0] == pytest.approx((b + 1) / 2, abs=1e-8)


def test_solver_error_carries_residual():
    f = custom(lambda x, y: x[..., 0] * y[..., 0], lambda x, y: (y.copy(), x.copy()),
               G_X=4, G_Y=4, M=16, curvature=1.0)
    with pytest.raises(SolverError) as err:
        solve_regularized_saddle(f, StrategyPair(3.0, 3.0), 1e3, BOX, BOX, SolverConfig(max_iters=3))
    assert err.value.residual > 0


def test_determinism():
    f = quadratic_from_saddle(0.3, 0.9)
    z1 = solve_regularized_saddle(f, StrategyPair(50.0, -7.0), 0.7, BOX, BOX)
    z2 = solve_regularized_saddle(f, StrategyPair(50.0, -7.0), 0.7, BOX, BOX)
    assert z1.x.tobytes() == z2.x.tobytes() and z1.y.tobytes() == z2.y.tobytes()


def test_prox_min_examples():
    assert prox_min(quadratic_slice(1.0, 0.0), 0.0, 1.0, BOX).tolist() == [0.0]
    assert prox_min(quadratic_slice(1.0, -2.0, 2.0), 0.0, 1.0, BOX)[0] == pytest.approx(1.0)
    assert prox_min(quadratic_slice(1.0, -10.0, 50.0), 0.0, 1.0, BOX)[0] == 4.0


def test_prox_min_grid_oracle():
    g = np.linspace(-4, 4, 80001)
    for c in (2.0, 10.0):
        vals = 0.5 * (g - c) ** 2 + 0.5 * g**2
        assert prox_min(quadratic_slice(1.0, -c), 0.0, 1.0, BOX)[0] == pytest.approx(g[np.argmin(vals)], abs=1e-4)


def test_prox_max_mirrors_prox_min():
    assert prox_max(quadratic_slice(-1.0, 2.0), 0.0, 1.0, BOX)[0] == pytest.approx(1.0)
    assert prox_max(quadratic_slice(-1.0, 10.0), 0.0, 1.0, BOX)[0] == 4.0


def test_prox_first_order_condition():
    rng = np.random.default_rng(4)
    for _ in range(30):
        h, l, a = rng.uniform(0, 3), rng.uniform(-20, 20), rng.uniform(-4, 4)
        eta = 10 ** rng.uniform(-2, 2)
        g = quadratic_slice(h, l)
        v = prox_min(g, a, eta, BOX)
        grad = g.grad(v) + (v - a) / eta
        for z in rng.uniform(-4, 4, 20):
            assert float(grad @ (z - v)) >= -1e-9


def test_prox_closure_slice():
    from occo.payoff import Slice

    g = Slice(lambda v: 0.5 * float((v[0] - 2) ** 2), lambda v: v - 2.0, curvature=1.0)
    assert prox_min(g, 0.0, 1.0, BOX)[0] == pytest.approx(1.0, abs=1e-8)


def test_best_response_examples():
    assert best_response_max(F0, 0.0, BOX) == 0.0
    val, y = best_response_max(F0, 1.0, BOX, return_point=True)
    assert val == 1.0 and y[0] == 1.0
    assert best_response_min(F0, 0.0, BOX) == 0.0


def test_best_response_grid_oracle():
    rng = np.random.default_rng(9)
    g = np.linspace(-4, 4, 80001)
    for _ in range(50):
        a, b, x, y = rng.uniform(-4, 4, 4)
        f = quadratic_from_saddle(a, b)
        assert best_response_max(f, x, BOX) == pytest.approx(np.max(f.value(x, g[:, None])), abs=1e-6)
        assert best_response_min(f, y, BOX) == pytest.approx(np.min(f.value(g[:, None], y)), abs=1e-6)


def test_best_response_linear_slice_takes_endpoint():
    f = bilinear([[1.0]])
    assert best_response_max(f, 2.0, BOX) == 8.0
    assert best_response_min(f, -1.0, BOX) == -4.0


def test_best_response_custom_grid():
    f = custom(lambda x, y: np.cos(x[..., 0]) - y[..., 0] ** 2, None, G_X=1, G_Y=8, M=17)
    assert best_response_max(f, 0.0, BOX, resolution=1e-3) == pytest.approx(1.0)


def test_grid_oracle_known_saddle():
    g = grid_oracle_saddle(quadratic_from_saddle(0.5, -0.5).value, BOX, BOX, 1e-3)
    assert abs(g.x[0] - 0.5) <= 1e-3 and abs(g.y[0] + 0.5) <= 1e-3


def test_grid_oracle_constant():
    g = grid_oracle_saddle(lambda x, y: np.full(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]), 3.0),
                           BOX, BOX, 0.5)
    assert BOX.contains(g.x) and BOX.contains(g.y)


def test_grid_oracle_refuses_large_grid():
    with pytest.raises(ValueError):
        grid_oracle_saddle(F0.value, BOX, BOX, 1e-5)
