import numpy as np
import pytest

from occo.domain import Box, StrategyPair
from occo.learners import IOMDA
from occo.metrics import (
    MetricsAccumulator,
    bound_certificate,
    check_certificate,
    dual_gap_increment,
    ne_regret,
    path_length_inf_update,
    path_length_update,
    residual_increment,
    tracking_error_increment,
)
from occo.payoff import quadratic_from_saddle

BOX = Box.cube(-4.0, 4.0)
F0 = quadratic_from_saddle(0.0, 0.0)
ORIGIN = StrategyPair(0.0, 0.0)


def test_dual_gap_examples():
    assert dual_gap_increment(F0, ORIGIN, ORIGIN) == 0.0
    assert dual_gap_increment(F0, StrategyPair(1.0, 0.0), ORIGIN) == 0.5


def test_dual_gap_nonnegative_against_saddle():
    rng = np.random.default_rng(0)
    f = quadratic_from_saddle(0.7, -1.2)
    s = StrategyPair(0.7, -1.2)
    for _ in range(100):
        play = StrategyPair(*rng.uniform(-4, 4, 2))
        assert dual_gap_increment(f, play, s) >= -1e-12


def test_residual_examples():
    assert residual_increment(F0, ORIGIN, BOX, BOX) == 0.0
    # max_y f(1, y) = 1 at y = 1; min_x f(x, 0) = 0
    assert residual_increment(F0, StrategyPair(1.0, 0.0), BOX, BOX) == 1.0


def test_residual_dominates_dual_gap():
    rng = np.random.default_rng(1)
    f = quadratic_from_saddle(-0.3, 0.4)
    s = StrategyPair(-0.3, 0.4)
    for _ in range(100):
        play = StrategyPair(*rng.uniform(-4, 4, 2))
        assert residual_increment(f, play, BOX, BOX) >= dual_gap_increment(f, play, s) - 1e-12


def test_tracking_error_examples():
    assert tracking_error_increment(ORIGIN, ORIGIN) == 0.0
    assert tracking_error_increment(StrategyPair(1.0, 0.0), ORIGIN) == 1.0
    assert tracking_error_increment(StrategyPair(1.0, 2.0), ORIGIN) == 2.0


def test_path_lengths():
    acc = MetricsAccumulator()
    for p in (ORIGIN, StrategyPair(1.0, 0.0), StrategyPair(1.0, 1.0)):
        path_length_update(acc, p)
        path_length_inf_update(acc, p)
    assert acc.P == 2.0 and acc.P_inf == 2.0
    const = MetricsAccumulator()
    for _ in range(5):
        path_length_update(const, StrategyPair(0.3, 0.3))
    assert const.P == 0.0


def test_path_length_with_explicit_previous():
    acc = path_length_update(MetricsAccumulator(), StrategyPair(1.0, 1.0), ORIGIN)
    assert acc.P == 2.0
    acc = path_length_inf_update(MetricsAccumulator(), StrategyPair(1.0, 3.0), ORIGIN)
    assert acc.P_inf == 3.0


def test_ne_regret_examples():
    acc = MetricsAccumulator()
    acc.record(F0, ORIGIN, ORIGIN, ORIGIN, BOX, BOX)
    assert ne_regret(acc) == 0.0
    one = MetricsAccumulator()
    one.record(F0, StrategyPair(1.0, 0.0), ORIGIN, ORIGIN, BOX, BOX)
    assert ne_regret(one) == 0.5


def test_ne_regret_cancellation():
    # +1/2 then -1/2: the modulus hides two rounds away from equilibrium
    acc = MetricsAccumulator()
    acc.record(F0, StrategyPair(1.0, 0.0), ORIGIN, ORIGIN, BOX, BOX)
    acc.record(F0, StrategyPair(0.0, 1.0), ORIGIN, ORIGIN, BOX, BOX)
    assert acc.ne_sum == 0.0 and ne_regret(acc) == 0.0
    assert acc.tracking_error == 2.0
    assert acc.average("tracking_error") == 1.0


def test_certificate_stationary():
    learner = IOMDA(BOX, BOX, ORIGIN)
    acc = MetricsAccumulator()
    for _ in range(5):
        play = learner.play()
        learner.update(F0)
        learner.observe(ORIGIN)
        acc.record(F0, play, ORIGIN, ORIGIN, BOX, BOX)
    cert = bound_certificate(learner, acc)
    assert cert.metric == 0.0 and cert.bound >= 0.0 and cert.satisfied


def test_certificate_flags_violation():
    assert not check_certificate(1.0, 0.5).satisfied
    assert check_certificate(0.5, 0.5 - 1e-7).satisfied


def _run_trace(learner, saddles):
    acc = MetricsAccumulator()
    worst = -np.inf
    for s in saddles:
        f = quadratic_from_saddle(s.x, s.y)
        play = learner.play()
        learner.update(f)
        learner.observe(s)
        acc.record(f, play, s, s, BOX, BOX)
        cert = bound_certificate(learner, acc)
        worst = max(worst, cert.metric - cert.bound)
    return worst


def test_corrupted_step_sizes_break_the_certificate():
    # search random short traces where an injected step-size sequence is allowed to grow;
    # the honest schedule must hold on the very same traces
    rng = np.random.default_rng(0)
    found = False
    for _ in range(5000):
        T = int(rng.integers(2, 6))
        etas = 10 ** rng.uniform(-3, 3, T)
        saddles = [StrategyPair(*rng.uniform(-4, 4, 2)) for _ in range(T)]
        start = StrategyPair(*rng.uniform(-4, 4, 2))

        class Injected(IOMDA):
            def _eta_from(self, accumulated):
                return etas[self.t - 1]

        assert _run_trace(IOMDA(BOX, BOX, start), saddles) <= 1e-6
        if _run_trace(Injected(BOX, BOX, start), saddles) > 1e-6:
            found = True
            assert np.any(np.diff(etas) > 0)
            break
    assert found
