import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from normsubgrad.core import ContractError, FunctionProblem
from normsubgrad.envelope import (EnvelopeConfig, check_sublevel_equivalence, prox_solve,
                                  stationarity_measure, subsample_indices)
from normsubgrad.problems import RobustSensingProblem, abs1d, make_svm
from normsubgrad.schedules import constant_horizon
from normsubgrad.solvers import SolverConfig, run

# dense-grid minimisers of |4 - y^2| + 2 (y - x)^2, i.e. lam = 0.25
SENSING_1D_ORACLE = {1.0: (2.0, 2.0), 3.0: (2.0, 2.0), 0.0: (0.0, 4.0)}


def l1_2d():
    return FunctionProblem(lambda x: float(np.abs(x).sum()), np.sign, 2, name="l1_2d")


def test_abs_envelope_at_three():
    rep = prox_solve(abs1d(), [3.0], EnvelopeConfig(1.0))
    assert rep.prox_point[0] == 2.0
    assert rep.envelope_value == 2.5
    assert rep.envelope_gradient[0] == 1.0
    assert rep.certificate_gap == 0.0 and not rep.low_confidence


@given(st.floats(-20, 20), st.floats(0.01, 5.0))
def test_abs_envelope_is_huber(x, lam):
    rep = prox_solve(abs1d(), [x], EnvelopeConfig(lam))
    huber = x * x / (2 * lam) if abs(x) <= lam else abs(x) - lam / 2
    assert rep.envelope_value == pytest.approx(huber, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("x", sorted(SENSING_1D_ORACLE))
def test_weakly_convex_1d_envelope_matches_grid(x):
    p = RobustSensingProblem([[[1.0]]], [4.0], 1)
    rep = prox_solve(p, [x], EnvelopeConfig(0.25))
    prox, value = SENSING_1D_ORACLE[x]
    assert rep.prox_point[0] == pytest.approx(prox, abs=1e-9)
    assert rep.envelope_value == pytest.approx(value, abs=1e-9)
    assert not rep.low_confidence


def test_one_dimensional_bracket_route():
    p = FunctionProblem(lambda x: float(abs(x[0] ** 2 - 1.0)), lambda x: 2 * x * np.sign(x ** 2 - 1),
                        1, rho=2.0)
    rep = prox_solve(p, [2.0], EnvelopeConfig(0.25))
    assert rep.method == "bracket"
    # h(y) = y^2 - 1 + 2 (y - 2)^2 on y > 1 is minimised at y = 4/3
    assert rep.prox_point[0] == pytest.approx(4.0 / 3.0, abs=1e-9)
    assert rep.certificate_gap <= 1e-9


def test_subgradient_inner_solver_is_certified():
    rep = prox_solve(l1_2d(), [3.0, -0.2], EnvelopeConfig(0.5))
    assert rep.method == "subgrad"
    # soft thresholding by 0.5
    np.testing.assert_allclose(rep.prox_point, [2.5, 0.0], atol=1e-4)
    assert rep.envelope_value == pytest.approx(2.5 + 0.29, abs=1e-6)
    assert rep.envelope_value - rep.certificate_gap <= 2.5 + 0.29 + 1e-12


def test_small_inner_budget_is_flagged():
    rep = prox_solve(l1_2d(), [3.0, -0.2], EnvelopeConfig(0.5, inner_budget=3))
    assert rep.low_confidence


def test_lambda_must_respect_weak_convexity():
    p = RobustSensingProblem([[[1.0]]], [4.0], 1)
    with pytest.raises(ContractError):
        prox_solve(p, [1.0], EnvelopeConfig(1.0 / p.weak_convexity))


def test_dual_route_on_svm():
    p = make_svm(50, 10, 0.1, 0)
    rep = prox_solve(p, np.ones(10), EnvelopeConfig(1.0))
    assert rep.method == "dual" and rep.certificate_gap <= 1e-9


@given(st.integers(1, 5000), st.integers(2, 300))
def test_subsample_indices(count, max_points):
    idx = subsample_indices(count, max_points)
    assert idx[0] == 0 and idx[-1] == count - 1
    assert np.all(np.diff(idx) > 0)
    assert len(idx) <= max(max_points, 2) or count <= max_points


def test_stationarity_measure_finds_minimum():
    tr = run(abs1d(), SolverConfig("subgrad", constant_horizon(1.0, 3)), [2.0])
    rep = stationarity_measure(abs1d(), tr, EnvelopeConfig(1.0))
    assert rep.argmin == 4 and rep.min_norm == 0.0


def test_sublevel_equivalence_bounded_case():
    p = FunctionProblem(lambda x: float(x @ x), lambda x: 2 * x, 1, optimal_point=[0.0],
                        optimal_value=0.0, lower_bound=0.0)
    rep = check_sublevel_equivalence(p, [0.5, 2.0, 10.0], np.linspace(0, 20, 81))
    assert rep.holds and not any(rep.unbounded)


def test_sublevel_equivalence_flags_unbounded_set():
    p = FunctionProblem(lambda x: max(0.0, float(x[0])), lambda x: (x > 0).astype(float), 1,
                        lower_bound=0.0)
    rep = check_sublevel_equivalence(p, [1.0], np.linspace(0, 50, 11), anchor=[0.0])
    assert rep.unbounded == (True,)


def sensing_1d():
    return RobustSensingProblem([[[1.0]]], [4.0], 1)


def test_sensing_envelope_at_planted_point():
    rep = prox_solve(sensing_1d(), [2.0], EnvelopeConfig(0.25))
    assert rep.prox_point[0] == pytest.approx(2.0, abs=1e-9)
    assert rep.envelope_value == pytest.approx(0.0, abs=1e-12)
    assert rep.gradient_norm == pytest.approx(0.0, abs=1e-8)


def test_abs_trace_norms_saturate():
    rep = stationarity_measure(abs1d(), np.array([[3.0], [1.5]]), EnvelopeConfig(1.0))
    np.testing.assert_allclose(rep.gradient_norms, [1.0, 1.0], rtol=0, atol=1e-12)
    assert rep.min_norm == pytest.approx(1.0)


def test_sensing_trace_norms_decrease_to_solution():
    rep = stationarity_measure(sensing_1d(), np.array([[0.5], [1.9], [2.0]]), EnvelopeConfig(0.25))
    assert np.all(np.diff(rep.gradient_norms) < 0)
    assert rep.argmin == 2


def test_sensing_sublevel_equivalence_near_planted_point():
    rep = check_sublevel_equivalence(sensing_1d(), [1.0], np.linspace(0, 6, 121),
                                     config=EnvelopeConfig(0.25), anchor=[2.0])
    assert rep.holds and rep.unbounded == (False,)


def test_envelope_gradient_is_lipschitz_on_samples():
    p, lam = sensing_1d(), 0.25
    cfg = EnvelopeConfig(lam)
    rng = np.random.default_rng(4)
    pairs = rng.uniform(-4, 4, (60, 2))
    pairs = pairs[np.abs(pairs[:, 0] - pairs[:, 1]) > 0.05]
    grads = {x: prox_solve(p, [x], cfg).envelope_gradient[0] for x in pairs.ravel()}
    ratio = max(abs(grads[x] - grads[y]) / abs(x - y) for x, y in pairs)
    rho = p.weak_convexity
    assert ratio <= 1.01 * max(1 / lam, rho / (1 - lam * rho))
