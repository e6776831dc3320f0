import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from normsubgrad.core import ContractError
from normsubgrad.diagnostics import (ContainmentSpec, check_containment, check_recursion,
                                     containment_spec, evaluate_bound, lipschitz_estimate,
                                     subgradient_growth_witness)
from normsubgrad.envelope import EnvelopeConfig
from normsubgrad.problems import (abs1d, make_interpolating_regression, make_robust_sensing,
                                  make_svm)
from normsubgrad.schedules import constant_horizon, custom_sequence, diminishing, quadratic_growth
from normsubgrad.solvers import SolverConfig, run

SVM = make_svm(50, 10, 0.1, 0)


def abs_run(x0=2.0, T=3):
    return run(abs1d(), SolverConfig("subgrad", constant_horizon(1.0, T)), [x0])


def test_abs1d_hand_verdicts():
    tr = abs_run()
    rec = check_recursion(tr, [0.0], reference_value=0.0)
    assert rec.max_abs_residual == 0.0 and rec.min_inequality_slack >= 0
    spec = containment_spec("ball_A", tr, abs1d())
    assert spec.radius_or_level == 5.0
    verdict = check_containment(tr, spec)
    assert verdict.holds and verdict.worst_margin == 1.0
    rep = evaluate_bound(tr, "thm11", problem=abs1d())
    assert rep.holds and rep.observed_lhs == 1.25 and rep.certified_rhs == 1.25


def test_oscillation_average_is_zero():
    # x^0..x^3 = 0.25, -0.25, 0.25, -0.25 average to 0
    tr = abs_run(0.25)
    assert tr.final_average[0] == 0.0
    assert evaluate_bound(tr, "thm11", problem=abs1d()).observed_lhs == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.05, 5.0), st.integers(1, 300))
def test_recursion_identity_and_convex_slack(seed, c, T):
    rng = np.random.default_rng(seed)
    x0 = 3.0 * rng.standard_normal(10)
    tr = run(SVM, SolverConfig("subgrad", constant_horizon(c, T)), x0)
    rep = check_recursion(tr, SVM.optimal_point, 0.0, SVM.optimal_value)
    assert rep.holds()
    assert rep.min_inequality_slack >= -1e-9 * rep.scale


def test_weakly_convex_slack_on_sensing():
    p = make_robust_sensing(5, 1, 40, seed=0)
    tr = run(p, SolverConfig("subgrad", diminishing(1.0), max_iterations=500), np.ones(5))
    rep = check_recursion(tr, p.optimal_point, p.weak_convexity, 0.0)
    assert rep.holds() and rep.min_inequality_slack >= -1e-9 * rep.scale


def test_recursion_refuses_multistep_methods():
    p = make_interpolating_regression(20, 5, 0)
    tr = run(p, SolverConfig("ism", constant_horizon(1.0, 5)), np.zeros(5))
    with pytest.raises(ContractError):
        check_recursion(tr, np.zeros(5))


def test_doubled_steps_escape_the_ball():
    tr = run(abs1d(), SolverConfig("subgrad", custom_sequence([2.0])), [0.25])
    tr.config = SolverConfig("subgrad", constant_horizon(1.0, 0))
    verdict = check_containment(tr, containment_spec("ball_A", tr, abs1d()))
    assert not verdict.holds and verdict.worst_index == 1


def test_bounds_are_method_specific_and_vacuous_without_steps():
    tr = abs_run()
    assert not evaluate_bound(tr, "cor52", problem=abs1d()).evaluable
    empty = run(abs1d(), SolverConfig("subgrad", constant_horizon(1.0, 3), max_iterations=0), [2.0])
    rep = evaluate_bound(empty, "thm11", problem=abs1d())
    assert rep.vacuous and rep.holds


def test_ball_lipschitz_estimate_is_consistent():
    tr = run(SVM, SolverConfig("subgrad", constant_horizon(1.0, 300)), np.zeros(10))
    est = lipschitz_estimate(tr, SVM, containment_spec("ball_A", tr, SVM))
    assert not est.empirical_only and est.consistent


def test_sublevel_lipschitz_estimate_is_analytic_for_sensing():
    p = make_robust_sensing(5, 1, 40, seed=0)
    cfg = EnvelopeConfig(1.0 / (2.0 * p.weak_convexity))
    tr = run(p, SolverConfig("subgrad", constant_horizon(1.0, 100)), np.ones(5))
    est = lipschitz_estimate(tr, p, containment_spec("sublevel_B", tr, p, cfg))
    assert not est.empirical_only and est.consistent


def test_quadratic_growth_needs_verified_estimate():
    p = make_svm(50, 10, 1.0, 0)
    ok = run(p, SolverConfig("subgrad", quadratic_growth(1.0, 1.0), max_iterations=500), np.zeros(10))
    assert evaluate_bound(ok, "cor32", problem=p).holds
    low = run(p, SolverConfig("subgrad", quadratic_growth(0.1, 1.0), max_iterations=500), np.zeros(10))
    rep = evaluate_bound(low, "cor32", problem=p)
    assert not rep.holds and "below" in rep.note


def test_growth_witness():
    p = make_svm(50, 10, 1.0, 0)
    good = subgradient_growth_witness(p, np.zeros(10), 1.0)
    assert good.holds and good.chain_holds
    assert not subgradient_growth_witness(p, np.zeros(10), 50.0).holds


def test_diminishing_sublevel_on_sensing():
    p = make_robust_sensing(5, 1, 40, seed=0)
    cfg = EnvelopeConfig(1.0 / (2.0 * p.weak_convexity))
    tr = run(p, SolverConfig("subgrad", diminishing(1.0), max_iterations=200), np.ones(5))
    verdict = check_containment(tr, containment_spec("sublevel_D", tr, p, cfg), p, cfg)
    assert verdict.holds and not verdict.provisional


def test_horizon_sets_reject_other_rules():
    tr = run(SVM, SolverConfig("subgrad", diminishing(1.0), max_iterations=5), np.zeros(10))
    with pytest.raises(ContractError):
        containment_spec("ball_A", tr, SVM)
    with pytest.raises(ContractError):
        ContainmentSpec("ball_Z", 1.0)


def test_ball_margin_at_start_is_c_squared():
    tr = run(SVM, SolverConfig("subgrad", constant_horizon(0.7, 50)), np.ones(10))
    assert check_containment(tr, containment_spec("ball_A", tr, SVM)).margins[0] == pytest.approx(0.49)


def test_one_step_residual_is_tiny():
    tr = run(SVM, SolverConfig("subgrad", constant_horizon(3.0, 0)), 5 * np.ones(10))
    rep = check_recursion(tr, np.zeros(10))
    assert rep.max_abs_residual <= 1e-10 * (1 + 250.0)


def scalar_quadratic():
    # SVM with n = 1, a = 0, kappa = 1: f(x) = 1 + x^2 / 2, g(x) = x
    from normsubgrad.problems import SvmProblem
    return SvmProblem([[0.0]], [1.0], 1.0)


def test_growth_witness_is_tight_on_pure_quadratic():
    p = scalar_quadratic()
    rep = subgradient_growth_witness(p, [2.0], 1.0)
    assert rep.holds and rep.worst_margin == pytest.approx(0.0, abs=1e-12)
    assert subgradient_growth_witness(p, [0.0], 1.0).holds


def test_quadratic_growth_bound_on_pure_quadratic():
    p = scalar_quadratic()
    tr = run(p, SolverConfig("subgrad", quadratic_growth(2.0, 1.0), max_iterations=1000), [2.0])
    assert evaluate_bound(tr, "cor32", problem=p).holds


def test_start_at_solution_gives_zero_lhs():
    p = make_interpolating_regression(20, 5, 0)
    for method, bound in (("subgrad", "thm11"), ("ism", "cor53"), ("tsm", "cor51a")):
        tr = run(p, SolverConfig(method, constant_horizon(1.0, 10)), p.planted)
        rep = evaluate_bound(tr, bound, problem=p)
        assert rep.observed_lhs == pytest.approx(0.0, abs=1e-12) and rep.holds
