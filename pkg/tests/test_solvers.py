import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from normsubgrad.core import CompositeProblem, ConfigurationError, FunctionProblem
from normsubgrad.problems import (BoxIndicator, MCPRegularizer, RobustSensingProblem,
                                  ZeroRegularizer, abs1d, make_interpolating_regression,
                                  make_robust_sensing, make_svm)
from normsubgrad.schedules import constant_horizon, custom_sequence, diminishing, quadratic_growth
from normsubgrad.solvers import SolverConfig, run, run_ssm, truncated_step_length

REGRESSION = make_interpolating_regression(20, 5, 0)


def test_abs1d_hand_trace():
    tr = run(abs1d(), SolverConfig("subgrad", constant_horizon(1.0, 3)), [2.0])
    np.testing.assert_array_equal(tr.iterates[:, 0], [2.0, 1.5, 1.0, 0.5, 0.0])
    np.testing.assert_array_equal(tr.values, [2.0, 1.5, 1.0, 0.5, 0.0])
    assert tr.final_average[0] == 1.25
    assert tr.halt_reason == "horizon"


def test_stationary_halt_pads_the_average():
    tr = run(abs1d(), SolverConfig("subgrad", constant_horizon(1.0, 3)), [1.0])
    assert tr.halt_reason == "stationary" and tr.steps == 2
    # the planned x^0..x^3 are 1, 0.5, 0, 0
    assert tr.final_average[0] == pytest.approx(0.375)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.1, 10.0), st.integers(1, 200))
def test_every_step_has_length_beta(seed, c, T):
    p = make_robust_sensing(4, 2, 12, seed=seed % 7)
    x0 = np.random.default_rng(seed).standard_normal(p.dim)
    tr = run(p, SolverConfig("subgrad", constant_horizon(c, T)), x0)
    moves = np.linalg.norm(np.diff(tr.iterates, axis=0), axis=1)
    np.testing.assert_allclose(moves, tr.betas, rtol=1e-12)


def test_unbounded_schedule_needs_iteration_cap():
    with pytest.raises(ConfigurationError):
        SolverConfig("subgrad", diminishing(1.0))


def test_truncated_step_closed_form():
    assert truncated_step_length(1.0, 2.0, 1.0) == 0.25
    assert truncated_step_length(1.0, 2.0, 0.1) == 0.1
    assert truncated_step_length(1.0, 0.0, 0.1) == 0.0


def test_tsm_lands_on_zero_and_halts():
    tr = run(abs1d(), SolverConfig("tsm", constant_horizon(1.0, 0)), [0.25])
    assert tr.iterates[-1][0] == 0.0 and tr.values[-1] == 0.0
    assert bool(tr.extras["truncated"][0])


def test_tsm_requires_certified_nonnegativity():
    p = FunctionProblem(lambda x: float(x[0]), lambda x: np.ones(1), 1)
    with pytest.raises(ConfigurationError):
        run(p, SolverConfig("tsm", constant_horizon(1.0, 3)), [0.0])


def test_ssm_requires_seed():
    with pytest.raises(ConfigurationError):
        SolverConfig("ssm", constant_horizon(1.0, 3))


def test_ssm_is_reproducible_and_replayable():
    cfg = SolverConfig("ssm", constant_horizon(1.0, 300), seed=4)
    a = run(REGRESSION, cfg, np.zeros(5))
    b = run(REGRESSION, cfg, np.zeros(5))
    np.testing.assert_array_equal(a.iterates, b.iterates)
    replay = run_ssm(REGRESSION, SolverConfig("ssm", constant_horizon(1.0, 300), seed=99),
                     np.zeros(5), indices=a.indices)
    np.testing.assert_array_equal(a.iterates, replay.iterates)


def test_ism_inner_steps_are_beta_over_n():
    tr = run(REGRESSION, SolverConfig("ism", constant_horizon(1.0, 20)), np.ones(5))
    n = REGRESSION.component_count
    inner = tr.inner_iterates
    starts = np.concatenate([tr.iterates[:-1, None, :], inner[:, :-1, :]], axis=1)
    moves = np.linalg.norm(inner - starts, axis=2)
    expected = np.where(tr.inner_grad_norms > 0, (1.0 / np.sqrt(21)) / n, 0.0)
    np.testing.assert_allclose(moves, expected, rtol=1e-12)


def test_prox_with_zero_regularizer_is_subgrad():
    p = make_svm(30, 4, 0.1, 1)
    sched = diminishing(0.5)
    a = run(p, SolverConfig("subgrad", sched, max_iterations=300), np.ones(4))
    b = run(CompositeProblem(p, ZeroRegularizer()),
            SolverConfig("prox_subgrad", sched, max_iterations=300), np.ones(4))
    np.testing.assert_array_equal(a.iterates, b.iterates)


def test_prox_box_keeps_iterates_feasible():
    comp = CompositeProblem(abs1d(), BoxIndicator([0.5], [2.0]))
    tr = run(comp, SolverConfig("prox_subgrad", constant_horizon(3.0, 50)), [2.0])
    assert np.all((tr.iterates >= 0.5) & (tr.iterates <= 2.0))


def test_prox_mcp_cap_enforced():
    comp = CompositeProblem(RobustSensingProblem([[[1.0]]], [4.0], 1), MCPRegularizer(1.0, 4.0))
    with pytest.raises(ConfigurationError):
        run(comp, SolverConfig("prox_subgrad", constant_horizon(10.0, 3)), [0.5])
    run(comp, SolverConfig("prox_subgrad", constant_horizon(4.0, 3)), [0.5])


def test_quadratic_growth_rule_runs_to_cap():
    tr = run(make_svm(30, 4, 1.0, 1), SolverConfig("subgrad", quadratic_growth(1.0, 1.0),
                                                   max_iterations=50), np.zeros(4))
    assert tr.steps == 50 and tr.halt_reason == "budget"


def two_point_regression():
    # a = (1), (2) with planted x = 3
    from normsubgrad.problems import InterpolatingRegression
    return InterpolatingRegression([[1.0], [2.0]], [3.0])


@pytest.mark.parametrize("step, expected", [(2.0, 0.0), (0.5, 0.5)])
def test_tsm_polyak_and_untruncated_steps(step, expected):
    tr = run(abs1d(), SolverConfig("tsm", custom_sequence([step])), [1.0])
    assert tr.iterates[1][0] == expected


def test_tsm_halts_at_zero_value():
    tr = run(abs1d(), SolverConfig("tsm", constant_horizon(1.0, 3)), [0.0])
    assert tr.halt_reason == "optimal" and tr.steps == 0


def test_subgrad_halts_at_stationary_start():
    tr = run(abs1d(), SolverConfig("subgrad", constant_horizon(1.0, 3)), [0.0])
    assert tr.halt_reason == "stationary" and tr.steps == 0


def test_ssm_forced_first_index():
    p = two_point_regression()
    tr = run_ssm(p, SolverConfig("ssm", custom_sequence([0.5]), seed=0), [0.0], indices=[0])
    assert tr.iterates[1][0] == 0.5


def test_ssm_from_planted_point_is_stationary():
    tr = run(REGRESSION, SolverConfig("ssm", constant_horizon(1.0, 10), seed=0), REGRESSION.planted)
    assert tr.halt_reason == "stationary" and tr.steps == 0


def test_ism_two_component_pass():
    # inner steps of beta / n = 0.5 each
    tr = run(two_point_regression(), SolverConfig("ism", custom_sequence([1.0])), [0.0])
    np.testing.assert_array_equal(tr.inner_iterates[0, :, 0], [0.5, 1.0])
    assert tr.iterates[1][0] == 1.0


def test_ism_from_planted_point_skips_everything():
    tr = run(two_point_regression(), SolverConfig("ism", constant_horizon(1.0, 3)), [3.0])
    assert tr.iterates[1][0] == 3.0 and tr.halt_reason == "stationary"


def test_ism_with_one_component_is_subgrad():
    from normsubgrad.problems import InterpolatingRegression
    p = InterpolatingRegression([[2.0]], [1.0])
    sched = constant_horizon(0.7, 40)
    a = run(p, SolverConfig("ism", sched), [5.0])
    b = run(p, SolverConfig("subgrad", sched), [5.0])
    np.testing.assert_array_equal(a.iterates, b.iterates)


def test_prox_l1_hand_step():
    from normsubgrad.problems import AbsProblem, L1Regularizer
    comp = CompositeProblem(AbsProblem([3.0]), L1Regularizer(1.0))
    tr = run(comp, SolverConfig("prox_subgrad", custom_sequence([1.0])), [0.0])
    assert tr.alphas[0] == 0.5 and tr.iterates[1][0] == 0.0


def test_prox_box_fixed_point():
    from normsubgrad.problems import AbsProblem
    comp = CompositeProblem(AbsProblem([3.0]), BoxIndicator([0.0], [1.0]))
    tr = run(comp, SolverConfig("prox_subgrad", constant_horizon(1.0, 5)), [1.0])
    assert np.all(tr.iterates == 1.0)


def test_prox_displacement_at_most_beta():
    comp = CompositeProblem(make_svm(30, 4, 0.1, 1), MCPRegularizer(0.5, 2.0, 4))
    tr = run(comp, SolverConfig("prox_subgrad", constant_horizon(1.0, 200)), np.ones(4))
    moves = np.linalg.norm(np.diff(tr.iterates, axis=0), axis=1)
    assert np.all(moves <= tr.betas * (1 + 1e-12))


def test_ssm_displacement_is_beta_when_moving():
    tr = run(REGRESSION, SolverConfig("ssm", constant_horizon(2.0, 400), seed=1), np.ones(5))
    moves = np.linalg.norm(np.diff(tr.iterates, axis=0), axis=1)
    moving = tr.alphas > 0
    np.testing.assert_allclose(moves[moving], tr.betas[moving], rtol=1e-12)
