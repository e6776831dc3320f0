import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from normsubgrad.core import (CompositeProblem, ContractError, FunctionProblem, as_vector,
                              check_subgradient_inequality, evaluate, subgradient)
from normsubgrad.problems import L1Regularizer, MCPRegularizer, abs1d

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_as_vector_checks_shape_and_finiteness():
    assert as_vector(2.0).shape == (1,)
    with pytest.raises(ContractError):
        as_vector([1.0, 2.0], 3)
    with pytest.raises(ContractError):
        as_vector([np.nan])


@given(st.lists(finite, min_size=3, max_size=3))
def test_subgradient_sample_norm_is_euclidean(xs):
    p = FunctionProblem(lambda x: float(np.abs(x).sum()), np.sign, 3)
    s = subgradient(p, xs)
    assert s.norm == pytest.approx(np.linalg.norm(s.subgrad), rel=1e-15, abs=0)
    assert s.value == evaluate(p, xs)


def test_subgradient_is_read_only():
    s = subgradient(abs1d(), [2.0])
    with pytest.raises(ValueError):
        s.subgrad[0] = 5.0


@settings(max_examples=50)
@given(finite, st.lists(finite, min_size=5, max_size=5))
def test_abs_subgradient_inequality(x, ys):
    assert check_subgradient_inequality(abs1d(), [x], np.array(ys)[:, None]) >= 0


def test_inequality_detects_a_wrong_subgradient():
    bad = FunctionProblem(lambda x: float(abs(x[0])), lambda x: -np.sign(x), 1)
    assert check_subgradient_inequality(bad, [1.0], [[0.0]]) < 0


def test_composite_moduli_add():
    smooth = FunctionProblem(lambda x: float(x @ x), lambda x: 2 * x, 1, rho=0.5)
    comp = CompositeProblem(smooth, MCPRegularizer(1.0, 4.0))
    assert comp.weak_convexity == pytest.approx(0.75)
    assert comp.regularizer_lipschitz == 1.0
    assert comp.value(np.array([1.0])) == pytest.approx(1.0 + 1.0 - 1.0 / 8.0)


def test_composite_lower_bound_from_nonnegative_regularizer():
    comp = CompositeProblem(abs1d(), L1Regularizer(2.0))
    assert comp.lower_bound == 0.0
