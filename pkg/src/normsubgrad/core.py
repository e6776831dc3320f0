"""Shared domain types and oracle contracts.

Decision variables are plain 1-D float64 numpy arrays. ``as_vector`` is the
single gate through which user input becomes a vector: it copies, checks
finiteness and freezes the result so solvers cannot mutate caller state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ContractError(ValueError):
    """Precondition violated by the caller (dimension mismatch, bad parameter)."""


class ConfigurationError(ValueError):
    """A solver or schedule was configured in a way the method does not support."""


def as_vector(x, dim: int | None = None) -> np.ndarray:
    arr = np.array(x, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ContractError("vectors must have dimension >= 1")
    if dim is not None and arr.size != dim:
        raise ContractError(f"dimension mismatch: expected {dim}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ContractError("vector entries must be finite")
    arr.setflags(write=False)
    return arr


def frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SubgradientSample:
    """One oracle response at a point: f(x), the selected g(x) and ||g(x)||."""

    value: float
    subgrad: np.ndarray
    norm: float


class Problem:
    """Base class for objectives ``f: R^d -> R``.

    Subclasses implement ``value`` and ``subgradient``; the subgradient
    selection must be deterministic in ``x``. Metadata attributes are optional
    ground truth used by the diagnostics:

    weak_convexity
        A valid (not necessarily tight) modulus rho; 0 means convex.
    optimal_value, optimal_point
        f* and one element of the solution set, when known.
    quadratic_growth
        mu with f(x) - f* >= mu * dist(x, X*)^2.
    strong_convexity
        kappa with <g(x) - g(y), x - y> >= kappa ||x - y||^2.
    lower_bound
        Known lower bound of f (0 certifies nonnegativity for TSM).
    component_count
        n for finite sums f = (1/n) sum_i f_i.
    """

    name = "problem"
    dim: int
    weak_convexity: float = 0.0
    optimal_value: float | None = None
    optimal_point: np.ndarray | None = None
    quadratic_growth: float | None = None
    strong_convexity: float | None = None
    lower_bound: float | None = None
    component_count: int | None = None

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def oracle(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        return self.value(x), self.subgradient(x)

    # finite-sum interface
    def component_value(self, i: int, x: np.ndarray) -> float:
        raise ContractError(f"{self.name} has no finite-sum structure")

    def component_subgradient(self, i: int, x: np.ndarray) -> np.ndarray:
        raise ContractError(f"{self.name} has no finite-sum structure")

    def distance_to_solution(self, x: np.ndarray) -> float | None:
        if self.optimal_point is None:
            return None
        return float(np.linalg.norm(x - self.optimal_point))

    def project_to_solution(self, x: np.ndarray) -> np.ndarray | None:
        return self.optimal_point

    def lipschitz_bound(self, center: np.ndarray, radius: float) -> float | None:
        """Upper bound on ||g(x)|| over the ball B(center, radius), if known."""
        return None

    def component_lipschitz_bound(self, center: np.ndarray, radius: float) -> float | None:
        """Upper bound on max_i ||g_i(x)|| over B(center, radius), if known."""
        return None

    def sublevel_radius(self, level: float) -> float | None:
        """Radius of a ball about the origin containing {f <= level}, if known."""
        return None

    def analytic_prox(self, lam: float, x: np.ndarray) -> np.ndarray | None:
        """Closed-form prox_{lam, f}(x), or None when unavailable."""
        return None

    def prox_structure(self):
        """A ``PiecewiseQuadratic`` description of f, or None."""
        return None

    def to_dict(self) -> dict:
        raise ContractError(f"{self.name} is not serializable")

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, rho={self.weak_convexity})"


def evaluate(problem: Problem, x) -> float:
    x = as_vector(x, problem.dim)
    return float(problem.value(x))


def subgradient(problem: Problem, x) -> SubgradientSample:
    x = as_vector(x, problem.dim)
    val, g = problem.oracle(x)
    g = frozen(g)
    return SubgradientSample(float(val), g, float(np.linalg.norm(g)))


def check_subgradient_inequality(problem: Problem, x, ys, rho: float | None = None,
                                 atol: float = 1e-9) -> float:
    """Return min over ys of f(y) - f(x) - <g, y-x> + (rho/2)||y-x||^2.

    Nonnegative (up to ``atol``) whenever g is a valid (weak) subgradient.
    """
    rho = problem.weak_convexity if rho is None else rho
    s = subgradient(problem, x)
    x = as_vector(x, problem.dim)
    worst = np.inf
    for y in np.atleast_2d(ys):
        diff = y - x
        slack = problem.value(y) - s.value - s.subgrad @ diff + 0.5 * rho * diff @ diff
        slack += atol * (1.0 + abs(s.value))
        worst = min(worst, slack)
    return float(worst)


class FunctionProblem(Problem):
    """Wrap plain callables as a problem; handy for tests and toy instances."""

    def __init__(self, value_fn, subgrad_fn, dim: int, *, rho: float = 0.0,
                 name: str = "function", optimal_value=None, optimal_point=None,
                 lower_bound=None, quadratic_growth=None, strong_convexity=None,
                 lipschitz_fn=None):
        self._value_fn = value_fn
        self._subgrad_fn = subgrad_fn
        self._lipschitz_fn = lipschitz_fn
        self.dim = int(dim)
        self.weak_convexity = float(rho)
        self.name = name
        self.optimal_value = optimal_value
        self.optimal_point = None if optimal_point is None else as_vector(optimal_point, dim)
        self.lower_bound = lower_bound
        self.quadratic_growth = quadratic_growth
        self.strong_convexity = strong_convexity

    def value(self, x):
        return float(self._value_fn(x))

    def subgradient(self, x):
        return np.asarray(self._subgrad_fn(x), dtype=np.float64).reshape(self.dim)

    def lipschitz_bound(self, center, radius):
        if self._lipschitz_fn is None:
            return None
        return float(self._lipschitz_fn(center, radius))


class CompositeProblem(Problem):
    """phi(x) = f(x) + r(x) with f a ``Problem`` and r a prox-friendly regularizer.

    Evaluating the composite gives phi; ``subgradient`` returns g_f + g_r, which
    is what the envelope machinery needs. Solvers read ``smooth_part`` and
    ``regularizer`` separately.
    """

    name = "composite"

    def __init__(self, smooth_part: Problem, regularizer, *, optimal_value=None,
                 optimal_point=None):
        self.smooth_part = smooth_part
        self.regularizer = regularizer
        self.dim = smooth_part.dim
        self.regularizer_lipschitz = float(regularizer.lipschitz)
        self.regularizer_weak_convexity = float(regularizer.weak_convexity)
        self.weak_convexity = smooth_part.weak_convexity + self.regularizer_weak_convexity
        self.optimal_value = optimal_value
        self.optimal_point = None if optimal_point is None else as_vector(optimal_point, self.dim)
        if getattr(regularizer, "nonnegative", False):
            self.lower_bound = smooth_part.lower_bound

    def value(self, x):
        return float(self.smooth_part.value(x) + self.regularizer.value(x))

    def subgradient(self, x):
        return self.smooth_part.subgradient(x) + self.regularizer.subgradient(x)

    def lipschitz_bound(self, center, radius):
        lf = self.smooth_part.lipschitz_bound(center, radius)
        return None if lf is None else lf + self.regularizer_lipschitz

    def sublevel_radius(self, level):
        # regularizers in the registry are nonnegative, so {phi <= s} lies in {f <= s}
        if getattr(self.regularizer, "nonnegative", False):
            return self.smooth_part.sublevel_radius(level)
        return None

    def to_dict(self):
        return {"smooth_part": self.smooth_part.to_dict(),
                "regularizer": self.regularizer.to_dict()}
