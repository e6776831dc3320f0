"""Problem zoo: convex and weakly convex non-Lipschitz instances, prox oracles.

Kink rule used throughout: where a piece is nondifferentiable and 0 lies in
its subdifferential interval, the zero element is selected (``np.sign(0) == 0``
for absolute values, an inactive hinge at exactly zero margin).
"""

from __future__ import annotations

import numpy as np

from .core import ContractError, Problem, as_vector, frozen
from .piecewise import PiecewiseQuadratic

REFERENCE_GAP = 1e-9


class AbsProblem(Problem):
    """f(x) = weight * ||x - shift||_1."""

    name = "abs"

    def __init__(self, shift, weight: float = 1.0):
        self.shift = as_vector(shift)
        if weight <= 0:
            raise ContractError("weight must be positive")
        self.weight = float(weight)
        self.dim = self.shift.size
        self.optimal_value = 0.0
        self.optimal_point = self.shift
        self.lower_bound = 0.0

    def value(self, x):
        return float(self.weight * np.abs(x - self.shift).sum())

    def subgradient(self, x):
        return self.weight * np.sign(x - self.shift)

    def lipschitz_bound(self, center, radius):
        return self.weight * np.sqrt(self.dim)

    def analytic_prox(self, lam, x):
        return self.shift + prox_l1(lam * self.weight, x - self.shift)

    def prox_structure(self):
        n = self.dim
        lin = n * self.weight * np.eye(n)
        return PiecewiseQuadratic(-lin @ self.shift, lin, -1.0, 1.0)

    def to_dict(self):
        return {"name": "abs", "shift": self.shift.tolist(), "weight": self.weight}


def abs1d() -> AbsProblem:
    return AbsProblem([0.0])


class SvmProblem(Problem):
    """Hinge-loss SVM with ridge: (1/n) sum_i max(0, 1 - b_i <a_i, x>) + (kappa/2)||x||^2.

    Components are f_i(x) = max(0, 1 - b_i <a_i, x>) + (kappa/2)||x||^2. The
    solution is computed once by the dual solver and certified to a
    primal/dual gap below ``REFERENCE_GAP``.
    """

    name = "svm"

    def __init__(self, data, labels, ridge: float, *, solve: bool = True, generator=None,
                 optimal_point=None):
        if ridge <= 0:
            raise ContractError("ridge must be positive")
        self.data = frozen(np.atleast_2d(data))
        self.labels = frozen(np.asarray(labels, dtype=np.float64).reshape(-1))
        n, d = self.data.shape
        if self.labels.size != n or not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ContractError("labels must be n entries in {-1, +1}")
        self.ridge = float(ridge)
        self.dim = d
        self.component_count = n
        self.strong_convexity = self.ridge
        # kappa-strong convexity gives growth kappa/2 in function value
        self.quadratic_growth = 0.5 * self.ridge
        self.lower_bound = 0.0
        self.generator = generator
        self._signed = self.data * self.labels[:, None]
        self._row_norms = np.linalg.norm(self.data, axis=1)
        self.reference_gap = None
        if optimal_point is not None:
            self.optimal_point = as_vector(optimal_point, d)
            self.optimal_value = self.value(self.optimal_point)
        elif solve:
            sol = self.prox_structure().solve(tol=1e-13, primal=self.value)
            if sol.gap > REFERENCE_GAP:
                raise RuntimeError(f"reference solve did not certify (gap {sol.gap:.3e})")
            self.optimal_point = as_vector(sol.point, d)
            self.optimal_value = sol.primal_value
            self.reference_gap = sol.gap

    def _margins(self, x):
        return 1.0 - self._signed @ x

    def value(self, x):
        return float(np.maximum(self._margins(x), 0.0).mean() + 0.5 * self.ridge * x @ x)

    def subgradient(self, x):
        active = self._margins(x) > 0.0
        return -self._signed[active].sum(axis=0) / self.component_count + self.ridge * x

    def oracle(self, x):
        m = self._margins(x)
        active = m > 0.0
        val = float(np.where(active, m, 0.0).mean() + 0.5 * self.ridge * x @ x)
        g = -self._signed[active].sum(axis=0) / self.component_count + self.ridge * x
        return val, g

    def component_value(self, i, x):
        return float(max(1.0 - self._signed[i] @ x, 0.0) + 0.5 * self.ridge * x @ x)

    def component_subgradient(self, i, x):
        g = self.ridge * np.asarray(x, dtype=np.float64)
        if 1.0 - self._signed[i] @ x > 0.0:
            g = g - self._signed[i]
        return g

    def lipschitz_bound(self, center, radius):
        return float(self._row_norms.mean() + self.ridge * (np.linalg.norm(center) + radius))

    def component_lipschitz_bound(self, center, radius):
        return float(self._row_norms.max() + self.ridge * (np.linalg.norm(center) + radius))

    def prox_structure(self):
        return PiecewiseQuadratic(np.ones(self.component_count), -self._signed, 0.0, 1.0,
                                  ridge=self.ridge)

    def to_dict(self):
        out = {"name": "svm", "data": self.data.tolist(), "labels": self.labels.tolist(),
               "ridge": self.ridge}
        if self.optimal_point is not None:
            out["optimal_point"] = self.optimal_point.tolist()
        if self.generator is not None:
            out["generator"] = dict(self.generator)
        return out


def make_svm(n: int, d: int, ridge: float, seed: int, label_noise: float = 0.0) -> SvmProblem:
    """Gaussian features, labels from a planted separator with optional flips."""
    if n < 1 or d < 1:
        raise ContractError("need n >= 1 and d >= 1")
    if ridge <= 0:
        raise ContractError("ridge must be positive")
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((n, d))
    w = rng.standard_normal(d)
    labels = np.where(data @ w >= 0, 1.0, -1.0)
    flips = rng.random(n) < label_noise
    labels[flips] *= -1
    gen = {"generator": "svm", "n": n, "d": d, "ridge": ridge, "seed": seed,
           "label_noise": label_noise}
    return SvmProblem(data, labels, ridge, generator=gen)


class RobustSensingProblem(Problem):
    """Robust matrix sensing (1/n) ||y - A(X X^T)||_1 over X in R^{d x r}.

    The decision vector is X flattened row-major. Sensing matrices must be
    symmetric. The declared weak-convexity modulus is (2/n) sum_i ||A_i||_op.
    """

    name = "robust_sensing"

    def __init__(self, matrices, measurements, rank: int, *, planted=None, exact: bool = True,
                 generator=None):
        mats = np.asarray(matrices, dtype=np.float64)
        if mats.ndim == 2:
            mats = mats[:, :, None] if mats.shape[1] == 1 else mats[None]
        self.matrices = frozen(mats)
        n, d, d2 = self.matrices.shape
        if d != d2:
            raise ContractError("sensing matrices must be square")
        if not np.allclose(self.matrices, np.transpose(self.matrices, (0, 2, 1))):
            raise ContractError("sensing matrices must be symmetric")
        if not 1 <= rank <= d:
            raise ContractError("need 1 <= rank <= d")
        self.measurements = frozen(np.asarray(measurements, dtype=np.float64).reshape(-1))
        if self.measurements.size != n:
            raise ContractError("one measurement per sensing matrix")
        self.rank = int(rank)
        self.side = d
        self.dim = d * self.rank
        self.component_count = n
        self._op_norms = np.linalg.norm(self.matrices, ord=2, axis=(1, 2))
        self.weak_convexity = float(2.0 * self._op_norms.mean())
        self.lower_bound = 0.0
        self.generator = generator
        self.planted = None if planted is None else as_vector(planted, self.dim)
        if self.planted is not None and exact:
            self.optimal_point = self.planted
            self.optimal_value = 0.0

    def _mat(self, x):
        return np.asarray(x, dtype=np.float64).reshape(self.side, self.rank)

    def _residuals(self, X):
        return self.measurements - np.einsum("ipq,pq->i", self.matrices, X @ X.T)

    def value(self, x):
        return float(np.abs(self._residuals(self._mat(x))).mean())

    def subgradient(self, x):
        X = self._mat(x)
        s = np.sign(self._residuals(X))
        g = -2.0 * np.einsum("i,ipq,qr->pr", s, self.matrices, X) / self.component_count
        return g.reshape(-1)

    def oracle(self, x):
        X = self._mat(x)
        r = self._residuals(X)
        s = np.sign(r)
        g = -2.0 * np.einsum("i,ipq,qr->pr", s, self.matrices, X) / self.component_count
        return float(np.abs(r).mean()), g.reshape(-1)

    def component_value(self, i, x):
        X = self._mat(x)
        return float(abs(self.measurements[i] - np.sum(self.matrices[i] * (X @ X.T))))

    def component_subgradient(self, i, x):
        X = self._mat(x)
        r = self.measurements[i] - np.sum(self.matrices[i] * (X @ X.T))
        return (-2.0 * np.sign(r) * (self.matrices[i] @ X)).reshape(-1)

    def distance_to_solution(self, x):
        if self.optimal_point is None:
            return None
        return float(np.linalg.norm(x - self.project_to_solution(x)))

    def project_to_solution(self, x):
        """Closest X_planted Q over orthogonal Q (orthogonal Procrustes)."""
        if self.optimal_point is None:
            return None
        P = self._mat(self.optimal_point)
        u, _, vt = np.linalg.svd(P.T @ self._mat(x))
        return (P @ (u @ vt)).reshape(-1)

    def lipschitz_bound(self, center, radius):
        return float(self.weak_convexity * (np.linalg.norm(center) + radius))

    def sublevel_radius(self, level: float) -> float | None:
        """Radius about the origin of a ball containing {f <= level}.

        With PSD sensing matrices f(X) >= (lambda_min(S) ||X||^2 - sum_i y_i) / n
        for S = sum_i A_i, which bounds ||X|| on the sublevel set.
        """
        if np.any(np.linalg.eigvalsh(self.matrices)[:, 0] < -1e-12):
            return None
        lam_min = float(np.linalg.eigvalsh(self.matrices.sum(axis=0))[0])
        if lam_min <= 0.0:
            return None
        top = self.component_count * level + self.measurements.sum()
        return float(np.sqrt(max(top, 0.0) / lam_min))

    def component_lipschitz_bound(self, center, radius):
        return float(2.0 * self._op_norms.max() * (np.linalg.norm(center) + radius))

    def prox_structure(self):
        eye = np.eye(self.rank)
        quad = np.stack([-np.kron(a, eye) for a in self.matrices])
        return PiecewiseQuadratic(self.measurements, np.zeros((self.component_count, self.dim)),
                                  -1.0, 1.0, quad=quad)

    def to_dict(self):
        out = {"name": "robust_sensing", "matrices": self.matrices.tolist(),
               "measurements": self.measurements.tolist(), "rank": self.rank,
               "exact": self.optimal_point is not None}
        if self.planted is not None:
            out["planted"] = self.planted.tolist()
        if self.generator is not None:
            out["generator"] = dict(self.generator)
        return out


def make_robust_sensing(d: int, r: int, n: int, noise_outliers: float = 0.0,
                        seed: int = 0) -> RobustSensingProblem:
    """Quadratic sensing with A_i = a_i a_i^T and Gaussian a_i, planted X.

    With n >= d the a_i span R^d almost surely, which makes
    sum_i <A_i, X X^T> >= lambda_min(sum_i a_i a_i^T) ||X||^2 and hence the
    objective coercive; the generator resamples until that certificate is
    positive.
    """
    if d < 1 or n < 1:
        raise ContractError("need d >= 1 and n >= 1")
    if not 1 <= r <= d:
        raise ContractError("need 1 <= r <= d")
    if not 0.0 <= noise_outliers < 1.0:
        raise ContractError("outlier fraction must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    for _ in range(100):
        vecs = rng.standard_normal((n, d))
        if np.linalg.eigvalsh(vecs.T @ vecs)[0] > 1e-8 * n:
            break
    else:
        raise RuntimeError("could not draw a coercive sensing operator; increase n")
    mats = np.einsum("ip,iq->ipq", vecs, vecs)
    planted = rng.standard_normal((d, r))
    y = np.einsum("ipq,pq->i", mats, planted @ planted.T)
    n_out = int(round(noise_outliers * n))
    exact = n_out == 0
    if n_out:
        idx = rng.choice(n, size=n_out, replace=False)
        y[idx] = 10.0 * np.abs(y).max() * rng.random(n_out)
    gen = {"generator": "robust_sensing", "d": d, "r": r, "n": n,
           "noise_outliers": noise_outliers, "seed": seed}
    return RobustSensingProblem(mats, y, r, planted=planted.reshape(-1), exact=exact,
                                generator=gen)


class InterpolatingRegression(Problem):
    """Robust regression (1/n) sum_i |<a_i, x> - b_i| with b = A x_planted."""

    name = "interpolating_regression"

    def __init__(self, data, planted, generator=None):
        self.data = frozen(np.atleast_2d(data))
        n, d = self.data.shape
        self.planted = as_vector(planted, d)
        # one reduction for targets, full and component residuals, so every
        # residual is exactly zero at the planted point
        self.targets = frozen(np.sum(self.data * self.planted, axis=1))
        self.dim = d
        self.component_count = n
        self.lower_bound = 0.0
        self.optimal_value = 0.0
        self.optimal_point = self.planted
        self.generator = generator
        self._row_norms = np.linalg.norm(self.data, axis=1)

    def _residuals(self, x):
        return np.sum(self.data * x, axis=1) - self.targets

    def _residual(self, i, x):
        return np.sum(self.data[i] * x) - self.targets[i]

    def value(self, x):
        return float(np.abs(self._residuals(x)).mean())

    def subgradient(self, x):
        s = np.sign(self._residuals(x))
        return s @ self.data / self.component_count

    def component_value(self, i, x):
        return float(abs(self._residual(i, x)))

    def component_subgradient(self, i, x):
        return np.sign(self._residual(i, x)) * self.data[i]

    def lipschitz_bound(self, center, radius):
        return float(self._row_norms.mean())

    def component_lipschitz_bound(self, center, radius):
        return float(self._row_norms.max())

    def prox_structure(self):
        return PiecewiseQuadratic(-self.targets, self.data, -1.0, 1.0)

    def to_dict(self):
        out = {"name": "interpolating_regression", "data": self.data.tolist(),
               "planted": self.planted.tolist()}
        if self.generator is not None:
            out["generator"] = dict(self.generator)
        return out


def make_interpolating_regression(n: int, d: int, seed: int) -> InterpolatingRegression:
    if not n >= d >= 1:
        raise ContractError("need n >= d >= 1")
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((n, d))
    planted = rng.standard_normal(d)
    gen = {"generator": "interpolating_regression", "n": n, "d": d, "seed": seed}
    return InterpolatingRegression(data, planted, generator=gen)


# --- regularizers -----------------------------------------------------------


def prox_l1(lam: float, x) -> np.ndarray:
    if lam <= 0:
        raise ContractError("lam must be positive")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def prox_box_indicator(lower, upper, x) -> np.ndarray:
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if np.any(lower > upper):
        raise ContractError("box needs lower <= upper")
    return np.clip(np.asarray(x, dtype=np.float64), lower, upper)


def prox_mcp(lam: float, weight: float, theta: float, x) -> np.ndarray:
    """Firm thresholding: prox of lam * MCP(weight, theta); needs lam < theta."""
    if lam <= 0 or weight <= 0 or theta <= 0:
        raise ContractError("MCP parameters must be positive")
    if lam >= theta:
        raise ContractError("prox subproblem is nonconvex: need lam < theta")
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    shrunk = np.sign(x) * np.maximum(ax - lam * weight, 0.0) / (1.0 - lam / theta)
    return np.where(ax > weight * theta, x, shrunk)


class ProxOracle:
    """A simple regularizer r with closed-form prox.

    ``lipschitz`` is L_r over dom r and ``weak_convexity`` is eta.
    """

    name = "regularizer"
    lipschitz = 0.0
    weak_convexity = 0.0
    nonnegative = True

    def value(self, x) -> float:
        raise NotImplementedError

    def prox(self, lam: float, x) -> np.ndarray:
        raise NotImplementedError

    def subgradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def in_domain(self, x) -> bool:
        return True

    def to_dict(self) -> dict:
        raise NotImplementedError


class ZeroRegularizer(ProxOracle):
    name = "zero"

    def value(self, x):
        return 0.0

    def prox(self, lam, x):
        return np.asarray(x, dtype=np.float64)

    def subgradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=np.float64))

    def to_dict(self):
        return {"name": "zero"}


class L1Regularizer(ProxOracle):
    name = "l1"

    def __init__(self, weight: float = 1.0, dim: int = 1):
        if weight <= 0:
            raise ContractError("weight must be positive")
        self.weight = float(weight)
        self.dim = int(dim)
        self.lipschitz = self.weight * np.sqrt(self.dim)

    def value(self, x):
        return float(self.weight * np.abs(x).sum())

    def prox(self, lam, x):
        return prox_l1(lam * self.weight, x)

    def subgradient(self, x):
        return self.weight * np.sign(np.asarray(x, dtype=np.float64))

    def to_dict(self):
        return {"name": "l1", "weight": self.weight, "dim": self.dim}


class BoxIndicator(ProxOracle):
    name = "box"

    def __init__(self, lower, upper):
        self.lower = as_vector(lower)
        self.upper = as_vector(upper, self.lower.size)
        if np.any(self.lower > self.upper):
            raise ContractError("box needs lower <= upper")

    def value(self, x):
        return 0.0 if self.in_domain(x) else np.inf

    def in_domain(self, x):
        x = np.asarray(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def prox(self, lam, x):
        return prox_box_indicator(self.lower, self.upper, x)

    def subgradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=np.float64))

    def to_dict(self):
        return {"name": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


class MCPRegularizer(ProxOracle):
    """Minimax concave penalty, separable: weight-Lipschitz and (1/theta)-weakly convex."""

    name = "mcp"

    def __init__(self, weight: float, theta: float, dim: int = 1):
        if weight <= 0 or theta <= 0:
            raise ContractError("MCP parameters must be positive")
        self.weight = float(weight)
        self.theta = float(theta)
        self.dim = int(dim)
        self.lipschitz = self.weight * np.sqrt(self.dim)
        self.weak_convexity = 1.0 / self.theta

    def value(self, x):
        ax = np.abs(np.asarray(x, dtype=np.float64))
        inner = self.weight * ax - ax ** 2 / (2 * self.theta)
        flat = 0.5 * self.theta * self.weight ** 2
        return float(np.where(ax <= self.weight * self.theta, inner, flat).sum())

    def prox(self, lam, x):
        return prox_mcp(lam, self.weight, self.theta, x)

    def subgradient(self, x):
        x = np.asarray(x, dtype=np.float64)
        g = np.sign(x) * self.weight - x / self.theta
        return np.where(np.abs(x) <= self.weight * self.theta, g, 0.0)

    def to_dict(self):
        return {"name": "mcp", "weight": self.weight, "theta": self.theta, "dim": self.dim}


# --- serialization -------------------------------------------------------------


def problem_from_dict(doc: dict) -> Problem:
    name = doc["name"]
    if name == "abs":
        return AbsProblem(doc["shift"], doc.get("weight", 1.0))
    if name == "svm":
        return SvmProblem(doc["data"], doc["labels"], doc["ridge"],
                          optimal_point=doc.get("optimal_point"), generator=doc.get("generator"))
    if name == "robust_sensing":
        return RobustSensingProblem(doc["matrices"], doc["measurements"], doc["rank"],
                                    planted=doc.get("planted"), exact=doc.get("exact", True),
                                    generator=doc.get("generator"))
    if name == "interpolating_regression":
        return InterpolatingRegression(doc["data"], doc["planted"], generator=doc.get("generator"))
    raise ContractError(f"unknown problem {name!r}")


def regularizer_from_dict(doc: dict) -> ProxOracle:
    name = doc["name"]
    if name == "zero":
        return ZeroRegularizer()
    if name == "l1":
        return L1Regularizer(doc.get("weight", 1.0), doc.get("dim", 1))
    if name == "box":
        return BoxIndicator(doc["lower"], doc["upper"])
    if name == "mcp":
        return MCPRegularizer(doc["weight"], doc["theta"], doc.get("dim", 1))
    raise ContractError(f"unknown regularizer {name!r}")


def build_problem(spec: dict) -> Problem:
    """Construct a problem from a config entry (generator name or inline data)."""
    name = spec["name"]
    if name == "abs1d":
        return abs1d()
    if name == "abs" and "shift" in spec:
        return AbsProblem(spec["shift"], spec.get("weight", 1.0))
    if name == "svm" and "data" not in spec:
        return make_svm(spec["n"], spec["d"], spec["ridge"], spec.get("seed", 0),
                        spec.get("label_noise", 0.0))
    if name == "robust_sensing" and "matrices" not in spec:
        return make_robust_sensing(spec["d"], spec["r"], spec["n"],
                                   spec.get("noise_outliers", 0.0), spec.get("seed", 0))
    if name == "interpolating_regression" and "data" not in spec:
        return make_interpolating_regression(spec["n"], spec["d"], spec.get("seed", 0))
    return problem_from_dict(spec)
