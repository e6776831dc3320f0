"""Moreau envelope f_lam and proximal mapping prox_{lam, f} with certified inner solves.

For a rho-weakly convex f and lam * rho < 1 the subproblem
h(y) = f(y) + ||y - x||^2 / (2 lam) is sigma-strongly convex with
sigma = 1/lam - rho. ``prox_solve`` picks the most accurate available route:

1. a closed-form prox registered by the problem (gap 0);
2. the dual solver for clipped-quadratic structure (duality gap);
3. in one dimension, bisection on the sign of dh plus a two-sided
   cutting-plane bound;
4. otherwise SubGrad with the quadratic-growth rule on h, certified by
   h* >= h(y) - ||s||^2 / (2 sigma) for any s in dh(y).

The reported envelope value is h(prox_point), an upper bound on f_lam(x)
that exceeds it by at most ``certificate_gap``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ContractError, FunctionProblem, Problem, as_vector, frozen
from .schedules import quadratic_growth
from .solvers import SolverConfig, run_subgrad


@dataclass(frozen=True)
class EnvelopeConfig:
    lam: float
    inner_tolerance: float = 1e-9
    inner_budget: int = 20000

    def __post_init__(self):
        if not self.lam > 0:
            raise ContractError("lam must be positive")
        if not self.inner_tolerance > 0:
            raise ContractError("inner_tolerance must be positive")
        if self.inner_budget < 1:
            raise ContractError("inner_budget must be >= 1")

    def check(self, rho: float):
        if self.lam * rho >= 1.0:
            raise ContractError(f"need lam * rho < 1, got lam={self.lam} rho={rho}")

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "inner_tolerance": self.inner_tolerance,
                "inner_budget": self.inner_budget}


def default_lambda(problem: Problem) -> float:
    rho = problem.weak_convexity
    return 1.0 / (2.0 * rho) if rho > 0 else 1.0


def default_config(problem: Problem, **kw) -> EnvelopeConfig:
    return EnvelopeConfig(kw.pop("lam", default_lambda(problem)), **kw)


@dataclass(frozen=True)
class EnvelopeReport:
    point: np.ndarray
    envelope_value: float
    prox_point: np.ndarray
    envelope_gradient: np.ndarray
    gradient_norm: float
    certificate_gap: float
    low_confidence: bool
    method: str

    def to_dict(self) -> dict:
        return {"envelope_value": self.envelope_value, "gradient_norm": self.gradient_norm,
                "certificate_gap": self.certificate_gap, "low_confidence": self.low_confidence,
                "method": self.method}


def _subproblem(problem, x, lam):
    def h(y):
        diff = y - x
        return problem.value(y) + 0.5 * (diff @ diff) / lam

    def dh(y):
        return problem.subgradient(y) + (y - x) / lam

    return h, dh


def _bracket_1d(problem, x, lam, sigma):
    h, dh = _subproblem(problem, x, lam)
    s0 = float(dh(x)[0])
    if s0 == 0.0:
        return x.copy(), h(x), 0.0
    # strong monotonicity: |y* - x| <= |s(x)| / sigma; dh is monotone, so bisect on its sign
    width = abs(s0) / sigma * (1.0 + 1e-9) + 1e-300
    lo, hi = (x[0], x[0] + width) if s0 < 0 else (x[0] - width, x[0])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        sm = float(dh(np.array([mid]))[0])
        if sm == 0.0:
            y = np.array([mid])
            return y, h(y), 0.0
        if sm > 0.0:
            hi = mid
        else:
            lo = mid
    yl, yr = np.array([lo]), np.array([hi])
    hl, hr = h(yl), h(yr)
    sl, sr = float(dh(yl)[0]), float(dh(yr)[0])
    y, hy = (yl, hl) if hl <= hr else (yr, hr)
    # both linearisations are global minorants of the convex h; the
    # minimum of their max sits where they cross
    if sl < 0.0 < sr:
        t = (hr - hl + sl * lo - sr * hi) / (sl - sr)
        lower = hl + sl * (t - lo)
    else:
        lower = max(hl if sl == 0.0 else -np.inf, hr if sr == 0.0 else -np.inf)
    lower = max(lower, hy - float(dh(y)[0]) ** 2 / (2.0 * sigma))
    return y, hy, max(hy - lower, 0.0)


def _subgrad_inner(problem, x, lam, sigma, budget):
    h, dh = _subproblem(problem, x, lam)
    sub = FunctionProblem(h, dh, problem.dim, name="prox_subproblem")
    s0 = np.linalg.norm(dh(x))
    if s0 == 0.0:
        return x.copy(), h(x), 0.0
    sched = quadratic_growth(max(s0, 1e-300), 0.5 * sigma)
    tr = run_subgrad(sub, SolverConfig("subgrad", sched, max_iterations=budget), x)
    lower = np.max(tr.values - tr.grad_norms ** 2 / (2.0 * sigma))
    best = int(np.argmin(tr.values))
    return tr.iterates[best].copy(), float(tr.values[best]), max(float(tr.values[best] - lower), 0.0)


def prox_solve(problem: Problem, x, config: EnvelopeConfig) -> EnvelopeReport:
    config.check(problem.weak_convexity)
    x = as_vector(x, problem.dim)
    lam = config.lam
    sigma = 1.0 / lam - problem.weak_convexity
    y = problem.analytic_prox(lam, x)
    if y is not None:
        y = np.asarray(y, dtype=np.float64)
        diff = y - x
        hy, gap, method = problem.value(y) + 0.5 * diff @ diff / lam, 0.0, "analytic"
    else:
        structure = problem.prox_structure()
        if structure is not None:
            sol = structure.solve(x, lam, tol=0.1 * config.inner_tolerance,
                                  max_iter=config.inner_budget, primal=problem.value)
            y, hy, gap, method = sol.point, sol.primal_value, sol.gap, "dual"
        elif problem.dim == 1:
            y, hy, gap = _bracket_1d(problem, x, lam, sigma)
            method = "bracket"
        else:
            y, hy, gap = _subgrad_inner(problem, x, lam, sigma, config.inner_budget)
            method = "subgrad"
    grad = (x - y) / lam
    return EnvelopeReport(point=x, envelope_value=float(hy), prox_point=frozen(y),
                          envelope_gradient=frozen(grad),
                          gradient_norm=float(np.linalg.norm(grad)),
                          certificate_gap=float(gap),
                          low_confidence=bool(gap > config.inner_tolerance), method=method)


def envelope_value(problem: Problem, x, config: EnvelopeConfig) -> float:
    return prox_solve(problem, x, config).envelope_value


@dataclass(frozen=True)
class StationarityReport:
    indices: np.ndarray
    gradient_norms: np.ndarray
    envelope_values: np.ndarray
    certificate_gaps: np.ndarray
    low_confidence: np.ndarray
    argmin: int
    min_norm: float

    @property
    def provisional(self) -> bool:
        return bool(np.any(self.low_confidence))


def subsample_indices(count: int, max_points: int = 200) -> np.ndarray:
    """All indices for short traces; geometric indices plus the last one otherwise."""
    if count <= max_points:
        return np.arange(count)
    idx = np.unique(np.round(np.geomspace(1, count, max_points - 1)).astype(np.int64) - 1)
    return np.unique(np.concatenate([[0], idx, [count - 1]]))


def stationarity_measure(problem: Problem, trace, config: EnvelopeConfig,
                         max_points: int = 200) -> StationarityReport:
    """||grad f_lam(x^k)|| over (a subsample of) the trace and its minimiser."""
    iterates = np.atleast_2d(trace.iterates if hasattr(trace, "iterates") else trace)
    if len(iterates) == 0:
        raise ContractError("trace is empty")
    idx = subsample_indices(len(iterates), max_points)
    reports = [prox_solve(problem, iterates[k], config) for k in idx]
    norms = np.array([r.gradient_norm for r in reports])
    j = int(np.argmin(norms))
    return StationarityReport(indices=idx, gradient_norms=norms,
                              envelope_values=np.array([r.envelope_value for r in reports]),
                              certificate_gaps=np.array([r.certificate_gap for r in reports]),
                              low_confidence=np.array([r.low_confidence for r in reports]),
                              argmin=int(idx[j]), min_norm=float(norms[j]))


@dataclass(frozen=True)
class SublevelReport:
    levels: tuple
    anchor: np.ndarray
    diameters: tuple
    radius_bounds: tuple
    max_envelope_radius: tuple
    contained: tuple
    unbounded: tuple

    @property
    def holds(self) -> bool:
        return all(c or u for c, u in zip(self.contained, self.unbounded))


def check_sublevel_equivalence(problem: Problem, levels, radius_probe, *, config=None,
                               anchor=None, directions: int = 16, seed: int = 0) -> SublevelReport:
    """Sample rays from ``anchor`` and compare the f and f_lam sublevel sets.

    For each level s the sampled f-sublevel radius D around the anchor gives
    the bound ||x - z|| <= sqrt(2 lam (s - lb)) + D for every sampled x with
    f_lam(x) <= s. A level whose f-sublevel set still reaches the outermost
    probe radius is flagged as unbounded there, and the radius check is
    skipped for it.
    """
    config = config or default_config(problem)
    config.check(problem.weak_convexity)
    if anchor is None:
        anchor = problem.optimal_point if problem.optimal_point is not None else np.zeros(problem.dim)
    z = as_vector(anchor, problem.dim)
    if problem.dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((directions, problem.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.sort(np.abs(np.asarray(radius_probe, dtype=np.float64)))
    pts = (z[None, None, :] + radii[None, :, None] * dirs[:, None, :]).reshape(-1, problem.dim)
    dist = np.tile(radii, len(dirs))
    at_edge = np.tile(radii == radii[-1], len(dirs))
    fvals = np.array([problem.value(p) for p in pts])
    env = np.array([prox_solve(problem, p, config).envelope_value for p in pts])
    lb = problem.lower_bound
    if lb is None:
        lb = problem.optimal_value if problem.optimal_value is not None else float(fvals.min())
    diams, bounds, env_r, contained, unbounded = [], [], [], [], []
    for s in levels:
        in_f = fvals <= s
        diam = float(dist[in_f].max()) if np.any(in_f) else 0.0
        bound = np.sqrt(2.0 * config.lam * max(s - lb, 0.0)) + diam
        in_env = env <= s
        r_env = float(dist[in_env].max()) if np.any(in_env) else 0.0
        diams.append(diam)
        bounds.append(float(bound))
        env_r.append(r_env)
        contained.append(bool(r_env <= bound + 1e-12 * (1.0 + bound)))
        unbounded.append(bool(np.any(in_f & at_edge)))
    return SublevelReport(tuple(float(s) for s in levels), z, tuple(diams), tuple(bounds),
                          tuple(env_r), tuple(contained), tuple(unbounded))


@dataclass(frozen=True)
class EnvelopePropertyReport:
    """Slacks of the three envelope facts at one point (nonnegative means it holds).

    descent: f(x) - (1 - lam rho)/(2 lam) ||x - p||^2 - f_lam(x)
    gradient: agreement of (x - p)/lam with central differences of f_lam
    residual: the weak-convexity inequality for v = (x - p)/lam at p over probes,
        which witnesses dist(0, df(p)) <= ||v||
    """

    descent_slack: float
    gradient_error: float
    residual_slack: float
    certificate_gap: float

    def holds(self, rel_tol: float = 1e-3) -> bool:
        return (self.descent_slack >= 0.0 and self.residual_slack >= 0.0
                and self.gradient_error <= rel_tol)


def finite_difference_gradient(problem: Problem, x, config: EnvelopeConfig,
                               step: float = 1e-5) -> np.ndarray:
    x = as_vector(x, problem.dim)
    out = np.empty(problem.dim)
    for i in range(problem.dim):
        e = np.zeros(problem.dim)
        e[i] = step
        out[i] = (envelope_value(problem, x + e, config)
                  - envelope_value(problem, x - e, config)) / (2.0 * step)
    return out


def check_envelope_properties(problem: Problem, x, config: EnvelopeConfig, *,
                              probes: int = 64, seed: int = 0,
                              fd_step: float = 1e-5) -> EnvelopePropertyReport:
    rep = prox_solve(problem, x, config)
    x = rep.point
    lam, rho = config.lam, problem.weak_convexity
    p = rep.prox_point
    diff = x - p
    gap = rep.certificate_gap
    sigma = 1.0 / lam - rho
    # an inexact prox moves p by at most sqrt(2 gap / sigma)
    drift = np.sqrt(2.0 * gap / sigma)
    scale = 1.0 + abs(problem.value(x))
    descent = (problem.value(x) - (1.0 - lam * rho) / (2.0 * lam) * (diff @ diff)
               - rep.envelope_value + gap + 1e-10 * scale)

    fd = finite_difference_gradient(problem, x, config, fd_step)
    grad = rep.envelope_gradient
    gerr = float(np.linalg.norm(fd - grad) / max(np.linalg.norm(grad), 1e-8))

    rng = np.random.default_rng(seed)
    v = diff / lam
    fp = problem.value(p)
    radius = max(np.linalg.norm(diff), 1.0)
    worst = np.inf
    for _ in range(probes):
        y = p + radius * rng.uniform(0.01, 2.0) * rng.standard_normal(problem.dim) / np.sqrt(problem.dim)
        d = y - p
        lhs = problem.value(y)
        rhs = fp + v @ d - 0.5 * rho * (d @ d)
        # error of v from an inexact p enters linearly in ||d||
        tol = (drift / lam) * np.linalg.norm(d) * 2.0 + 1e-10 * (1.0 + abs(lhs))
        worst = min(worst, lhs - rhs + tol)
    return EnvelopePropertyReport(float(descent), gerr, float(worst), float(gap))
