"""Machine-checkable verdicts: recursion identity, containment sets, rate bounds.

Every check is a pure function of a trace (or a list of traces), the problem
metadata and, for the weakly convex sets, an ``EnvelopeConfig``. Bounds that
involve a local Lipschitz constant are evaluated twice: with the analytic
bound over the containment set when the problem provides one (``certified``)
and with the largest subgradient norm seen along the run (``empirical``).
Reports say which one the verdict rests on.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import CompositeProblem, ContractError, Problem, as_vector
from .envelope import EnvelopeConfig, default_config, prox_solve, subsample_indices
from .schedules import beta_square_tail_bound

CONTAINMENT_KINDS = ("ball_A", "ball_C", "ball_G", "sublevel_B", "sublevel_D", "sublevel_H")
BOUNDS = ("thm11", "thm12", "thm31_generic", "thm31_sqrtlog", "cor32", "cor51a", "cor51b",
          "cor52", "cor53", "cor54a", "cor54b")
LN2_SQ = math.log(2.0) ** 2


def _rel_tol(scale: float) -> float:
    return 1e-12 * (1.0 + abs(scale))


# --- recursion -----------------------------------------------------------------


@dataclass(frozen=True)
class RecursionReport:
    residuals: np.ndarray
    max_abs_residual: float
    scale: float
    inequality_slack: np.ndarray | None = None

    @property
    def relative_residual(self) -> float:
        return self.max_abs_residual / self.scale

    @property
    def min_inequality_slack(self) -> float | None:
        if self.inequality_slack is None or len(self.inequality_slack) == 0:
            return None
        return float(self.inequality_slack.min())

    def holds(self, tol: float = 1e-8) -> bool:
        ok = self.max_abs_residual <= tol * self.scale
        slack = self.min_inequality_slack
        if slack is not None:
            ok = ok and slack >= -tol * self.scale
        return bool(ok)

    def to_dict(self) -> dict:
        return {"max_abs_residual": self.max_abs_residual, "scale": self.scale,
                "relative_residual": self.relative_residual,
                "min_inequality_slack": self.min_inequality_slack, "holds": self.holds()}


def check_recursion(trace, reference, rho: float = 0.0,
                    reference_value: float | None = None) -> RecursionReport:
    """Residuals of the one-step identity

        ||x^{k+1} - x||^2 = ||x^k - x||^2 - 2 alpha_k <g_k, x^k - x> + s_k^2

    with s_k = alpha_k ||g_k|| (= beta_k for SubGrad/SSM). When
    ``reference_value`` = f(x) is given, also the slack of the (weakly) convex
    inequality obtained by bounding <g_k, x^k - x> from below.
    """
    if trace.method not in ("subgrad", "tsm", "ssm"):
        raise ContractError(f"recursion identity is for single-step methods, not {trace.method}")
    x = as_vector(reference, trace.iterates.shape[1])
    diffs = trace.iterates - x
    dsq = np.einsum("ij,ij->i", diffs, diffs)
    K = trace.steps
    if K == 0:
        return RecursionReport(np.zeros(0), 0.0, float(1.0 + dsq.max()),
                               None if reference_value is None else np.zeros(0))
    g = trace.subgradients[:K]
    a = trace.alphas
    inner = np.einsum("ij,ij->i", g, diffs[:K])
    if trace.method == "tsm":
        step = a * trace.grad_norms[:K]
    else:
        step = np.where(a > 0, trace.betas, 0.0)
    res = dsq[1:] - dsq[:-1] + 2.0 * a * inner - step ** 2
    slack = None
    if reference_value is not None and trace.method != "ssm":
        gap = trace.values[:K] - reference_value - 0.5 * rho * dsq[:K]
        slack = dsq[:-1] - 2.0 * a * gap + step ** 2 - dsq[1:]
    return RecursionReport(res, float(np.max(np.abs(res))), float(1.0 + dsq.max()), slack)


# --- containment --------------------------------------------------------------


@dataclass(frozen=True)
class ContainmentSpec:
    """A ball {||x - reference||^2 <= radius_or_level} or an envelope sublevel set
    {f_lam(x) <= radius_or_level}."""

    kind: str
    radius_or_level: float
    reference: np.ndarray | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.kind not in CONTAINMENT_KINDS:
            raise ContractError(f"unknown containment kind {self.kind!r}")

    @property
    def is_ball(self) -> bool:
        return self.kind.startswith("ball")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "radius_or_level": self.radius_or_level}
        if self.lam is not None:
            out["lambda"] = self.lam
        return out


def _budget(trace, kind: str) -> float:
    sched = trace.config.schedule
    if kind in ("ball_A", "ball_G", "sublevel_B", "sublevel_H"):
        if sched.kind != "constant_horizon":
            raise ContractError(f"{kind} is defined for the constant-horizon rule")
        return sched.c ** 2
    return beta_square_tail_bound(sched)


def _envelope_cfg(problem, envelope_cfg):
    return envelope_cfg if envelope_cfg is not None else default_config(problem)


def containment_spec(kind: str, trace, problem: Problem,
                     envelope_cfg: EnvelopeConfig | None = None) -> ContainmentSpec:
    """Build the set from its defining formula given x^0, x*, c, the budget b, lam and n."""
    budget = _budget(trace, kind)
    if kind.startswith("ball"):
        if problem.optimal_point is None:
            raise ContractError(f"{kind} needs a known optimal point")
        xs = problem.optimal_point
        d0 = float(np.sum((trace.x0 - xs) ** 2))
        if kind == "ball_G":
            n = problem.component_count
            return ContainmentSpec(kind, d0 + budget / n, xs)
        return ContainmentSpec(kind, d0 + budget, xs)
    cfg = _envelope_cfg(problem, envelope_cfg)
    rep = prox_solve(problem, trace.x0, cfg)
    base = rep.envelope_value - rep.certificate_gap
    scale = 1.0 if kind == "sublevel_H" else 0.5
    return ContainmentSpec(kind, base + scale * budget / cfg.lam, None, cfg.lam)


@dataclass(frozen=True)
class EnvelopeProfile:
    """Envelope reports along a trace at ``indices`` (all iterates by default)."""

    indices: np.ndarray
    values: np.ndarray
    gradient_norms: np.ndarray
    gaps: np.ndarray
    low_confidence: np.ndarray

    @property
    def provisional(self) -> bool:
        return bool(np.any(self.low_confidence))


def envelope_profile(problem, trace, envelope_cfg=None, max_points: int | None = None,
                     upto: int | None = None) -> EnvelopeProfile:
    cfg = _envelope_cfg(problem, envelope_cfg)
    count = len(trace.iterates) if upto is None else min(upto, len(trace.iterates))
    idx = np.arange(count) if max_points is None else subsample_indices(count, max_points)
    reps = [prox_solve(problem, trace.iterates[k], cfg) for k in idx]
    return EnvelopeProfile(idx, np.array([r.envelope_value for r in reps]),
                           np.array([r.gradient_norm for r in reps]),
                           np.array([r.certificate_gap for r in reps]),
                           np.array([r.low_confidence for r in reps], dtype=bool))


@dataclass(frozen=True)
class ContainmentVerdict:
    kind: str
    holds: bool
    worst_margin: float
    worst_index: int
    provisional: bool
    bound: float
    margins: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "holds": self.holds, "worst_margin": self.worst_margin,
                "worst_index": self.worst_index, "provisional": self.provisional,
                "radius_or_level": self.bound}


def check_containment(trace, spec: ContainmentSpec, problem: Problem | None = None,
                      envelope_cfg: EnvelopeConfig | None = None,
                      profile: EnvelopeProfile | None = None) -> ContainmentVerdict:
    """Worst slack over the iterates (and ISM inner iterates for ``ball_G``).

    Sublevel margins use the certified upper value of f_lam(x^k), so a
    nonnegative margin is a proof of membership up to the inner certificates.
    """
    if spec.is_ball:
        pts = trace.iterates
        if spec.kind == "ball_G" and trace.inner_iterates is not None and trace.steps:
            pts = np.vstack([pts, trace.inner_iterates.reshape(-1, pts.shape[1])])
        margins = spec.radius_or_level - np.sum((pts - spec.reference) ** 2, axis=1)
        provisional = False
    else:
        if profile is None:
            if problem is None:
                raise ContractError("sublevel checks need the problem")
            cfg = envelope_cfg or EnvelopeConfig(spec.lam)
            profile = envelope_profile(problem, trace, cfg)
        margins = spec.radius_or_level - profile.values
        provisional = profile.provisional
    j = int(np.argmin(margins))
    worst = float(margins[j])
    return ContainmentVerdict(spec.kind, bool(worst >= -_rel_tol(spec.radius_or_level)), worst, j,
                              provisional, float(spec.radius_or_level), margins)


# --- Lipschitz constants --------------------------------------------------------


@dataclass(frozen=True)
class LipschitzEstimate:
    empirical_max_grad_norm: float
    analytic_bound: float | None = None

    @property
    def value(self) -> float:
        return self.empirical_max_grad_norm if self.analytic_bound is None else self.analytic_bound

    @property
    def empirical_only(self) -> bool:
        return self.analytic_bound is None

    @property
    def consistent(self) -> bool:
        if self.analytic_bound is None:
            return True
        return self.empirical_max_grad_norm <= self.analytic_bound * (1.0 + 1e-12)

    def to_dict(self) -> dict:
        return asdict(self) | {"empirical_only": self.empirical_only}


def _smooth(problem):
    return problem.smooth_part if isinstance(problem, CompositeProblem) else problem


def _empirical(traces) -> float:
    vals = []
    for tr in traces:
        if tr.inner_grad_norms is not None and len(tr.inner_grad_norms):
            vals.append(float(np.max(tr.inner_grad_norms)))
        vals.append(float(np.max(tr.grad_norms)))
    return max(vals)


def lipschitz_estimate(traces, problem: Problem, spec: ContainmentSpec,
                       component: bool = False) -> LipschitzEstimate:
    """Empirical max ||g|| along the run(s) plus the analytic sup over ``spec``'s set.

    Sublevel sets are enclosed in a ball about the origin: a point x with
    f_lam(x) <= s has prox point p with f(p) <= s, and ||x - p||^2 <= 2 lam (s - lb).
    """
    traces = traces if isinstance(traces, (list, tuple)) else [traces]
    f = _smooth(problem)
    emp = _empirical(traces)
    if spec.is_ball:
        center, radius = spec.reference, math.sqrt(max(spec.radius_or_level, 0.0))
    else:
        lb = problem.lower_bound
        r_sub = problem.sublevel_radius(spec.radius_or_level)
        if lb is None or r_sub is None:
            return LipschitzEstimate(emp)
        center = np.zeros(problem.dim)
        radius = math.sqrt(2.0 * spec.lam * max(spec.radius_or_level - lb, 0.0)) + r_sub
    bound = (f.component_lipschitz_bound(center, radius) if component
             else f.lipschitz_bound(center, radius))
    return LipschitzEstimate(emp, bound)


# --- rate and complexity bounds ----------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    bound: str
    evaluable: bool
    holds: bool
    observed_lhs: float | None = None
    certified_rhs: float | None = None
    empirical_rhs: float | None = None
    empirical: bool = False
    provisional: bool = False
    vacuous: bool = False
    worst_index: int | None = None
    lipschitz: LipschitzEstimate | None = None
    note: str = ""

    @property
    def holds_empirical(self) -> bool | None:
        if self.empirical_rhs is None or self.observed_lhs is None:
            return None
        return bool(self.observed_lhs <= self.empirical_rhs)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("bound", "evaluable", "holds", "observed_lhs",
                                             "certified_rhs", "empirical_rhs", "empirical",
                                             "provisional", "vacuous", "worst_index", "note")}
        out["holds_empirical"] = self.holds_empirical
        out["lipschitz"] = None if self.lipschitz is None else self.lipschitz.to_dict()
        return out


_METHOD = {"thm11": "subgrad", "thm12": "subgrad", "thm31_generic": "subgrad",
           "thm31_sqrtlog": "subgrad", "cor32": "subgrad", "cor51a": "tsm", "cor51b": "tsm",
           "cor52": "ssm", "cor53": "ism", "cor54a": "prox_subgrad", "cor54b": "prox_subgrad"}


def _not_evaluable(bound, note):
    return BoundReport(bound, False, False, note=note)


def _vacuous(bound):
    return BoundReport(bound, False, True, vacuous=True, note="no steps taken")


def _fstar(problem):
    if problem.optimal_value is not None:
        return problem.optimal_value
    return problem.lower_bound


def _per_k_report(bound, lhs, rhs_cert, rhs_emp, lip, empirical, note=""):
    # worst k by ratio; with lhs = 0 everywhere pick the first index
    ratio = np.where(rhs_cert > 0, lhs / np.where(rhs_cert > 0, rhs_cert, 1.0), np.inf)
    ratio = np.where(lhs <= 0, -np.inf, ratio)
    j = int(np.argmax(ratio))
    holds = bool(np.all(lhs <= rhs_cert * (1.0 + 1e-12) + 1e-15))
    return BoundReport(bound, True, holds, float(lhs[j]), float(rhs_cert[j]), float(rhs_emp[j]),
                       empirical, False, False, j, lip, note)


def evaluate_bound(traces, bound: str, lipschitz: LipschitzEstimate | None = None, *,
                   problem: Problem, envelope_cfg: EnvelopeConfig | None = None,
                   profile: EnvelopeProfile | None = None) -> BoundReport:
    """Evaluate one guarantee on a run (``cor52``: a list of runs over seeds).

    The certified right-hand side uses ``lipschitz.value``; ``empirical`` is
    set when that value is only the trajectory maximum of ||g||.
    """
    if bound not in BOUNDS:
        raise ContractError(f"unknown bound {bound!r}")
    traces = list(traces) if isinstance(traces, (list, tuple)) else [traces]
    tr = traces[0]
    if tr.method != _METHOD[bound]:
        return _not_evaluable(bound, f"{bound} applies to {_METHOD[bound]} runs")
    sched = tr.config.schedule
    if tr.config.steps == 0:
        return _vacuous(bound)

    if bound in ("thm11", "cor51a", "cor52", "cor53", "cor54a"):
        return _convex_horizon(traces, bound, lipschitz, problem, sched)
    if bound in ("thm12", "cor51b", "cor54b"):
        return _weak_horizon(tr, bound, lipschitz, problem, sched, envelope_cfg, profile)
    if bound in ("thm31_generic", "thm31_sqrtlog"):
        return _diminishing(tr, bound, lipschitz, problem, sched)
    return _quadratic_growth(tr, lipschitz, problem, sched)


def _convex_horizon(traces, bound, lipschitz, problem, sched):
    if sched.kind != "constant_horizon":
        return _not_evaluable(bound, "needs the constant-horizon rule")
    tr = traces[0]
    T, c = sched.horizon, sched.c
    if tr.config.steps < T + 1 and tr.halt_reason not in ("stationary", "optimal"):
        return _not_evaluable(bound, "run stopped before the horizon")
    if problem.optimal_point is None or problem.optimal_value is None:
        return _not_evaluable(bound, "needs f* and x*")
    xs, fs = problem.optimal_point, problem.optimal_value
    d0 = float(np.sum((tr.x0 - xs) ** 2))
    kind = "ball_G" if bound == "cor53" else "ball_A"
    if lipschitz is None:
        spec = containment_spec(kind, tr, problem)
        lipschitz = lipschitz_estimate(traces, problem, spec,
                                       component=bound in ("cor52", "cor53"))
    lhs = float(np.mean([problem.value(t.final_average) - fs for t in traces]))
    inner = d0 / c + (3.0 * c if bound == "cor53" else c)
    lr = tr.regularizer_lipschitz if bound == "cor54a" else 0.0
    factor = inner / (2.0 * math.sqrt(T + 1))
    cert = (lr + lipschitz.value) * factor
    emp = (lr + lipschitz.empirical_max_grad_norm) * factor
    note = "seed-averaged gap" if bound == "cor52" else ""
    return BoundReport(bound, True, bool(lhs <= cert * (1.0 + 1e-12) + 1e-15), lhs, cert, emp,
                       lipschitz.empirical_only, False, False, None, lipschitz, note)


def _weak_horizon(tr, bound, lipschitz, problem, sched, envelope_cfg, profile):
    if sched.kind != "constant_horizon":
        return _not_evaluable(bound, "needs the constant-horizon rule")
    T, c = sched.horizon, sched.c
    if tr.config.steps < T + 1 and tr.halt_reason not in ("stationary", "optimal"):
        return _not_evaluable(bound, "run stopped before the horizon")
    fs = _fstar(problem)
    if fs is None:
        return _not_evaluable(bound, "needs f* or a lower bound")
    cfg = _envelope_cfg(problem, envelope_cfg)
    rho = problem.weak_convexity
    cfg.check(rho)
    kind = "sublevel_H" if bound == "cor54b" else "sublevel_B"
    spec = containment_spec(kind, tr, problem, cfg)
    if lipschitz is None:
        lipschitz = lipschitz_estimate(tr, problem, spec)
    if profile is None:
        profile = envelope_profile(problem, tr, cfg, upto=T + 1)
    keep = profile.indices <= T
    lhs = float(np.min(profile.gradient_norms[keep]) ** 2)
    x0_rep = prox_solve(problem, tr.x0, cfg)
    env0 = x0_rep.envelope_value - x0_rep.certificate_gap
    if bound == "cor54b":
        lr = tr.regularizer_lipschitz
        num = env0 - fs + c ** 2 / cfg.lam
    else:
        lr = 0.0
        num = env0 - fs + c ** 2 / (2.0 * cfg.lam)
    factor = num / (c * (1.0 - cfg.lam * rho) * math.sqrt(T + 1))
    cert = (lr + lipschitz.value) * factor
    emp = (lr + lipschitz.empirical_max_grad_norm) * factor
    note = "" if problem.optimal_value is not None else "f* replaced by the known lower bound"
    return BoundReport(bound, True, bool(lhs <= cert), lhs, cert, emp, lipschitz.empirical_only,
                       profile.provisional or x0_rep.low_confidence, False, None, lipschitz, note)


def _diminishing(tr, bound, lipschitz, problem, sched):
    if bound == "thm31_sqrtlog" and sched.kind != "diminishing_sqrt_log":
        return _not_evaluable(bound, "needs the sqrt-log rule")
    if sched.kind == "constant_horizon":
        return _not_evaluable(bound, "needs a summable-square rule")
    if problem.optimal_point is None or problem.optimal_value is None:
        return _not_evaluable(bound, "needs f* and x*")
    xs, fs = problem.optimal_point, problem.optimal_value
    d0 = float(np.sum((tr.x0 - xs) ** 2))
    if lipschitz is None:
        lipschitz = lipschitz_estimate(tr, problem, containment_spec("ball_C", tr, problem))
    K = tr.steps
    b = tr.betas
    cum_b = np.cumsum(b)
    avgs = np.cumsum(b[:, None] * tr.iterates[:K], axis=0) / cum_b[:, None]
    lhs = np.array([problem.value(a) for a in avgs]) - fs
    k = np.arange(K)
    if bound == "thm31_generic":
        factor = (d0 + beta_square_tail_bound(sched)) / (2.0 * cum_b)
    else:
        c = sched.c
        factor = (d0 / (2.0 * c) + c / LN2_SQ) * np.log(k + 2.0) / np.sqrt(k + 1.0)
    return _per_k_report(bound, lhs, lipschitz.value * factor,
                         lipschitz.empirical_max_grad_norm * factor, lipschitz,
                         lipschitz.empirical_only)


def _quadratic_growth(tr, lipschitz, problem, sched):
    bound = "cor32"
    if sched.kind != "quadratic_growth":
        return _not_evaluable(bound, "needs the quadratic-growth rule")
    if tr.dist_to_opt is None:
        return _not_evaluable(bound, "needs a known solution set")
    if lipschitz is None:
        lipschitz = lipschitz_estimate(tr, problem, containment_spec("ball_C", tr, problem))
    L_hat, mu = sched.lipschitz_estimate, sched.mu
    K = tr.steps
    k = np.arange(K)
    lhs = tr.dist_to_opt[1:K + 1] ** 2
    rhs = np.full(K, L_hat ** 2) / (mu ** 2 * (k + 1.0))
    verified = lipschitz.empirical_max_grad_norm <= L_hat
    certified = lipschitz.analytic_bound is not None and lipschitz.analytic_bound <= L_hat
    rep = _per_k_report(bound, lhs, rhs, rhs, lipschitz, not certified)
    note = ("L_hat covers the analytic bound" if certified
            else "L_hat verified against max ||g|| along the run" if verified
            else "L_hat is below max ||g|| along the run")
    return BoundReport(bound, True, rep.holds and verified, rep.observed_lhs, rep.certified_rhs,
                       rep.empirical_rhs, not certified, False, False, rep.worst_index,
                       lipschitz, note)


# --- subgradient growth -------------------------------------------------------


@dataclass(frozen=True)
class GrowthReport:
    holds: bool
    worst_margin: float
    samples: int
    chain_holds: bool | None
    chain_worst: dict

    def to_dict(self) -> dict:
        return asdict(self)


def subgradient_growth_witness(problem: Problem, x_anchor, mu: float, *, samples: int = 100,
                               max_radius: float = 1e3, seed: int = 0) -> GrowthReport:
    """Check ||g(x)|| >= mu dist(x, X*) at the anchor and on random rays to ``max_radius``.

    Separately reports the chain mu_qg dist^2 <= f - f* <= <g, x - proj(x)> <= ||g|| dist
    using the problem's declared quadratic-growth modulus.
    """
    x_anchor = as_vector(x_anchor, problem.dim)
    if problem.optimal_point is None:
        raise ContractError("growth witness needs a known solution set")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((samples, problem.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.exp(rng.uniform(np.log(1e-3), np.log(max_radius), samples))
    radii[-1] = max_radius
    pts = np.vstack([x_anchor, x_anchor + radii[:, None] * dirs])
    worst = np.inf
    mu_qg = problem.quadratic_growth
    fs = problem.optimal_value
    links = {"growth": np.inf, "convexity": np.inf, "cauchy_schwarz": np.inf}
    for x in pts:
        g = problem.subgradient(x)
        gn = float(np.linalg.norm(g))
        dist = problem.distance_to_solution(x)
        worst = min(worst, (gn - mu * dist) / (1.0 + gn))
        if mu_qg is not None and fs is not None:
            gap = problem.value(x) - fs
            inner = float(g @ (x - problem.project_to_solution(x)))
            scale = 1.0 + abs(gap) + gn * dist
            links["growth"] = min(links["growth"], (gap - mu_qg * dist ** 2) / scale)
            links["convexity"] = min(links["convexity"], (inner - gap) / scale)
            links["cauchy_schwarz"] = min(links["cauchy_schwarz"], (gn * dist - inner) / scale)
    chain = None
    if mu_qg is not None and fs is not None:
        chain = all(v >= -1e-9 for v in links.values())
    return GrowthReport(bool(worst >= -1e-12), float(worst), len(pts), chain,
                        {k: float(v) for k, v in links.items()})
