"""SubGrad, TSM, SSM, ISM and ProxSubGrad with normalized step sizes.

Every method logs a ``Trace``. Steps are taken at x^0, ..., x^{K-1}; the trace
holds K + 1 iterates. For a constant-horizon schedule with horizon T a full
run takes T + 1 steps and the certified average is over x^0, ..., x^T.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CompositeProblem, ConfigurationError, Problem, as_vector
from .schedules import StepSchedule, beta, beta_square_tail_bound, betas

METHODS = ("subgrad", "tsm", "ssm", "ism", "prox_subgrad")
AVERAGING = ("auto", "uniform", "beta_weighted", "none")
HALT_REASONS = ("horizon", "stationary", "optimal", "budget")


@dataclass(frozen=True)
class SolverConfig:
    method: str
    schedule: StepSchedule
    max_iterations: int | None = None
    seed: int | None = None
    averaging: str = "auto"
    stop_on_zero_grad: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.averaging not in AVERAGING:
            raise ConfigurationError(f"unknown averaging {self.averaging!r}")
        if self.method == "ssm" and self.seed is None:
            raise ConfigurationError("ssm requires a seed")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ConfigurationError("max_iterations must be nonnegative")
        if self.max_iterations is None and self.schedule.length is None:
            raise ConfigurationError("unbounded schedules need max_iterations")

    @property
    def steps(self) -> int:
        length = self.schedule.length
        if self.max_iterations is None:
            return length
        return self.max_iterations if length is None else min(length, self.max_iterations)

    @property
    def averaging_mode(self) -> str:
        if self.averaging != "auto":
            return self.averaging
        if self.schedule.kind in ("constant_horizon", "custom_sequence"):
            return "uniform"
        return "beta_weighted"

    def to_dict(self) -> dict:
        out = {"method": self.method, "schedule": self.schedule.to_dict(),
               "averaging": self.averaging, "stop_on_zero_grad": self.stop_on_zero_grad}
        if self.max_iterations is not None:
            out["max_iterations"] = self.max_iterations
        if self.seed is not None:
            out["seed"] = self.seed
        return out


@dataclass
class Trace:
    """Per-iteration log of one run.

    ``values`` holds f(x^k) (phi(x^k) for ProxSubGrad). ``subgradients`` and
    ``grad_norms`` hold the vector that drove step k: the component subgradient
    for SSM, the full subgradient otherwise; the final row is the full
    subgradient at the last iterate. ISM logs its inner points separately.
    """

    method: str
    config: SolverConfig
    iterates: np.ndarray
    values: np.ndarray
    subgradients: np.ndarray
    grad_norms: np.ndarray
    betas: np.ndarray
    alphas: np.ndarray
    halt_reason: str
    averages: np.ndarray
    dist_to_opt: np.ndarray | None = None
    indices: np.ndarray | None = None
    inner_iterates: np.ndarray | None = None
    inner_grad_norms: np.ndarray | None = None
    regularizer_lipschitz: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.betas)

    @property
    def x0(self) -> np.ndarray:
        return self.iterates[0]

    @property
    def final_average(self) -> np.ndarray:
        """x~ the rate bounds are stated for: the average over the step-bearing iterates.

        After an exact stationary/optimal halt at x^k the remaining planned
        iterates would all equal x^k, so they are padded in with their weights.
        """
        k = self.steps
        planned = self.config.steps
        mode = self.config.averaging_mode
        if mode == "none":
            return self.iterates[-1]
        if self.halt_reason not in ("stationary", "optimal"):
            return self.averages[max(k - 1, 0)]
        if planned <= k:
            return self.averages[k]
        if mode == "uniform":
            w_head, w_tail = np.ones(k), float(planned - k)
        else:
            w_head = self.betas
            w_tail = float(np.sum(betas(self.config.schedule, planned)[k:]))
        head = w_head @ self.iterates[:k] if k else np.zeros_like(self.iterates[0])
        return (head + w_tail * self.iterates[k]) / (np.sum(w_head) + w_tail)

    @property
    def best_value(self) -> float:
        return float(np.min(self.values))

    def summary(self) -> dict:
        return {
            "method": self.method,
            "halt_reason": self.halt_reason,
            "iterations": self.steps,
            "best_value": self.best_value,
            "final_value": float(self.values[-1]),
            "final_average": self.final_average.tolist(),
        }


def _running_averages(iterates, betas, schedule, mode):
    count = len(iterates)
    if mode == "none":
        return np.array(iterates, copy=True)
    if mode == "uniform":
        weights = np.ones(count)
    else:
        weights = np.empty(count)
        weights[:len(betas)] = betas
        if count > len(betas):
            try:
                weights[len(betas):] = beta(schedule, len(betas))
            except IndexError:
                weights[len(betas):] = betas[-1] if len(betas) else 1.0
    cum = np.cumsum(weights[:, None] * iterates, axis=0)
    return cum / np.cumsum(weights)[:, None]


def _finish(problem, config, xs, vals, gs, gnorms, betas, alphas, halt, **kw) -> Trace:
    iterates = np.array(xs)
    b = np.asarray(betas, dtype=np.float64)
    dist = None
    if problem.optimal_point is not None:
        dist = np.array([problem.distance_to_solution(x) for x in iterates])
    averages = _running_averages(iterates, b, config.schedule, config.averaging_mode)
    return Trace(config.method, config, iterates, np.asarray(vals, dtype=np.float64),
                 np.array(gs), np.asarray(gnorms, dtype=np.float64), b,
                 np.asarray(alphas, dtype=np.float64), halt, averages, dist, **kw)


def _check_method(config: SolverConfig, method: str):
    if config.method != method:
        raise ConfigurationError(f"config is for {config.method!r}, not {method!r}")


def _horizon_reason(config: SolverConfig) -> str:
    length = config.schedule.length
    if length is not None and config.steps == length:
        return "horizon"
    return "budget"


def run_subgrad(problem: Problem, config: SolverConfig, x0) -> Trace:
    _check_method(config, "subgrad")
    x = as_vector(x0, problem.dim).copy()
    xs, vals, gs, gnorms, bs, als = [], [], [], [], [], []
    halt = _horizon_reason(config)
    for k in range(config.steps + 1):
        val, g = problem.oracle(x)
        gn = float(np.linalg.norm(g))
        xs.append(x.copy()); vals.append(val); gs.append(g); gnorms.append(gn)
        if k == config.steps:
            break
        if gn == 0.0 and config.stop_on_zero_grad:
            halt = "stationary"
            break
        b = beta(config.schedule, k)
        a = b / gn if gn > 0 else 0.0
        bs.append(b); als.append(a)
        x = x - a * g
    return _finish(problem, config, xs, vals, gs, gnorms, bs, als, halt)


def truncated_step_length(value: float, grad_norm: float, alpha: float) -> float:
    """Minimiser of the truncated-model subproblem, as a multiple of g.

    Along -g the model max{f + <g, x - x^k>, 0} decreases linearly until it
    hits 0 at t = f/||g||^2 and is flat afterwards, so the strongly convex
    subproblem is solved by t = min(alpha, f/||g||^2).
    """
    if grad_norm == 0.0:
        return 0.0
    return min(alpha, max(value, 0.0) / grad_norm ** 2)


def run_tsm(problem: Problem, config: SolverConfig, x0) -> Trace:
    _check_method(config, "tsm")
    if problem.lower_bound is None or problem.lower_bound != 0.0:
        raise ConfigurationError("TSM needs a problem certified nonnegative (lower_bound = 0)")
    x = as_vector(x0, problem.dim).copy()
    xs, vals, gs, gnorms, bs, als = [], [], [], [], [], []
    truncated = []
    halt = _horizon_reason(config)
    for k in range(config.steps + 1):
        val, g = problem.oracle(x)
        gn = float(np.linalg.norm(g))
        xs.append(x.copy()); vals.append(val); gs.append(g); gnorms.append(gn)
        if k == config.steps:
            break
        if val == 0.0:
            halt = "optimal"
            break
        if gn == 0.0 and config.stop_on_zero_grad:
            halt = "stationary"
            break
        b = beta(config.schedule, k)
        a = b / gn
        t = truncated_step_length(val, gn, a)
        bs.append(b); als.append(t)
        truncated.append(t < a)
        x = x - t * g
    tr = _finish(problem, config, xs, vals, gs, gnorms, bs, als, halt)
    tr.extras["truncated"] = np.array(truncated, dtype=bool)
    return tr


def _require_finite_sum(problem: Problem):
    if not problem.component_count:
        raise ConfigurationError(f"{problem.name} has no finite-sum structure")


def run_ssm(problem: Problem, config: SolverConfig, x0, indices=None) -> Trace:
    """Stochastic subgradient method with uniform component sampling.

    ``indices`` (0-based) overrides the sampled stream, e.g. to replay a path.
    A zero component subgradient skips the step unless the full subgradient
    also vanishes, in which case the run halts as stationary.
    """
    _check_method(config, "ssm")
    _require_finite_sum(problem)
    n = problem.component_count
    steps = config.steps
    if indices is None:
        rng = np.random.default_rng(config.seed)
        indices = rng.integers(0, n, size=steps)
    else:
        indices = np.asarray(indices, dtype=np.int64)
        if len(indices) < steps:
            raise ConfigurationError("index override shorter than the run")
    x = as_vector(x0, problem.dim).copy()
    xs, vals, gs, gnorms, bs, als, used = [], [], [], [], [], [], []
    halt = _horizon_reason(config)
    for k in range(steps + 1):
        if k == steps:
            val, g = problem.oracle(x)
            xs.append(x.copy()); vals.append(val); gs.append(g)
            gnorms.append(float(np.linalg.norm(g)))
            break
        i = int(indices[k])
        gi = problem.component_subgradient(i, x)
        gn = float(np.linalg.norm(gi))
        val = problem.value(x)
        if gn == 0.0:
            full = problem.subgradient(x)
            if not np.any(full) and config.stop_on_zero_grad:
                xs.append(x.copy()); vals.append(val); gs.append(full); gnorms.append(0.0)
                halt = "stationary"
                break
        xs.append(x.copy()); vals.append(val); gs.append(gi); gnorms.append(gn)
        b = beta(config.schedule, k)
        a = b / gn if gn > 0 else 0.0
        bs.append(b); als.append(a); used.append(i)
        x = x - a * gi
    return _finish(problem, config, xs, vals, gs, gnorms, bs, als, halt,
                   indices=np.array(used, dtype=np.int64))


def run_ism(problem: Problem, config: SolverConfig, x0) -> Trace:
    """Incremental subgradient method: n sequential component steps per outer step.

    Each inner step has length schedule.beta(k) / n, so ``c`` keeps its meaning
    from the constant-horizon rule. Zero inner subgradients skip that component.
    """
    _check_method(config, "ism")
    _require_finite_sum(problem)
    n = problem.component_count
    x = as_vector(x0, problem.dim).copy()
    xs, vals, gs, gnorms, bs, als = [], [], [], [], [], []
    inner, inner_norms = [], []
    halt = _horizon_reason(config)
    for k in range(config.steps + 1):
        val, g = problem.oracle(x)
        xs.append(x.copy()); vals.append(val); gs.append(g)
        gnorms.append(float(np.linalg.norm(g)))
        if k == config.steps:
            break
        b = beta(config.schedule, k) / n
        z = x.copy()
        moved = False
        for i in range(n):
            gi = problem.component_subgradient(i, z)
            gn = float(np.linalg.norm(gi))
            inner_norms.append(gn)
            if gn > 0.0:
                z = z - (b / gn) * gi
                moved = True
            inner.append(z.copy())
        bs.append(b); als.append(np.nan)
        x = z
        if not moved and config.stop_on_zero_grad:
            val, g = problem.oracle(x)
            xs.append(x.copy()); vals.append(val); gs.append(g)
            gnorms.append(float(np.linalg.norm(g)))
            halt = "stationary"
            break
    return _finish(problem, config, xs, vals, gs, gnorms, bs, als, halt,
                   inner_iterates=np.array(inner).reshape(-1, n, problem.dim),
                   inner_grad_norms=np.array(inner_norms).reshape(-1, n))


def check_prox_schedule(problem: CompositeProblem, config: SolverConfig):
    """Enforce beta_k <= L_r / (2 eta) when the regularizer is weakly convex."""
    eta = problem.regularizer_weak_convexity
    if eta <= 0.0:
        return
    cap = problem.regularizer_lipschitz / (2.0 * eta)
    sched = config.schedule
    if sched.kind == "constant_horizon":
        worst = beta(sched, 0)
    elif sched.kind == "custom_sequence":
        worst = max(sched.sequence)
    else:
        worst = beta(sched, 0)  # the remaining rules are decreasing in k
    if worst > cap:
        raise ConfigurationError(
            f"beta_k = {worst:.6g} exceeds the cap L_r/(2 eta) = {cap:.6g}")


def run_prox_subgrad(problem: CompositeProblem, config: SolverConfig, x0) -> Trace:
    _check_method(config, "prox_subgrad")
    if not isinstance(problem, CompositeProblem):
        raise ConfigurationError("prox_subgrad needs a CompositeProblem")
    f, r = problem.smooth_part, problem.regularizer
    lr = problem.regularizer_lipschitz
    x = as_vector(x0, problem.dim).copy()
    if not r.in_domain(x):
        raise ConfigurationError("x0 lies outside dom r")
    check_prox_schedule(problem, config)
    xs, vals, gs, gnorms, bs, als, fvals = [], [], [], [], [], [], []
    halt = _horizon_reason(config)
    for k in range(config.steps + 1):
        fv, g = f.oracle(x)
        gn = float(np.linalg.norm(g))
        xs.append(x.copy()); fvals.append(fv); vals.append(fv + r.value(x))
        gs.append(g); gnorms.append(gn)
        if k == config.steps:
            break
        if gn + lr == 0.0:
            if config.stop_on_zero_grad:
                halt = "stationary"
                break
        b = beta(config.schedule, k)
        a = b / (gn + lr) if gn + lr > 0 else 0.0
        bs.append(b); als.append(a)
        x = np.asarray(r.prox(a, x - a * g), dtype=np.float64).reshape(problem.dim)
    tr = _finish(problem, config, xs, vals, gs, gnorms, bs, als, halt, regularizer_lipschitz=lr)
    tr.extras["smooth_values"] = np.array(fvals)
    return tr


RUNNERS = {
    "subgrad": run_subgrad,
    "tsm": run_tsm,
    "ssm": run_ssm,
    "ism": run_ism,
    "prox_subgrad": run_prox_subgrad,
}


def run(problem, config: SolverConfig, x0) -> Trace:
    return RUNNERS[config.method](problem, config, x0)


def square_sum_budget(config: SolverConfig) -> float:
    return beta_square_tail_bound(config.schedule)
