"""Config-driven runs, verification and horizon sweeps.

A config is one JSON document (schema in ``config_schema.json``) describing
a problem, a method, a schedule and x0, optionally a list of checks, a sweep
and a post-hoc step replay. A document with a ``runs`` list is a matrix of
such configs. Everything here is deterministic given the document.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .core import CompositeProblem, Problem
from .diagnostics import (BOUNDS, check_containment, check_recursion, containment_spec,
                          envelope_profile, evaluate_bound)
from .envelope import EnvelopeConfig, default_lambda
from .problems import build_problem, regularizer_from_dict
from .schedules import StepSchedule, betas, custom_sequence
from .solvers import SolverConfig, run
from .traceio import atomic_write, write_json, write_trace_csv

SCHEMA = json.loads(resources.files(__package__).joinpath("config_schema.json").read_text())
CHECK_ORDER = ("recursion", "ball_A", "ball_C", "ball_G", "sublevel_B", "sublevel_D",
               "sublevel_H") + BOUNDS


class SchemaViolation(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


def validate(doc) -> None:
    key = "matrix" if isinstance(doc, dict) and "runs" in doc else "run"
    schema = dict(SCHEMA, **{"$ref": f"#/$defs/{key}"})
    errors = list(jsonschema.Draft202012Validator(schema).iter_errors(doc))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise SchemaViolation(err.json_path, err.message)


def load_config(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"invalid JSON: {exc}") from exc
    validate(doc)
    doc.setdefault("name", path.stem)
    return doc


def expand(doc: dict) -> list[dict]:
    """Run configs of a document: the matrix entries or the document itself."""
    if "runs" not in doc:
        return [doc]
    out = []
    for i, entry in enumerate(doc["runs"]):
        entry = dict(entry)
        entry.setdefault("name", f"run{i:03d}")
        out.append(entry)
    return out


# --- building --------------------------------------------------------------------


def make_problem(spec: dict) -> Problem:
    if spec["name"] == "composite":
        return CompositeProblem(make_problem(spec["smooth_part"]),
                                regularizer_from_dict(spec["regularizer"]),
                                optimal_value=spec.get("optimal_value"),
                                optimal_point=spec.get("optimal_point"))
    return build_problem(spec)


def make_x0(spec, problem: Problem) -> np.ndarray:
    if isinstance(spec, str):
        return np.zeros(problem.dim)
    if isinstance(spec, dict):
        rng = np.random.default_rng(spec["gaussian_seed"])
        return spec.get("scale", 1.0) * rng.standard_normal(problem.dim)
    return np.asarray(spec, dtype=np.float64)


def solver_config(cfg: dict, seed: int | None = None) -> SolverConfig:
    return SolverConfig(cfg["method"], StepSchedule.from_dict(cfg["schedule"]),
                        max_iterations=cfg.get("max_iterations"),
                        seed=cfg.get("seed") if seed is None else seed,
                        averaging=cfg.get("averaging", "auto"),
                        stop_on_zero_grad=cfg.get("stop_on_zero_grad", True))


def envelope_config(cfg: dict, problem: Problem) -> EnvelopeConfig:
    spec = cfg.get("envelope", {})
    return EnvelopeConfig(spec.get("lambda", default_lambda(problem)),
                          spec.get("inner_tolerance", 1e-9), spec.get("inner_budget", 20000))


def default_checks(method: str, kind: str, problem: Problem) -> list[str]:
    convex = problem.weak_convexity == 0.0
    known = problem.optimal_point is not None and problem.optimal_value is not None
    out = ["recursion"] if method in ("subgrad", "tsm", "ssm") else []
    if kind != "constant_horizon":
        if method == "subgrad" and convex and known:
            out += {"diminishing_sqrt_log": ["ball_C", "thm31_generic", "thm31_sqrtlog"],
                    "quadratic_growth": ["ball_C", "cor32"]}.get(kind, ["ball_C", "thm31_generic"])
        elif method == "subgrad" and not convex and kind == "diminishing_sqrt_log":
            out.append("sublevel_D")
        return out
    if convex and known:
        out += {"subgrad": ["ball_A", "thm11"], "tsm": ["ball_A", "cor51a"],
                "ssm": ["ball_A", "cor52"], "ism": ["ball_G", "cor53"],
                "prox_subgrad": ["ball_A", "cor54a"]}[method]
    elif not convex:
        out += {"subgrad": ["sublevel_B", "thm12"], "tsm": ["sublevel_B", "cor51b"],
                "prox_subgrad": ["sublevel_H", "cor54b"]}.get(method, [])
    return out


# --- execution ----------------------------------------------------------------


@dataclass
class RunOutcome:
    name: str
    config: dict
    problem: Problem
    traces: list
    checks: list
    vacuous: bool
    envelope_norms: dict | None = None

    @property
    def first_failure(self) -> str | None:
        for c in self.checks:
            if not c["holds"] and not c.get("provisional", False):
                return c["name"]
        return None

    @property
    def all_hold(self) -> bool:
        return self.first_failure is None

    def check(self, name: str) -> dict | None:
        return next((c for c in self.checks if c["name"] == name), None)

    def diagnostics(self) -> dict:
        return {"name": self.name, "vacuous": self.vacuous, "checks": self.checks,
                "all_hold": self.all_hold, "first_failure": self.first_failure,
                "provisional": any(c.get("provisional", False) for c in self.checks)}

    def summary(self) -> dict:
        p = self.problem
        runs = []
        for tr in self.traces:
            s = tr.summary()
            if tr.config.seed is not None:
                s["seed"] = tr.config.seed
            runs.append(s)
        return {"name": self.name, "version": __version__, "config": self.config,
                "problem": {"name": p.name, "dim": p.dim, "weak_convexity": p.weak_convexity,
                            "optimal_value": p.optimal_value},
                "runs": runs, "diagnostics": self.diagnostics()}


def _run_traces(cfg, problem, x0):
    declared = solver_config(cfg)
    seeds = cfg.get("seeds") if cfg["method"] == "ssm" else None
    configs = [solver_config(cfg, s) for s in seeds] if seeds else [declared]
    traces = []
    for sc in configs:
        scale = cfg.get("replay", {}).get("beta_scale")
        if scale is None:
            traces.append(run(problem, sc, x0))
            continue
        # replay with rescaled steps, then attribute the run to the declared schedule
        seq = custom_sequence(scale * betas(sc.schedule, sc.steps)) if sc.steps else sc.schedule
        replay = SolverConfig(sc.method, seq, max_iterations=sc.steps, seed=sc.seed,
                              averaging=sc.averaging_mode, stop_on_zero_grad=sc.stop_on_zero_grad)
        tr = run(problem, replay, x0)
        tr.config = sc
        traces.append(tr)
    return declared, traces


def _needs_envelope(names) -> bool:
    return any(n.startswith("sublevel") or n in ("thm12", "cor51b", "cor54b") for n in names)


def _evaluate(name, traces, problem, env_cfg, profile):
    tr = traces[0]
    if name == "recursion":
        if tr.method not in ("subgrad", "tsm", "ssm"):
            return {"name": name, "holds": False, "evaluable": False,
                    "note": f"no single-step identity for {tr.method}"}
        ref = problem.optimal_point if problem.optimal_point is not None else np.zeros(problem.dim)
        reps = [check_recursion(t, ref, problem.weak_convexity, problem.value(ref)) for t in traces]
        worst = max(reps, key=lambda r: r.relative_residual)
        return {"name": name, "holds": all(r.holds() for r in reps), **worst.to_dict()}
    if name in BOUNDS:
        target = traces if name == "cor52" else tr
        rep = evaluate_bound(target, name, problem=problem, envelope_cfg=env_cfg, profile=profile)
        return {"name": name, **rep.to_dict()}
    verdicts = []
    for t in traces:
        spec = containment_spec(name, t, problem, env_cfg)
        prof = profile if t is tr else None
        verdicts.append(check_containment(t, spec, problem, env_cfg, prof))
    worst = min(verdicts, key=lambda v: v.worst_margin)
    return {"name": name, "spec": spec.to_dict(), **worst.to_dict(),
            "holds": all(v.holds for v in verdicts)}


def execute(cfg: dict, *, envelope_column: bool = False) -> RunOutcome:
    problem = make_problem(cfg["problem"])
    x0 = make_x0(cfg["x0"], problem)
    declared, traces = _run_traces(cfg, problem, x0)
    names = cfg.get("verify") or default_checks(declared.method, declared.schedule.kind, problem)
    names = sorted(set(names), key=CHECK_ORDER.index)
    want_column = envelope_column or cfg.get("envelope", {}).get("trace_column", False)
    if declared.steps == 0:
        checks = [{"name": n, "holds": True, "vacuous": True} for n in names]
        return RunOutcome(cfg["name"], cfg, problem, traces, checks, True)
    env_cfg = profile = None
    if _needs_envelope(names) or want_column:
        env_cfg = envelope_config(cfg, problem)
        profile = envelope_profile(problem, traces[0], env_cfg,
                                   cfg.get("envelope", {}).get("max_points"))
    checks = [_evaluate(n, traces, problem, env_cfg, profile) for n in names]
    norms = None
    if want_column:
        norms = {int(k): float(v) for k, v in zip(profile.indices, profile.gradient_norms)}
    return RunOutcome(cfg["name"], cfg, problem, traces, checks, False, norms)


def write_outcome(outcome: RunOutcome, out_dir) -> Path:
    out = Path(out_dir) / outcome.name
    write_trace_csv(out / "trace.csv", outcome.traces[0], outcome.envelope_norms)
    for tr in outcome.traces[1:]:
        write_trace_csv(out / f"trace_seed={tr.config.seed}.csv", tr)
    write_json(out / "summary.json", outcome.summary())
    write_json(out / "diagnostics.json", outcome.diagnostics())
    return out


def _execute_and_write(args):
    cfg, out_dir, envelope_column = args
    outcome = execute(cfg, envelope_column=envelope_column)
    write_outcome(outcome, out_dir)
    return outcome.diagnostics()


def _pool_map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def run_document(doc: dict, out_dir, *, workers: int = 1, envelope_column: bool = False) -> list:
    """Execute every run of a document, writing outputs; returns diagnostics in order."""
    base = Path(out_dir) / doc["name"] if "runs" in doc else Path(out_dir)
    jobs = [(cfg, base, envelope_column) for cfg in expand(doc)]
    return _pool_map(_execute_and_write, jobs, workers)


# --- sweeps ---------------------------------------------------------------------


def _primary_bound(cfg, problem) -> str | None:
    names = default_checks(cfg["method"], cfg["schedule"]["kind"], problem)
    bounds = [n for n in names if n in BOUNDS]
    return bounds[-1] if bounds else None


def _sweep_entry(args):
    cfg, out_dir, envelope_column, horizon = args
    outcome = execute(cfg, envelope_column=envelope_column)
    write_outcome(outcome, out_dir)
    tr = outcome.traces[0]
    bound = cfg["verify"][0] if cfg.get("verify") else None
    rep = outcome.check(bound) if bound else None
    row = {"T": horizon, "observed": None, "certified_rhs": None, "holds": None,
           "halt_reason": tr.halt_reason}
    if outcome.vacuous or rep is None or not rep.get("evaluable", True):
        row["holds"] = True if outcome.vacuous else None
        return row
    kind = cfg["schedule"]["kind"]
    if kind == "quadratic_growth":
        sched = tr.config.schedule
        K = tr.steps
        row["observed"] = float(tr.dist_to_opt[K] ** 2) if K else 0.0
        row["certified_rhs"] = sched.lipschitz_estimate ** 2 / (sched.mu ** 2 * max(K, 1))
    elif kind == "diminishing_sqrt_log":
        K = tr.steps
        b = tr.betas
        avg = (b @ tr.iterates[:K]) / b.sum()
        row["observed"] = float(outcome.problem.value(avg) - outcome.problem.optimal_value)
        c = tr.config.schedule.c
        d0 = float(np.sum((tr.x0 - outcome.problem.optimal_point) ** 2))
        lip = rep["lipschitz"]
        L = lip["analytic_bound"] if lip["analytic_bound"] is not None else lip["empirical_max_grad_norm"]
        row["certified_rhs"] = L * (d0 / (2 * c) + c / math.log(2.0) ** 2) * math.log(K + 1) / math.sqrt(K)
    else:
        row["observed"] = rep["observed_lhs"]
        row["certified_rhs"] = rep["certified_rhs"]
    row["holds"] = rep["holds"]
    return row


def fit_slope(xs, ys) -> tuple[float | None, str]:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray([np.nan if y is None else y for y in ys], dtype=np.float64)
    if np.all(ys == 0.0):
        return None, "exact"
    keep = np.isfinite(ys) & (ys > 0.0) & (xs > 0)
    if keep.sum() < 2:
        return None, "degenerate"
    slope = float(np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)[0])
    return slope, "fitted" if keep.all() else "partial"


def sweep_document(doc: dict, out_dir, *, workers: int = 1, envelope_column: bool = False) -> dict:
    if "runs" in doc or "sweep" not in doc:
        raise SchemaViolation("$.sweep", "sweep needs a single run config with a sweep section")
    sweep = doc["sweep"]
    problem = make_problem(doc["problem"])
    bound = (doc.get("verify") or [None])[0] or _primary_bound(doc, problem)
    base = Path(out_dir) / doc["name"]
    jobs = []
    values = sweep.get("horizons") or sweep.get("iterations")
    for v in values:
        cfg = {k: val for k, val in doc.items() if k != "sweep"}
        cfg["schedule"] = dict(doc["schedule"])
        if "horizons" in sweep:
            cfg["schedule"]["T"] = int(v)
            cfg["name"] = f"T={v}"
        else:
            cfg["max_iterations"] = int(v)
            cfg["name"] = f"K={v}"
        if "seeds" in sweep:
            cfg["seeds"] = sweep["seeds"]
        cfg["verify"] = [bound] if bound else []
        jobs.append((cfg, base, envelope_column, int(v)))
    rows = _pool_map(_sweep_entry, jobs, workers)
    slope, status = fit_slope([r["T"] for r in rows], [r["observed"] for r in rows])
    result = {"name": doc["name"], "version": __version__, "bound": bound,
              "quantity": _quantity_name(doc, problem), "rows": rows, "slope": slope,
              "slope_status": status, "all_hold": all(r["holds"] is not False for r in rows)}
    write_json(base / "sweep.json", result)
    lines = ["T,observed,certified_rhs,holds"]
    for r in rows:
        lines.append(",".join("" if r[k] is None else (repr(r[k]) if k != "holds" else str(r[k]).lower())
                              for k in ("T", "observed", "certified_rhs", "holds")))
    atomic_write(base / "sweep.csv", "\n".join(lines) + "\n")
    return result


def _quantity_name(doc, problem) -> str:
    kind = doc["schedule"]["kind"]
    if kind == "quadratic_growth":
        return "dist_sq"
    if problem.weak_convexity > 0:
        return "min_envelope_grad_norm_sq"
    return "gap"
