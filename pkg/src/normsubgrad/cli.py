"""Command line: ``normsubgrad run|sweep|verify CONFIG``.

Exit codes: 0 success, 1 a verdict failed (verify/sweep), 2 schema violation,
3 solver or contract configuration error. Errors go to stderr as one JSON
object.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .core import ConfigurationError, ContractError
from .experiment import SchemaViolation, load_config, run_document, sweep_document

OUT_DIR_ENV = "NORMSUBGRAD_OUT_DIR"


def _error(kind: str, message: str, **extra) -> None:
    print(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="normsubgrad")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "execute runs and write traces"),
                       ("sweep", "run across horizons and fit the log-log slope"),
                       ("verify", "run and check every applicable guarantee")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config")
        p.add_argument("--out-dir", default=os.environ.get(OUT_DIR_ENV, "runs"))
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--envelope", action="store_true",
                       help="fill the envelope_grad_norm trace column")
    return parser


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.6g}"


def _cmd_run(doc, args) -> int:
    for diag in run_document(doc, args.out_dir, workers=args.workers, envelope_column=args.envelope):
        print(f"{diag['name']}: wrote outputs")
    return 0


def _cmd_verify(doc, args) -> int:
    results = run_document(doc, args.out_dir, workers=args.workers, envelope_column=args.envelope)
    first = None
    for diag in results:
        for c in diag["checks"]:
            if c.get("vacuous"):
                status = "VACUOUS"
            elif c.get("provisional"):
                status = "PROVISIONAL"
            else:
                status = "PASS" if c["holds"] else "FAIL"
            print(f"{diag['name']} {c['name']}: {status}")
        if first is None and diag["first_failure"] is not None:
            first = (diag["name"], diag["first_failure"])
    if first is not None:
        _error("verdict_failed", f"{first[1]} failed in {first[0]}", run=first[0], bound=first[1])
        return 1
    return 0


def _cmd_sweep(doc, args) -> int:
    result = sweep_document(doc, args.out_dir, workers=args.workers, envelope_column=args.envelope)
    print(f"{'T':>8} {result['quantity']:>26} {'certified_rhs':>14} holds")
    for r in result["rows"]:
        print(f"{r['T']:>8} {_fmt(r['observed']):>26} {_fmt(r['certified_rhs']):>14} {r['holds']}")
    slope = "exact" if result["slope_status"] == "exact" else _fmt(result["slope"])
    print(f"slope: {slope} ({result['slope_status']})")
    return 0 if result["all_hold"] else 1


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "verify": _cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = load_config(args.config)
    except SchemaViolation as exc:
        _error("schema", exc.message, path=exc.path)
        return 2
    except OSError as exc:
        _error("io", str(exc))
        return 2
    try:
        return COMMANDS[args.command](doc, args)
    except SchemaViolation as exc:
        _error("schema", exc.message, path=exc.path)
        return 2
    except (ConfigurationError, ContractError) as exc:
        _error("configuration", str(exc))
        return 3


if __name__ == "__main__":
    sys.exit(main())
