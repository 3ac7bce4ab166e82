"""Command line entry point: ``qerkit run | fit | report``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiment as ex


def _load_spec(path: str, overrides: list[str]) -> ex.ExperimentSpec:
    with open(path) as fh:
        d = json.load(fh)
    for item in overrides or []:
        key, _, value = item.partition("=")
        if not key or not _:
            raise SystemExit(f"bad override {item!r}; expected key=value")
        try:
            d[key] = json.loads(value)
        except json.JSONDecodeError:
            d[key] = value
    return ex.ExperimentSpec.from_dict(d)


def _run(spec: ex.ExperimentSpec, out: Path, workers: int | None) -> bool:
    result = ex.run_sweep(spec, workers)
    paths = ex.emit_report(result, out)
    for p in paths:
        print(p)
    for r in result.errors:
        print(f"row failed at {r.noise:.6g} [{r.method}]: {r.error}", file=sys.stderr)
    return result.ok


def cmd_run(args) -> int:
    spec = _load_spec(args.spec, args.set)
    return 0 if _run(spec, Path(args.out), args.workers) else 1


def cmd_fit(args) -> int:
    rows = ex.read_csv(args.csv)
    sel = [r for r in rows if r["method"] == args.method and r[args.column] != ""]
    if not sel:
        print(f"no rows for method {args.method!r}", file=sys.stderr)
        return 1
    x = [float(r["noise"]) for r in sel]
    y = [float(r[args.column]) for r in sel]
    fit = ex.fit_polynomial(x, y, args.degree, tuple(args.range))
    print(json.dumps({"method": args.method, "column": args.column,
                      "coefficients": fit.coefficients, "residual": fit.residual,
                      "fit_range": fit.fit_range, "n_points": fit.n_points}, indent=2))
    return 0


def cmd_report(args) -> int:
    src = Path(args.specs) if args.specs else ex.bundled_specs_dir()
    paths = sorted(src.glob("*.json")) if src.is_dir() else [src]
    if args.only:
        paths = [p for p in paths if p.stem in args.only]
    ok = True
    for p in paths:
        print(f"# {p.stem}")
        ok &= _run(ex.ExperimentSpec.load(p), Path(args.out), args.workers)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qerkit", description="Channel-adapted recovery experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one JSON experiment spec")
    run.add_argument("spec")
    run.add_argument("--out", default="results")
    run.add_argument("--workers", type=int, default=None,
                     help=f"worker processes (default: ${ex.WORKERS_ENV} or 1)")
    run.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a top-level spec key (value parsed as JSON when possible)")
    run.set_defaults(func=cmd_run)

    fit = sub.add_parser("fit", help="fit a polynomial to one method's column of a result CSV")
    fit.add_argument("csv")
    fit.add_argument("--method", required=True)
    fit.add_argument("--column", default="fidelity", choices=["fidelity", "bound", "normalized"])
    fit.add_argument("--degree", type=int, default=2)
    fit.add_argument("--range", type=float, nargs=2, default=(0.005, 0.1))
    fit.set_defaults(func=cmd_fit)

    rep = sub.add_parser("report", help="run a directory of specs (default: the bundled set)")
    rep.add_argument("specs", nargs="?")
    rep.add_argument("--out", default="results")
    rep.add_argument("--workers", type=int, default=None)
    rep.add_argument("--only", nargs="*", help="spec names to run")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
