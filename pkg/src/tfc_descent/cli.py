"""Command-line entry point: ``tfc-descent solve | validate | report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import artifacts
from .config import load_config, with_overrides
from .errors import (
    ArtifactError, ConfigurationError, DescentError, InnerSolverError, OuterConvergenceError,
    ProfileClassificationError, SingularCostateError,
)
from .model import make_profile
from .outer import solve
from .validation import REFERENCES, match_reference, metrics_report, propagate_oracle

log = logging.getLogger("tfc_descent")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_INNER = 3
EXIT_OUTER = 4
EXIT_CLASSIFICATION = 5

# bounds applied by ``validate`` when no reference case matches
DEFAULT_BOUNDS = {"position_error": 1e-3, "velocity_error": 1e-4, "lambda_m_final": 1e-9}


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigurationError, ArtifactError)):
        return EXIT_CONFIG
    if isinstance(exc, ProfileClassificationError):
        return EXIT_CLASSIFICATION
    if isinstance(exc, OuterConvergenceError):
        return EXIT_OUTER
    if isinstance(exc, (InnerSolverError, SingularCostateError, DescentError)):
        return EXIT_INNER
    raise exc


def _solve_one(config_path, out_dir, overrides) -> tuple[int, str]:
    try:
        cfg = with_overrides(load_config(config_path), **overrides)
        sol = solve(cfg.bc, cfg.lander, cfg.settings)
    except DescentError as exc:
        return exit_code(exc), f"{config_path}: {type(exc).__name__}: {exc}"
    doc = artifacts.write_solution(out_dir, cfg.name, sol, cfg.lander, cfg.bc)
    m = doc["metrics"]
    times = ", ".join(f"{k}={m[k]:.6f}" for k in ("t1", "t2", "tf") if k in m)
    return EXIT_OK, (f"{cfg.name}: {m['profile']} {times} m_used={m['m_used']:.6f} kg "
                     f"L2(L)={m['l2_loss']:.3e} L2(H)={m['l2_hamiltonian']:.3e} -> {out_dir}")


def cmd_solve(args) -> int:
    overrides = dict(profile=args.profile, n_basis=args.n_basis, n_nodes=args.nodes,
                     t1=args.t1, t2=args.t2, tf=args.tf)
    configs = args.config
    if len(configs) == 1:
        outs = [Path(args.out)]
    else:
        outs = [Path(args.out) / Path(c).stem for c in configs]
    jobs = [(c, o, overrides) for c, o in zip(configs, outs)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_solve_one, *zip(*jobs)))
    else:
        results = [_solve_one(*j) for j in jobs]
    worst = EXIT_OK
    for code, message in results:
        print(message, file=sys.stdout if code == EXIT_OK else sys.stderr)
        worst = max(worst, code)
    return worst


def _bounds_for(metrics: dict) -> dict:
    ref = match_reference(metrics)
    bounds = dict(DEFAULT_BOUNDS)
    for k in DEFAULT_BOUNDS if ref else ():
        tol = REFERENCES[ref][k][1]
        if tol is not None:
            bounds[k] = tol
    return bounds


def cmd_validate(args) -> int:
    try:
        run = artifacts.SolveArtifacts(args.input)
        lam_r0, lam_v0, lam_m0 = run.initial_costates()
        rep = propagate_oracle(run.bc.r0, run.bc.v0, run.bc.m0, lam_r0, lam_v0, lam_m0,
                               make_profile(run.kind, run.times, run.lander), run.lander,
                               rtol=args.rtol, rf=run.bc.rf, vf=run.bc.vf)
    except DescentError as exc:
        print(f"{args.input}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    bounds = _bounds_for(run.metrics["metrics"])
    checks = {k: abs(getattr(rep, k)) <= tol for k, tol in bounds.items()}
    doc = {"report": rep.to_dict(), "bounds": bounds, "checks": checks, "passed": all(checks.values())}
    artifacts.write_validation(run.directory, doc)
    print(f"{run.metrics['name']}: |r(tf)|={rep.position_error:.3e} m |v(tf)|={rep.velocity_error:.3e} m/s "
          f"lambda_m(tf)={rep.lambda_m_final:.3e} rtol={rep.rtol:g} steps={rep.steps} "
          f"{'PASS' if doc['passed'] else 'FAIL'}")
    return EXIT_OK if doc["passed"] else EXIT_VALIDATION


_REPORT_FIELDS = ("t1", "t2", "tf", "m_used", "l2_loss", "l2_hamiltonian",
                  "position_error", "velocity_error", "lambda_m_final")


def report_rows(paths) -> list[dict]:
    rows = []
    for p in paths:
        doc = artifacts.read_metrics(p)
        val_path = Path(p if Path(p).is_dir() else Path(p).parent) / artifacts.VALIDATION_FILE
        validation = None
        if val_path.exists():
            validation = json.loads(val_path.read_text())["report"]
        ref_name = match_reference(doc["metrics"])
        refs = REFERENCES.get(ref_name)
        rows.append({"run": doc["name"], "profile": doc["profile"], "reference": ref_name,
                     "fields": metrics_report(doc["metrics"], validation, refs)})
    return rows


def _table(rows) -> str:
    head = ["run", "profile", *_REPORT_FIELDS, "pass"]
    lines = []
    for row in rows:
        by_name = {f["field"]: f for f in row["fields"]}
        cells = [row["run"], row["profile"]]
        for name in _REPORT_FIELDS:
            f = by_name.get(name)
            if f is None or f["value"] is None:
                cells.append("-")
            elif name in ("t1", "t2", "tf", "m_used"):
                cells.append(f"{f['value']:.4f}")
            else:
                cells.append(f"{f['value']:.2e}")
        verdicts = [f["passed"] for f in row["fields"] if f["passed"] is not None]
        cells.append("-" if not verdicts else ("PASS" if all(verdicts) else "FAIL"))
        lines.append(cells)
        if row["reference"]:
            ref = ["  reference", ""]
            for name in _REPORT_FIELDS:
                f = by_name.get(name)
                ref.append("-" if f is None or f["reference"] is None else f"{f['reference']:.6g}")
            lines.append(ref + [""])
    widths = [max(len(str(c)) for c in col) for col in zip(head, *lines)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join(fmt.format(*r) for r in [head, *lines])


def cmd_report(args) -> int:
    try:
        rows = report_rows(args.metrics)
    except DescentError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    if args.format == "json":
        print(json.dumps(rows, indent=2))
    else:
        print(_table(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tfc-descent", description="Fuel-optimal powered descent by TFC collocation.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one or more configs and write artifacts")
    s.add_argument("--config", action="append", required=True,
                   help="config file or bundled name (test1_minmax, test2_maxminmax); repeatable")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--profile", choices=("min-max", "max-min-max", "auto"))
    s.add_argument("--n-basis", type=int)
    s.add_argument("--nodes", type=int, help="collocation intervals per segment")
    s.add_argument("--t1", type=float)
    s.add_argument("--t2", type=float)
    s.add_argument("--tf", type=float)
    s.add_argument("--jobs", type=int, default=1, help="solve several configs in parallel")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("validate", help="propagate a solved trajectory and check endpoint errors")
    v.add_argument("--in", dest="input", required=True, help="solve output directory")
    v.add_argument("--rtol", type=float, default=1e-12)
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("report", help="compare metrics documents against reference values")
    r.add_argument("metrics", nargs="+", help="metrics.json files or solve output directories")
    r.add_argument("--format", choices=("table", "json"), default="table")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
