"""Command line entry point: ``gbsde-lab <command> [--config PATH] [--out DIR] [--seed N]``.

Exit codes: 0 success, 1 validation/parse error, 2 numerical failure,
3 property violation.
"""

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from .audit import INEQUALITIES, pointwise_limit, property_battery
from .config import RunConfig, load_config
from .errors import ConfigError, GBSDEError, NumericalError
from .oracles import run_oracle_battery
from .reports import write_reports
from .solver import simulate_path, solve
from .studies import (build_problem, run_convergence, run_generator_distance, run_norm_audit,
                      run_stability)
from .sublinear import conditional_g_expectation
from .yosida import make_generator, validate_assumptions

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VIOLATION = 0, 1, 2, 3
AUDIT_GENERATORS = ("linear_decay", "signed_sqrt", "piecewise_kink")


def _manifest(cfg, command, started, **extra):
    return {"command": command, "config": cfg.to_dict(),
            "timings": {"total_seconds": time.perf_counter() - started, **extra.pop("timings", {})},
            **extra}


def cmd_gexp(cfg, out, args):
    lattice, _, terminal = build_problem(cfg)
    started = time.perf_counter()
    field = conditional_g_expectation(terminal, lattice)
    os.makedirs(out, exist_ok=True)
    field.to_csv(os.path.join(out, "gexp.csv"))
    write_reports({}, _manifest(cfg, "gexp", started, summary={"root": field.root},
                                extra_files=["gexp.csv"]), out)
    print(f"G-expectation at root: {field.root!r}")
    return EXIT_OK


def cmd_solve(cfg, out, args):
    lattice, gen, terminal = build_problem(cfg)
    started = time.perf_counter()
    sol = solve(gen, terminal, lattice, alpha=args.alpha, tol=cfg.tolerances.root)
    os.makedirs(out, exist_ok=True)
    sol.write_csv(out)
    path = simulate_path(sol, control="worst_case", seed=cfg.seed)
    path.to_csv(os.path.join(out, "path.csv"))
    max_dk = float(np.max(sol.k_increments))
    write_reports({}, _manifest(cfg, "solve", started,
                                summary={"root": sol.root, "alpha": args.alpha, "max_delta_k": max_dk},
                                extra_files=["Y.csv", "Z.csv", "sigma_star.csv", "K.csv", "path.csv"]),
                  out)
    print(f"Y at root: {sol.root!r}  (alpha={args.alpha})")
    return EXIT_OK


def cmd_yosida_audit(cfg, out, args):
    started = time.perf_counter()
    T = cfg.lattice.T
    rows, reports, failed = [], {}, False
    for name in AUDIT_GENERATORS:
        spec = make_generator(name, T)
        validation = validate_assumptions(spec, args.samples, args.seed)
        results = property_battery(spec, args.samples, args.seed, cfg.tolerances.root)
        gaps, limit_ok = pointwise_limit(spec, tol=cfg.tolerances.root)
        for r in results:
            rows.append([name, r.name, r.samples, r.violations, r.max_excess])
            failed |= not r.passed
        failed |= not (validation.passed and limit_ok)
        reports[name] = {"assumptions": validation.to_dict(),
                         "inequalities": [r.to_dict() for r in results],
                         "pointwise_limit": {"passed": limit_ok,
                                             "max_gap_per_alpha": gaps.max(axis=1).tolist()}}
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            print(f"{status} {name:15s} {r.name:28s} violations={r.violations}")
        print(f"{'PASS' if limit_ok else 'FAIL'} {name:15s} pointwise_limit")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "yosida_audit.json"), "w", encoding="utf-8") as fh:
        json.dump(reports, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_reports({"yosida_audit.csv": (["generator", "property", "samples", "violations",
                                         "max_excess"], rows)},
                  _manifest(cfg, "yosida-audit", started, samples=args.samples, seed=args.seed,
                            inequalities=list(INEQUALITIES), extra_files=["yosida_audit.json"]),
                  out)
    return EXIT_VIOLATION if failed else EXIT_OK


def cmd_converge(cfg, out, args):
    started = time.perf_counter()
    result = run_convergence(cfg)
    cols = ["alpha", "sup_diff", "l2_diff", "z_diff", "status"]
    rows = [[r.alpha, r.sup_diff, r.l2_diff, r.z_diff, r.status] for r in result.rows]
    monotone = result.monotone(cfg.tolerances.root)
    write_reports({"convergence.csv": (cols, rows)},
                  _manifest(cfg, "converge", started,
                            summary={"slope": result.slope, "monotone": monotone,
                                     "strictly_decreasing": result.strictly_decreasing},
                            timings={f"alpha={r.alpha!r}": r.runtime for r in result.rows}),
                  out)
    for r in result.rows:
        print(f"alpha={r.alpha:<8g} sup|Y^a-Y|={r.sup_diff:.6e}  {r.status}")
    print(f"log-log slope: {result.slope:.4f}")
    failed = any(r.status != "ok" for r in result.rows)
    if failed:
        return EXIT_NUMERICAL
    return EXIT_OK if monotone else EXIT_VIOLATION


def cmd_distance(cfg, out, args):
    started = time.perf_counter()
    rows = run_generator_distance(cfg)
    d = [r["distance"] for r in rows]
    decreasing = all(b <= a for a, b in zip(d, d[1:]))
    write_reports({"distance.csv": (["alpha", "distance"], rows)},
                  _manifest(cfg, "distance", started, summary={"non_increasing": decreasing}), out)
    for r in rows:
        print(f"alpha={r['alpha']:<8g} distance={r['distance']:.6e}")
    return EXIT_OK if decreasing else EXIT_VIOLATION


def cmd_norms(cfg, out, args):
    started = time.perf_counter()
    rows, verdict = run_norm_audit(cfg)
    cols = ["alpha", "status", "y_sup", "y_path_sup", "z_h2", "k_sq", "bound_violations",
            "bound_max_ratio"]
    violations = sum(r.get("bound_violations", 0) for r in rows)
    write_reports({"norms.csv": (cols, rows)},
                  _manifest(cfg, "norms", started,
                            summary={"verdict": verdict, "bound_violations": violations}), out)
    for name, v in verdict.items():
        print(f"{name}: {v}")
    print(f"a-priori bound violations: {violations}")
    if any(r["status"] != "ok" for r in rows):
        return EXIT_NUMERICAL
    ok = violations == 0 and all(v == "bounded" for v in verdict.values())
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_stability(cfg, out, args):
    started = time.perf_counter()
    rows = run_stability(cfg, args.epsilons)
    cols = ["eps", "max_dy", "root_dy", "ratio", "bound", "within_bound"]
    ok = all(r["within_bound"] for r in rows)
    write_reports({"stability.csv": (cols, rows)},
                  _manifest(cfg, "stability", started, summary={"within_bound": ok}), out)
    for r in rows:
        print(f"eps={r['eps']:<8g} max|dY|={r['max_dy']:.6e} ratio={r['ratio']:.6f} "
              f"bound={r['bound']:.6f}")
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_oracle_check(cfg, out, args):
    started = time.perf_counter()
    reports = run_oracle_battery(cfg.lattice, cfg.tolerances.root, cfg.tolerances.picard)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "oracle.json"), "w", encoding="utf-8") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2, sort_keys=True)
        fh.write("\n")
    cols = ["instance", "oracle", "engine", "gap", "tolerance", "passed"]
    write_reports({"oracle.csv": (cols, [dataclasses.asdict(r) | {"passed": r.passed}
                                         for r in reports])},
                  _manifest(cfg, "oracle-check", started, extra_files=["oracle.json"]), out)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} gap={r.gap:.3e} tol={r.tolerance:.1e} {r.instance}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VIOLATION


COMMANDS = {
    "gexp": (cmd_gexp, "sublinear expectation of the configured payoff"),
    "solve": (cmd_solve, "one G-BSDE solve, optionally regularized"),
    "yosida-audit": (cmd_yosida_audit, "randomized resolvent/approximant inequality battery"),
    "converge": (cmd_converge, "Y^alpha -> Y convergence study"),
    "distance": (cmd_distance, "occupation-weighted |f - f^alpha|^2 study"),
    "norms": (cmd_norms, "norm audit and a-priori bound check"),
    "stability": (cmd_stability, "terminal perturbation response vs the exponential bound"),
    "oracle-check": (cmd_oracle_check, "brute-force, closed-form and cross-solver oracles"),
}


class _Parser(argparse.ArgumentParser):
    # usage errors are parse errors, not numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON RunConfig")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    parser = _Parser(prog="gbsde-lab", parents=[common], description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "solve":
            p.add_argument("--alpha", type=float, default=None)
        if name == "yosida-audit":
            p.add_argument("--samples", type=int, default=10_000)
        if name == "stability":
            p.add_argument("--epsilons", type=float, nargs="+", default=None)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
        if args.command == "yosida-audit" and args.samples < 1:
            raise ConfigError("--samples", "must be >= 1")
        args.seed = cfg.seed
        out = getattr(args, "out", None) or cfg.output_dir
        handler = COMMANDS[args.command][0]
        return handler(cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GBSDEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
