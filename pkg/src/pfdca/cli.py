"""Command-line surface: solve one instance, sweep the hyperparameter
grid, run deterministic baselines, verify the numerical certificates,
and merge result files into an information-plane report.

Exit codes: 0 success; 1 malformed input file or unreadable records;
2 bad flags or unknown ``--set`` override keys; 3 solve hit the
iteration cap without converging; 4 exhaustive baseline guard exceeded;
5 a verification check failed.
"""

import argparse
import json
import sys

import numpy as np

from .baseline import exhaustive_partitions, greedy_merge_run
from .dca import DcaConfig, InnerKind, dca_run
from .diagnostics import run_verification
from .probability import InvalidDistributionError, load_joint
from .sweep import (
    Solver,
    SweepConfig,
    pareto_frontier,
    read_points_csv,
    resolve_jobs,
    run_sweep,
    write_points_csv,
    write_points_json,
)

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_BAD_FLAGS = 2
EXIT_NOT_CONVERGED = 3
EXIT_GUARD = 4
EXIT_CHECK_FAILED = 5

DOMINANCE_SLACK_BITS = 0.01


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _q_to_kind(q: int) -> InnerKind:
    if q == 2:
        return InnerKind.RIDGE
    if q == 1:
        return InnerKind.SPARSE_LOG
    raise CliError(EXIT_BAD_FLAGS, f"unsupported norm order q={q}")


def _parse_overrides(pairs, allowed: dict) -> dict:
    """Parse repeated ``--set key=value`` pairs against typed field table."""
    out = {}
    for raw in pairs or []:
        if "=" not in raw:
            raise CliError(EXIT_BAD_FLAGS, f"--set expects key=value, got {raw!r}")
        key, value = raw.split("=", 1)
        key = key.strip()
        if key not in allowed:
            raise CliError(
                EXIT_BAD_FLAGS, f"unknown override key {key!r}; known: {sorted(allowed)}"
            )
        try:
            out[key] = allowed[key](value)
        except (TypeError, ValueError) as exc:
            raise CliError(EXIT_BAD_FLAGS, f"bad value for {key}: {exc}") from exc
    return out


def _float_tuple(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _int_tuple(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


_DCA_FIELD_PARSERS = {
    "outer_tol": float,
    "outer_max_iter": int,
    "inner_tol": float,
    "inner_max_iter": int,
    "box_m": float,
    "box_M": float,
    "log_clamp": float,
}

_SWEEP_FIELD_PARSERS = {
    "beta_grid": _float_tuple,
    "alpha_grid": _float_tuple,
    "card_z_values": _int_tuple,
    "outer_tol": float,
    "outer_max_iter": int,
    "inner_tol": float,
    "inner_max_iter": int,
}

_VERIFY_FIELD_PARSERS = {
    "grad_tol": float,
    "identity_tol": float,
    "residual_tol": float,
    "convexity_tol": float,
    "descent_tol": float,
}


def _load_dist(path):
    try:
        return load_joint(path)
    except OSError as exc:
        raise CliError(EXIT_BAD_INPUT, f"cannot read {path}: {exc}") from exc
    except InvalidDistributionError as exc:
        raise CliError(EXIT_BAD_INPUT, f"invalid distribution file {path}: {exc}") from exc


def cmd_solve(args) -> int:
    j = _load_dist(args.dist)
    overrides = _parse_overrides(args.set, _DCA_FIELD_PARSERS)
    try:
        cfg = DcaConfig(
            beta=args.beta,
            alpha=args.alpha,
            inner_kind=_q_to_kind(args.q),
            outer_tol=overrides.pop("outer_tol", args.tol),
            outer_max_iter=overrides.pop("outer_max_iter", args.max_iter),
            seed=args.seed,
            **overrides,
        )
    except ValueError as exc:
        raise CliError(EXIT_BAD_FLAGS, f"bad solver configuration: {exc}") from exc
    if args.card_z < 1:
        raise CliError(EXIT_BAD_FLAGS, "--card-z must be >= 1")
    res = dca_run(j, args.card_z, cfg)
    payload = {
        "beta": cfg.beta,
        "alpha": cfg.alpha,
        "q": args.q,
        "card_z": args.card_z,
        "seed": cfg.seed,
        "converged": res.converged,
        "iterations": res.iterations,
        "loss_nats": res.loss_nats,
        "i_zx_bits": res.i_zx_bits,
        "i_zy_bits": res.i_zy_bits,
        "stationarity_gap": res.stationarity_gap,
        "fallback_steps": res.fallback_steps,
        "defect": res.defect,
        "loss_trace": res.loss_trace.tolist(),
        "encoder": res.encoder.matrix.tolist(),
    }
    col_sums = res.encoder.matrix.sum(axis=0)
    if np.max(np.abs(col_sums - 1.0)) > 1e-9:
        raise CliError(EXIT_BAD_INPUT, "internal error: encoder columns not stochastic")
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    print(
        f"solve: converged={res.converged} iterations={res.iterations} "
        f"I(Z;X)={res.i_zx_bits:.6f} bits I(Z;Y)={res.i_zy_bits:.6f} bits -> {args.out}"
    )
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_sweep(args) -> int:
    j = _load_dist(args.dist)
    overrides = _parse_overrides(args.set, _SWEEP_FIELD_PARSERS)
    try:
        cfg = SweepConfig(
            restarts=args.restarts,
            inner_kind=_q_to_kind(args.q),
            base_seed=args.seed,
            outer_tol=overrides.pop("outer_tol", args.tol),
            outer_max_iter=overrides.pop("outer_max_iter", args.max_iter),
            **overrides,
        )
    except ValueError as exc:
        raise CliError(EXIT_BAD_FLAGS, f"bad sweep configuration: {exc}") from exc
    points = run_sweep(j, cfg, n_jobs=resolve_jobs(args.jobs))
    write_points_csv(points, args.out)
    write_points_json(points, str(args.out) + ".json")
    write_points_csv(pareto_frontier(points), str(args.out) + ".frontier.csv")
    print(f"sweep: {len(points)} runs -> {args.out}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    j = _load_dist(args.dist)
    points = []
    if args.solver in ("greedy", "both"):
        points.extend(greedy_merge_run(j, args.beta))
    if args.solver in ("exhaustive", "both"):
        try:
            points.extend(exhaustive_partitions(j, args.beta))
        except ValueError as exc:
            raise CliError(EXIT_GUARD, str(exc)) from exc
    write_points_csv(points, args.out)
    print(f"baseline: {len(points)} points -> {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    j = _load_dist(args.dist)
    overrides = _parse_overrides(args.set, _VERIFY_FIELD_PARSERS)
    reports = run_verification(j, seed=args.seed, tolerances=overrides or None)
    with open(args.out, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(json.dumps(report.to_record()) + "\n")
    failed = 0
    for report in reports:
        status = "PASS" if report.passed else "FAIL"
        failed += not report.passed
        print(
            f"[{status}] {report.name}: max_violation={report.max_violation:.3e} "
            f"tolerance={report.tolerance:.3e} samples={report.samples}"
        )
    print(f"verify: {len(reports) - failed}/{len(reports)} checks passed -> {args.out}")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def cmd_report(args) -> int:
    all_points = []
    for path in args.inputs:
        try:
            all_points.extend(read_points_csv(path))
        except OSError as exc:
            raise CliError(EXIT_BAD_INPUT, f"cannot read {path}: {exc}") from exc
        except ValueError as exc:
            raise CliError(EXIT_BAD_INPUT, str(exc)) from exc
    if not all_points:
        raise CliError(EXIT_BAD_INPUT, "no records found in the input files")
    write_points_csv(pareto_frontier(all_points), args.out)
    dca_points = [p for p in all_points if p.solver in (Solver.DCA_RIDGE, Solver.DCA_SPARSE)]
    baseline_points = [p for p in all_points if p.solver in (Solver.GREEDY, Solver.EXHAUSTIVE)]
    rows = []
    dominated_count = 0
    for b in baseline_points:
        candidates = [
            d
            for d in dca_points
            if d.i_zx_bits >= b.i_zx_bits - DOMINANCE_SLACK_BITS
            and d.i_zy_bits <= b.i_zy_bits + DOMINANCE_SLACK_BITS
        ]
        best = min(candidates, key=lambda d: (d.i_zy_bits, -d.i_zx_bits), default=None)
        dominated_count += best is not None
        rows.append(
            {
                "baseline_solver": b.solver.value,
                "card_z": b.card_z,
                "i_zx_bits": format(b.i_zx_bits, ".12g"),
                "i_zy_bits": format(b.i_zy_bits, ".12g"),
                "dominated": "true" if best is not None else "false",
                "by_i_zx_bits": format(best.i_zx_bits, ".12g") if best else "",
                "by_i_zy_bits": format(best.i_zy_bits, ".12g") if best else "",
            }
        )
    dominance_path = str(args.out) + ".dominance.csv"
    with open(dominance_path, "w", encoding="utf-8", newline="") as fh:
        header = [
            "baseline_solver",
            "card_z",
            "i_zx_bits",
            "i_zy_bits",
            "dominated",
            "by_i_zx_bits",
            "by_i_zy_bits",
        ]
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(row[k]) for k in header) + "\n")
    print(
        f"report: {len(all_points)} points, {dominated_count}/{len(baseline_points)} "
        f"baseline points dominated within {DOMINANCE_SLACK_BITS} bits -> {args.out}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pfdca",
        description="Difference-of-convex privacy funnel solver suite",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, out_required=True):
        p.add_argument("--dist", required=True, help="joint distribution JSON file")
        p.add_argument("--out", required=out_required, help="output file path")
        p.add_argument("--seed", type=int, default=0, help="base random seed")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override an advanced configuration field (repeatable)",
        )

    p_solve = sub.add_parser("solve", help="run one solver instance")
    add_common(p_solve)
    p_solve.add_argument("--beta", type=float, default=1.0, help="trade-off multiplier")
    p_solve.add_argument("--alpha", type=float, default=1.0, help="relaxation coefficient")
    p_solve.add_argument("--card-z", type=int, default=3, dest="card_z", help="code alphabet size")
    p_solve.add_argument("--q", type=int, choices=(1, 2), default=2, help="inner penalty norm order")
    p_solve.add_argument("--max-iter", type=int, default=10000, dest="max_iter")
    p_solve.add_argument("--tol", type=float, default=1e-6)
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="hyperparameter grid sweep")
    add_common(p_sweep)
    p_sweep.add_argument("--restarts", type=int, default=10)
    p_sweep.add_argument("--q", type=int, choices=(1, 2), default=2)
    p_sweep.add_argument("--max-iter", type=int, default=10000, dest="max_iter")
    p_sweep.add_argument("--tol", type=float, default=1e-6)
    p_sweep.add_argument(
        "--jobs", type=int, default=None, help="worker processes (default: PF_THREADS or 1)"
    )
    p_sweep.set_defaults(func=cmd_sweep)

    p_base = sub.add_parser("baseline", help="deterministic clustering baselines")
    add_common(p_base)
    p_base.add_argument("--beta", type=float, default=1.0)
    p_base.add_argument(
        "--solver", choices=("greedy", "exhaustive", "both"), default="both"
    )
    p_base.set_defaults(func=cmd_baseline)

    p_verify = sub.add_parser("verify", help="run the numerical certificate suite")
    add_common(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_report = sub.add_parser("report", help="merge result CSVs into a frontier report")
    p_report.add_argument("--inputs", nargs="+", required=True, help="sweep/baseline CSV files")
    p_report.add_argument("--out", required=True)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # defensive: never leak a traceback as exit 1
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
