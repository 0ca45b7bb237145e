"""Command-line front end: ``python -m iqaebias <subcommand> ...``.

Exit codes: 0 success, 2 invalid flags, 3 runtime diagnostic, 4 I/O or
malformed input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .engine import IqaeConfig, RoundLimitExceeded, run_iqae, run_mitigated
from .harness import (
    MIN_END_FRACTION,
    ci_profile,
    cond_bias_grid,
    default_grid,
    detect_resonance,
    scatter_kfin_ffin,
    sweep_bias,
)
from .render import heatmap_svg
from .sampler import BernoulliOracle, SeedPlan

EXIT_FLAGS = 2
EXIT_RUNTIME = 3
EXIT_IO = 4

SWEEP_COLUMNS = ["a", "n_run", "mean_error", "stderr", "biased_flag", "success_rate",
                 "mean_queries", "mean_final_round_queries", "mitigated"]
COND_COLUMNS = ["k_fin", "f_fin", "a_tilde", "n_end", "b_tilde", "nan_reason"]
SCATTER_COLUMNS = ["run_id", "a_hat", "error", "k_fin", "f_fin", "N_fin", "R_fin",
                   "total_queries", "rounds", "success"]
PROFILE_COLUMNS = ["a_hat", "a_lo", "a_hi", "delta_a"]


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def fmt(x) -> str:
    """Round-trip exact text for CSV cells."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "NaN" if math.isnan(x) else repr(x)
    return str(x)


def _json_default(x):
    if isinstance(x, float) and math.isnan(x):
        return None
    raise TypeError(type(x))


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, default=_json_default) + "\n"


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def _write_csv(path: str | None, columns: list[str], rows, meta: dict) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    _write_text(path, buf.getvalue())
    if path not in (None, "-"):
        _write_text(path + ".meta.json", _dump_json(meta))


def _provenance(args, config: IqaeConfig | None, **extra) -> dict:
    doc = {
        "software": {"name": "iqaebias", "version": __version__},
        "command": args.command,
        "seed_plan": SeedPlan(getattr(args, "seed", 0)).describe(),
    }
    if config is not None:
        doc["config"] = config.as_dict()
    doc.update(extra)
    return doc


# --------------------------------------------------------------------------
# flag parsing


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not vals or min(vals) < 0:
        raise argparse.ArgumentTypeError(f"expected nonnegative integers, got {text}")
    return vals


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--n-shot", type=_positive_int, default=1)
    p.add_argument("--r-min", type=float, default=2.0)
    p.add_argument("--max-rounds", type=_positive_int, default=10_000)


def _add_common(p: argparse.ArgumentParser, threads: bool = True) -> None:
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    if threads:
        p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iqaebias", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"iqaebias {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one IQAE run with full round traces (JSON)")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--mitigate", action="store_true")
    _add_config(p)
    _add_common(p, threads=False)

    p = sub.add_parser("sweep", help="bias statistics over a grid of amplitudes (CSV)")
    p.add_argument("--a-min", type=float, default=0.001)
    p.add_argument("--a-max", type=float, default=0.999)
    p.add_argument("--points", type=_positive_int, default=201)
    p.add_argument("--runs", type=_positive_int, default=10_000)
    p.add_argument("--mitigate", action="store_true")
    _add_config(p)
    _add_common(p)

    p = sub.add_parser("cond-bias", help="conditional bias over (k_fin, f_fin) (CSV)")
    p.add_argument("--a", type=float, default=0.2505)
    p.add_argument("--k", type=_int_list, default=[200, 300, 400, 500],
                   help="comma-separated final Grover numbers")
    p.add_argument("--f-points", type=_positive_int, default=51)
    p.add_argument("--runs", type=_positive_int, default=10_000)
    p.add_argument("--min-end-fraction", type=float, default=MIN_END_FRACTION,
                   help=argparse.SUPPRESS)
    _add_config(p)
    _add_common(p)

    p = sub.add_parser("scatter", help="per-run (k_fin, f_fin) records (CSV)")
    p.add_argument("--a", type=float, default=0.2505)
    p.add_argument("--runs", type=_positive_int, default=10_000)
    p.add_argument("--mitigate", action="store_true")
    _add_config(p)
    _add_common(p)

    p = sub.add_parser("ci-profile", help="interval ends vs estimate within one round (CSV)")
    p.add_argument("--k", type=_nonneg_int, default=200)
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--a", type=float, default=0.2505)
    _add_config(p)
    _add_common(p, threads=False)

    p = sub.add_parser("resonance", help="nearest l*pi/(2m) to theta_a (JSON)")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--m-max", type=int, default=20)
    p.add_argument("--out", default=None)

    p = sub.add_parser("render", help="SVG heatmap from cond-bias CSV (+ scatter CSV)")
    p.add_argument("--cond", required=True, help="cond-bias CSV")
    p.add_argument("--scatter", default=None, help="scatter CSV to overlay")
    p.add_argument("--title", default="")
    p.add_argument("--out", default=None)
    return parser


def _config(args) -> IqaeConfig:
    try:
        return IqaeConfig(epsilon=args.epsilon, alpha=args.alpha, n_shot=args.n_shot,
                          r_min=args.r_min, max_rounds=args.max_rounds)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_FLAGS) from exc


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise CliError(message, EXIT_FLAGS)


# --------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> None:
    config = _config(args)
    _require(0.0 <= args.a <= 1.0, f"--a must lie in [0, 1], got {args.a}")
    plan = SeedPlan(args.seed)
    oracle = BernoulliOracle(args.a)
    runner = run_mitigated if args.mitigate else run_iqae
    try:
        result = runner(config, oracle, plan.stream(0)).with_truth(args.a, config.epsilon)
    except RoundLimitExceeded as exc:
        raise CliError(str(exc), EXIT_RUNTIME) from exc
    except ValueError as exc:
        raise CliError(f"runtime domain error: {exc}", EXIT_RUNTIME) from exc
    doc = _provenance(args, config, a=args.a, mitigated=args.mitigate, task_index=0)
    doc["result"] = result.as_dict()
    doc["query_ledger"] = {"grover_calls": result.total_grover_calls,
                           "state_preparations": result.state_preparations}
    _write_text(args.out, _dump_json(doc))


def cmd_sweep(args) -> None:
    config = _config(args)
    _require(0.0 < args.a_min <= args.a_max < 1.0,
             f"need 0 < a-min <= a-max < 1, got {args.a_min}, {args.a_max}")
    grid = default_grid(args.points, args.a_min, args.a_max)
    rows = sweep_bias(grid, config, args.runs, args.mitigate, args.seed, args.threads)
    n_failed = sum(r.n_failed for r in rows)
    if n_failed:
        print(f"warning: {n_failed} runs hit the round limit and were excluded", file=sys.stderr)
    meta = _provenance(args, config, grid={"a_min": args.a_min, "a_max": args.a_max,
                                           "points": args.points},
                       runs=args.runs, mitigated=args.mitigate, failed_runs=n_failed,
                       task_index="grid_index * runs + run")
    _write_csv(args.out, SWEEP_COLUMNS, (
        (r.a, r.n_run, r.mean_error, r.stderr, r.biased, r.success_rate, r.mean_queries,
         r.mean_final_round_queries, r.mitigated) for r in rows), meta)


def cmd_cond_bias(args) -> None:
    config = _config(args)
    _require(0.0 < args.a < 1.0, f"--a must lie in (0, 1), got {args.a}")
    _require(0.0 < args.min_end_fraction <= 1.0, "--min-end-fraction must lie in (0, 1]")
    f_grid = [float(f) for f in np.linspace(0.0, 1.0, args.f_points)] if args.f_points > 1 else [0.5]
    cells = cond_bias_grid(args.k, f_grid, args.a, args.runs, config, args.seed, args.threads,
                           min_end_fraction=args.min_end_fraction)
    meta = _provenance(args, config, a=args.a, k=args.k, f_points=args.f_points, runs=args.runs,
                       min_end_fraction=args.min_end_fraction,
                       task_index="(k_index * f_points + f_index) * runs + run")
    _write_csv(args.out, COND_COLUMNS, (
        (c.k_fin, c.f_fin, c.a_tilde, c.n_end, c.b_tilde, c.nan_reason) for c in cells), meta)


def cmd_scatter(args) -> None:
    config = _config(args)
    _require(0.0 < args.a < 1.0, f"--a must lie in (0, 1), got {args.a}")
    recs = scatter_kfin_ffin(args.a, config, args.runs, args.seed, args.threads, args.mitigate)
    meta = _provenance(args, config, a=args.a, runs=args.runs, mitigated=args.mitigate,
                       failed_runs=args.runs - len(recs), task_index="run")
    _write_csv(args.out, SCATTER_COLUMNS, (
        (r.run_id, r.a_hat, r.error, r.k_fin, r.f_fin, r.N_fin, r.R_fin, r.total_queries,
         r.rounds, r.success) for r in recs), meta)


def cmd_ci_profile(args) -> None:
    config = _config(args)
    _require(0.0 <= args.a <= 1.0, f"--a must lie in [0, 1], got {args.a}")
    rows = ci_profile(args.k, args.n, args.a, config)
    meta = _provenance(args, config, k=args.k, n=args.n, a=args.a,
                       alpha_i=config.alpha_for(2 * args.k + 1))
    _write_csv(args.out, PROFILE_COLUMNS, ((r.a_hat, r.a_lo, r.a_hi, r.delta_a) for r in rows), meta)


def cmd_resonance(args) -> None:
    _require(0.0 < args.a < 1.0, f"--a must lie in (0, 1), got {args.a}")
    _require(args.m_max >= 2, f"--m-max must be at least 2, got {args.m_max}")
    res = detect_resonance(args.a, args.m_max)
    _write_text(args.out, json.dumps({"l": res.l, "m": res.m, "delta": res.delta}) + "\n")


def _read_csv(path: str, required: list[str]) -> list[dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in required if c not in (reader.fieldnames or [])]
    if missing:
        raise CliError(f"{path}:1: missing columns {missing}", EXIT_IO)
    rows = []
    for row in reader:
        if None in row or any(row[c] is None for c in required):
            raise CliError(f"{path}:{reader.line_num}: wrong number of fields", EXIT_IO)
        rows.append((reader.line_num, row))
    return rows


def _parse_num(path, line, row, col, kind=float):
    try:
        return kind(row[col])
    except ValueError:
        raise CliError(f"{path}:{line}: bad value {row[col]!r} in column {col}", EXIT_IO) from None


def cmd_render(args) -> None:
    cells = []
    for line, row in _read_csv(args.cond, ["k_fin", "f_fin", "b_tilde"]):
        cells.append((_parse_num(args.cond, line, row, "k_fin", int),
                      _parse_num(args.cond, line, row, "f_fin"),
                      _parse_num(args.cond, line, row, "b_tilde")))
    points = []
    if args.scatter:
        for line, row in _read_csv(args.scatter, ["k_fin", "f_fin"]):
            points.append((_parse_num(args.scatter, line, row, "k_fin", int),
                           _parse_num(args.scatter, line, row, "f_fin")))
    if not cells:
        raise CliError(f"{args.cond}: no data rows", EXIT_IO)
    _write_text(args.out, heatmap_svg(cells, points, args.title))


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "cond-bias": cmd_cond_bias,
    "scatter": cmd_scatter,
    "ci-profile": cmd_ci_profile,
    "resonance": cmd_resonance,
    "render": cmd_render,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except CliError as exc:
        print(f"iqaebias {args.command}: {exc}", file=sys.stderr)
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
