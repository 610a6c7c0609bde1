"""Command line front end: apply one transform, sweep a grid, or verify.

stdout carries exactly the requested payload (JSON or CSV) so pipelines
stay clean; progress notes go to stderr.  Input spectra come from a
counter-based generator keyed by (seed, lattice index): any single
entry can be regenerated without drawing the ones before it, and the
stream is identical across platforms and process counts.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, fields
from importlib import metadata
from pathlib import Path

import numpy as np

from .multiscale import FioOperator, FioPlan
from .oracle import direct_apply_sampled, sample_spatial_points, sampled_relative_error
from .verify import SUITES, run_suite

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_LANE = np.uint64(0xD1B54A32D192ED03)


def _mix(z: np.ndarray) -> np.ndarray:
    """splitmix64 output stage; uint64 in, well-scrambled uint64 out."""
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def generate_input(n: int, dim: int, seed: int) -> np.ndarray:
    """Standard-normal complex spectrum on the centered lattice.

    Entry k (C order over the (n,)*dim array) depends only on (seed, k),
    via two splitmix64 lanes feeding a Box-Muller pair; mean power is 1.
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    total = n**dim
    ctr = np.arange(1, total + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        key = np.uint64(seed) * _GOLD + np.uint64(0x632BE59BD9B4E019)
        w1 = _mix(ctr * _GOLD + key)
        w2 = _mix(w1 ^ _LANE)
    u1 = (w1 >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u2 = (w2 >> np.uint64(11)).astype(np.float64) * 2.0**-53
    r = np.sqrt(-2.0 * np.log1p(-u1))
    t = 2.0 * np.pi * u2
    return ((r * np.cos(t) + 1j * r * np.sin(t)) / np.sqrt(2.0)).reshape((n,) * dim)


@dataclass(frozen=True)
class RunRecord:
    """One benchmark cell; field order is the CSV column order."""

    dim: int
    n: int
    q: int
    scenario: str
    seed: int
    eps_m: float
    t_setup_ms: float
    t_apply_ms: float
    t_oracle_ms: float
    amp_rank: int
    corona_count: int
    version: str


def _version() -> str:
    try:
        base = metadata.version("msbutterfly")
    except metadata.PackageNotFoundError:
        base = "0.0.0"
    try:
        head = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        head = ""
    return f"{base}+g{head}" if head else base


def _emit(rows: list[dict], fmt: str, out: str | None) -> None:
    """Write rows as a JSON array or an RFC 4180 CSV with a header row."""
    if fmt == "json":
        payload = json.dumps(rows, indent=2) + "\n"
    else:
        buf = io.StringIO()
        cols = list(rows[0].keys()) if rows else [f.name for f in fields(RunRecord)]
        writer = csv.DictWriter(buf, fieldnames=cols)
        writer.writeheader()
        writer.writerows(rows)
        payload = buf.getvalue()
    if out is None or out == "-":
        sys.stdout.write(payload)
    else:
        Path(out).write_text(payload)


def _plan_from_args(args: argparse.Namespace, n: int, q: int) -> FioPlan:
    from .kernels import get_scenario

    dim = args.dim if args.dim is not None else get_scenario(args.scenario, args.ex3_mode).dim
    return FioPlan(
        dim=dim, n=n, q=q, b=args.b, s=args.s, scenario=args.scenario,
        ex3_mode=args.ex3_mode, amp_tol=args.amp_tol, seed=args.seed,
    )


def _run_cell(args: argparse.Namespace, n: int, q: int, cache: dict) -> RunRecord:
    """Build, apply, and score one (n, q) cell; oracle data cached per n."""
    plan = _plan_from_args(args, n, q)
    op = FioOperator(plan, threads=args.threads)
    if n not in cache:
        f_hat = generate_input(n, plan.dim, plan.seed)
        idx, pts = sample_spatial_points(n, plan.dim, count=args.samples)
        t0 = time.perf_counter()
        exact = direct_apply_sampled(plan, f_hat, pts)
        t_oracle = time.perf_counter() - t0
        cache[n] = (f_hat, idx, exact, t_oracle)
    f_hat, idx, exact, t_oracle = cache[n]
    u = op.apply(f_hat, threads=args.threads)
    eps = sampled_relative_error(u[tuple(idx.T)], exact)
    print(f"n={n} q={q} {plan.scenario}: eps_m={eps:.3e} "
          f"apply={op.t_apply:.2f}s setup={op.t_setup:.2f}s", file=sys.stderr)
    return RunRecord(
        dim=plan.dim, n=n, q=q, scenario=plan.scenario, seed=plan.seed,
        eps_m=eps, t_setup_ms=op.t_setup * 1e3, t_apply_ms=op.t_apply * 1e3,
        t_oracle_ms=t_oracle * 1e3, amp_rank=op.amp_rank,
        corona_count=op.corona_count, version=_version(),
    )


def cmd_apply(args: argparse.Namespace) -> int:
    rec = _run_cell(args, args.n, args.q, {})
    _emit([asdict(rec)], args.format, args.out)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    """Sweep the n x q grid; on failure, flush whatever finished first."""
    rows: list[dict] = []
    prev_apply: dict[int, float] = {}  # q -> t_apply at the previous n
    try:
        for n in args.n_list:
            cache: dict = {}
            prev_eps = None
            for q in args.q_list:
                rec = _run_cell(args, n, q, cache)
                row = asdict(rec)
                row["err_ratio_prev_q"] = (
                    prev_eps / rec.eps_m if prev_eps is not None and rec.eps_m > 0 else None
                )
                row["time_ratio_prev_n"] = (
                    rec.t_apply_ms / prev_apply[q] if q in prev_apply else None
                )
                rows.append(row)
                prev_eps = rec.eps_m
            for row in rows:
                if row["n"] == n:
                    prev_apply[row["q"]] = row["t_apply_ms"]
    except Exception as exc:  # noqa: BLE001 - partial results still get flushed
        _emit(rows, args.format, args.out)
        print(f"bench aborted after {len(rows)} cells: {exc}", file=sys.stderr)
        return 1
    _emit(rows, args.format, args.out)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    ok, lines = run_suite(args.suite)
    for line in lines:
        print(line)
    print("suite result:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("list must not be empty")
    return vals


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, choices=(2, 3), default=None,
                   help="spatial dimension; default follows the scenario")
    p.add_argument("--b", type=int, default=8, help="frequency leaf width")
    p.add_argument("--s", type=int, default=5, help="shells stop at max|xi| <= 2^(s-1)")
    p.add_argument("--scenario", default="ex1", choices=("ex1", "ex2", "ex3"))
    p.add_argument("--ex3-mode", default="sphere", choices=("sphere", "literal"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=256, help="oracle sample points")
    p.add_argument("--amp-tol", type=float, default=1e-4)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None, help="output path; default stdout")
    p.add_argument("--format", default="json", choices=("json", "csv"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msbutterfly",
        description="Multiscale butterfly evaluation of oscillatory-kernel sums",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_apply = sub.add_parser("apply", help="one transform, scored against the oracle")
    p_apply.add_argument("--n", type=int, required=True)
    p_apply.add_argument("--q", type=int, required=True)
    _add_common(p_apply)
    p_apply.set_defaults(func=cmd_apply)

    p_bench = sub.add_parser("bench", help="sweep an n x q grid")
    p_bench.add_argument("--n", dest="n_list", type=_int_list, required=True,
                         help="comma-separated grid sides, e.g. 128,256")
    p_bench.add_argument("--q", dest="q_list", type=_int_list, required=True,
                         help="comma-separated orders, e.g. 5,7,9")
    _add_common(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_verify = sub.add_parser("verify", help="run a built-in check suite")
    p_verify.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p_verify.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
