"""``fblbounds`` command line.

Exit status: 0 on success, 1 when a computed result breaks an invariant (or a
request cannot be honoured, e.g. a witness for a mismatched metric), 2 for
usage errors and unreadable or malformed input files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import verify
from .bounds import BoundCurve, exact_rc_error, point_from_values, sweep, sweep_sizes
from .channel import ChannelError, OutputDist, load_channel_file
from .hypothesis_testing import WitnessError, beta_vs_F, matched_witness, meta_converse_code_bound
from .product import (BECSpec, BSCSpec, _log_competitors, product_sweep, stats_for,
                      table_clipped, table_exact, table_F)
from .simulator import converse_equality_check, load_codebook_file, random_coding_mc

EXIT_OK, EXIT_INVARIANT, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad input file; maps to exit status 2."""


class InvariantError(Exception):
    """Computed results are inconsistent or the request cannot be served; exit 1."""


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"must be a finite number >= 0, got {text}")
    return v


def _add_output(p: argparse.ArgumentParser, formats=("csv", "json"), default="csv") -> None:
    p.add_argument("--out", type=Path, help="write the artifact here instead of stdout")
    p.add_argument("--format", choices=formats, default=default)


def _add_grid(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("evaluation points (rate grid in nats, or explicit sizes)")
    g.add_argument("--rate-min", type=_nonneg_float)
    g.add_argument("--rate-max", type=_nonneg_float)
    g.add_argument("--rate-points", type=_positive_int)
    g.add_argument("--M", type=_positive_int, nargs="+", metavar="M",
                   help="codebook sizes (R = log M, M-1 competitors); excludes the rate flags")
    p.add_argument("--bits", action="store_true", help="report R and Er in bits")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fblbounds",
        description="Finite-blocklength achievability and converse bounds for discrete channels.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="sweep F, both random-coding errors and the exponent")
    p.add_argument("--channel", type=Path, required=True)
    p.add_argument("--prior", type=Path)
    _add_grid(p)
    _add_output(p)

    p = sub.add_parser("witness", help="matched-metric output distribution attaining F(R)")
    p.add_argument("--channel", type=Path, required=True)
    p.add_argument("--prior", type=Path)
    p.add_argument("--R", type=_nonneg_float, required=True, help="rate in nats")
    _add_output(p, ("json",), "json")

    p = sub.add_parser("mc", help="Monte Carlo of the random-coding experiment")
    p.add_argument("--channel", type=Path, required=True)
    p.add_argument("--prior", type=Path)
    p.add_argument("--M", type=_positive_int, required=True)
    p.add_argument("--trials", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    _add_output(p, ("json",), "json")

    p = sub.add_parser("code-eval", help="exact error of a fixed code and its converse checks")
    p.add_argument("--channel", type=Path, required=True)
    p.add_argument("--code", type=Path, required=True)
    p.add_argument("--prior", type=Path, help="ignored by the checks, which use the code's own")
    _add_output(p, ("json",), "json")

    p = sub.add_parser("product", help="BSC^n / BEC^n through the sufficient statistic")
    p.add_argument("family", choices=("bsc", "bec"))
    p.add_argument("--n", type=_positive_int, required=True, help="blocklength")
    p.add_argument("--p", type=float, required=True, help="crossover or erasure probability")
    _add_grid(p)
    _add_output(p)

    p = sub.add_parser("verify", help="run the seeded property fleets")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--trials", type=_positive_int, default=200_000,
                   help="Monte Carlo trials per configuration")
    p.add_argument("--channel", type=Path, help="also check this channel file")
    p.add_argument("--prior", type=Path)
    _add_output(p, ("json",), "json")
    return parser


def _rate_grid(args, parser) -> np.ndarray | None:
    """Rate grid from the flags, or ``None`` when ``--M`` is used."""
    rate_flags = (args.rate_min, args.rate_max, args.rate_points)
    if args.M is not None:
        if any(v is not None for v in rate_flags):
            parser.error("--M cannot be combined with --rate-min/--rate-max/--rate-points")
        if any(b <= a for a, b in zip(args.M, args.M[1:])):
            parser.error("--M values must be strictly increasing")
        return None
    lo = 0.0 if args.rate_min is None else args.rate_min
    hi = 4.0 if args.rate_max is None else args.rate_max
    pts = 50 if args.rate_points is None else args.rate_points
    if pts == 1:
        return np.array([lo])
    if not lo < hi:
        parser.error(f"--rate-min ({lo}) must be below --rate-max ({hi})")
    return np.linspace(lo, hi, pts)


def _load(args):
    return load_channel_file(args.channel, args.prior)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        out.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc.strerror or exc}") from None


def _emit_curve(curve: BoundCurve, args) -> None:
    text = curve.to_json(args.bits) if args.format == "json" else curve.to_csv(args.bits)
    _emit(text, args.out)


def _summarize(curve: BoundCurve) -> str:
    pc, pe = curve.column("P_clipped"), curve.column("P_exact")
    gap = float(np.max(np.maximum(pe - pc, 0.5 * pc - pe)))
    slopes = curve.column("Er_prime")
    slope = "n/a" if np.all(np.isnan(slopes)) else f"{np.nanmin(slopes):.6g}"
    return (f"{len(curve.points)} points; max sandwich excess {gap:.3e} "
            f"(<= 0 means 1/2 P_clipped <= P_exact <= P_clipped); min slope {slope}")


def _check_curve(curve: BoundCurve) -> None:
    print(_summarize(curve), file=sys.stderr)
    bad = curve.violations(slack=1e-12)
    if bad:
        raise InvariantError("invariant violation: " + "; ".join(bad[:5]))


def cmd_bounds(args, parser) -> int:
    grid = _rate_grid(args, parser)
    prob = _load(args)
    if grid is None:
        curve = sweep_sizes(prob.prior, prob.channel, prob.metric, args.M)
    else:
        curve = sweep(prob.prior, prob.channel, prob.metric, grid)
    _emit_curve(curve, args)
    _check_curve(curve)
    return EXIT_OK


def cmd_product(args, parser) -> int:
    grid = _rate_grid(args, parser)
    try:
        spec = BSCSpec(args.n, args.p) if args.family == "bsc" else BECSpec(args.n, args.p)
    except ValueError as exc:
        parser.error(str(exc))
    if grid is not None:
        curve = product_sweep(spec, grid)
    else:
        table = stats_for(spec)
        pts = []
        for M in args.M:
            R, lc = math.log(M), _log_competitors(M)
            pts.append(point_from_values(R, table_F(table, R), table_clipped(table, lc),
                                         table_exact(table, lc), slope_defined=False))
        curve = BoundCurve(tuple(pts))
    _emit_curve(curve, args)
    _check_curve(curve)
    return EXIT_OK


def cmd_witness(args, parser) -> int:
    prob = _load(args)
    if not prob.matched:
        raise InvariantError(
            "witness construction needs the maximum-likelihood metric; this channel file "
            "supplies a different one (remove its 'metric' entry)")
    try:
        wit = matched_witness(prob.prior, prob.channel, args.R)
    except WitnessError as exc:
        raise InvariantError(str(exc)) from None
    beta, F = beta_vs_F(prob.prior, prob.channel, prob.metric, wit.q_y, args.R)
    rec = json.loads(wit.to_json(prob.channel))
    rec.update({"beta": beta, "F": F, "gap": abs(beta - F)})
    _emit(json.dumps(rec, indent=2) + "\n", args.out)
    print(f"|beta - F| = {abs(beta - F):.3e} at R = {args.R!r}", file=sys.stderr)
    return EXIT_OK


def cmd_mc(args, parser) -> int:
    prob = _load(args)
    est = random_coding_mc(prob.prior, prob.channel, prob.metric, args.M, args.trials, args.seed)
    exact = exact_rc_error(prob.prior, prob.channel, prob.metric, args.M)
    z = 0.0 if est.stderr == 0 else (est.mean - exact) / est.stderr
    _emit(est.to_json(M=args.M, exact=exact, z=z), args.out)
    print(f"estimate {est.mean:.6g} +/- {est.stderr:.2g}; exact {exact:.6g}; z = {z:.2f}",
          file=sys.stderr)
    return EXIT_OK


def cmd_code_eval(args, parser) -> int:
    prob = _load(args)
    try:
        code = load_codebook_file(args.code, prob.channel)
    except ChannelError as exc:
        raise InputError(str(exc)) from None
    eps, F, gap = converse_equality_check(code, prob.channel, prob.metric)
    meta = meta_converse_code_bound(code, prob.channel, OutputDist.uniform(prob.channel.n_outputs))
    rec = {"M": code.M, "epsilon": eps, "F_at_logM": F, "gap": gap,
           "meta_converse_uniform_qy": meta}
    _emit(json.dumps(rec, indent=2) + "\n", args.out)
    print(f"epsilon = {eps:.12g}; F(log M) = {F:.12g}; gap = {gap:.3e}", file=sys.stderr)
    if gap > 1e-12 or meta > eps + 1e-12:
        raise InvariantError("converse check failed: "
                             f"gap {gap:.3e}, meta-converse {meta!r} vs epsilon {eps!r}")
    return EXIT_OK


def cmd_verify(args, parser) -> int:
    problem = _load(args) if args.channel is not None else None
    results = verify.run_all(seed=args.seed, trials=args.trials, problem=problem)
    for r in results:
        print(r.line(), file=sys.stderr)
    failed = [r.name for r in results if not r.passed]
    report = {"seed": args.seed, "trials": args.trials, "passed": not failed,
              "failed": failed, "checks": [r.as_dict() for r in results]}
    _emit(json.dumps(report, indent=2, default=float) + "\n", args.out)
    if failed:
        raise InvariantError("failing properties: " + ", ".join(failed))
    return EXIT_OK


COMMANDS = {
    "bounds": cmd_bounds,
    "witness": cmd_witness,
    "mc": cmd_mc,
    "code-eval": cmd_code_eval,
    "product": cmd_product,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, parser)
    except (ChannelError, InputError) as exc:
        print(f"fblbounds: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantError as exc:
        print(f"fblbounds: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
