"""Command-line front end: ``hdtd test``, ``hdtd simulate`` and ``hdtd mc``.

Every failure prints one line ``error: <kind>: <message>`` on stderr and exits
nonzero: 2 for malformed input or invalid options, 3 for dimension mismatches,
4 when the data make a trace estimate degenerate.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .datafile import format_long, format_stack, read_matrix, read_sample
from .errors import (
    DegenerateSample,
    DimensionMismatch,
    HDTDError,
    InvalidConfig,
    NonpositiveScale,
)
from .hypothesis_tests import NullKind, NullSpec, Target, TestOutcome, run_test
from .montecarlo import FAST_REPLICATES, CellResult, load_config, run_grid, summarize
from .simulation import CovConfig, InnovationLaw, ModelSpec, sample_dataset

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DIMENSION = 3
EXIT_DEGENERATE = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse prints usage plus a message over several lines; keep errors to one
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _fail(kind: str, message: str, code: int) -> int:
    text = " ".join(str(message).split())
    print(f"error: {kind}: {text}", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# test


def outcome_record(out: TestOutcome, n: int, r: int, c: int) -> dict:
    """JSON-ready report; field names are part of the CLI contract."""
    return {
        "statistic": out.statistic,
        "p_value": out.p_value,
        "reject": out.reject,
        "alpha": out.alpha,
        "null": out.null.kind.value,
        "target": out.null.target.value,
        "n": n,
        "r": r,
        "c": c,
        "tr_sigma_c2_hat": out.estimates.tr_sigma_c2_hat,
        "k_hat": out.k_hat,
    }


def _text_report(rec: dict, out: TestOutcome) -> str:
    decision = "reject" if rec["reject"] else "do not reject"
    lines = [
        f"null:            {rec['null']} ({rec['target']} covariance)",
        f"dimensions:      N={rec['n']} r={rec['r']} c={rec['c']}",
        f"statistic:       {rec['statistic']:.6f}",
        f"p-value:         {rec['p_value']:.6g}",
        f"decision:        {decision} at alpha={rec['alpha']:g} (z_alpha={out.z_alpha:.4f})",
        f"tr(Sigma^2) hat: {rec['tr_sigma_c2_hat']:.6g} (nuisance side)",
    ]
    if rec["k_hat"] is not None:
        lines.append(f"k hat:           {rec['k_hat']:.6g}")
    return "\n".join(lines)


def cmd_test(args: argparse.Namespace) -> int:
    sample = read_sample(args.input)
    kind = NullKind(args.null)
    target = Target(args.target)
    sigma0 = None
    if kind is NullKind.KNOWN:
        if args.sigma0 is None:
            raise UsageError("--null known requires --sigma0")
        sigma0 = read_matrix(args.sigma0, square=True)
        need = sample.rows if target is Target.ROWS else sample.cols
        if sigma0.shape[0] != need:
            raise DimensionMismatch(f"sigma0 is {sigma0.shape[0]}x{sigma0.shape[0]}, the {target.value} dimension is {need}")
    elif args.sigma0 is not None:
        raise UsageError("--sigma0 is only used with --null known")
    null = NullSpec(kind=kind, sigma_r0=sigma0, scale_mode=args.scale, target=target, alpha=args.alpha, centered=args.centered)
    out = run_test(sample, null)
    rec = outcome_record(out, sample.n, sample.rows, sample.cols)
    if args.output == "json":
        print(json.dumps(rec))
    else:
        print(_text_report(rec, out))
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    for name in ("n", "r", "c"):
        if getattr(args, name) < 1:
            raise InvalidConfig(f"--{name} must be positive")
    mean = None
    if args.mean != "zero":
        mean = read_matrix(args.mean, shape=(args.r, args.c))
    spec = ModelSpec(
        n=args.n,
        row_cov=CovConfig.parse(args.row_cov, args.r),
        col_cov=CovConfig.parse(args.col_cov, args.c),
        law=InnovationLaw.parse(args.law),
        mean=mean,
        seed=args.seed,
    )
    sample = sample_dataset(spec)
    text = format_long(sample) if args.format == "long" else format_stack(sample)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# mc


def _threads(arg: Optional[int]) -> Optional[int]:
    if arg is not None:
        return arg
    env = os.environ.get("HDTD_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise InvalidConfig(f"HDTD_THREADS must be an integer, got {env!r}") from None
    return None


def cmd_mc(args: argparse.Namespace) -> int:
    overrides = {"threads": _threads(args.threads), "seed": args.seed}
    if args.fast:
        overrides["replicates"] = FAST_REPLICATES
    cfg = load_config(args.config, **overrides)
    total = len(cfg.cells())

    def progress(res: CellResult) -> None:
        c = res.cell
        progress.done += 1  # type: ignore[attr-defined]
        flag = f" degenerate={res.degenerate_count}" if res.flagged else ""
        print(
            f"[{progress.done}/{total}] {c.test} {c.scenario} {c.row_config} N={c.n} r={c.r} c={c.c} "  # type: ignore[attr-defined]
            f"rho={c.rho:g}: rate={res.rate:.3f} (se {res.mc_standard_error:.3f}) {res.wall_time:.1f}s{flag}",
            file=sys.stderr,
        )

    progress.done = 0  # type: ignore[attr-defined]
    summary = summarize(run_grid(cfg, progress))
    if args.out == "-":
        sys.stdout.write(summary.to_csv())
    else:
        Path(args.out).write_text(summary.to_csv())
        sys.stdout.write(summary.to_text())
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hdtd", description="Sphericity and identity tests for transposable data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="test a row or column covariance hypothesis")
    t.add_argument("--input", required=True, help="matrix-stack or long-form CSV data file")
    t.add_argument("--target", choices=[x.value for x in Target], default="row")
    t.add_argument("--null", choices=[x.value for x in NullKind], default="sphericity")
    t.add_argument("--sigma0", help="square CSV with the hypothesised covariance (known null)")
    t.add_argument("--scale", choices=["known-trace", "estimate"], default="known-trace")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--centered", action="store_true", help="data have known zero mean")
    t.add_argument("--output", choices=["text", "json"], default="text")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="draw a sample from the Kronecker model")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--r", type=int, required=True)
    s.add_argument("--c", type=int, required=True)
    s.add_argument("--row-cov", default="identity", help="identity|diag8|cs|tridiag|ar1:RHO|scaled:S2")
    s.add_argument("--col-cov", default="identity", help="same choices as --row-cov")
    s.add_argument("--law", default="gaussian", help="gaussian|gamma")
    s.add_argument("--mean", default="zero", help="zero, or a CSV file with an r x c mean matrix")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--format", choices=["stack", "long"], default="stack")
    s.add_argument("--out", required=True, help="output path, '-' for stdout")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("mc", help="run a Monte Carlo size/power experiment")
    m.add_argument("--config", required=True, help="YAML file or bundled config name")
    m.add_argument("--threads", type=int, help="worker threads (default: HDTD_THREADS or the config)")
    m.add_argument("--seed", type=int)
    m.add_argument("--out", default="-", help="CSV output path, '-' for stdout")
    m.add_argument("--fast", action="store_true", help=f"use {FAST_REPLICATES} replicates per cell")
    m.set_defaults(func=cmd_mc)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_INPUT)
    except DimensionMismatch as exc:
        return _fail("dimension-mismatch", str(exc), EXIT_DIMENSION)
    except DegenerateSample as exc:
        return _fail("degenerate", f"estimator {exc.estimator or 'unknown'}: {exc}", EXIT_DEGENERATE)
    except NonpositiveScale as exc:
        return _fail("degenerate", f"estimator k_hat: {exc}", EXIT_DEGENERATE)
    except InvalidConfig as exc:
        return _fail("invalid-config", str(exc), EXIT_INPUT)
    except HDTDError as exc:
        kind = "".join("-" + ch.lower() if ch.isupper() else ch for ch in type(exc).__name__).lstrip("-")
        return _fail(kind, str(exc), EXIT_INPUT)
    except ValueError as exc:
        return _fail("invalid-argument", str(exc), EXIT_INPUT)
    except OSError as exc:
        return _fail("io", f"{exc.filename or ''} {exc.strerror or exc}".strip(), EXIT_INPUT)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
