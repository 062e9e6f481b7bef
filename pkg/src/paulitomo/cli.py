"""Command-line interface: ``paulitomo <subcommand> ...``.

Exit codes: 0 success, 2 bad input, 3 state generation gave up,
4 numerical non-convergence. Files given as ``-`` are read from stdin or
written to stdout, so the subcommands can be piped together.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import FILE_FORMATS, __version__
from .errors import FormatError, TomographyError
from .estimator import ThresholdPolicy, estimate, psd_project
from .harness import ExperimentConfig, run_bench
from .measurement import format_record, parse_record, sample_measurements
from .norms import error_report
from .pauli import parse_label
from .state import SupportRule, format_state, generate_state, parse_state


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read: {exc.strerror}", None, path) from None


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(path).write_text(text)


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_gen_state(args) -> int:
    rng = np.random.default_rng(args.seed)
    rule = SupportRule(log_base=args.support_log_base)
    state, attempts = generate_state(args.qubits, rng, args.support, args.amplitude, support_rule=rule)
    _write(args.out, format_state(state))
    _info(f"support={len(state)} attempts={attempts}")
    return 0


def cmd_measure(args) -> int:
    state = parse_state(_read(args.state), args.state)
    labels = None
    if args.labels:
        labels = [parse_label(x.strip()) for x in args.labels.split(",") if x.strip()]
    record = sample_measurements(state, args.shots, labels, np.random.default_rng(args.seed))
    _write(args.out, format_record(record))
    return 0


def cmd_estimate(args) -> int:
    record = parse_record(_read(args.record), args.record)
    policy = ThresholdPolicy.parse(args.policy, args.hbar, args.log_base)
    report = estimate(record, policy, args.rule)
    state = report.estimate
    if args.project:
        state = psd_project(state)
    _write(args.out, format_state(state))
    _info(f"survivors={report.survivors} policy={policy.describe()} rule={args.rule}")
    return 0


def _schatten_list(text: str) -> tuple[float, ...]:
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        value = math.inf if tok in ("inf", "infinity") else float(tok)
        if not value >= 1:
            raise argparse.ArgumentTypeError(f"Schatten index must be >= 1, got {tok}")
        out.append(value)
    return tuple(out)


def cmd_eval(args) -> int:
    truth = parse_state(_read(args.truth), args.truth)
    est = parse_state(_read(args.estimate), args.estimate)
    rep = error_report(est, truth, schatten=args.schatten, method=args.method)
    lines = [
        f"method={rep.method}",
        f"spectral_sq={rep.spectral_sq!r}",
        f"frobenius_sq={rep.frobenius_sq!r}",
    ]
    for s, v in rep.schatten.items():
        name = "inf" if math.isinf(s) else f"{s:g}"
        lines.append(f"schatten_{name}={v!r}")
    print("\n".join(lines))
    return 0


def cmd_project(args) -> int:
    state = parse_state(_read(args.state), args.state)
    _write(args.out, format_state(psd_project(state)))
    return 0


def cmd_bench(args) -> int:
    config = ExperimentConfig.from_text(_read(args.config), args.config)
    table = run_bench(config, args.out_dir, workers=args.workers, version=__version__)
    _info(f"wrote {len(table)} rows to {Path(args.out_dir) / 'mse.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paulitomo", description="Sparse density-matrix estimation from Pauli measurement counts."
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"paulitomo {__version__} (formats: {', '.join(FILE_FORMATS)})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-state", help="generate a random sparse density state")
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--support", type=int, default=None, help="number of nonzero coefficients")
    p.add_argument("--amplitude", type=float, default=0.2)
    p.add_argument("--support-log-base", choices=("natural", "ten", "two"), default="natural")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gen_state)

    p = sub.add_parser("measure", help="simulate binomial Pauli measurement counts")
    p.add_argument("--state", required=True)
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--labels", default=None, help="comma-separated labels (default: all)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("estimate", help="threshold estimator from a count record")
    p.add_argument("--record", required=True)
    p.add_argument("--rule", choices=("hard", "soft"), default="hard")
    p.add_argument("--policy", default="universal", help="universal | individual | fixed:<v>")
    p.add_argument("--hbar", type=float, default=1.01)
    p.add_argument("--log-base", choices=("ten", "natural"), default="ten")
    p.add_argument("--project", action="store_true", help="project onto density matrices")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("eval", help="error norms between two state files")
    p.add_argument("--truth", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--schatten", type=_schatten_list, default=())
    p.add_argument("--method", choices=("auto", "dense", "iterative"), default="auto")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("project", help="nearest density matrix in Frobenius norm")
    p.add_argument("--state", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("bench", help="run the simulation study")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TomographyError as exc:
        _info(f"paulitomo {args.command}: error: {exc}")
        return exc.exit_code
    except (OSError, UnicodeDecodeError) as exc:
        _info(f"paulitomo {args.command}: error: {exc}")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
