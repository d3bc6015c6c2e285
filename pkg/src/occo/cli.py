"""Command-line entry point ``occo``.

Exit codes: 0 success, 1 error, 2 certificate or invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .harness import ExperimentConfig, emit_csv, run_experiment, run_suite, verify_csv
from .learners import LEARNERS

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2

log = logging.getLogger("occo")

# config-file keys -> ExperimentConfig fields
_KEYS = {
    "case": ("case", str),
    "algo": ("algo", str),
    "lag": ("lag", int),
    "rounds": ("rounds", int),
    "epsilon": ("epsilon", float),
    "initial_p": ("initial_P", float),
    "seed": ("seed", int),
    "tol": ("tol", float),
    "max_iters": ("max_iters", int),
    "out": ("out", str),
}


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys read as underscores."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key not in _KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        field, conv = _KEYS[key]
        try:
            values[field] = conv(value)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return values


class _Parser(argparse.ArgumentParser):
    # usage errors must not collide with the violation exit code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="occo", description="Online convex-concave optimization experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write its CSV")
    run.add_argument("--config", help="key = value file; flags override it")
    run.add_argument("--case", choices=["1", "2", "3", "4", "I", "II", "III", "IV"])
    run.add_argument("--algo", choices=sorted(LEARNERS))
    run.add_argument("--lag", type=int)
    run.add_argument("--rounds", type=int)
    run.add_argument("--epsilon", type=float)
    run.add_argument("--initial-p", dest="initial_P", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--tol", type=float)
    run.add_argument("--max-iters", dest="max_iters", type=int)
    run.add_argument("--out")

    suite = sub.add_parser("suite", help="reproduce every panel of a figure")
    suite.add_argument("--figure", required=True, choices=["3", "4"])
    suite.add_argument("--out", required=True, help="output directory")
    suite.add_argument("--rounds", type=int, default=10_000)
    suite.add_argument("--seed", type=int, default=0)
    suite.add_argument("--jobs", type=int, default=1)
    suite.add_argument("--no-plot", dest="plot", action="store_false", help="skip the PNG panels")

    verify = sub.add_parser("verify", help="re-check a run CSV")
    verify.add_argument("file")
    return parser


def _cmd_run(args) -> int:
    values = read_config(args.config) if args.config else {}
    for field, _ in _KEYS.values():
        v = getattr(args, field, None)
        if v is not None:
            values[field] = v
    if "out" not in values:
        raise ValueError("--out is required (flag or config file)")
    cfg = ExperimentConfig(**values)
    trace = run_experiment(cfg)
    emit_csv(trace, cfg.out)
    log.info("wrote %s (%d sampled rounds)", cfg.out, len(trace.records))
    if trace.violations:
        for v in trace.violations[:20]:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_suite(args) -> int:
    by_case = run_suite(args.figure, args.out, jobs=args.jobs, plot=args.plot, rounds=args.rounds, seed=args.seed)
    bad = [(tr.config.case, tr.config.label, v) for trs in by_case.values() for tr in trs for v in tr.violations]
    for case, label, v in bad[:20]:
        print(f"violation: case {case} {label}: {v}", file=sys.stderr)
    return EXIT_VIOLATION if bad else EXIT_OK


def _cmd_verify(args) -> int:
    res = verify_csv(args.file)
    for e in res.errors:
        print(f"error: {e}", file=sys.stderr)
    for v in res.violations:
        print(f"violation: {v}", file=sys.stderr)
    if res.errors:
        return EXIT_ERROR
    if res.violations:
        return EXIT_VIOLATION
    print(f"{args.file}: ok")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handler = {"run": _cmd_run, "suite": _cmd_suite, "verify": _cmd_verify}[args.command]
    try:
        return handler(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
