"""Command line entry point.

Exit codes: 0 success, 1 check failed (inadmissible criterion, non-monotone
sweep), 2 usage or config error, 3 numerical failure (NaN or CFL),
4 I/O failure.  Failures of ``run`` are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys

from .diagnostics import InadmissibleCriterion
from .snapshot import SnapshotError
from .solver import CFLViolation, NumericalFailure

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _error(kind: str, message: str, code: int, **extra) -> int:
    payload = {"error": kind, "message": message, "exit_code": code, **extra}
    print(json.dumps(payload), file=sys.stderr)
    return code


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list, got {text!r}")


def _exponent(text: str) -> float:
    from .diagnostics import parse_exponent

    try:
        value = parse_exponent(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse exponent {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"exponent must be >= 1, got {text}")
    return value


def _ensemble(text: str) -> dict:
    """``n=32,size=50,seed=0,peak=2``; omitted keys take these defaults."""
    spec = {"n": 32, "size": 50, "seed": 0, "peak": 2}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep or key not in spec:
            raise argparse.ArgumentTypeError(f"bad ensemble entry {item!r}")
        try:
            spec[key] = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad ensemble value {item!r}")
    return spec


def cmd_run(args) -> int:
    from .runner import ConfigError, load_config, run_simulation

    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        return _error("io", str(exc), EXIT_IO)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    try:
        result = run_simulation(cfg)
    except CFLViolation as exc:
        return _error("cfl_violation", str(exc), EXIT_NUMERICAL, cfl=exc.cfl, step=exc.step_index)
    except NumericalFailure as exc:
        return _error("numerical", str(exc), EXIT_NUMERICAL, step=exc.step_index)
    except (ConfigError, SnapshotError) as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    except OSError as exc:
        return _error("io", str(exc), EXIT_IO)
    s = result.summary
    print(
        f"{s['steps']} steps to t = {s['final_time']:.6g}; "
        f"serrin_accum = {s['serrin_accum']:.6g}; "
        f"gronwall C = {s['gronwall']['constant']:.6g} "
        f"(envelope {'holds' if s['gronwall']['envelope_dominates'] else 'FAILS'})"
    )
    return EXIT_OK


def cmd_check_criterion(args) -> int:
    from .runner import check_criterion

    admissible, constraints = check_criterion(args.p, args.q)
    for name, ok, detail in constraints:
        print(f"{'ok  ' if ok else 'FAIL'}  {name:<16} {detail}")
    print("admissible" if admissible else "inadmissible")
    return EXIT_OK if admissible else EXIT_CHECK_FAILED


def cmd_sweep_identity(args) -> int:
    from .runner import IDENTITY_FIELDS, sweep_identity

    if args.field not in IDENTITY_FIELDS:
        print(f"unknown field {args.field!r}; choose from {', '.join(IDENTITY_FIELDS)}",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = sweep_identity(args.resolutions, args.field, seed=args.seed,
                                mask_delta=args.delta)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    print(f"{'n':>6}  residual")
    for row in report["rows"]:
        print(f"{row['n']:>6}  {row['residual']:.6e}")
    print("monotone" if report["monotone"] else "NOT monotone")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report, fh, indent=2)
    return EXIT_OK if report["monotone"] else EXIT_CHECK_FAILED


def cmd_sweep_lemma(args) -> int:
    from .runner import sweep_lemma

    ens = args.ensemble
    try:
        reports = sweep_lemma(args.r, n=ens["n"], size=ens["size"], seed=ens["seed"],
                              spectrum_peak=ens["peak"], out_dir=args.out)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        return _error("io", str(exc), EXIT_IO)
    for rep in reports:
        print(f"r = {rep.r:g}  theta = {rep.theta:.4f}  C = {rep.fitted_C:.6e}  "
              f"{'holds' if rep.holds else 'FAILS'}")
    return EXIT_OK if all(rep.holds for rep in reports) else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsreg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate and diagnose one JSON config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check-criterion", help="admissibility of (p, q)")
    p.add_argument("--p", type=_exponent, required=True)
    p.add_argument("--q", type=_exponent, required=True)
    p.set_defaults(func=cmd_check_criterion)

    p = sub.add_parser("sweep-identity", help="identity residual under refinement")
    p.add_argument("--field", required=True)
    p.add_argument("--resolutions", type=_int_list, default=[16, 32, 64])
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--delta", type=float, default=1e-2)
    p.add_argument("--json")
    p.set_defaults(func=cmd_sweep_identity)

    p = sub.add_parser("sweep-lemma", help="fit the interpolation-lemma constant")
    p.add_argument("--r", type=_float_list, required=True)
    p.add_argument("--ensemble", type=_ensemble, default=_ensemble(""))
    p.add_argument("--out", default="lemma_reports")
    p.set_defaults(func=cmd_sweep_lemma)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
