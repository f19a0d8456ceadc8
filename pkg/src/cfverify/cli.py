"""Command line entry point.

Every registered check is a subcommand whose flags mirror its suite
parameters, so `cfverify cayley --seed 5` and a one-section suite file
produce the same records.  `cfverify suite path.ini` runs a whole
configuration.  Exit status: 0 when every record matches its declared
expectation, 1 when any does not, 2 for unusable invocations.

Worker count for sample-parallel checks comes from CFVERIFY_WORKERS;
it changes chunking only, never values.
"""

from __future__ import annotations

import argparse
import sys

from .exceptions import CfverifyError
from .report import (EXPECTATIONS, FORMATS, _REGISTRY, CheckSpec, SuiteConfig,
                     emit_report, run_suite, suite_passed)

_SUMMARIES = {
    "haar-moments": "second moments of group elements against 1/N formulas",
    "cf-verify": "coefficientwise color-flavor transformation comparison",
    "det-identities": "determinant-product averages against flavor integrals",
    "weyl-ratio": "closed saddle sum for ratios against the group average",
    "kernel-disk": "disk-measure moments against the kernel series",
    "kernel-circle": "two-color boundary kernel on Fourier monomials",
    "typea-radial": "rank (1|1) bulk integrals and their 1/N moments",
    "typea-n1": "single-color integrals with the boundary term restored",
    "cayley": "resolvent identities, Gaussian routes, and phase kernels",
    "stable-range": "validity thresholds from the restricted root system",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfverify",
        description="desk-scale verification checks with deterministic reports")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, op in _REGISTRY.items():
        sub = subs.add_parser(name, help=_SUMMARIES[name])
        for key, convert in op.schema.items():
            sub.add_argument(f"--{key}", dest=key, type=convert,
                             default=None, metavar=key.upper(),
                             required=key in op.required)
        sub.add_argument("--expect", choices=EXPECTATIONS, default="pass",
                         help="verdict this run is supposed to produce")
        sub.add_argument("--out", default=None, help="write the report here")
        sub.add_argument("--format", choices=FORMATS, default="table")
    suite = subs.add_parser("suite", help="run every check in an INI file")
    suite.add_argument("config", help="path to the suite configuration")
    suite.add_argument("--out", default=None, help="write the report here")
    suite.add_argument("--format", choices=FORMATS, default="structured-text")
    return parser


def _single_check(args: argparse.Namespace) -> SuiteConfig:
    schema = _REGISTRY[args.command].schema
    params = {key: getattr(args, key) for key in schema
              if getattr(args, key) is not None}
    spec = CheckSpec(args.command, args.command, args.expect,
                     tuple(sorted(params.items())))
    return SuiteConfig((spec,))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "suite":
            config = SuiteConfig.load(args.config)
        else:
            config = _single_check(args)
        records = run_suite(config)
        text = emit_report(records, args.format, args.out)
    except (CfverifyError, OSError) as exc:
        print(f"cfverify: {exc}", file=sys.stderr)
        return 2
    if args.out is None:
        sys.stdout.write(text)
    return 0 if suite_passed(records) else 1


if __name__ == "__main__":
    raise SystemExit(main())
