"""Command-line front end: ``rssi-chest {sweep,eval,bound,verify}``.

Exit status: 0 on success, 1 when a ``verify`` check fails, 2 for usage or
spec validation errors.
"""

import argparse
import os
import re
import sys
from pathlib import Path

from . import __version__
from .checks import run_checks
from .experiment import build_spec, default_spec, emit_report, load_spec, run_sweep, split_list
from .estimators import EstimatorTag
from .metrics import empirical_mse, mse_lower_bound, relative_reduction

OUTPUT_DIR_ENV = "RSSI_CHEST_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _add_common(p, trials=True):
    p.add_argument("--spec", type=Path, help="key = value spec file")
    p.add_argument("--seed", type=int, help="master seed")
    if trials:
        p.add_argument("--trials", type=int, help="Monte-Carlo trials per cell")
        p.add_argument("--workers", type=int, default=1, help="worker threads")
    p.add_argument("--n-antennas", type=int, dest="n_antennas")
    p.add_argument("--n-users", type=int, dest="n_users")
    p.add_argument("--prior-variance", type=float, dest="prior_variance")
    p.add_argument("--user", type=int, help="0-based user index")


def build_parser():
    parser = _Parser(prog="rssi-chest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sweep", help="run an SNR x m x estimator sweep and write CSV")
    _add_common(p)
    p.add_argument("--snr", help="comma-separated SNR list in dB")
    p.add_argument("--m", help="comma-separated feedback counts")
    p.add_argument("--estimator", help="comma-separated estimator tags")
    p.add_argument("--out", type=Path, help=f"CSV path (default: ${OUTPUT_DIR_ENV}/sweep.csv)")

    p = sub.add_parser("eval", help="evaluate one estimator at one operating point")
    _add_common(p)
    p.add_argument("--estimator", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--snr", type=float, required=True)

    p = sub.add_parser("bound", help="MSE lower bound by quadrature")
    _add_common(p, trials=False)
    p.add_argument("--snr", required=True, help="comma-separated SNR list in dB")

    p = sub.add_parser("verify", help="run the built-in property checks")
    _add_common(p)
    return parser


def _overrides(args):
    out = {}
    for key, attr in (
        ("master_seed", "seed"),
        ("n_trials", "trials"),
        ("n_antennas", "n_antennas"),
        ("n_users", "n_users"),
        ("prior_variance", "prior_variance"),
        ("user", "user"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = str(value)
    if args.command == "sweep":
        for key, attr in (("snr_db", "snr"), ("m", "m"), ("estimators", "estimator")):
            value = getattr(args, attr)
            if value is not None:
                out[key] = value
    return out


def _effective_spec(args):
    overrides = _overrides(args)
    if args.spec is not None:
        return load_spec(args.spec, overrides)
    return build_spec(overrides, default_spec())


def _sweep(args, spec):
    out = args.out
    if out is None:
        out = Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / "sweep.csv"
    report = run_sweep(spec, n_workers=args.workers)
    csv_path, meta_path = emit_report(report, out)
    print(f"wrote {len(report.cells)} rows to {csv_path} (metadata: {meta_path})")
    return 0


def _eval(args, spec):
    cfg, n, seed = spec.config, spec.n_trials, spec.master_seed
    mse = empirical_mse(args.estimator, args.m, args.snr, cfg, n, seed, spec.user, args.workers)
    base = empirical_mse(args.estimator, 0, args.snr, cfg, n, seed, spec.user, args.workers)
    print(f"estimator      {args.estimator}")
    print(f"snr_db         {args.snr:g}")
    print(f"m              {args.m}")
    print(f"mse_mean       {mse.mean:.9g}")
    print(f"mse_std_error  {mse.std_error:.9g}")
    print(f"rel_reduction  {relative_reduction(base, mse):.6g} %")
    print(f"n_trials       {mse.n_trials}")
    return 0


def _bound(args, spec):
    for snr in split_list(args.snr):
        cfg = spec.config.with_snr(float(snr))
        lb = mse_lower_bound(cfg, spec.user)
        parts = " ".join(f"{v:.9g}" for v in lb.per_antenna)
        print(
            f"snr_db={float(snr):g} bound={lb.value:.9g} "
            f"per_antenna=[{parts}] quad_error={lb.quadrature_error:.2g}"
        )
    return 0


def _verify(args, spec):
    results = run_checks(spec.master_seed, spec.n_trials, spec.config, spec.user, args.workers)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


_COMMANDS = {"sweep": _sweep, "eval": _eval, "bound": _bound, "verify": _verify}


def _fuse_negative_values(argv):
    # argparse takes "--snr -10,0" for two flags; SNR lists are often negative
    out, it = [], iter(argv)
    for token in it:
        if token == "--snr":
            value = next(it, None)
            if value is not None and re.fullmatch(r"-[\d.][\d.,\s-]*", value):
                out.append(f"{token}={value}")
                continue
            out.append(token)
            if value is not None:
                out.append(value)
            continue
        out.append(token)
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_fuse_negative_values(argv))
    try:
        spec = _effective_spec(args)
        if getattr(args, "workers", 1) < 1:
            raise ValueError("--workers must be >= 1")
        if args.command == "eval":
            if not 0 <= args.m <= spec.config.n_antennas:
                raise ValueError(f"--m must be in 0..{spec.config.n_antennas}")
            EstimatorTag.parse(args.estimator)
        if args.command == "bound":
            [float(s) for s in split_list(args.snr)]
    except (ValueError, TypeError) as exc:
        print(f"rssi-chest: invalid spec: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"rssi-chest: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args, spec)
    except OSError as exc:
        print(f"rssi-chest: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
