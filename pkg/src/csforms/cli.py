"""Command-line front end: ``python -m csforms <subcommand> [flags]``.

Every option can also be given in a plain-text config file of
``key = value`` lines (``#`` starts a comment); keys are the long flag names
with or without leading dashes.  Command-line flags override the file.

Exit status is 0 when every report passes, 1 when some criterion fails and
2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys

from .calculus import DiffSpec
from .geometry import QuadratureSpec
from .experiments import (
    FUZZ_KINDS,
    MC_TARGETS,
    reports_to_csv,
    reports_to_json,
    run_all,
    run_conformal_check,
    run_cs_lens,
    run_cs_sphere,
    run_hypersurface,
    run_identity_fuzz,
    run_mc_integral,
)

__all__ = ["build_parser", "cli_main", "load_config", "main"]

DEFAULTS = {
    "quad_order": 16,
    "diff": "fd",
    "fd_step": 1e-5,
    "tol": None,
    "seed": 0,
    "out": None,
    "format": "json",
    "no_convergence": False,
    # subcommand options
    "target": "all",
    "gauge": "none",
    "p": 5,
    "q1": 1,
    "q2": 2,
    "axes": [1.0, 1.1, 1.2, 1.3],
    "conformal": False,
    "factors": 1,
    "which": "all",
    "trials": None,
    "conformal_factors": 10,
}

_CONVERTERS = {
    "quad_order": int,
    "fd_step": float,
    "tol": float,
    "seed": int,
    "p": int,
    "q1": int,
    "q2": int,
    "factors": int,
    "trials": int,
    "conformal_factors": int,
    "axes": lambda s: [float(t) for t in s.replace(",", " ").split()],
    "no_convergence": lambda s: _parse_bool(s),
    "conformal": lambda s: _parse_bool(s),
}


class ConfigError(ValueError):
    pass


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def load_config(path: str) -> dict:
    """Parse a ``key = value`` file into converted option values."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (t.strip() for t in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = _CONVERTERS.get(key, str)(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--quad-order", type=int, metavar="N", help="Gauss/midpoint nodes per axis (default 16)")
    g.add_argument("--diff", choices=["analytic", "fd"], help="derivative backend for constructed fields (default fd)")
    g.add_argument("--fd-step", type=float, metavar="H", help="finite-difference step (default 1e-5)")
    g.add_argument("--tol", type=float, metavar="T", help="override the per-experiment tolerance")
    g.add_argument("--seed", type=int, metavar="S", help="random seed (default 0)")
    g.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    g.add_argument("--format", choices=["json", "csv"], help="report format (default json)")
    g.add_argument("--config", metavar="PATH", help="key = value file; flags override it")
    g.add_argument("--no-convergence", action="store_true", default=None,
                   help="skip the doubled-order convergence checks")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="csforms", description="Chern-Simons form experiments.")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("mc", parents=[common], help="Maurer-Cartan integrals")
    p.add_argument("--target", choices=list(MC_TARGETS) + ["all"])

    p = sub.add_parser("cs-sphere", parents=[common], help="round 3-sphere invariant")
    p.add_argument("--gauge", choices=["none", "constant", "so2"])

    p = sub.add_parser("cs-lens", parents=[common], help="lens space invariant")
    p.add_argument("--p", type=int)
    p.add_argument("--q1", type=int)
    p.add_argument("--q2", type=int)

    p = sub.add_parser("hypersurface", parents=[common], help="ellipsoid in R^4")
    p.add_argument("--axes", type=float, nargs=4, metavar="A")
    p.add_argument("--conformal", action="store_true", default=None,
                   help="use a random conformal rescaling of the induced metric")

    p = sub.add_parser("conformal", parents=[common], help="conformal variation checks")
    p.add_argument("--factors", type=int, metavar="N", help="number of random conformal factors (default 1)")

    p = sub.add_parser("fuzz", parents=[common], help="identity fuzzing")
    p.add_argument("--which", choices=list(FUZZ_KINDS) + ["all"])
    p.add_argument("--trials", type=int)

    p = sub.add_parser("all", parents=[common], help="every acceptance experiment")
    p.add_argument("--conformal-factors", type=int, metavar="N")
    return parser


def _resolve(args: argparse.Namespace, config: dict) -> dict:
    opts = {}
    for key, default in DEFAULTS.items():
        value = getattr(args, key, None)
        if value is None:
            value = config.get(key, default)
        opts[key] = value
    return opts


def _run(command: str, o: dict, progress) -> list:
    quad = QuadratureSpec(o["quad_order"])
    spec = DiffSpec("analytic" if o["diff"] == "analytic" else "central_fd", o["fd_step"])
    seed, tol, conv = o["seed"], o["tol"], not o["no_convergence"]
    reports = []

    def emit(r):
        progress(r)
        reports.append(r)

    if command == "mc":
        targets = MC_TARGETS if o["target"] == "all" else (o["target"],)
        for t in targets:
            emit(run_mc_integral(t, quad, tol=tol or 1e-6, seed=seed, convergence=conv))
    elif command == "cs-sphere":
        emit(run_cs_sphere(quad, spec, o["gauge"], seed, tol, conv))
    elif command == "cs-lens":
        emit(run_cs_lens((o["p"], o["q1"], o["q2"]), quad, spec, tol or 1e-6, seed, conv))
    elif command == "hypersurface":
        emit(run_hypersurface(tuple(o["axes"]), quad, spec, tol, seed, bool(o["conformal"]), conv))
    elif command == "conformal":
        for k in range(o["factors"]):
            emit(run_conformal_check(seed * 1000 + k, quad, spec, tol or 1e-5, convergence=conv))
    elif command == "fuzz":
        kinds = FUZZ_KINDS if o["which"] == "all" else (o["which"],)
        for k in kinds:
            emit(run_identity_fuzz(k, seed, o["trials"], None if o["diff"] == "fd" else spec, tol=tol))
    elif command == "all":
        reports = run_all(seed, quad, spec, tol, o["conformal_factors"], progress=progress)
    return reports


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = load_config(args.config) if args.config else {}
        opts = _resolve(args, config)
        DiffSpec("central_fd", opts["fd_step"])
        QuadratureSpec(opts["quad_order"])
    except (OSError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"csforms: error: {exc}", file=sys.stderr)
        return 2

    def progress(r):
        print(r.summary_line(), file=sys.stderr, flush=True)

    try:
        reports = _run(args.command, opts, progress)
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"csforms: error: {exc}", file=sys.stderr)
        return 2
    text = reports_to_json(reports) + "\n" if opts["format"] == "json" else reports_to_csv(reports)
    if opts["out"]:
        with open(opts["out"], "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if all(r.passed for r in reports) else 1


def main() -> None:
    sys.exit(cli_main())
