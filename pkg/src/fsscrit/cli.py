"""Command-line entry point: ``fsscrit {fss,collapse,larged,analytic}``.

Settings come from an optional ``--config`` file of ``key = value`` lines
(``#`` starts a comment); command-line flags override the file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError, FssError, MissingInputError, NumericalError, ParameterError
from .pipeline import RunConfig, StageError, run_analytic, run_collapse, run_fss, run_larged

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_MISSING = 0, 2, 3, 4

COMMANDS = {"fss": run_fss, "collapse": run_collapse, "larged": run_larged, "analytic": run_analytic}


def _triple(text: str, kinds: tuple[type, type, type], what: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"{what} needs three ':'-separated values, got {text!r}")
    try:
        return tuple(kind(p) for kind, p in zip(kinds, parts))
    except ValueError:
        raise ConfigError(f"cannot parse {what} {text!r}") from None


def _threads(text: str) -> int | str:
    if text == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"threads must be an integer or 'auto', got {text!r}") from None


def _float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse {what} {text!r}") from None


def _bool(text: str, what: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse {what} {text!r} as a boolean")


# key -> (RunConfig field, parser)
PARSERS = {
    "method": ("method", str),
    "sizes": ("sizes", lambda t: _triple(t, (int, int, int), "sizes")),
    "lambda": ("lambda_grid", lambda t: _triple(t, (float, float, int), "lambda")),
    "h": ("h", lambda t: _float(t, "h")),
    "r_c_policy": ("r_c_policy", str),
    "r_c": ("r_c", lambda t: _float(t, "r_c")),
    "output": ("output_dir", str),
    "threads": ("threads", _threads),
    "z": ("z_grid", lambda t: _triple(t, (float, float, int), "z")),
    "lambda_c": ("lambda_c", lambda t: _float(t, "lambda_c")),
    "alpha": ("alpha", lambda t: _float(t, "alpha")),
    "nu": ("nu", lambda t: _float(t, "nu")),
    "recompute": ("recompute", lambda t: _bool(t, "recompute")),
}


def read_config_file(path: Path) -> dict[str, str]:
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise MissingInputError(f"config file {path} not found") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    values = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        if key not in PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--method", help="analytic | basis | fem-linear | fem-hermite | large-d")
    common.add_argument("--sizes", metavar="MIN:MAX:STEP", help="size ladder")
    common.add_argument("--lambda", dest="lambda_", metavar="MIN:MAX:COUNT", help="coupling grid")
    common.add_argument("--h", help="FEM element length")
    common.add_argument("--r-c-policy", dest="r_c_policy", help="grow (r_c = M h) or fixed")
    common.add_argument("--r-c", dest="r_c", help="cutoff for the fixed policy")
    common.add_argument("--output", metavar="DIR", help="output directory")
    common.add_argument("--threads", metavar="K", help="worker threads or 'auto'")
    common.add_argument("--config", metavar="FILE", help="key = value settings file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="fsscrit", description="Finite-size scaling of quantum critical couplings."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fss", parents=[common], help="pseudocritical sequence and extrapolation")
    col = sub.add_parser("collapse", parents=[common], help="data collapse of a stored table")
    col.add_argument("--lambda-c", dest="lambda_c")
    col.add_argument("--alpha")
    col.add_argument("--nu")
    col.add_argument(
        "--no-recompute", dest="recompute", action="store_const", const="false",
        help="fail instead of recomputing a missing table",
    )
    lg = sub.add_parser("larged", parents=[common], help="large-D symmetry breaking")
    lg.add_argument("--z", metavar="MIN:MAX:COUNT", help="nuclear-charge grid")
    sub.add_parser("analytic", parents=[common], help="closed-form Hulthén levels")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    raw: dict[str, str] = {}
    if args.config:
        raw.update(read_config_file(Path(args.config)))
    flags = {
        "method": args.method,
        "sizes": args.sizes,
        "lambda": args.lambda_,
        "h": args.h,
        "r_c_policy": args.r_c_policy,
        "r_c": args.r_c,
        "output": args.output,
        "threads": args.threads,
        "z": getattr(args, "z", None),
        "lambda_c": getattr(args, "lambda_c", None),
        "alpha": getattr(args, "alpha", None),
        "nu": getattr(args, "nu", None),
        "recompute": getattr(args, "recompute", None),
    }
    raw.update({k: v for k, v in flags.items() if v is not None})
    kwargs = {}
    for key, text in raw.items():
        name, parse = PARSERS[key]
        kwargs[name] = parse(text)
    return RunConfig(**kwargs)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, MissingInputError):
        return EXIT_MISSING
    if isinstance(exc, (ConfigError, ParameterError)):
        return EXIT_CONFIG
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_NUMERICAL


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = config_from_args(args)
    except FssError as exc:
        print(f"fsscrit: stage 'config': {exc}", file=sys.stderr)
        return exit_code(exc)
    try:
        report = COMMANDS[args.command](config)
    except FssError as exc:
        where = "" if isinstance(exc, StageError) else f"stage '{args.command}': "
        print(f"fsscrit: {where}{exc}", file=sys.stderr)
        return exit_code(exc)
    out = Path(config.output_dir)
    for name in report.manifest:
        print(out / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
