"""fptlie command line: subcommand parsing, config precedence and exit codes."""
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from . import __version__
from .commands import density, laplace_check, reproduce, simulate, transfer, verify_symmetry
from .commands.common import MC_FIELDS, resolve_process
from .errors import ConfigError, FptError
from .logs import get_logger, set_level
from .models import Boundary, Command, RunConfig, TimeGrid
from .services import export

logger = get_logger("main")

COMMANDS = {
    Command.DENSITY: density,
    Command.TRANSFER: transfer,
    Command.SIMULATE: simulate,
    Command.LAPLACE_CHECK: laplace_check,
    Command.VERIFY_SYMMETRY: verify_symmetry,
    Command.REPRODUCE: reproduce,
}

# Exit code when every step ran but a comparison fell outside its tolerance
CHECK_FAILED = 3


def build_parser() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="JSON file with RunConfig fields (CLI flags take precedence)")
    parent.add_argument("--output", help="artifact path; bare names go to the output directory")
    parent.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    mc = parent.add_argument_group("Monte Carlo")
    mc.add_argument("--n-paths", dest="n_paths", type=int)
    mc.add_argument("--dt", type=float)
    mc.add_argument("--seed", type=int)
    mc.add_argument("--workers", type=int)
    mc.add_argument("--block-size", dest="block_size", type=int)
    mc.add_argument("--no-bridge", dest="bridge_correction", action="store_const", const=False,
                    help="disable the Brownian-bridge crossing correction")

    parser = argparse.ArgumentParser(prog="fptlie", description="First-passage-time densities via Lie symmetries")
    parser.add_argument("--version", action="version", version=f"fptlie {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS.values():
        module.add_parser(subparsers, parent)
    return parser


def load_config_file(path: str) -> Dict[str, Any]:
    try:
        with open(Path(path), encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON ({exc})")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the config file and CLI flags, in increasing precedence."""
    data = load_config_file(args.config) if args.config else {}
    data["command"] = args.command

    mc = dict(data.get("mc") or {})
    params = dict(data.get("target_params") or {})
    for key, value in vars(args).items():
        if value is None or key in ("command", "config", "log_level"):
            continue
        if key in MC_FIELDS:
            mc[key] = value
        elif key.startswith("param_"):
            params[key[len("param_"):]] = value
        else:
            data[key] = value
    data["mc"] = mc
    data["target_params"] = params

    try:
        if isinstance(data.get("boundary"), (str, dict)):
            data["boundary"] = Boundary.from_config(data["boundary"])
        if isinstance(data.get("t_grid"), str):
            data["t_grid"] = TimeGrid.parse(data["t_grid"])
        if isinstance(data.get("process"), dict):
            data["process"] = resolve_process(data["process"])
        return RunConfig(**data)
    except (ValidationError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    try:
        config = build_run_config(args)
        logger.info(f"run {config.command.value}: {export.canonical_json(config.to_config())}")
        result = COMMANDS[config.command].run(config)
    except FptError as exc:
        logger.error(f"{type(exc).__name__}: {exc.detail}")
        print(f"error: {exc.detail}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:
        logger.exception("unexpected failure")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return CHECK_FAILED

    print(export.pretty_json(result))
    if not result.get("passed", True):
        print(f"error: {config.command.value} checks failed", file=sys.stderr)
        return CHECK_FAILED
    return 0


if __name__ == "__main__":
    sys.exit(main())
