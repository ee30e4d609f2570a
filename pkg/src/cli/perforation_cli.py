"""
Command-line front end: `perforation <subcommand> [--config FILE] [flags]`.

Every run validates the YAML config, writes `resolved_config.yaml`, the
subcommand CSV and `report.md` to the output directory, and exits with
0 (success), 2 (invalid parameters, unknown config keys or a resource cap),
3 (a verification check failed) or 1 (solver failure or unexpected error).
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from core.config_loader import UnknownConfigKeysError, load_run_config
from core.config_validator import RunConfigValidator
from core.errors import DomainError, ParameterError, ResourceError
from services.a_command_register import COMMAND_REGISTRY
from services.verification_commands import CommandContext
from utils.io_utils import (
    get_or_create_output_dir,
    settings,
    write_csv,
    write_report,
    write_resolved_config,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_CHECK_FAILED = 3


def run(
    subcommand: str,
    config_path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
    fixture: Optional[Path] = None,
    input_path: Optional[Path] = None,
    target: Optional[float] = None,
) -> int:
    entry = COMMAND_REGISTRY.get(subcommand)
    if entry is None:
        logger.error(f"Unknown subcommand '{subcommand}'; choose from {sorted(COMMAND_REGISTRY)}")
        return EXIT_INVALID

    try:
        config = load_run_config(config_path, overrides)
        RunConfigValidator(config).validate()
        output_dir = get_or_create_output_dir(config.output_dir, label=subcommand)
        write_resolved_config(config, output_dir)

        ctx = CommandContext(
            config=config,
            settings=settings,
            output_dir=output_dir,
            fixture=Path(fixture) if fixture else None,
            input_path=Path(input_path) if input_path else None,
            target=target,
        )
        result = entry["handler"](ctx)
        write_csv(result.rows, output_dir / entry["csv"], result.columns)
        write_report(result.report, output_dir)
    except UnknownConfigKeysError as e:
        logger.error(str(e))
        return EXIT_INVALID
    except (ParameterError, ResourceError, DomainError) as e:
        logger.error(f"{subcommand}: {e}")
        return EXIT_INVALID
    except Exception as e:
        logger.exception(f"{subcommand} failed: {e}")
        return EXIT_ERROR

    logger.info(f"{subcommand}: {'PASS' if result.passed else 'FAIL'}; outputs in {output_dir}")
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Path to YAML run configuration")
    common.add_argument("--seed", type=int, help="Base seed of the marked process")
    common.add_argument("--seeds", type=int, dest="n_seeds", help="Number of independent seeds")
    common.add_argument("--eps", type=float, nargs="+", help="Decreasing eps values for every sweep")
    common.add_argument("--alpha", type=float, help="Hole size exponent")
    common.add_argument("--tol", type=float, dest="tolerance", help="Slope tolerance")
    common.add_argument("--out", type=Path, dest="output_dir", help="Output directory")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perforation",
        description="Verify scaling laws of randomly perforated domains",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    for name, entry in COMMAND_REGISTRY.items():
        sub = subparsers.add_parser(name, parents=[common], help=entry["description"])
        if name == "separation":
            sub.add_argument("--fixture", type=Path, help="Perforated-domain file to check")
        if name == "fit":
            sub.add_argument("--input", type=Path, required=True, help="CSV of (eps, value) pairs")
            sub.add_argument("--target", type=float, help="Expected exponent")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(settings.LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    overrides = {
        key: getattr(args, key)
        for key in ("seed", "n_seeds", "eps", "alpha", "tolerance", "output_dir")
    }
    return run(
        args.command,
        args.config,
        overrides,
        fixture=getattr(args, "fixture", None),
        input_path=getattr(args, "input", None),
        target=getattr(args, "target", None),
    )


if __name__ == "__main__":
    sys.exit(main())
