from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Dict, Optional, Sequence

from pydantic import ValidationError

from . import __version__
from .commands import (
    explain,
    gridsearch,
    ingest,
    match,
    robustness,
    summarize,
    sweep_states,
    synth_fixture,
    train,
)
from .commands.common import CommandContext, parse_assignments
from .config import Settings, get_settings
from .errors import ClearanceError, ConfigError
from .models import RunConfig
from .reports import ArtifactWriter, read_manifest_config

logger = logging.getLogger(__name__)

COMMANDS = (
    ingest,
    synth_fixture,
    train,
    gridsearch,
    sweep_states,
    explain,
    match,
    summarize,
    robustness,
)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# argparse dest -> RunConfig field
CONFIG_FLAGS: Dict[str, str] = {
    "input": "input",
    "wp_input": "wp_input",
    "model": "model_path",
    "schema": "schema_path",
    "algo": "algorithm",
    "k": "k",
    "train_fraction": "train_fraction",
    "out": "out_dir",
    "seed": "seed",
    "threads": "threads",
}
_NOT_RECORDED = {"handler", "command", "config", "log_level", "grid"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="clearance",
        description="Explainable models of homicide clearance on MAP-schema data",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON run config or a previous run manifest to replay")
    p.add_argument("--out", help="output directory (default ./out)")
    p.add_argument("--seed", type=int, help="random seed (default 42)")
    p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    p.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="log verbosity on stderr",
    )
    subparsers = p.add_subparsers(dest="command", required=True, metavar="command")
    for module in COMMANDS:
        module.register(subparsers)
    return p


def configure_logging(level: str) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def settings_defaults(settings: Settings) -> Dict[str, Any]:
    return {
        "seed": settings.seed,
        "train_fraction": settings.train_fraction,
        "k": settings.folds,
        "out_dir": settings.out_dir,
        "threads": settings.threads,
        "age_first_upper": settings.age_first_upper,
        "age_bin_width": settings.age_bin_width,
        "age_terminal": settings.age_terminal,
    }


def resolve_config(args: argparse.Namespace, settings: Settings) -> RunConfig:
    """Settings defaults, then the --config file, then explicit flags."""
    merged: Dict[str, Any] = settings_defaults(settings)
    if args.config:
        from_file = read_manifest_config(args.config)
        file_values = from_file.model_dump(exclude_unset=True)
        if from_file.command and from_file.command != args.command:
            file_values.pop("extra", None)
        merged.update(file_values)

    for dest, field in CONFIG_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            merged[field] = value
    if getattr(args, "grid", None):
        merged["grid_overrides"] = parse_assignments(args.grid, "--grid")
    extra = dict(merged.get("extra") or {})
    for dest, value in vars(args).items():
        if dest in _NOT_RECORDED or dest in CONFIG_FLAGS or value is None:
            continue
        extra[dest] = value
    merged["extra"] = extra
    merged["command"] = args.command
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ()))
        raise ConfigError(f"invalid option {where}: {first.get('msg', 'invalid value')}") from exc


def effective_settings(settings: Settings, config: RunConfig) -> Settings:
    return settings.model_copy(
        update={
            "threads": config.threads,
            "age_first_upper": config.age_first_upper,
            "age_bin_width": config.age_bin_width,
            "age_terminal": config.age_terminal,
        }
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        base = get_settings()
        config = resolve_config(args, base)
        settings = effective_settings(base, config)
        writer = ArtifactWriter(config.out_dir)
        logger.info("running %s (seed %d) into %s", config.command, config.seed, writer.root)
        return args.handler(CommandContext(args, config, settings, writer))
    except (ClearanceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
