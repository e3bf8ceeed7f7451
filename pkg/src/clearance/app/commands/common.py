from __future__ import annotations

import argparse
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

from ..config import Settings
from ..dataset import Dataset, filter_unknown_age, load_map_csv
from ..errors import ConfigError
from ..models import Hyperparameters, RunConfig
from ..reports import ArtifactWriter

logger = logging.getLogger(__name__)


@dataclass
class CommandContext:
    """Everything a sub-command needs: parsed flags, resolved config, settings, writer."""

    args: argparse.Namespace
    config: RunConfig
    settings: Settings
    writer: ArtifactWriter

    @property
    def workers(self) -> int:
        return self.settings.threads or os.cpu_count() or 1

    def option(self, name: str, default: Any = None) -> Any:
        """Command flag, else the value recorded in a replayed config, else ``default``."""
        value = getattr(self.args, name, None)
        if value is None:
            value = self.config.extra.get(name)
        return default if value is None else value

    def seeds(self) -> Dict[str, int]:
        return {"seed": self.config.seed}

    def finish(self, summary: Optional[Dict[str, Any]] = None) -> int:
        self.writer.write_manifest(self.config, self.seeds(), summary)
        return 0


def require(value: Optional[str], flag: str) -> str:
    if not value:
        raise ConfigError(f"{flag} is required")
    return value


def parse_scalar(text: str) -> Any:
    text = text.strip()
    lowered = text.casefold()
    if lowered in {"none", "null"}:
        return None
    if lowered in {"true", "false"}:
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def parse_assignments(items: Optional[Sequence[str]], flag: str) -> Dict[str, List[Any]]:
    """``name=v1,v2`` pairs to {name: [v1, v2]}."""
    parsed: Dict[str, List[Any]] = {}
    for item in items or ():
        name, sep, values = item.partition("=")
        if not sep or not name.strip() or not values.strip():
            raise ConfigError(f"{flag} expects name=value[,value...], got {item!r}")
        parsed[name.strip()] = [parse_scalar(v) for v in values.split(",")]
    return parsed


def parse_params(items: Optional[Sequence[str]]) -> Dict[str, Any]:
    params = {}
    for name, values in parse_assignments(items, "--param").items():
        if len(values) != 1:
            raise ConfigError(f"--param {name} takes a single value")
        params[name] = values[0]
    return params


def build_hyperparameters(algorithm: str, seed: int, params: Dict[str, Any]) -> Hyperparameters:
    unknown = set(params) - set(Hyperparameters.model_fields)
    if unknown:
        raise ConfigError(f"unknown hyperparameters: {', '.join(sorted(unknown))}")
    try:
        return Hyperparameters(algorithm=algorithm, seed=seed, **params)
    except ValueError as exc:
        raise ConfigError(f"invalid hyperparameters: {exc}") from exc


def load_input(ctx: CommandContext) -> Dataset:
    """MAP input with unknown-age records removed."""
    path = require(ctx.config.input, "--input")
    d = load_map_csv(path, ctx.settings)
    kept = filter_unknown_age(d)
    if len(kept) < len(d):
        logger.info("removed %d records with unknown victim age", len(d) - len(kept))
    return kept


def add_input(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", help="MAP-schema CSV")


def add_split_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, help="cross-validation folds (default 5)")
    parser.add_argument("--train-fraction", type=float, help="training share (default 0.7)")


__all__ = [
    "CommandContext",
    "add_input",
    "add_split_flags",
    "build_hyperparameters",
    "load_input",
    "parse_assignments",
    "parse_params",
    "parse_scalar",
    "require",
]
