from __future__ import annotations

import json
import logging
import os
import platform
import threading
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
from pydantic import BaseModel, ValidationError  # noqa: E402

from . import __version__  # noqa: E402
from .errors import ConfigError  # noqa: E402
from .models import RunConfig  # noqa: E402

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
_VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "duckdb", "pydantic", "matplotlib")


def package_versions() -> Dict[str, str]:
    versions = {"clearance": __version__, "python": platform.python_version()}
    for name in _VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class Manifest(BaseModel):
    command: str
    config: RunConfig
    seeds: Dict[str, int]
    versions: Dict[str, str]
    artifacts: List[str]
    created_at: str
    summary: Dict[str, Any] = {}


class ArtifactWriter:
    """Writes report files under one output directory, atomically.

    Every path is resolved against ``out_dir`` and refused when it escapes it.
    """

    def __init__(self, out_dir: str | Path) -> None:
        self.root = Path(out_dir).resolve()
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._written: List[str] = []

    @property
    def artifacts(self) -> List[str]:
        return list(self._written)

    def path(self, name: str | Path) -> Path:
        target = (self.root / name).resolve()
        if not target.is_relative_to(self.root):
            raise ConfigError(f"refusing to write outside {self.root}: {name}")
        return target

    def _write(self, name: str | Path, payload: str | bytes) -> Path:
        target = self.path(name)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(target.name + ".tmp")
        with self._lock:
            if isinstance(payload, bytes):
                tmp.write_bytes(payload)
            else:
                tmp.write_text(payload, encoding="utf-8", newline="")
            os.replace(tmp, target)
            relative = target.relative_to(self.root).as_posix()
            if relative not in self._written:
                self._written.append(relative)
        logger.debug("wrote %s", target)
        return target

    def write_text(self, name: str | Path, text: str) -> Path:
        return self._write(name, text)

    def write_json(self, name: str | Path, data: Any) -> Path:
        if isinstance(data, BaseModel):
            text = data.model_dump_json(indent=2)
        else:
            text = json.dumps(data, indent=2, ensure_ascii=False, default=_json_default)
        return self._write(name, text + "\n")

    def write_csv(self, name: str | Path, frame: pd.DataFrame) -> Path:
        return self._write(name, frame.to_csv(index=False, lineterminator="\n"))

    def write_bar_chart(
        self,
        name: str | Path,
        labels: Sequence[str],
        values: Sequence[float],
        title: str,
        xlabel: str = "",
    ) -> Path:
        """Horizontal bar chart, first label on top."""
        plt.rcParams["svg.hashsalt"] = "clearance"
        height = max(2.0, 0.3 * len(labels) + 1.0)
        fig, ax = plt.subplots(figsize=(8.0, height))
        try:
            positions = list(range(len(labels)))[::-1]
            ax.barh(positions, list(values), color="#4a6fa5")
            ax.set_yticks(positions)
            ax.set_yticklabels(list(labels))
            ax.set_title(title)
            if xlabel:
                ax.set_xlabel(xlabel)
            fig.tight_layout()
            target = self.path(name)
            target.parent.mkdir(parents=True, exist_ok=True)
            tmp = target.with_name(target.name + ".tmp")
            fig.savefig(tmp, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
        with self._lock:
            os.replace(tmp, target)
            relative = target.relative_to(self.root).as_posix()
            if relative not in self._written:
                self._written.append(relative)
        return target

    def write_manifest(
        self,
        config: RunConfig,
        seeds: Dict[str, int],
        summary: Optional[Dict[str, Any]] = None,
    ) -> Path:
        manifest = Manifest(
            command=config.command,
            config=config,
            seeds=seeds,
            versions=package_versions(),
            artifacts=sorted(self._written),
            created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            summary=summary or {},
        )
        target = self._write(MANIFEST_NAME, manifest.model_dump_json(indent=2) + "\n")
        logger.info("run manifest written to %s", target)
        return target


def _json_default(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if hasattr(value, "item"):
        return value.item()
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def read_manifest_config(path: str | Path) -> RunConfig:
    """RunConfig from a JSON file: a bare RunConfig or a manifest holding one under "config"."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if isinstance(data, dict) and isinstance(data.get("config"), dict):
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid run config in {path}: {exc.error_count()} error(s)") from exc


__all__ = [
    "ArtifactWriter",
    "MANIFEST_NAME",
    "Manifest",
    "package_versions",
    "read_manifest_config",
]
