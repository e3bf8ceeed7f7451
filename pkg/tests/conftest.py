from __future__ import annotations

from collections.abc import Callable, Generator
from itertools import count
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from clearance.app.config import Settings, get_settings
from clearance.app.dataset import Dataset
from clearance.app.features import FeatureMatrix, FeatureSchema, FeatureColumn
from clearance.app.models import Record
from clearance.app.synth import generate_map_frame, generate_wp_frame


@pytest.fixture(autouse=True)
def reset_settings_cache() -> Generator[None, None, None]:
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def settings() -> Settings:
    return Settings(_env_file=None)


@pytest.fixture
def make_record() -> Callable[..., Record]:
    ids = count(1)

    def factory(**overrides: Any) -> Record:
        fields: dict[str, Any] = {
            "id": f"r{next(ids)}",
            "year": 2005,
            "month": "January",
            "state": "Texas",
            "agency_name": "Houston",
            "agency_type": "Municipal police",
            "homicide_type": "Murder and non-negligent manslaughter",
            "victim_age": 30,
            "victim_sex": "Male",
            "victim_race": "White",
            "victim_count": 1,
            "offender_count": 0,
            "offender_sex": "Male",
            "circumstance": "Other arguments",
            "weapon": "Shotgun",
            "solved": True,
        }
        fields.update(overrides)
        return Record(**fields)

    return factory


@pytest.fixture
def map_csv(tmp_path: Path) -> Path:
    path = tmp_path / "map.csv"
    generate_map_frame(600, seed=7).to_csv(path, index=False)
    return path


@pytest.fixture
def linked_csvs(tmp_path: Path) -> tuple[Path, Path]:
    map_frame = generate_map_frame(400, seed=11)
    map_path = tmp_path / "map.csv"
    wp_path = tmp_path / "wp.csv"
    map_frame.to_csv(map_path, index=False)
    generate_wp_frame(map_frame, seed=11, match_rate=0.7, extra_rows=20).to_csv(
        wp_path, index=False
    )
    return map_path, wp_path


def binary_matrix(values: np.ndarray, labels: np.ndarray) -> FeatureMatrix:
    """FeatureMatrix over arbitrary numeric columns, for learner and SHAP tests."""
    values = np.asarray(values, dtype=np.float32)
    schema = FeatureSchema(
        columns=[
            FeatureColumn(name=f"x{j}", kind="count", group=f"g{j}")
            for j in range(values.shape[1])
        ],
        categories={},
        age_bin_edges=[5, 10],
        decade_labels=[],
        year_range=(1976, 2019),
        excluded=[],
    )
    return FeatureMatrix(
        schema=schema,
        values=values,
        labels=np.asarray(labels, dtype=bool),
        row_ids=tuple(str(i) for i in range(values.shape[0])),
    )


@pytest.fixture
def random_matrix() -> Callable[..., FeatureMatrix]:
    def factory(n: int = 200, p: int = 6, seed: int = 0) -> FeatureMatrix:
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 2, size=(n, p)).astype(np.float32)
        margin = 1.5 * X[:, 0] - 1.0 * X[:, 1] + 0.5 * X[:, 2] - 0.3
        y = rng.random(n) < 1.0 / (1.0 + np.exp(-margin))
        y[:2] = [True, False]
        return binary_matrix(X, y)

    return factory


@pytest.fixture
def dataset_of(make_record) -> Callable[..., Dataset]:
    def factory(*records: Record) -> Dataset:
        return Dataset.from_records(records)

    return factory
