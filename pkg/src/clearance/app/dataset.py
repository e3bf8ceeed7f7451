from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence

import duckdb
import numpy as np
import pandas as pd
from pydantic import ValidationError

from .config import Settings, get_settings
from .errors import ConfigError, DatasetError, EmptyDatasetError, RowError, SchemaError
from .models import UNKNOWN, Provenance, Record, RowIssue
from .services.duckdb_client import DuckDBAnalyticsClient

logger = logging.getLogger(__name__)

# MAP header -> Record field
REQUIRED_COLUMNS: Dict[str, str] = {
    "ID": "id",
    "Year": "year",
    "Month": "month",
    "State": "state",
    "Agency": "agency_name",
    "Agentype": "agency_type",
    "Homicide": "homicide_type",
    "VicAge": "victim_age",
    "VicSex": "victim_sex",
    "VicRace": "victim_race",
    "VicCount": "victim_count",
    "OffSex": "offender_sex",
    "OffCount": "offender_count",
    "Circumstance": "circumstance",
    "Weapon": "weapon",
    "Solved": "solved",
}

OPTIONAL_COLUMNS: Dict[str, str] = {
    "Ori": "ori",
    "Source": "source",
}


@dataclass(frozen=True)
class Dataset:
    records: tuple[Record, ...]
    provenance: Provenance

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    def __getitem__(self, index: int) -> Record:
        return self.records[index]

    @classmethod
    def from_records(cls, records: Iterable[Record], source: str = "<memory>") -> "Dataset":
        items = tuple(records)
        return cls(items, Provenance(source=source, rows_read=len(items), rows_kept=len(items)))

    def derive(self, records: Iterable[Record]) -> "Dataset":
        """A sub-dataset; provenance counts the rows this step removed."""
        items = tuple(records)
        provenance = Provenance(
            source=self.provenance.source,
            rows_read=len(self.records),
            rows_kept=len(items),
            rows_dropped=len(self.records) - len(items),
        )
        return Dataset(items, provenance)

    def labels(self) -> np.ndarray:
        return np.fromiter((r.solved for r in self.records), dtype=bool, count=len(self.records))

    def ids(self) -> List[str]:
        return [r.id for r in self.records]

    def to_frame(self) -> pd.DataFrame:
        columns = list(Record.model_fields)
        return pd.DataFrame([r.model_dump() for r in self.records], columns=columns)


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    seed: int
    train_index: tuple[int, ...] = field(default=(), repr=False)
    test_index: tuple[int, ...] = field(default=(), repr=False)


def _resolve_header(columns: Sequence[str], source: str) -> Dict[str, str]:
    """Map each Record field to the actual file header (case-insensitive)."""
    by_fold = {c.strip().casefold(): c for c in columns}
    resolved: Dict[str, str] = {}
    for header, field_name in REQUIRED_COLUMNS.items():
        actual = by_fold.get(header.casefold())
        if actual is None:
            raise SchemaError(header, source)
        resolved[field_name] = actual
    for header, field_name in OPTIONAL_COLUMNS.items():
        actual = by_fold.get(header.casefold())
        if actual is not None:
            resolved[field_name] = actual
    return resolved


def _parse_count(value: Any, name: str, offset: int = 0) -> int:
    text = str(value if value is not None else "").strip()
    try:
        number = int(float(text))
    except (ValueError, OverflowError) as exc:
        raise ValueError(f"unparseable {name}: {text!r}") from exc
    if float(text) != number:
        raise ValueError(f"non-integer {name}: {text!r}")
    return number + offset


def parse_row(row: Dict[str, Any], header: Dict[str, str], line: int, settings: Settings) -> Record:
    """Build one Record from a raw CSV row; failures become RowError."""
    payload = {field_name: row.get(column) for field_name, column in header.items()}
    try:
        payload["victim_count"] = _parse_count(
            payload["victim_count"], "VicCount", settings.victim_count_offset
        )
        payload["offender_count"] = _parse_count(payload["offender_count"], "OffCount")
        record = Record.model_validate(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ())) or "row"
        raise RowError(line, f"{where}: {first.get('msg', 'invalid value')}") from exc
    except ValueError as exc:
        raise RowError(line, str(exc)) from exc
    if not settings.min_year <= record.year <= settings.max_year:
        raise RowError(
            line, f"year {record.year} outside {settings.min_year}-{settings.max_year}"
        )
    return record


def load_map_csv(
    path: str | Path,
    settings: Optional[Settings] = None,
    client: Optional[DuckDBAnalyticsClient] = None,
) -> Dataset:
    """Load a MAP-schema CSV. Bad rows are dropped and recorded in the provenance."""
    settings = settings or get_settings()
    source = str(path)
    if not Path(path).is_file():
        raise DatasetError(f"input file not found: {source}")

    owned = client is None
    client = client or DuckDBAnalyticsClient(threads=settings.threads)
    try:
        scanned = client.scan_csv(path)
    except duckdb.Error as exc:
        raise DatasetError(f"cannot read {source}: {exc}") from exc
    finally:
        if owned:
            client.close()

    header = _resolve_header(scanned.columns, source)
    records: List[Record] = []
    issues: List[RowIssue] = []
    for index, row in enumerate(scanned.data):
        # line 1 is the header
        line = index + 2
        try:
            records.append(parse_row(row, header, line, settings))
        except RowError as err:
            logger.debug("dropping %s", err)
            issues.append(RowIssue(line=err.line, message=err.message))

    if issues:
        logger.warning("%s: dropped %d of %d rows", source, len(issues), len(scanned.data))
    provenance = Provenance(
        source=source,
        rows_read=len(scanned.data),
        rows_kept=len(records),
        rows_dropped=len(issues),
        row_errors=issues,
    )
    logger.info("loaded %d records from %s", len(records), source)
    return Dataset(tuple(records), provenance)


def filter_unknown_age(d: Dataset) -> Dataset:
    return d.derive(r for r in d.records if r.victim_age is not None)


def derive_target_check(r: Record) -> bool:
    """Offender-sex rule: a case with an unknown offender is taken as unsolved."""
    return r.offender_sex != UNKNOWN


def count_label_disagreements(d: Dataset) -> int:
    return sum(1 for r in d.records if derive_target_check(r) != r.solved)


def train_size(n: int, train_fraction: float) -> int:
    """round(fraction * n) with halves rounded up, kept inside [1, n - 1]."""
    n_train = int(np.floor(train_fraction * n + 0.5))
    return min(max(n_train, 1), n - 1)


def permutation(n: int, seed: int) -> np.ndarray:
    """Counter-based (Philox) permutation of range(n) keyed by seed."""
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(seed)).permutation(n)


def shuffled_split(d: Dataset, train_fraction: float, seed: int) -> SplitPair:
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie strictly between 0 and 1, got {train_fraction}")
    n = len(d)
    if n == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    if n < 2:
        raise DatasetError("need at least 2 records to split")

    order = permutation(n, seed)
    n_train = train_size(n, train_fraction)
    train_index = tuple(int(i) for i in order[:n_train])
    test_index = tuple(int(i) for i in order[n_train:])
    return SplitPair(
        train=d.derive(d.records[i] for i in train_index),
        test=d.derive(d.records[i] for i in test_index),
        seed=seed,
        train_index=train_index,
        test_index=test_index,
    )


def partition_by_state(d: Dataset) -> Dict[str, Dataset]:
    groups: Dict[str, List[Record]] = {}
    for record in d.records:
        groups.setdefault(record.state, []).append(record)
    return {state: d.derive(groups[state]) for state in sorted(groups)}


__all__ = [
    "Dataset",
    "OPTIONAL_COLUMNS",
    "REQUIRED_COLUMNS",
    "SplitPair",
    "count_label_disagreements",
    "derive_target_check",
    "filter_unknown_age",
    "load_map_csv",
    "parse_row",
    "partition_by_state",
    "permutation",
    "shuffled_split",
    "train_size",
]
