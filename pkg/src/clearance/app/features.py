from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import Settings, get_settings
from .dataset import Dataset
from .errors import FeatureError
from .models import MONTHS, Record

logger = logging.getLogger(__name__)

ColumnKind = Literal["binary", "count"]

# Shorter display names for raw MAP levels
LEVEL_ALIASES: Dict[str, str] = {
    "Circumstances undetermined": "Undetermined",
    "Other arguments": "Other Arguments",
    "Other - not specified": "Other Not Specified",
    "Murder and non-negligent manslaughter": "Murder",
    "Manslaughter by negligence": "Manslaughter",
    "Municipal police": "Municipal Police",
    "County police": "County Police",
    "Special police": "Special Police",
    "State police": "State Police",
    "Regional police": "Regional Police",
    "Primary state LE": "Primary State LE",
    "Handgun - pistol, revolver, etc": "Handgun",
    "Knife or cutting instrument": "Knife",
    "Firearm, type not stated": "Firearm (unspecified)",
}
_ALIAS_BY_FOLD = {raw.casefold(): alias for raw, alias in LEVEL_ALIASES.items()}


@dataclass(frozen=True)
class GroupSpec:
    key: str
    label: str
    kind: ColumnKind


# Column-group order of the design matrix
GROUPS: Tuple[GroupSpec, ...] = (
    GroupSpec("decade", "Decade", "binary"),
    GroupSpec("month", "Month", "binary"),
    GroupSpec("homicide_type", "Homicide Type", "binary"),
    GroupSpec("age", "Age", "binary"),
    GroupSpec("victim_sex", "Victim Sex", "binary"),
    GroupSpec("victim_race", "Victim Race", "binary"),
    GroupSpec("victim_count", "N of Victims", "count"),
    GroupSpec("circumstance", "Circumstance", "binary"),
    GroupSpec("weapon", "Weapon", "binary"),
    GroupSpec("offender_count", "N of Offenders", "count"),
    GroupSpec("overlap", "Monthly State/Agency Overlap", "count"),
    GroupSpec("agency_type", "Agency", "binary"),
)
GROUP_KEYS = tuple(g.key for g in GROUPS)


def display_level(level: str) -> str:
    return _ALIAS_BY_FOLD.get(level.casefold(), level)


def bin_decade(year: int, min_year: int = 1976, max_year: int = 2019) -> str:
    if not min_year <= year <= max_year:
        raise FeatureError(f"year {year} outside {min_year}-{max_year}")
    return f"{year // 10 * 10}s"


def age_bin_edges(first_upper: int = 5, width: int = 5, terminal: int = 100) -> List[int]:
    """Inclusive upper edges: [0, first_upper], (first_upper, first_upper + width], ..."""
    if first_upper < 0 or width < 1 or terminal < first_upper:
        raise FeatureError("invalid age bin configuration")
    edges = [first_upper]
    while edges[-1] + width <= terminal:
        edges.append(edges[-1] + width)
    return edges


def age_bin_labels(edges: Sequence[int]) -> List[str]:
    labels = [f"0-{edges[0]}"]
    labels.extend(f"{lo + 1}-{hi}" for lo, hi in zip(edges, edges[1:]))
    labels.append(f"{edges[-1] + 1}+")
    return labels


def bin_age(age: int, edges: Optional[Sequence[int]] = None) -> str:
    edges = list(edges) if edges is not None else age_bin_edges()
    if age < 0 or age > 120:
        raise FeatureError(f"victim age out of range: {age}")
    labels = age_bin_labels(edges)
    for label, upper in zip(labels, edges):
        if age <= upper:
            return label
    return labels[-1]


def overlap_key(r: Record) -> Tuple[str, str, int, str]:
    # City is folded into the agency identifier
    agency = (r.ori or r.agency_name).strip().casefold()
    return (agency, r.state, r.year, r.month)


class OverlapIndex:
    """Distinct event ids per (agency, state, year, month)."""

    def __init__(self, records: Iterable[Record]) -> None:
        self._ids: Dict[Tuple[str, str, int, str], set[str]] = {}
        for r in records:
            self._ids.setdefault(overlap_key(r), set()).add(r.id)

    def flag(self, r: Record) -> int:
        ids = self._ids.get(overlap_key(r), set())
        return int(any(other != r.id for other in ids))


def compute_monthly_overlap(d: Dataset, index: Optional[OverlapIndex] = None) -> np.ndarray:
    index = index or OverlapIndex(d.records)
    return np.fromiter((index.flag(r) for r in d.records), dtype=np.int8, count=len(d))


class FeatureColumn(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    kind: ColumnKind
    group: str
    level: Optional[str] = None


class FeatureSchema(BaseModel):
    """Frozen column layout and category dictionaries, fitted on a training split."""

    model_config = ConfigDict(frozen=True)

    columns: List[FeatureColumn]
    categories: Dict[str, List[str]]
    age_bin_edges: List[int]
    decade_labels: List[str]
    year_range: Tuple[int, int] = (1976, 2019)
    excluded: List[str] = Field(default_factory=list)

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.columns]

    def __len__(self) -> int:
        return len(self.columns)

    def index_of(self, name: str) -> int:
        for i, column in enumerate(self.columns):
            if column.name == name:
                return i
        raise FeatureError(f"unknown feature {name!r}")

    def group_indices(self, group: str) -> List[int]:
        return [i for i, c in enumerate(self.columns) if c.group == group]

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class FeatureMatrix:
    schema: FeatureSchema
    values: np.ndarray
    labels: np.ndarray
    row_ids: Tuple[str, ...]

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def subset(self, index: Sequence[int] | np.ndarray) -> "FeatureMatrix":
        idx = np.asarray(index, dtype=np.int64)
        return FeatureMatrix(
            schema=self.schema,
            values=self.values[idx],
            labels=self.labels[idx],
            row_ids=tuple(self.row_ids[i] for i in idx),
        )


def _level_of(group: str, r: Record, schema_edges: Sequence[int], years: Tuple[int, int]):
    if group == "decade":
        return bin_decade(r.year, *years)
    if group == "age":
        return None if r.victim_age is None else bin_age(r.victim_age, schema_edges)
    return getattr(r, group)


def _count_of(group: str, r: Record, overlap: OverlapIndex) -> int:
    if group == "overlap":
        return overlap.flag(r)
    return getattr(r, group)


def _ordered_levels(group: str, seen: set[str], edges: Sequence[int]) -> List[str]:
    if group == "month":
        return [m for m in MONTHS if m in seen]
    if group == "age":
        return [label for label in age_bin_labels(edges) if label in seen]
    # decade labels sort chronologically as strings
    return sorted(seen)


def fit_schema(
    d: Dataset,
    settings: Optional[Settings] = None,
    exclude: Iterable[str] = (),
) -> FeatureSchema:
    """Collect the category dictionaries of a training split."""
    settings = settings or get_settings()
    if len(d) == 0:
        raise FeatureError("cannot fit a feature schema on an empty dataset")
    excluded = [g for g in GROUP_KEYS if g in set(exclude)]
    unknown = set(exclude) - set(GROUP_KEYS)
    if unknown:
        raise FeatureError(f"unknown feature groups: {sorted(unknown)}")

    edges = age_bin_edges(settings.age_first_upper, settings.age_bin_width, settings.age_terminal)
    years = (settings.min_year, settings.max_year)
    columns: List[FeatureColumn] = []
    categories: Dict[str, List[str]] = {}
    for entry in GROUPS:
        if entry.key in excluded:
            continue
        if entry.kind == "count":
            columns.append(FeatureColumn(name=entry.label, kind="count", group=entry.key))
            continue
        seen = {_level_of(entry.key, r, edges, years) for r in d.records}
        seen.discard(None)
        levels = _ordered_levels(entry.key, seen, edges)
        categories[entry.key] = levels
        names = [f"{entry.label}: {display_level(level)}" for level in levels]
        if len(set(names)) != len(names):
            names = [f"{entry.label}: {level}" for level in levels]
        columns.extend(
            FeatureColumn(name=name, kind="binary", group=entry.key, level=level)
            for name, level in zip(names, levels)
        )

    decades = categories.get("decade", [])
    schema = FeatureSchema(
        columns=columns,
        categories=categories,
        age_bin_edges=edges,
        decade_labels=decades,
        year_range=years,
        excluded=excluded,
    )
    logger.info("fitted feature schema: %d columns from %d records", len(columns), len(d))
    return schema


def encode(
    d: Dataset,
    schema: FeatureSchema,
    overlap: Optional[OverlapIndex] = None,
) -> FeatureMatrix:
    """Encode records against a fitted schema. Unseen levels leave their group all zero.

    ``overlap`` defaults to an index over ``d`` itself; pass one built on the full
    dataset to keep the flag independent of how the data was split.
    """
    if len(schema) == 0:
        raise FeatureError("cannot encode with an empty feature schema")
    overlap = overlap or OverlapIndex(d.records)
    edges = schema.age_bin_edges
    years = schema.year_range

    slot: Dict[Tuple[str, str], int] = {}
    count_slots: List[Tuple[str, int]] = []
    for i, column in enumerate(schema.columns):
        if column.kind == "count":
            count_slots.append((column.group, i))
        else:
            slot[(column.group, column.level or "")] = i
    binary_groups = [g for g in schema.categories]

    values = np.zeros((len(d), len(schema)), dtype=np.float32)
    for row, r in enumerate(d.records):
        for group in binary_groups:
            level = _level_of(group, r, edges, years)
            if level is None:
                continue
            col = slot.get((group, level))
            if col is not None:
                values[row, col] = 1.0
        for group, col in count_slots:
            values[row, col] = _count_of(group, r, overlap)

    return FeatureMatrix(
        schema=schema,
        values=values,
        labels=d.labels(),
        row_ids=tuple(d.ids()),
    )


def schema_to_json(schema: FeatureSchema) -> str:
    return schema.model_dump_json(indent=2)


def schema_from_json(text: str) -> FeatureSchema:
    try:
        return FeatureSchema.model_validate_json(text)
    except ValidationError as exc:
        raise FeatureError(f"invalid feature schema: {exc.error_count()} error(s)") from exc


__all__ = [
    "FeatureColumn",
    "FeatureMatrix",
    "FeatureSchema",
    "GROUPS",
    "GROUP_KEYS",
    "LEVEL_ALIASES",
    "OverlapIndex",
    "age_bin_edges",
    "age_bin_labels",
    "bin_age",
    "bin_decade",
    "compute_monthly_overlap",
    "display_level",
    "encode",
    "fit_schema",
    "schema_from_json",
    "schema_to_json",
]
