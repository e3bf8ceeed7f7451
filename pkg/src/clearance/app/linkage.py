from __future__ import annotations

import logging
from collections import defaultdict, deque
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Deque, Dict, List, Optional, Sequence, Tuple

import duckdb
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .config import Settings, get_settings
from .dataset import Dataset
from .errors import DatasetError, LinkageError, RowError, SchemaError
from .models import (
    LinkCounts,
    Provenance,
    Record,
    RowIssue,
    canonical_month,
    canonical_sex,
    parse_age,
)
from .services.duckdb_client import DuckDBAnalyticsClient

logger = logging.getLogger(__name__)

WP_REQUIRED_COLUMNS = ("city", "reported_date", "victim_age", "victim_sex", "disposition")
WP_OPTIONAL_COLUMNS = ("uid",)


class MatchKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    year: int
    month: str
    city: str
    victim_age: int
    victim_sex: str

    @property
    def code(self) -> str:
        return f"{self.year}-{self.month}-{self.city}-{self.victim_age}-{self.victim_sex}"

    def __str__(self) -> str:
        return self.code


def build_code(
    year: Any,
    month: Any,
    city: Any,
    victim_age: Any,
    victim_sex: Any,
) -> MatchKey:
    """Canonical five-field key: trimmed case-folded city, month name, sex level."""
    fields = {
        "year": year,
        "month": month,
        "city": city,
        "victim_age": victim_age,
        "victim_sex": victim_sex,
    }
    missing = [name for name, value in fields.items() if value is None or str(value).strip() == ""]
    if missing:
        raise LinkageError(f"match key fields missing: {', '.join(missing)}")
    try:
        return MatchKey(
            year=int(year),
            month=canonical_month(month),
            city=" ".join(str(city).split()).casefold(),
            victim_age=int(victim_age),
            victim_sex=canonical_sex(victim_sex),
        )
    except (ValueError, ValidationError) as exc:
        raise LinkageError(f"invalid match key field: {exc}") from exc


def record_key(r: Record) -> Optional[MatchKey]:
    """MAP side; the agency name stands in for the city. None when the age is unknown."""
    if r.victim_age is None:
        return None
    return build_code(r.year, r.month, r.agency_name, r.victim_age, r.victim_sex)


class WPRecord(BaseModel):
    """One Washington Post homicide row."""

    model_config = ConfigDict(frozen=True)

    uid: str
    city: str = Field(min_length=1)
    year: int
    month: str
    victim_age: Optional[int] = None
    victim_sex: str
    disposition: str
    solved: bool

    @field_validator("victim_age", mode="before")
    @classmethod
    def age_years(cls, value: Any) -> Optional[int]:
        return parse_age(value)

    def key(self) -> Optional[MatchKey]:
        if self.victim_age is None:
            return None
        return build_code(self.year, self.month, self.city, self.victim_age, self.victim_sex)


@dataclass(frozen=True)
class WPDataset:
    records: tuple[WPRecord, ...]
    provenance: Provenance

    def __len__(self) -> int:
        return len(self.records)


def parse_reported_date(value: Any) -> Tuple[int, str]:
    """YYYYMMDD (trailing characters ignored) to (year, month name)."""
    text = str(value or "").strip()
    if len(text) < 8 or not text[:8].isdigit():
        raise ValueError(f"reported_date is not YYYYMMDD: {text!r}")
    return int(text[:4]), canonical_month(int(text[4:6]))


def parse_wp_row(
    row: Dict[str, Any], header: Dict[str, str], line: int, settings: Settings
) -> WPRecord:
    try:
        year, month = parse_reported_date(row.get(header["reported_date"]))
        disposition = str(row.get(header["disposition"]) or "").strip()
        uid_column = header.get("uid")
        uid = str(row.get(uid_column) or "").strip() if uid_column else ""
        return WPRecord(
            uid=uid or f"line-{line}",
            city=str(row.get(header["city"]) or "").strip(),
            year=year,
            month=month,
            victim_age=row.get(header["victim_age"]),
            victim_sex=canonical_sex(row.get(header["victim_sex"])),
            disposition=disposition,
            solved=disposition.casefold()
            in {d.casefold() for d in settings.wp_solved_dispositions},
        )
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ())) or "row"
        raise RowError(line, f"{where}: {first.get('msg', 'invalid value')}") from exc
    except ValueError as exc:
        raise RowError(line, str(exc)) from exc


def load_wp_csv(
    path: str | Path,
    settings: Optional[Settings] = None,
    client: Optional[DuckDBAnalyticsClient] = None,
) -> WPDataset:
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

    by_fold = {c.strip().casefold(): c for c in scanned.columns}
    header: Dict[str, str] = {}
    for name in WP_REQUIRED_COLUMNS:
        if name not in by_fold:
            raise SchemaError(name, source)
        header[name] = by_fold[name]
    for name in WP_OPTIONAL_COLUMNS:
        if name in by_fold:
            header[name] = by_fold[name]

    records: List[WPRecord] = []
    issues: List[RowIssue] = []
    for index, row in enumerate(scanned.data):
        line = index + 2
        try:
            records.append(parse_wp_row(row, header, line, settings))
        except RowError as err:
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
    logger.info("loaded %d WP records from %s", len(records), source)
    return WPDataset(tuple(records), provenance)


def pair_keys(
    left: Sequence[Optional[str]], right: Sequence[Optional[str]]
) -> Tuple[List[Tuple[int, int]], int, int]:
    """Greedy file-order pairing on equal keys; None never matches.

    Returns (pairs, ambiguous_keys, ambiguous_pairs). A key is ambiguous when either
    side holds more than one row for it.
    """
    waiting: Dict[str, Deque[int]] = defaultdict(deque)
    right_counts: Dict[str, int] = defaultdict(int)
    for j, key in enumerate(right):
        if key is not None:
            waiting[key].append(j)
            right_counts[key] += 1
    left_counts: Dict[str, int] = defaultdict(int)
    for key in left:
        if key is not None:
            left_counts[key] += 1

    pairs: List[Tuple[int, int]] = []
    ambiguous_pairs = 0
    for i, key in enumerate(left):
        if key is None or not waiting[key]:
            continue
        pairs.append((i, waiting[key].popleft()))
        if left_counts[key] > 1 or right_counts[key] > 1:
            ambiguous_pairs += 1
    ambiguous_keys = sum(
        1
        for key, n in left_counts.items()
        if key in right_counts and (n > 1 or right_counts[key] > 1)
    )
    return pairs, ambiguous_keys, ambiguous_pairs


class LinkPair(BaseModel):
    map_index: int
    wp_index: int
    key: str
    map_id: str
    wp_uid: str
    map_solved: bool
    wp_solved: bool


@dataclass(frozen=True)
class LinkResult:
    pairs: tuple[LinkPair, ...]
    counts: LinkCounts
    map_data: Dataset

    def matched_dataset(self) -> Dataset:
        """Matched MAP records with their own outcomes."""
        return self.map_data.derive(self.map_data.records[p.map_index] for p in self.pairs)

    def agreeing_dataset(self) -> Dataset:
        """Matched MAP records whose outcome equals the WP outcome."""
        return self.map_data.derive(
            self.map_data.records[p.map_index] for p in self.pairs if p.map_solved == p.wp_solved
        )


def _safe_key(key_fn, item) -> Optional[str]:
    try:
        key = key_fn(item)
    except LinkageError:
        return None
    return key.code if key is not None else None


def match_datasets(map_data: Dataset, wp_data: WPDataset) -> LinkResult:
    """Pair MAP and WP records on the five-field key and count outcome agreement."""
    map_keys = [_safe_key(record_key, r) for r in map_data.records]
    wp_keys = [_safe_key(WPRecord.key, r) for r in wp_data.records]
    index_pairs, ambiguous_keys, ambiguous_pairs = pair_keys(map_keys, wp_keys)

    pairs = tuple(
        LinkPair(
            map_index=i,
            wp_index=j,
            key=map_keys[i] or "",
            map_id=map_data.records[i].id,
            wp_uid=wp_data.records[j].uid,
            map_solved=map_data.records[i].solved,
            wp_solved=wp_data.records[j].solved,
        )
        for i, j in index_pairs
    )
    matched = len(pairs)
    counts = LinkCounts(
        map_rows=len(map_data),
        wp_rows=len(wp_data),
        matched=matched,
        agree=sum(1 for p in pairs if p.map_solved == p.wp_solved),
        wp_solved_map_unsolved=sum(1 for p in pairs if p.wp_solved and not p.map_solved),
        map_solved_wp_unsolved=sum(1 for p in pairs if p.map_solved and not p.wp_solved),
        unmatched_map=len(map_data) - matched,
        unmatched_wp=len(wp_data) - matched,
        unkeyed_map=sum(1 for k in map_keys if k is None),
        unkeyed_wp=sum(1 for k in wp_keys if k is None),
        ambiguous_keys=ambiguous_keys,
        ambiguous_pairs=ambiguous_pairs,
    )
    logger.info(
        "linked %d of %d MAP / %d WP records; %d agree, %d ambiguous pairs",
        matched,
        counts.map_rows,
        counts.wp_rows,
        counts.agree,
        ambiguous_pairs,
    )
    return LinkResult(pairs=pairs, counts=counts, map_data=map_data)


def override_outcomes(link: LinkResult, matched_only: bool = False) -> Dataset:
    """MAP records with matched outcomes replaced by the WP outcome.

    With ``matched_only`` the unmatched records are left out.
    """
    wp_outcome = {p.map_index: p.wp_solved for p in link.pairs}
    records = []
    for i, r in enumerate(link.map_data.records):
        if i in wp_outcome:
            solved = wp_outcome[i]
            records.append(r if r.solved == solved else r.model_copy(update={"solved": solved}))
        elif not matched_only:
            records.append(r)
    return link.map_data.derive(records)


__all__ = [
    "LinkPair",
    "LinkResult",
    "MatchKey",
    "WPDataset",
    "WPRecord",
    "build_code",
    "load_wp_csv",
    "match_datasets",
    "override_outcomes",
    "pair_keys",
    "parse_reported_date",
    "record_key",
]
