from __future__ import annotations

import pandas as pd
import pytest

from clearance.app.dataset import (
    REQUIRED_COLUMNS,
    Dataset,
    count_label_disagreements,
    derive_target_check,
    filter_unknown_age,
    load_map_csv,
    partition_by_state,
    shuffled_split,
    train_size,
)
from clearance.app.errors import ConfigError, DatasetError, EmptyDatasetError, SchemaError


def map_row(i: int, **overrides) -> dict:
    row = {
        "ID": f"E{i:04d}",
        "Year": 2001,
        "Month": "March",
        "State": "Ohio",
        "Agency": "Columbus",
        "Agentype": "Municipal police",
        "Homicide": "Murder and non-negligent manslaughter",
        "VicAge": 20 + i,
        "VicSex": "Female",
        "VicRace": "Black",
        "VicCount": 0,
        "OffSex": "Male",
        "OffCount": 0,
        "Circumstance": "Other arguments",
        "Weapon": "Shotgun",
        "Solved": "Yes",
    }
    row.update(overrides)
    return row


def write_csv(path, rows, columns=None):
    frame = pd.DataFrame(rows, columns=columns or list(REQUIRED_COLUMNS))
    frame.to_csv(path, index=False)
    return path


def test_load_well_formed_rows(tmp_path, settings):
    path = write_csv(tmp_path / "map.csv", [map_row(i) for i in range(10)])

    d = load_map_csv(path, settings)

    assert len(d) == 10
    assert d.provenance.rows_read == 10
    assert d.provenance.rows_dropped == 0
    first = d[0]
    assert first.id == "E0000"
    assert first.month == "March"
    assert first.state == "OHIO"
    assert first.victim_count == 1  # VicCount counts additional victims
    assert first.solved is True


def test_missing_required_column_names_it(tmp_path, settings):
    columns = [c for c in REQUIRED_COLUMNS if c != "Solved"]
    rows = [{k: v for k, v in map_row(0).items() if k != "Solved"}]
    path = write_csv(tmp_path / "map.csv", rows, columns)

    with pytest.raises(SchemaError) as info:
        load_map_csv(path, settings)
    assert info.value.column == "Solved"


def test_header_match_is_case_insensitive(tmp_path, settings):
    rows = [{k.lower(): v for k, v in map_row(0).items()}]
    path = write_csv(tmp_path / "map.csv", rows, [c.lower() for c in REQUIRED_COLUMNS])

    assert len(load_map_csv(path, settings)) == 1


def test_bad_rows_are_dropped_with_line_numbers(tmp_path, settings):
    rows = [
        map_row(0),
        map_row(1, Year="not-a-year"),
        map_row(2, OffCount="many"),
        map_row(3, Year=1950),
        map_row(4),
    ]
    path = write_csv(tmp_path / "map.csv", rows)

    d = load_map_csv(path, settings)

    assert len(d) == 2
    p = d.provenance
    assert p.rows_read == p.rows_kept + p.rows_dropped == 5
    assert [issue.line for issue in p.row_errors] == [3, 4, 5]


def test_blank_categorical_cells_become_unknown(tmp_path, settings):
    path = write_csv(tmp_path / "map.csv", [map_row(0, Weapon="", VicSex="", VicAge="999")])

    record = load_map_csv(path, settings)[0]

    assert record.weapon == "Unknown"
    assert record.victim_sex == "Unknown"
    assert record.victim_age is None


@pytest.mark.parametrize("month", ["March", "mar", "3", "MARCH"])
def test_month_accepts_names_and_numbers(tmp_path, settings, month):
    path = write_csv(tmp_path / "map.csv", [map_row(0, Month=month)])
    assert load_map_csv(path, settings)[0].month == "March"


def test_missing_file_is_dataset_error(tmp_path, settings):
    with pytest.raises(DatasetError):
        load_map_csv(tmp_path / "absent.csv", settings)


def test_filter_unknown_age(make_record, dataset_of):
    d = dataset_of(make_record(victim_age=None), make_record(victim_age=4), make_record())

    kept = filter_unknown_age(d)

    assert [r.victim_age for r in kept] == [4, 30]
    assert filter_unknown_age(kept).records == kept.records
    assert len(filter_unknown_age(dataset_of(make_record(victim_age=None)))) == 0


def test_derive_target_check_and_disagreements(make_record, dataset_of):
    unknown = make_record(offender_sex="Unknown", solved=True)
    known = make_record(offender_sex="Male", solved=True)

    assert derive_target_check(unknown) is False
    assert derive_target_check(known) is True
    assert count_label_disagreements(dataset_of(unknown, known)) == 1


def test_shuffled_split_sizes_and_determinism(make_record, dataset_of):
    d = dataset_of(*(make_record() for _ in range(10)))

    split = shuffled_split(d, 0.7, seed=1)
    again = shuffled_split(d, 0.7, seed=1)

    assert (len(split.train), len(split.test)) == (7, 3)
    assert split.train_index == again.train_index
    assert sorted(split.train_index + split.test_index) == list(range(10))
    assert set(split.train_index).isdisjoint(split.test_index)


def test_train_size_rounds_like_the_national_split():
    n = 792_439
    assert n - train_size(n, 0.7) == 237_732


def test_split_preconditions(make_record, dataset_of):
    with pytest.raises(EmptyDatasetError):
        shuffled_split(Dataset.from_records([]), 0.7, seed=0)
    with pytest.raises(DatasetError):
        shuffled_split(dataset_of(make_record()), 0.7, seed=0)
    with pytest.raises(ConfigError):
        shuffled_split(dataset_of(make_record(), make_record()), 1.0, seed=0)


def test_partition_by_state(make_record, dataset_of):
    d = dataset_of(
        make_record(state="Texas"), make_record(state="Ohio"), make_record(state="texas")
    )

    parts = partition_by_state(d)

    assert list(parts) == ["OHIO", "TEXAS"]
    assert sum(len(p) for p in parts.values()) == len(d)
    single = partition_by_state(dataset_of(make_record(), make_record()))
    assert len(single) == 1
