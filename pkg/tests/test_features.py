from __future__ import annotations

import numpy as np
import pytest

from clearance.app.errors import FeatureError
from clearance.app.features import (
    FeatureSchema,
    OverlapIndex,
    age_bin_edges,
    age_bin_labels,
    bin_age,
    bin_decade,
    compute_monthly_overlap,
    encode,
    fit_schema,
    overlap_key,
    schema_from_json,
    schema_to_json,
)


@pytest.mark.parametrize(
    ("year", "label"), [(1987, "1980s"), (2015, "2010s"), (1976, "1970s"), (2019, "2010s")]
)
def test_bin_decade(year, label):
    assert bin_decade(year) == label


def test_bin_decade_out_of_range():
    with pytest.raises(FeatureError):
        bin_decade(1975)


def test_age_bins():
    edges = age_bin_edges()
    labels = age_bin_labels(edges)

    assert bin_age(3) == "0-5"
    assert bin_age(0) == "0-5"
    assert bin_age(6) == "6-10"
    assert bin_age(100) == "96-100"
    assert bin_age(101) == "101+"
    assert labels[0] == "0-5" and labels[-1] == "101+"
    with pytest.raises(FeatureError):
        bin_age(-1)


def test_bin_age_matches_brute_force_edges():
    edges = age_bin_edges()
    labels = age_bin_labels(edges)
    for age in range(0, 121):
        lower = 0
        expected = labels[-1]
        for label, upper in zip(labels, edges):
            if lower <= age <= upper:
                expected = label
                break
            lower = upper + 1
        assert bin_age(age, edges) == expected


def label_span(label: str) -> range:
    if label.endswith("+"):
        return range(int(label[:-1]), 121)
    lo, hi = label.split("-")
    return range(int(lo), int(hi) + 1)


def test_age_bin_labels_do_not_overlap():
    labels = age_bin_labels(age_bin_edges())

    for age in range(0, 121):
        holders = [label for label in labels if age in label_span(label)]
        assert holders == [bin_age(age)]


def test_overlap_flags_pairs_of_events(make_record, dataset_of):
    a = make_record(id="A")
    b = make_record(id="B")
    same_event = make_record(id="C", month="June")
    same_event_2 = make_record(id="C", month="June")
    alone = make_record(id="D", month="July")

    flags = compute_monthly_overlap(dataset_of(a, b, same_event, same_event_2, alone))

    assert flags.tolist() == [1, 1, 0, 0, 0]


def test_overlap_matches_pairwise_oracle(make_record, dataset_of):
    rng = np.random.default_rng(3)
    records = [
        make_record(
            id=f"E{rng.integers(40)}",
            agency_name=["Houston", "Dallas"][rng.integers(2)],
            month=["January", "February"][rng.integers(2)],
            year=int(rng.integers(2000, 2002)),
        )
        for _ in range(120)
    ]
    d = dataset_of(*records)

    flags = compute_monthly_overlap(d)

    oracle = [
        int(any(overlap_key(r) == overlap_key(s) and r.id != s.id for s in records))
        for r in records
    ]
    assert flags.tolist() == oracle


def test_encode_one_hot_groups(make_record, dataset_of, settings):
    train = dataset_of(
        make_record(circumstance="Other arguments", victim_sex="Female"),
        make_record(circumstance="Felony type", victim_sex="Male"),
        make_record(circumstance="Circumstances undetermined", victim_sex="Male"),
    )
    schema = fit_schema(train, settings)
    matrix = encode(train, schema)

    circumstance = schema.group_indices("circumstance")
    assert len(circumstance) == 3
    assert "Circumstance: Undetermined" in schema.names
    female = schema.index_of("Victim Sex: Female")
    assert matrix.values[0, female] == 1.0
    assert matrix.values[0, schema.index_of("Victim Sex: Male")] == 0.0
    for group in schema.categories:
        sums = matrix.values[:, schema.group_indices(group)].sum(axis=1)
        assert np.all(sums == 1.0)


def test_unseen_level_encodes_to_zero_group(make_record, dataset_of, settings):
    train = dataset_of(
        make_record(weapon="Shotgun"), make_record(weapon="Knife or cutting instrument")
    )
    test = dataset_of(make_record(weapon="Poison"))
    schema = fit_schema(train, settings)

    matrix = encode(test, schema)

    assert matrix.values[0, schema.group_indices("weapon")].sum() == 0.0


def test_count_columns_pass_through(make_record, dataset_of, settings):
    d = dataset_of(make_record(victim_count=3, offender_count=2))
    schema = fit_schema(d, settings)
    matrix = encode(d, schema)

    assert matrix.values[0, schema.index_of("N of Victims")] == 3.0
    assert matrix.values[0, schema.index_of("N of Offenders")] == 2.0
    assert matrix.values[0, schema.index_of("Monthly State/Agency Overlap")] == 0.0


def test_schema_round_trips_and_excludes_groups(make_record, dataset_of, settings):
    d = dataset_of(make_record(year=1999), make_record(year=2012))
    schema = fit_schema(d, settings, exclude=["decade"])

    restored = schema_from_json(schema_to_json(schema))

    assert restored == schema
    assert restored.digest() == schema.digest()
    assert schema.group_indices("decade") == []
    assert fit_schema(d, settings).decade_labels == ["1990s", "2010s"]


def test_encode_is_deterministic(make_record, dataset_of, settings):
    d = dataset_of(*(make_record(victim_age=a) for a in (2, 17, 45, 88)))
    schema = fit_schema(d, settings)
    index = OverlapIndex(d.records)

    first, second = encode(d, schema, index), encode(d, schema, index)

    assert np.array_equal(first.values, second.values)
    assert first.values.dtype == np.float32


def test_schema_errors(make_record, dataset_of, settings):
    from clearance.app.dataset import Dataset

    with pytest.raises(FeatureError):
        fit_schema(Dataset.from_records([]), settings)
    with pytest.raises(FeatureError):
        fit_schema(dataset_of(make_record()), settings, exclude=["shoe_size"])
    empty = FeatureSchema(columns=[], categories={}, age_bin_edges=[5], decade_labels=[])
    with pytest.raises(FeatureError):
        encode(dataset_of(make_record()), empty)
    with pytest.raises(FeatureError):
        schema_from_json("{}")
