from __future__ import annotations

import pytest

from clearance.app.dataset import filter_unknown_age, load_map_csv, partition_by_state
from clearance.app.learners import state_grid
from clearance.app.models import StateResult
from clearance.app.sweep import (
    compare_algorithms,
    encode_split,
    metric_correlation,
    state_sweep,
    state_sweep_detailed,
)

SMALL_GRID = {"n_estimators": [5], "learning_rate": [0.3]}


def test_encode_split_shares_schema_and_overlap(make_record, dataset_of, settings):
    d = dataset_of(*(make_record(victim_age=20 + i) for i in range(10)))

    m = encode_split(d, 0.7, seed=3, settings=settings)

    assert (len(m.train), len(m.test)) == (7, 3)
    assert m.train.schema == m.test.schema == m.schema
    overlap = m.schema.index_of("Monthly State/Agency Overlap")
    assert (m.test.values[:, overlap] == 1.0).all()


def test_state_sweep_skips_degenerate_states(map_csv, make_record, dataset_of, settings):
    partitions = partition_by_state(filter_unknown_age(load_map_csv(map_csv, settings)))
    partitions["GUAM"] = dataset_of(make_record(state="Guam"))
    partitions["WAKE"] = dataset_of(*(make_record(state="Wake", solved=True) for _ in range(12)))
    grid = state_grid(seed=1, overrides=SMALL_GRID)

    sweep, fits = state_sweep_detailed(partitions, grid, k=3, seed=1, settings=settings)

    by_state = {s.state: s for s in sweep.states}
    assert [s.state for s in sweep.states] == sorted(partitions)
    assert by_state["GUAM"].skipped_reason == "fewer than 2 records"
    assert by_state["WAKE"].skipped_reason == "single class in training split"
    evaluated = [s for s in sweep.states if s.skipped_reason is None]
    assert len(evaluated) == 5
    assert set(fits) == {s.state for s in evaluated}
    assert sweep.models_fitted == len(evaluated) * len(grid)
    for s in evaluated:
        assert s.n_train + s.n_test == len(partitions[s.state])
        assert s.best == grid[0]
        assert s.test_balanced_accuracy is None or 0.0 <= s.test_balanced_accuracy <= 1.0


def test_state_sweep_is_deterministic(map_csv, settings):
    partitions = partition_by_state(filter_unknown_age(load_map_csv(map_csv, settings)))
    grid = state_grid(overrides=SMALL_GRID)

    first = state_sweep(partitions, grid, k=3, seed=4, settings=settings)
    second = state_sweep(partitions, grid, k=3, seed=4, settings=settings)

    assert first == second


def test_compare_algorithms_scores_each_family(map_csv, settings):
    d = filter_unknown_age(load_map_csv(map_csv, settings))
    m = encode_split(d, 0.7, seed=2, settings=settings)

    summaries, results = compare_algorithms(
        m.train,
        m.test,
        ["decision_tree"],
        k=3,
        seed=2,
        settings=settings,
        overrides={"criterion": ["gini", "entropy"], "max_depth": [3]},
    )

    assert [s.algorithm for s in summaries] == ["decision_tree"]
    assert summaries[0].configs_tested == 2
    assert len(results["decision_tree"].configs) == 2
    assert 0.0 <= summaries[0].test_balanced_accuracy <= 1.0


def states(*pairs) -> list[StateResult]:
    return [
        StateResult(state=f"S{i}", test_balanced_accuracy=ba, test_precision=prec)
        for i, (ba, prec) in enumerate(pairs)
    ]


def test_metric_correlation():
    assert metric_correlation(states((0.6, 0.7), (0.7, 0.8), (0.8, 0.9))) == pytest.approx(1.0)
    assert metric_correlation(states((0.6, 0.9), (0.7, 0.8), (0.8, 0.7))) == pytest.approx(-1.0)
    assert metric_correlation(states((0.6, 0.7), (0.7, 0.8))) is None
    assert metric_correlation(states((0.6, 0.7), (0.6, 0.8), (0.6, 0.9))) is None
    assert metric_correlation(states((0.6, 0.7), (0.7, None), (0.8, 0.9))) is None
