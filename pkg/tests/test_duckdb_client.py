from __future__ import annotations

import duckdb
import pytest

from clearance.app.dataset import Dataset
from clearance.app.services.duckdb_client import (
    FOIA_YEARLY_SQL,
    STATE_OUTCOMES_SQL,
    STATE_SPREAD_SQL,
    TOTALS_SQL,
    YEARLY_OUTCOMES_SQL,
    DuckDBAnalyticsClient,
)


def test_scan_csv_returns_text_cells_in_file_order(tmp_path):
    """Every cell comes back as text and empty cells as None."""
    path = tmp_path / "rows.csv"
    path.write_text("ID,VicAge,Weapon\n7,012,Shotgun\n8,,Knife\n", encoding="utf-8")

    with DuckDBAnalyticsClient() as client:
        result = client.scan_csv(path)

    assert result.columns == ["ID", "VicAge", "Weapon"]
    assert result.data == [
        {"ID": "7", "VicAge": "012", "Weapon": "Shotgun"},
        {"ID": "8", "VicAge": None, "Weapon": "Knife"},
    ]


def test_query_with_parameters(tmp_path):
    """Positional parameters bind in order."""
    client = DuckDBAnalyticsClient(db_path=str(tmp_path / "db" / "test.duckdb"), threads=1)
    try:
        result = client.query("SELECT ? + ? AS total", [2, 3])
    finally:
        client.close()

    assert result.data == [{"total": 5}]
    assert (tmp_path / "db").is_dir()


@pytest.fixture
def records_frame(make_record):
    records = [
        make_record(year=2001, state="Ohio", solved=True, source="FOIA"),
        make_record(year=2001, state="Ohio", solved=False, source="FBI"),
        make_record(year=2002, state="Texas", solved=True, source="FBI"),
        make_record(year=2002, state="Texas", solved=True, source="foia"),
    ]
    return Dataset.from_records(records).to_frame()


def test_report_queries(records_frame):
    """Aggregate queries run against a registered frame."""
    with DuckDBAnalyticsClient() as client:
        client.register("records", records_frame)
        yearly = client.query(YEARLY_OUTCOMES_SQL).frame()
        states = client.query(STATE_OUTCOMES_SQL).frame()
        spread = client.query(STATE_SPREAD_SQL).data[0]
        totals = client.query(TOTALS_SQL).data[0]
        foia = client.query(FOIA_YEARLY_SQL).data

    assert yearly["year"].tolist() == [2001, 2002]
    assert yearly["unsolved"].tolist() == [1, 0]
    assert states["state"].tolist() == ["OHIO", "TEXAS"]
    assert [float(v) for v in states["solved_ratio"]] == pytest.approx([0.5, 1.0])
    assert spread["states"] == 2
    assert float(spread["mean_solved_ratio"]) == pytest.approx(0.75)
    assert (totals["total"], totals["solved"], totals["unsolved"]) == (4, 3, 1)
    assert [(row["year"], row["foia_records"]) for row in foia] == [(2001, 1), (2002, 1)]


def test_unregister_drops_the_view(records_frame):
    """A dropped view can no longer be queried."""
    with DuckDBAnalyticsClient() as client:
        client.register("records", records_frame)
        client.unregister("records")
        with pytest.raises(duckdb.Error):
            client.query(TOTALS_SQL)
