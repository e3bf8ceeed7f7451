from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import duckdb
import pandas as pd

logger = logging.getLogger(__name__)


@dataclass
class _DuckDBResult:
    columns: List[str]
    data: List[Dict[str, Any]]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.data, columns=self.columns)


class DuckDBAnalyticsClient:
    """In-process DuckDB used for CSV scans and the aggregate report queries.

    Each thread gets its own connection; registered frames live on that connection.
    """

    def __init__(self, db_path: str = ":memory:", threads: Optional[int] = None) -> None:
        self.db_path = db_path
        self.threads = threads
        self._local = threading.local()
        if db_path != ":memory:":
            Path(db_path).parent.mkdir(parents=True, exist_ok=True)

    def _get_connection(self) -> duckdb.DuckDBPyConnection:
        """Get a persistent connection for the current thread (reused across queries)."""
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = duckdb.connect(self.db_path)
            if self.threads:
                conn.execute(f"SET threads TO {int(self.threads)}")
            self._local.conn = conn
        return conn

    def close(self) -> None:
        """Close the connection for the current thread."""
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            try:
                conn.close()
            except Exception:
                pass
            self._local.conn = None

    def __enter__(self) -> "DuckDBAnalyticsClient":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        self.close()
        return False

    def scan_csv(self, path: str | Path) -> _DuckDBResult:
        """Read a headed CSV with every cell as text, in file order.

        Empty cells come back as None. Type conversion is left to the caller so that
        row-level failures can be reported with their line number.
        """
        conn = self._get_connection()
        relation = conn.read_csv(str(path), header=True, all_varchar=True)
        columns = list(relation.columns)
        rows = relation.fetchall()
        logger.debug("scanned %d rows x %d columns from %s", len(rows), len(columns), path)
        return _DuckDBResult(columns, [dict(zip(columns, row)) for row in rows])

    def register(self, name: str, frame: pd.DataFrame) -> None:
        self._get_connection().register(name, frame)

    def unregister(self, name: str) -> None:
        self._get_connection().unregister(name)

    def query(self, sql: str, params: Optional[Sequence[Any]] = None) -> _DuckDBResult:
        conn = self._get_connection()
        cursor = conn.execute(sql, list(params or []))
        rows = cursor.fetchall()
        columns = [desc[0] for desc in cursor.description]
        return _DuckDBResult(columns, [dict(zip(columns, row)) for row in rows])


YEARLY_OUTCOMES_SQL = """
    SELECT year,
           SUM(CASE WHEN solved THEN 1 ELSE 0 END) AS solved,
           SUM(CASE WHEN solved THEN 0 ELSE 1 END) AS unsolved,
           COUNT(*) AS total
    FROM records
    GROUP BY year
    ORDER BY year
"""

STATE_OUTCOMES_SQL = """
    SELECT state,
           COUNT(*) AS total,
           SUM(CASE WHEN solved THEN 1 ELSE 0 END) AS solved,
           SUM(CASE WHEN solved THEN 0 ELSE 1 END) AS unsolved,
           AVG(CASE WHEN solved THEN 1.0 ELSE 0.0 END) AS solved_ratio
    FROM records
    GROUP BY state
    ORDER BY state
"""

STATE_SPREAD_SQL = """
    WITH per_state AS (
        SELECT state,
               COUNT(*) AS total,
               AVG(CASE WHEN solved THEN 1.0 ELSE 0.0 END) AS solved_ratio
        FROM records
        GROUP BY state
    )
    SELECT COUNT(*) AS states,
           AVG(total) AS mean_total,
           STDDEV_POP(total) AS sd_total,
           AVG(solved_ratio) AS mean_solved_ratio,
           STDDEV_POP(solved_ratio) AS sd_solved_ratio
    FROM per_state
"""

FOIA_YEARLY_SQL = """
    SELECT year, COUNT(*) AS foia_records
    FROM records
    WHERE source IS NOT NULL AND lower(source) LIKE '%foia%'
    GROUP BY year
    ORDER BY year
"""

TOTALS_SQL = """
    SELECT COUNT(*) AS total,
           SUM(CASE WHEN solved THEN 1 ELSE 0 END) AS solved,
           SUM(CASE WHEN solved THEN 0 ELSE 1 END) AS unsolved
    FROM records
"""


__all__ = [
    "DuckDBAnalyticsClient",
    "FOIA_YEARLY_SQL",
    "STATE_OUTCOMES_SQL",
    "STATE_SPREAD_SQL",
    "TOTALS_SQL",
    "YEARLY_OUTCOMES_SQL",
]
