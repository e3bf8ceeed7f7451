from __future__ import annotations

import argparse

from ..dataset import filter_unknown_age, load_map_csv
from ..services.duckdb_client import (
    FOIA_YEARLY_SQL,
    STATE_OUTCOMES_SQL,
    STATE_SPREAD_SQL,
    TOTALS_SQL,
    YEARLY_OUTCOMES_SQL,
    DuckDBAnalyticsClient,
)
from .common import CommandContext, add_input, require

NAME = "summarize"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="yearly and per-state outcome tables")
    add_input(parser)
    parser.set_defaults(handler=run)


def run(ctx: CommandContext) -> int:
    # Outcome shares are over every loaded record, unknown ages included
    d = load_map_csv(require(ctx.config.input, "--input"), ctx.settings)
    frame = d.to_frame()
    with DuckDBAnalyticsClient(threads=ctx.settings.threads) as client:
        client.register("records", frame)
        yearly = client.query(YEARLY_OUTCOMES_SQL).frame()
        states = client.query(STATE_OUTCOMES_SQL).frame()
        spread = client.query(STATE_SPREAD_SQL).data[0]
        totals = client.query(TOTALS_SQL).data[0]
        foia = client.query(FOIA_YEARLY_SQL).frame() if frame["source"].notna().any() else None
        client.unregister("records")

    ctx.writer.write_csv("yearly_outcomes.csv", yearly)
    ctx.writer.write_csv("state_outcomes.csv", states)
    if foia is not None:
        ctx.writer.write_csv("foia_yearly.csv", foia)
    totals = {key: int(value or 0) for key, value in totals.items()}
    totals["unsolved_share"] = totals["unsolved"] / totals["total"] if totals["total"] else None
    totals["known_age_records"] = len(filter_unknown_age(d))
    summary = {
        "totals": totals,
        "state_spread": {k: (float(v) if v is not None else None) for k, v in spread.items()},
    }
    ctx.writer.write_json("summary.json", summary)
    ctx.writer.write_bar_chart(
        "state_solved_ratio.svg",
        list(states["state"]),
        [float(v) for v in states["solved_ratio"]],
        "Share of solved homicides by state",
        "solved ratio",
    )
    return ctx.finish(summary)
