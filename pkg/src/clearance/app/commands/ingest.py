from __future__ import annotations

import argparse

import pandas as pd

from ..dataset import count_label_disagreements, filter_unknown_age, load_map_csv
from .common import CommandContext, add_input, require

NAME = "ingest"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="load and validate a MAP CSV")
    add_input(parser)
    parser.set_defaults(handler=run)


def run(ctx: CommandContext) -> int:
    raw = load_map_csv(require(ctx.config.input, "--input"), ctx.settings)
    d = filter_unknown_age(raw)
    disagreements = count_label_disagreements(d)

    ctx.writer.write_csv("records.csv", d.to_frame())
    ctx.writer.write_json("provenance.json", raw.provenance)
    errors = pd.DataFrame(
        [issue.model_dump() for issue in raw.provenance.row_errors], columns=["line", "message"]
    )
    ctx.writer.write_csv("row_errors.csv", errors)
    return ctx.finish(
        {
            "rows_read": raw.provenance.rows_read,
            "rows_dropped": raw.provenance.rows_dropped,
            "unknown_age_removed": len(raw) - len(d),
            "records": len(d),
            "label_disagreements": disagreements,
        }
    )
