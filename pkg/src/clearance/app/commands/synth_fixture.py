from __future__ import annotations

import argparse

from ..synth import DEFAULT_STATES, generate_map_frame, generate_wp_frame
from .common import CommandContext

NAME = "synth-fixture"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="write synthetic MAP (and WP) CSV files")
    parser.add_argument("--rows", type=int, required=True, help="number of MAP rows")
    parser.add_argument("--states", help="comma-separated state names")
    parser.add_argument("--wp", action="store_true", default=None, help="also write a WP file")
    parser.add_argument("--match-rate", type=float, help="share of MAP rows mirrored in WP")
    parser.set_defaults(handler=run)


def run(ctx: CommandContext) -> int:
    rows = ctx.option("rows")
    states_text = ctx.option("states")
    states = [s.strip() for s in states_text.split(",") if s.strip()] if states_text else None
    frame = generate_map_frame(
        rows,
        seed=ctx.config.seed,
        states=states or DEFAULT_STATES,
        min_year=ctx.settings.min_year,
        max_year=ctx.settings.max_year,
    )
    ctx.writer.write_csv("map_fixture.csv", frame)
    summary = {"map_rows": len(frame)}
    if ctx.option("wp", False):
        wp = generate_wp_frame(
            frame,
            seed=ctx.config.seed,
            match_rate=ctx.option("match_rate", 0.6),
            extra_rows=max(1, rows // 10),
        )
        ctx.writer.write_csv("wp_fixture.csv", wp)
        summary["wp_rows"] = len(wp)
    return ctx.finish(summary)
