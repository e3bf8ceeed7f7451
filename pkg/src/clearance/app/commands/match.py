from __future__ import annotations

import argparse

import pandas as pd

from ..dataset import load_map_csv
from ..linkage import load_wp_csv, match_datasets
from .common import CommandContext, add_input, require

NAME = "match"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="link MAP and Washington Post records")
    add_input(parser)
    parser.add_argument("--wp-input", help="Washington Post homicide CSV")
    parser.set_defaults(handler=run)


def agreement_summary(counts) -> dict:
    matched = counts.matched
    share = (lambda n: n / matched) if matched else (lambda n: None)
    return {
        **counts.model_dump(),
        "agree_share": share(counts.agree),
        "wp_solved_map_unsolved_share": share(counts.wp_solved_map_unsolved),
        "map_solved_wp_unsolved_share": share(counts.map_solved_wp_unsolved),
    }


def run(ctx: CommandContext) -> int:
    map_data = load_map_csv(require(ctx.config.input, "--input"), ctx.settings)
    wp_data = load_wp_csv(require(ctx.config.wp_input, "--wp-input"), ctx.settings)
    link = match_datasets(map_data, wp_data)

    pairs = pd.DataFrame(
        [p.model_dump() for p in link.pairs],
        columns=["map_index", "wp_index", "key", "map_id", "wp_uid", "map_solved", "wp_solved"],
    )
    ctx.writer.write_csv("matched_pairs.csv", pairs)
    summary = agreement_summary(link.counts)
    ctx.writer.write_json("agreement.json", summary)
    return ctx.finish(summary)
