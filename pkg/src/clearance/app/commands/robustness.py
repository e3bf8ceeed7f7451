from __future__ import annotations

import argparse

import pandas as pd

from ..dataset import Dataset, load_map_csv
from ..explain import explain_rows, mean_abs_shap
from ..learners import fit
from ..linkage import load_wp_csv, match_datasets, override_outcomes
from ..sweep import encode_split
from .common import (
    CommandContext,
    add_input,
    add_split_flags,
    build_hyperparameters,
    parse_params,
    require,
)
from .explain import DEFAULT_PARAMS
from .match import agreement_summary

NAME = "robustness"

# Linked records only cover recent years, so the decade group carries no signal
EXCLUDED_GROUPS = ("decade",)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        NAME, help="refit and rank features on MAP records confirmed or corrected by WP"
    )
    add_input(parser)
    add_split_flags(parser)
    parser.add_argument("--wp-input", help="Washington Post homicide CSV")
    parser.add_argument("--param", action="append", help="hyperparameter override name=value")
    parser.set_defaults(handler=run)


def _ranking(ctx: CommandContext, d: Dataset, variant: str) -> pd.DataFrame:
    config = ctx.config
    params = {**DEFAULT_PARAMS, **parse_params(ctx.option("param"))}
    h = build_hyperparameters("xgboost", config.seed, params)
    matrices = encode_split(
        d, config.train_fraction, config.seed, ctx.settings, exclude=EXCLUDED_GROUPS
    )
    model = fit(matrices.train, h, ctx.settings)
    batch = explain_rows(
        model, matrices.test, workers=ctx.workers, max_rows=ctx.settings.explain_max_rows
    )
    table = pd.DataFrame([item.model_dump() for item in mean_abs_shap(batch)])
    table.insert(0, "variant", variant)
    return table


def run(ctx: CommandContext) -> int:
    map_data = load_map_csv(require(ctx.config.input, "--input"), ctx.settings)
    wp_data = load_wp_csv(require(ctx.config.wp_input, "--wp-input"), ctx.settings)
    link = match_datasets(map_data, wp_data)

    variants = {
        "agreeing": link.agreeing_dataset(),
        "wp_outcome": override_outcomes(link, matched_only=True),
    }
    tables = []
    for name, d in variants.items():
        table = _ranking(ctx, d, name)
        ctx.writer.write_csv(f"robustness_{name}.csv", table)
        tables.append(table)

    ranks = pd.concat(tables).pivot(index="feature", columns="variant", values="rank")
    ranks = ranks.reset_index().sort_values(["wp_outcome", "feature"], kind="mergesort")
    ctx.writer.write_csv("robustness_ranks.csv", ranks)
    summary = {
        "link": agreement_summary(link.counts),
        "rows": {name: len(d) for name, d in variants.items()},
    }
    ctx.writer.write_json("robustness.json", summary)
    return ctx.finish(summary)
