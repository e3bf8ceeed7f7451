from __future__ import annotations

import argparse

import pandas as pd

from ..dataset import partition_by_state
from ..explain import explain_rows, feature_spread, state_shap_table
from ..learners import state_grid
from ..sweep import state_sweep_detailed
from .common import CommandContext, add_input, add_split_flags, load_input

NAME = "sweep-states"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="per-state XGBoost grid search and test scores")
    add_input(parser)
    add_split_flags(parser)
    parser.add_argument("--grid", action="append", help="replace one grid axis: name=v1,v2,...")
    parser.add_argument(
        "--shap",
        action="store_true",
        default=None,
        help="also rank features per state by mean |SHAP| on the test split",
    )
    parser.add_argument("--top", type=int, help="features in the spread table (default 10)")
    parser.set_defaults(handler=run)


def run(ctx: CommandContext) -> int:
    config = ctx.config
    partitions = partition_by_state(load_input(ctx))
    grid = state_grid(seed=config.seed, overrides=config.grid_overrides)
    sweep, fits = state_sweep_detailed(
        partitions, grid, config.k, config.seed, ctx.settings, config.train_fraction
    )

    states = pd.DataFrame(
        [
            {
                "state": s.state,
                "n_train": s.n_train,
                "n_test": s.n_test,
                "best": s.best.label() if s.best else None,
                "cv_balanced_accuracy": s.cv_balanced_accuracy,
                "cv_precision": s.cv_precision,
                "test_balanced_accuracy": s.test_balanced_accuracy,
                "test_precision": s.test_precision,
                "configs_evaluated": s.configs_evaluated,
                "skipped_reason": s.skipped_reason,
                "note": s.note,
            }
            for s in sweep.states
        ]
    )
    ctx.writer.write_csv("states.csv", states)
    ctx.writer.write_json("sweep.json", sweep)

    if ctx.option("shap", False):
        batches = {
            state: explain_rows(
                fit.model,
                fit.matrices.test,
                workers=ctx.workers,
                max_rows=ctx.settings.explain_max_rows,
            )
            for state, fit in fits.items()
            if len(fit.matrices.test)
        }
        table = state_shap_table(batches)
        spread = feature_spread(table, top=ctx.option("top", 10))
        ctx.writer.write_csv("state_shap.csv", table)
        ctx.writer.write_csv("state_shap_spread.csv", spread)
        if not spread.empty:
            ctx.writer.write_bar_chart(
                "state_shap_spread.svg",
                list(spread["feature"]),
                list(spread["median"]),
                "Median across states of mean |SHAP|",
                "mean |SHAP value|",
            )

    return ctx.finish(
        {
            "states": len(sweep.states),
            "evaluated": len(fits),
            "models_fitted": sweep.models_fitted,
            "metric_correlation": sweep.metric_correlation,
        }
    )
