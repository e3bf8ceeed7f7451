from __future__ import annotations

import argparse

import pandas as pd

from ..features import schema_to_json
from ..learners import ALGORITHMS, default_grid, model_to_json
from ..models import GridResult
from ..sweep import compare_algorithms, encode_split
from ..validation import grid_search, holdout_score
from .common import CommandContext, add_input, add_split_flags, load_input

NAME = "gridsearch"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="cross-validated hyperparameter search")
    add_input(parser)
    add_split_flags(parser)
    parser.add_argument("--algo", help=f"one of {', '.join(ALGORITHMS)} or 'all'")
    parser.add_argument(
        "--grid",
        action="append",
        help="replace one grid axis: name=v1,v2,...; may repeat",
    )
    parser.set_defaults(handler=run)


def fold_table(result: GridResult) -> pd.DataFrame:
    """One row per configuration and fold."""
    rows = []
    for config in result.configs:
        params = config.hyperparameters.tuned()
        for fold in config.folds:
            rows.append(
                {
                    "config": config.index,
                    "algorithm": config.hyperparameters.algorithm,
                    **params,
                    "fold": fold.fold,
                    "n_train": fold.n_train,
                    "n_test": fold.n_test,
                    "balanced_accuracy": fold.balanced_accuracy,
                    "precision": fold.precision,
                    "note": fold.note,
                }
            )
    return pd.DataFrame(rows)


def config_table(result: GridResult) -> pd.DataFrame:
    rows = []
    for config in result.configs:
        rows.append(
            {
                "config": config.index,
                **config.hyperparameters.tuned(),
                "mean_balanced_accuracy": config.mean_balanced_accuracy,
                "sd_balanced_accuracy": config.sd_balanced_accuracy,
                "mean_precision": config.mean_precision,
                "sd_precision": config.sd_precision,
                "combined": config.combined,
                "winner": config.index == result.winner_index,
            }
        )
    return pd.DataFrame(rows)


def run(ctx: CommandContext) -> int:
    config = ctx.config
    d = load_input(ctx)
    matrices = encode_split(d, config.train_fraction, config.seed, ctx.settings)
    overrides = config.grid_overrides

    if config.algorithm == "all":
        summaries, results = compare_algorithms(
            matrices.train,
            matrices.test,
            ALGORITHMS,
            config.k,
            config.seed,
            ctx.settings,
            overrides,
        )
        for algorithm, result in results.items():
            ctx.writer.write_csv(f"grid_{algorithm}_folds.csv", fold_table(result))
            ctx.writer.write_csv(f"grid_{algorithm}.csv", config_table(result))
        best = pd.DataFrame(
            [
                {
                    "algorithm": s.algorithm,
                    "configs_tested": s.configs_tested,
                    "best": s.best.label(),
                    "cv_balanced_accuracy": s.cv_balanced_accuracy,
                    "cv_balanced_accuracy_sd": s.cv_balanced_accuracy_sd,
                    "cv_precision": s.cv_precision,
                    "cv_precision_sd": s.cv_precision_sd,
                    "test_balanced_accuracy": s.test_balanced_accuracy,
                    "test_precision": s.test_precision,
                }
                for s in summaries
            ]
        )
        ctx.writer.write_csv("best_configs.csv", best)
        ctx.writer.write_json("best_configs.json", [s.model_dump(mode="json") for s in summaries])
        return ctx.finish({"algorithms": len(summaries)})

    grid = default_grid(config.algorithm, seed=config.seed, overrides=overrides)
    result = grid_search(matrices.train, grid, config.k, config.seed, ctx.settings)
    winner = result.winner
    model, test_ba, test_prec = holdout_score(
        matrices.train, matrices.test, winner.hyperparameters, ctx.settings
    )
    ctx.writer.write_csv(f"grid_{config.algorithm}_folds.csv", fold_table(result))
    ctx.writer.write_csv(f"grid_{config.algorithm}.csv", config_table(result))
    ctx.writer.write_json(f"grid_{config.algorithm}.json", result)
    ctx.writer.write_text("model.json", model_to_json(model))
    ctx.writer.write_text("schema.json", schema_to_json(matrices.schema))
    return ctx.finish(
        {
            "configs_evaluated": len(grid),
            "winner": winner.hyperparameters.label(),
            "cv_balanced_accuracy": winner.mean_balanced_accuracy,
            "cv_precision": winner.mean_precision,
            "test_balanced_accuracy": test_ba,
            "test_precision": test_prec,
        }
    )
