from __future__ import annotations

import argparse

import pandas as pd

from ..features import schema_to_json
from ..learners import model_to_json, predict_proba
from ..sweep import encode_split
from ..validation import holdout_score
from .common import (
    CommandContext,
    add_input,
    add_split_flags,
    build_hyperparameters,
    load_input,
    parse_params,
)

NAME = "train"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="fit one model on the training split")
    add_input(parser)
    add_split_flags(parser)
    parser.add_argument("--algo", help="learner (default xgboost)")
    parser.add_argument(
        "--param",
        action="append",
        help="hyperparameter override name=value; may repeat",
    )
    parser.set_defaults(handler=run)


def run(ctx: CommandContext) -> int:
    config = ctx.config
    d = load_input(ctx)
    params = parse_params(ctx.option("param"))
    h = build_hyperparameters(config.algorithm, config.seed, params)
    matrices = encode_split(d, config.train_fraction, config.seed, ctx.settings)

    model, test_ba, test_prec = holdout_score(matrices.train, matrices.test, h, ctx.settings)
    ctx.writer.write_text("model.json", model_to_json(model))
    ctx.writer.write_text("schema.json", schema_to_json(matrices.schema))

    proba = predict_proba(model, matrices.test)
    predictions = pd.DataFrame(
        {
            "row_id": list(matrices.test.row_ids),
            "probability": proba,
            "predicted": proba >= ctx.settings.positive_threshold,
            "solved": matrices.test.labels,
        }
    )
    ctx.writer.write_csv("predictions.csv", predictions)
    metrics = {
        "hyperparameters": h.model_dump(mode="json"),
        "n_train": len(matrices.train),
        "n_test": len(matrices.test),
        "test_balanced_accuracy": test_ba,
        "test_precision": test_prec,
    }
    ctx.writer.write_json("metrics.json", metrics)
    return ctx.finish(metrics)
