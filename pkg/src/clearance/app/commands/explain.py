from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import List, Tuple

import pandas as pd

from ..dataset import shuffled_split
from ..errors import ConfigError, FeatureError
from ..explain import (
    BackgroundSet,
    explain_rows,
    explanation_frame,
    local_report,
    mean_abs_shap,
    signed_mean_shap,
    tree_shap,
)
from ..features import OverlapIndex, encode, fit_schema, schema_from_json
from ..learners import Model, fit, load_model
from ..reports import MANIFEST_NAME, read_manifest_config
from ..sweep import encode_split
from .common import (
    CommandContext,
    add_input,
    add_split_flags,
    build_hyperparameters,
    load_input,
    parse_params,
)

logger = logging.getLogger(__name__)

NAME = "explain"

# Best national configuration of the boosted grid
DEFAULT_PARAMS = {"n_estimators": 200, "learning_rate": 0.5}


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="SHAP attributions on the test split")
    add_input(parser)
    add_split_flags(parser)
    parser.add_argument("--model", help="model JSON from train or gridsearch")
    parser.add_argument("--schema", help="feature schema JSON written next to the model")
    parser.add_argument("--algo", help="learner to fit when no model is given (default xgboost)")
    parser.add_argument("--param", action="append", help="hyperparameter override name=value")
    parser.add_argument("--mode", choices=["cover", "background"], help="default cover")
    parser.add_argument("--background-size", type=int, help="background rows (default 100)")
    parser.add_argument("--top", type=int, help="features listed per local report (default 10)")
    parser.add_argument("--local-rows", help="comma-separated test-split positions, e.g. 0,99")
    parser.add_argument("--max-rows", type=int, help="explain at most this many test rows")
    parser.set_defaults(handler=run)


def parse_positions(text: str | None) -> List[int]:
    if not text:
        return []
    try:
        positions = [int(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"--local-rows expects integers, got {text!r}") from exc
    if any(p < 0 for p in positions):
        raise ConfigError("--local-rows positions must be non-negative")
    return positions


def training_split(model_path: str, seed: int, fraction: float) -> Tuple[int, float]:
    """Seed and train fraction recorded in the manifest next to a saved model, if any."""
    manifest = Path(model_path).with_name(MANIFEST_NAME)
    if not manifest.exists():
        logger.warning("no %s next to %s; splitting with seed %d", MANIFEST_NAME, model_path, seed)
        return seed, fraction
    trained = read_manifest_config(manifest)
    if (trained.seed, trained.train_fraction) != (seed, fraction):
        logger.info(
            "using the training run's split (seed %d, train fraction %s)",
            trained.seed,
            trained.train_fraction,
        )
    return trained.seed, trained.train_fraction


def _prepare(ctx: CommandContext):
    """(model, train matrix, test matrix) from a saved model or a fresh fit."""
    config = ctx.config
    d = load_input(ctx)
    if bool(config.model_path) != bool(config.schema_path):
        raise ConfigError("--model and --schema must be given together")
    if config.model_path:
        model: Model = load_model(config.model_path)
        try:
            schema = schema_from_json(Path(config.schema_path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise FeatureError(f"cannot read schema file {config.schema_path}: {exc}") from exc
        seed, fraction = training_split(config.model_path, config.seed, config.train_fraction)
        split = shuffled_split(d, fraction, seed)
        if fit_schema(split.train, ctx.settings).digest() != schema.digest():
            raise ConfigError(
                "the training split does not reproduce the model's schema; "
                "pass the --seed and --train-fraction the model was trained with"
            )
        overlap = OverlapIndex(d.records)
        return model, encode(split.train, schema, overlap), encode(split.test, schema, overlap)

    params = {**DEFAULT_PARAMS, **parse_params(ctx.option("param"))}
    h = build_hyperparameters(config.algorithm, config.seed, params)
    matrices = encode_split(d, config.train_fraction, config.seed, ctx.settings)
    return fit(matrices.train, h, ctx.settings), matrices.train, matrices.test


def run(ctx: CommandContext) -> int:
    model, train, test = _prepare(ctx)
    mode = ctx.option("mode", "cover")
    background = None
    if mode == "background":
        size = ctx.option("background_size", 100)
        background = BackgroundSet.sample(train, size, ctx.config.seed)

    max_rows = ctx.option("max_rows", ctx.settings.explain_max_rows)
    batch = explain_rows(model, test, background, mode, workers=ctx.workers, max_rows=max_rows)
    ranking = mean_abs_shap(batch)
    table = pd.DataFrame([item.model_dump() for item in ranking])
    ctx.writer.write_csv("shap_importance.csv", table)
    ctx.writer.write_csv("shap_values.csv", explanation_frame(batch))
    top = ranking[:20]
    ctx.writer.write_bar_chart(
        "shap_importance.svg",
        [item.feature for item in top],
        [item.mean_abs_phi for item in top],
        "Mean |SHAP| on the test split",
        "mean |SHAP value|",
    )

    race = [
        {"feature": name, "signed_mean_phi": signed_mean_shap(batch, name)}
        for name in batch.feature_names
        if name.startswith("Victim Race: ")
    ]
    race_table = pd.DataFrame(race, columns=["feature", "signed_mean_phi"])
    ctx.writer.write_csv("race_signed_shap.csv", race_table)

    top_k = ctx.option("top", 10)
    for position in parse_positions(ctx.option("local_rows")):
        if position >= len(test):
            raise ConfigError(f"--local-rows {position} is past the {len(test)} test rows")
        explanation = tree_shap(
            model,
            test.values[position],
            background,
            mode,
            row_id=test.row_ids[position],
            feature_names=test.schema.names,
        )
        ctx.writer.write_json(f"local_{position}.json", local_report(explanation, top_k))

    return ctx.finish(
        {
            "rows_explained": len(batch),
            "mode": mode,
            "base_value": batch.base_value,
            "top_feature": ranking[0].feature if ranking else None,
        }
    )
