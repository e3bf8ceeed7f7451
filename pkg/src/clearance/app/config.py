from __future__ import annotations

from functools import lru_cache
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="CLEARANCE_", extra="ignore")

    # Run defaults
    seed: int = 42
    train_fraction: float = 0.7
    folds: int = 5
    # None means os.cpu_count()
    threads: Optional[int] = None
    out_dir: str = "./out"

    # Ingestion
    min_year: int = 1976
    max_year: int = 2019
    # MAP's VicCount column counts additional victims; the record stores the total.
    victim_count_offset: int = 1

    # Age bins: [0, first_upper], then width-wide spans up to terminal, then everything above it
    age_first_upper: int = 5
    age_bin_width: int = 5
    age_terminal: int = 100

    # Learners
    boosted_max_depth: int = 6
    reg_lambda: float = 1.0
    positive_threshold: float = 0.5
    linear_tol: float = 1e-8
    linear_max_iter: int = 5000

    # Explanations
    exact_shapley_max_features: int = 20
    explain_max_rows: Optional[int] = None

    # Washington Post dispositions counted as solved
    wp_solved_dispositions: list[str] = ["Closed by arrest"]


@lru_cache
def get_settings() -> Settings:
    return Settings()
