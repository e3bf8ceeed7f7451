from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

UNKNOWN = "Unknown"

MONTHS: tuple[str, ...] = (
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
)

_MONTH_LOOKUP = {name.casefold(): name for name in MONTHS}
_MONTH_LOOKUP.update({name[:3].casefold(): name for name in MONTHS})

_AGE_UNKNOWN_TOKENS = {"", "unknown", "999", "nan", "none"}


def canonical_month(value: Any) -> str:
    """Accept a month name, a three-letter abbreviation or a number 1-12."""
    if value is None:
        raise ValueError("month is required")
    text = str(value).strip()
    if text.isdigit():
        number = int(text)
        if 1 <= number <= 12:
            return MONTHS[number - 1]
        raise ValueError(f"month number out of range: {text}")
    name = _MONTH_LOOKUP.get(text.casefold())
    if name is None:
        raise ValueError(f"unrecognised month: {text!r}")
    return name


def canonical_sex(value: Any) -> str:
    text = str(value or "").strip().casefold()
    if text in {"f", "female"}:
        return "Female"
    if text in {"m", "male"}:
        return "Male"
    return UNKNOWN


def normalize_state(value: Any) -> str:
    text = str(value or "").strip().upper()
    if not text:
        raise ValueError("state is required")
    return text


def parse_age(value: Any) -> Optional[int]:
    """Victim age in whole years; the MAP unknown sentinels map to None."""
    if value is None:
        return None
    if isinstance(value, int):
        number = value
    else:
        text = str(value).strip()
        if text.casefold() in _AGE_UNKNOWN_TOKENS:
            return None
        try:
            number = int(float(text))
        except (ValueError, OverflowError) as exc:
            raise ValueError(f"unparseable victim age: {text!r}") from exc
    if number == 999:
        return None
    if not 0 <= number <= 120:
        raise ValueError(f"victim age out of range: {number}")
    return number


class Record(BaseModel):
    """One homicide victim in the MAP schema."""

    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1)
    year: int
    month: str
    state: str
    agency_name: str = UNKNOWN
    agency_type: str = UNKNOWN
    homicide_type: str = UNKNOWN
    victim_age: Optional[int] = None
    victim_sex: str = UNKNOWN
    victim_race: str = UNKNOWN
    victim_count: int = Field(default=1, ge=1)
    offender_count: int = Field(default=0, ge=0)
    offender_sex: str = UNKNOWN
    circumstance: str = UNKNOWN
    weapon: str = UNKNOWN
    solved: bool
    # Optional MAP columns
    ori: Optional[str] = None
    source: Optional[str] = None

    @field_validator("id", mode="before")
    @classmethod
    def strip_id(cls, value: Any) -> str:
        return str(value or "").strip()

    @field_validator("month", mode="before")
    @classmethod
    def month_name(cls, value: Any) -> str:
        return canonical_month(value)

    @field_validator("state", mode="before")
    @classmethod
    def state_key(cls, value: Any) -> str:
        return normalize_state(value)

    @field_validator(
        "agency_name",
        "agency_type",
        "homicide_type",
        "victim_race",
        "circumstance",
        "weapon",
        mode="before",
    )
    @classmethod
    def unknown_level(cls, value: Any) -> str:
        text = str(value if value is not None else "").strip()
        return text or UNKNOWN

    @field_validator("victim_sex", "offender_sex", mode="before")
    @classmethod
    def sex_level(cls, value: Any) -> str:
        return canonical_sex(value)

    @field_validator("victim_age", mode="before")
    @classmethod
    def age_years(cls, value: Any) -> Optional[int]:
        return parse_age(value)

    @field_validator("ori", "source", mode="before")
    @classmethod
    def optional_text(cls, value: Any) -> Optional[str]:
        text = str(value).strip() if value is not None else ""
        return text or None


class RowIssue(BaseModel):
    line: int
    message: str


class Provenance(BaseModel):
    source: str
    rows_read: int = 0
    rows_kept: int = 0
    rows_dropped: int = 0
    row_errors: List[RowIssue] = Field(default_factory=list)

    @model_validator(mode="after")
    def lossless(self) -> "Provenance":
        if self.rows_read != self.rows_kept + self.rows_dropped:
            raise ValueError("rows_read must equal rows_kept + rows_dropped")
        return self


Algorithm = Literal[
    "decision_tree",
    "random_forest",
    "gbm",
    "xgboost",
    "ridge",
    "lasso",
    "elastic_net",
]

TREE_ALGORITHMS: tuple[str, ...] = ("decision_tree", "random_forest", "gbm", "xgboost")
LINEAR_ALGORITHMS: tuple[str, ...] = ("ridge", "lasso", "elastic_net")


class Hyperparameters(BaseModel):
    model_config = ConfigDict(frozen=True)

    algorithm: Algorithm
    n_estimators: int = 100
    learning_rate: float = 0.1
    # None: unlimited for decision_tree/random_forest, Settings.boosted_max_depth for boosting
    max_depth: Optional[int] = None
    criterion: Literal["gini", "entropy"] = "gini"
    gamma: float = Field(default=0.0, ge=0.0)
    C: float = 1.0
    l1_ratio: float = Field(default=0.5, ge=0.0, le=1.0)
    # None: sqrt for random_forest, all features otherwise
    max_features: Optional[Literal["sqrt", "all"]] = None
    bootstrap: bool = True
    # None: Settings.reg_lambda
    reg_lambda: Optional[float] = None
    seed: int = 0

    @property
    def penalty(self) -> Optional[str]:
        return {"ridge": "l2", "lasso": "l1", "elastic_net": "elasticnet"}.get(self.algorithm)

    def tuned(self) -> Dict[str, Any]:
        """The grid-relevant parameters for this algorithm, in display order."""
        if self.algorithm == "xgboost":
            keys = ("n_estimators", "learning_rate", "gamma")
        elif self.algorithm == "gbm":
            keys = ("n_estimators", "learning_rate")
        elif self.algorithm == "random_forest":
            keys = ("criterion", "max_depth", "n_estimators")
        elif self.algorithm == "decision_tree":
            keys = ("criterion", "max_depth")
        elif self.algorithm == "elastic_net":
            keys = ("C", "l1_ratio")
        else:
            keys = ("C",)
        return {key: getattr(self, key) for key in keys}

    def label(self) -> str:
        parts = [f"{key}={value}" for key, value in self.tuned().items()]
        return f"{self.algorithm}(" + ", ".join(parts) + ")"


class FoldScore(BaseModel):
    fold: int
    n_train: int
    n_test: int
    balanced_accuracy: float
    # None when no test row was predicted positive
    precision: Optional[float] = None
    note: Optional[str] = None


class ConfigResult(BaseModel):
    index: int
    hyperparameters: Hyperparameters
    folds: List[FoldScore]
    mean_balanced_accuracy: float
    sd_balanced_accuracy: float
    mean_precision: Optional[float] = None
    sd_precision: Optional[float] = None
    # Mean of the two metric means; None when precision is undefined on any fold
    combined: Optional[float] = None


class GridResult(BaseModel):
    k: int
    seed: int
    configs: List[ConfigResult]
    winner_index: int

    @property
    def winner(self) -> ConfigResult:
        return self.configs[self.winner_index]


class StateResult(BaseModel):
    state: str
    n_train: int = 0
    n_test: int = 0
    best: Optional[Hyperparameters] = None
    cv_balanced_accuracy: Optional[float] = None
    cv_precision: Optional[float] = None
    test_balanced_accuracy: Optional[float] = None
    test_precision: Optional[float] = None
    configs_evaluated: int = 0
    skipped_reason: Optional[str] = None
    note: Optional[str] = None


class SweepResult(BaseModel):
    states: List[StateResult]
    models_fitted: int
    metric_correlation: Optional[float] = None


class AlgorithmSummary(BaseModel):
    """One row of the best-configuration comparison table."""

    algorithm: str
    configs_tested: int
    best: Hyperparameters
    cv_balanced_accuracy: float
    cv_balanced_accuracy_sd: float
    cv_precision: Optional[float] = None
    cv_precision_sd: Optional[float] = None
    test_balanced_accuracy: Optional[float] = None
    test_precision: Optional[float] = None


class FeatureImportance(BaseModel):
    feature: str
    mean_abs_phi: float
    rank: int


class Contribution(BaseModel):
    feature: str
    phi: float


class LocalReport(BaseModel):
    row_id: str
    base_value: float
    contributions: List[Contribution]
    # Summed attribution of the features not listed
    remainder: float
    margin: float
    probability: float


class LinkCounts(BaseModel):
    map_rows: int
    wp_rows: int
    matched: int
    agree: int
    wp_solved_map_unsolved: int
    map_solved_wp_unsolved: int
    unmatched_map: int
    unmatched_wp: int
    # Rows lacking a key field (e.g. unknown age); always unmatched
    unkeyed_map: int = 0
    unkeyed_wp: int = 0
    ambiguous_keys: int = 0
    ambiguous_pairs: int = 0

    @model_validator(mode="after")
    def conserved(self) -> "LinkCounts":
        if self.agree + self.wp_solved_map_unsolved + self.map_solved_wp_unsolved != self.matched:
            raise ValueError("agree + disagreements must equal matched")
        if self.matched + self.unmatched_map != self.map_rows:
            raise ValueError("every MAP row must be matched or unmatched")
        if self.matched + self.unmatched_wp != self.wp_rows:
            raise ValueError("every WP row must be matched or unmatched")
        return self


class RunConfig(BaseModel):
    """Resolved parameters of one CLI run; stored in the run manifest."""

    command: str = ""
    input: Optional[str] = None
    wp_input: Optional[str] = None
    model_path: Optional[str] = None
    schema_path: Optional[str] = None
    algorithm: str = "xgboost"
    grid_overrides: Dict[str, List[Any]] = Field(default_factory=dict)
    k: int = 5
    seed: int = 42
    train_fraction: float = 0.7
    out_dir: str = "./out"
    threads: Optional[int] = None
    age_first_upper: int = 5
    age_bin_width: int = 5
    age_terminal: int = 100
    extra: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("train_fraction")
    @classmethod
    def open_unit_interval(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        return value

    @field_validator("k")
    @classmethod
    def at_least_two_folds(cls, value: int) -> int:
        if value < 2:
            raise ValueError("k must be at least 2")
        return value
