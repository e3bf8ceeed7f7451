"""Synthetic homicide files in the MAP and Washington Post schemas.

The MAP generator draws each column independently and sets Solved from a logistic
signal over a handful of columns, so learners have something to find. Unsolved
cases get an unknown offender sex, apart from a small anomaly rate.
"""

from __future__ import annotations

import logging
from typing import Dict, Sequence

import numpy as np
import pandas as pd
from scipy.special import expit

from .errors import ConfigError
from .models import MONTHS

logger = logging.getLogger(__name__)

DEFAULT_STATES: tuple[str, ...] = ("Alabama", "California", "Illinois", "Nebraska", "Texas")

CITIES: Dict[str, tuple[str, ...]] = {
    "Alabama": ("Birmingham", "Mobile", "Montgomery"),
    "California": ("Los Angeles", "Oakland", "Fresno", "San Diego"),
    "Illinois": ("Chicago", "Peoria", "Rockford"),
    "Nebraska": ("Omaha", "Lincoln"),
    "Texas": ("Houston", "Dallas", "San Antonio", "El Paso"),
}

AGENCY_TYPES = ("Municipal police", "Sheriff", "County police", "State police")
HOMICIDE_TYPES = ("Murder and non-negligent manslaughter", "Manslaughter by negligence")
SEXES = ("Male", "Female", "Unknown")
RACES = ("White", "Black", "Asian", "American Indian or Alaskan Native", "Unknown")
CIRCUMSTANCES = (
    "Other arguments",
    "Circumstances undetermined",
    "Felony type",
    "Lovers triangle",
    "Juvenile gang killings",
)
WEAPONS = (
    "Handgun - pistol, revolver, etc",
    "Knife or cutting instrument",
    "Shotgun",
    "Personal weapons, includes beating",
    "Firearm, type not stated",
)

# Log-odds shifts of Solved per level
SIGNAL: Dict[str, Dict[str, float]] = {
    "Circumstance": {
        "Circumstances undetermined": -1.8,
        "Felony type": -0.6,
        "Juvenile gang killings": -0.9,
    },
    "Weapon": {"Handgun - pistol, revolver, etc": -0.5, "Firearm, type not stated": -0.4},
    "VicRace": {"Black": -0.4},
    "VicSex": {"Female": 0.6},
    "Agentype": {"Municipal police": -0.3},
}
BASE_LOG_ODDS = 1.6
WP_SOLVED = "Closed by arrest"
WP_UNSOLVED = ("Open/No arrest", "Closed without arrest")


def _rng(seed: int) -> np.random.Generator:
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(seed))


def _choice(
    rng: np.random.Generator, levels: Sequence[str], size: int, p: Sequence[float] | None = None
) -> np.ndarray:
    return rng.choice(np.asarray(levels, dtype=object), size=size, p=p)


def _pick_city(rng: np.random.Generator, state: str) -> str:
    cities = CITIES.get(state, (f"{state} City",))
    return cities[int(rng.integers(len(cities)))]


def generate_map_frame(
    rows: int,
    seed: int = 0,
    states: Sequence[str] = DEFAULT_STATES,
    min_year: int = 1976,
    max_year: int = 2019,
    anomaly_rate: float = 0.005,
    unknown_age_rate: float = 0.02,
) -> pd.DataFrame:
    if rows <= 0:
        raise ConfigError(f"rows must be positive, got {rows}")
    if not states:
        raise ConfigError("at least one state is required")
    rng = _rng(seed)

    state = rng.choice(np.asarray(states, dtype=object), size=rows)
    city = np.array([_pick_city(rng, s) for s in state], dtype=object)
    year = rng.integers(min_year, max_year + 1, size=rows)
    age = rng.integers(0, 100, size=rows).astype(object)
    age[rng.random(rows) < unknown_age_rate] = 999

    frame = pd.DataFrame(
        {
            "ID": [f"{y}{i:07d}" for i, y in enumerate(year)],
            "Year": year,
            "Month": _choice(rng, MONTHS, rows),
            "State": state,
            "Agency": city,
            "Agentype": _choice(rng, AGENCY_TYPES, rows, [0.6, 0.25, 0.1, 0.05]),
            "Homicide": _choice(rng, HOMICIDE_TYPES, rows, [0.97, 0.03]),
            "VicAge": age,
            "VicSex": _choice(rng, SEXES, rows, [0.77, 0.22, 0.01]),
            "VicRace": _choice(rng, RACES, rows, [0.45, 0.47, 0.03, 0.02, 0.03]),
            "VicCount": rng.choice(4, size=rows, p=[0.9, 0.07, 0.02, 0.01]),
            "OffCount": rng.choice(4, size=rows, p=[0.8, 0.12, 0.05, 0.03]),
            "Circumstance": _choice(rng, CIRCUMSTANCES, rows),
            "Weapon": _choice(rng, WEAPONS, rows),
        }
    )
    ori_of = {key: i for i, key in enumerate(sorted(set(zip(state, city))))}
    frame["Ori"] = [f"{s[:2].upper()}{ori_of[(s, c)]:05d}" for s, c in zip(state, city)]

    margin = np.full(rows, BASE_LOG_ODDS)
    for column, shifts in SIGNAL.items():
        for level, shift in shifts.items():
            margin += np.where(frame[column].to_numpy() == level, shift, 0.0)
    margin += np.where(year >= 2000, -0.3, 0.0)
    solved = rng.random(rows) < expit(margin)

    offender_known = solved.copy()
    flip = rng.random(rows) < anomaly_rate
    offender_known[flip] = ~offender_known[flip]
    offender_sex = _choice(rng, ("Male", "Female"), rows, [0.9, 0.1])
    frame.insert(11, "OffSex", np.where(offender_known, offender_sex, "Unknown"))
    frame["Solved"] = np.where(solved, "Yes", "No")
    frame["Source"] = np.where(rng.random(rows) < 0.1, "FOIA", "FBI")
    logger.info("generated %d synthetic MAP rows (%.1f%% solved)", rows, 100.0 * solved.mean())
    return frame


def generate_wp_frame(
    map_frame: pd.DataFrame,
    seed: int = 0,
    match_rate: float = 0.6,
    disagreement_rate: float = 0.1,
    extra_rows: int = 0,
) -> pd.DataFrame:
    """WP rows mirroring a share of ``map_frame``, with some outcomes flipped."""
    if not 0.0 <= match_rate <= 1.0 or not 0.0 <= disagreement_rate <= 1.0:
        raise ConfigError("match_rate and disagreement_rate must lie in [0, 1]")
    rng = _rng(seed)
    chosen = map_frame[rng.random(len(map_frame)) < match_rate]
    solved = chosen["Solved"].to_numpy() == "Yes"
    flip = rng.random(len(chosen)) < disagreement_rate
    wp_solved = np.where(flip, ~solved, solved)
    unsolved = _choice(rng, WP_UNSOLVED, len(chosen))
    month_number = chosen["Month"].map({m: i + 1 for i, m in enumerate(MONTHS)}).to_numpy()
    day = rng.integers(1, 29, size=len(chosen))
    wp = pd.DataFrame(
        {
            "uid": [f"WP-{i:06d}" for i in range(len(chosen))],
            "reported_date": [
                f"{y:04d}{m:02d}{d:02d}" for y, m, d in zip(chosen["Year"], month_number, day)
            ],
            "victim_age": ["Unknown" if a == 999 else a for a in chosen["VicAge"]],
            "victim_sex": chosen["VicSex"].to_numpy(),
            "city": chosen["Agency"].to_numpy(),
            "state": chosen["State"].to_numpy(),
            "disposition": np.where(wp_solved, WP_SOLVED, unsolved),
        }
    )
    if extra_rows > 0:
        extra = pd.DataFrame(
            {
                "uid": [f"WP-X{i:05d}" for i in range(extra_rows)],
                "reported_date": [f"{2019:04d}{(i % 12) + 1:02d}15" for i in range(extra_rows)],
                "victim_age": rng.integers(0, 100, size=extra_rows),
                "victim_sex": _choice(rng, ("Male", "Female"), extra_rows),
                "city": "Nowhere",
                "state": "Nowhere",
                "disposition": _choice(rng, (WP_SOLVED,) + WP_UNSOLVED, extra_rows),
            }
        )
        wp = pd.concat([wp, extra], ignore_index=True)
    return wp


__all__ = ["DEFAULT_STATES", "generate_map_frame", "generate_wp_frame"]
