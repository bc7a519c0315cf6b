"""Sliding training/labeling windows and five-category ordinal trend labels.

A window is ``training_years`` of data immediately followed by
``labeling_years``; the label measures how the target variable's mean in the
labeling period differs from its mean in the training period.  Category 1 is
the strongest rise, category 5 the strongest fall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cube import ClimateCube, GridCell, VariableId
from .errors import DomainError, MissingDataError, ValidationError

# Decadal-change thresholds, in the target variable's native units, listed
# high to low. Category k is the first threshold the delta reaches; deltas
# below all thresholds fall into category 5. Lower bounds are inclusive.
TMP_THRESHOLDS: tuple[float, ...] = (5.0, 2.5, 0.0, -2.5)
PRE_THRESHOLDS: tuple[float, ...] = (30.0, 10.0, -10.0, -30.0)


@dataclass(frozen=True)
class WindowSpec:
    """One training+labeling window, anchored at a whole-year month offset."""

    start_month: int
    training_years: int = 30
    labeling_years: int = 10

    def __post_init__(self) -> None:
        if self.start_month % 12 != 0:
            raise ValidationError(f"window start_month {self.start_month} is not a multiple of 12")
        if self.training_years < 1 or self.labeling_years < 1:
            raise ValidationError("training_years and labeling_years must be >= 1")

    @property
    def start_year(self) -> int:
        return self.start_month // 12

    @property
    def training_slice(self) -> slice:
        return slice(self.start_month, self.start_month + 12 * self.training_years)

    @property
    def labeling_slice(self) -> slice:
        begin = self.start_month + 12 * self.training_years
        return slice(begin, begin + 12 * self.labeling_years)

    @property
    def end_month(self) -> int:
        return self.start_month + 12 * (self.training_years + self.labeling_years)


@dataclass(frozen=True)
class LabelCategory:
    ordinal: int
    family: str  # "T" or "P"

    def __post_init__(self) -> None:
        if self.ordinal not in (1, 2, 3, 4, 5):
            raise ValidationError(f"ordinal {self.ordinal} outside 1..5")
        if self.family not in ("T", "P"):
            raise ValidationError(f"unknown label family {self.family!r}")

    @property
    def name(self) -> str:
        return f"{self.family}{self.ordinal}"


@dataclass(frozen=True)
class TrendDelta:
    """Window means of the target variable and their difference."""

    training_mean: float
    labeling_mean: float
    delta: float


def enumerate_windows(n_years: int, training_years: int = 30, labeling_years: int = 10) -> list[WindowSpec]:
    """All whole-year window positions that fit in an n_years series.

    Count is n_years - (training_years + labeling_years) + 1, start years
    0, 1, 2, ...
    """
    span = training_years + labeling_years
    if n_years < span:
        raise DomainError(f"series of {n_years} years cannot fit a {span}-year window")
    return [WindowSpec(12 * start, training_years, labeling_years)
            for start in range(n_years - span + 1)]


def trend_delta(cube: ClimateCube, cell: GridCell | int, target: VariableId | str, w: WindowSpec) -> TrendDelta:
    """Means of the target over the training and labeling periods of one window.

    Raises MissingDataError if either period touches a missing value; callers
    treat that as an exclusion, not a failure.
    """
    cell_id = cell.cell_id if isinstance(cell, GridCell) else int(cell)
    code = target.code if isinstance(target, VariableId) else target
    series = cube.series(code, cell_id)
    if w.end_month > len(series):
        raise DomainError(f"window ending at month {w.end_month} exceeds series length {len(series)}")
    train = series[w.training_slice]
    label = series[w.labeling_slice]
    if not np.all(np.isfinite(train)) or not np.all(np.isfinite(label)):
        raise MissingDataError(
            f"cell {cell_id}, {code}: missing values inside window starting year {w.start_year}")
    mu_train = float(np.mean(train, dtype=np.float64))
    mu_label = float(np.mean(label, dtype=np.float64))
    return TrendDelta(mu_train, mu_label, mu_label - mu_train)


def _ordinal_for(delta: float, thresholds: tuple[float, ...]) -> int:
    if not math.isfinite(delta):
        raise DomainError(f"label delta must be finite, got {delta}")
    for k, threshold in enumerate(thresholds):
        if delta >= threshold:
            return k + 1
    return len(thresholds) + 1


def label_tmp(delta: float, thresholds: tuple[float, ...] = TMP_THRESHOLDS) -> LabelCategory:
    """Temperature category for a labeling-minus-training mean difference in °C."""
    return LabelCategory(_ordinal_for(delta, thresholds), "T")


def label_pre(delta: float, thresholds: tuple[float, ...] = PRE_THRESHOLDS) -> LabelCategory:
    """Precipitation category for a mean difference in mm per month."""
    return LabelCategory(_ordinal_for(delta, thresholds), "P")


def label_for_target(target: str, delta: float) -> LabelCategory:
    """Dispatch to the right labeling family for a target name (TMP or PRE)."""
    if target == "TMP":
        return label_tmp(delta)
    if target == "PRE":
        return label_pre(delta)
    raise ValidationError(f"unknown target family {target!r}; expected 'TMP' or 'PRE'")
