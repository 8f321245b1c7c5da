"""Core domain types: variable metadata, datasets, windows, and reports.

All containers are immutable after construction and safe to share across
workers. Categorical variables live as integer codes inside the same float
array as continuous values; kind-aware encoding happens at the model boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np


class Role(str, Enum):
    PREDICTOR = "predictor"
    FORECAST = "forecast"


class Kind(str, Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


class Formulation(str, Enum):
    """The four training formulations the framework compares."""

    MMMF = "MMMF"  # masked multi-step multivariate forecasting
    SBF = "SBF"    # sample-based (per-step) forecasting
    RSF = "RSF"    # recursive single-step forecasting
    DMF = "DMF"    # direct multi-step forecasting


@dataclass(frozen=True)
class VariableSpec:
    """Metadata for one dataset column.

    ``cardinality`` is required for categorical variables; ``observed_range``
    is attached to continuous variables when a normalizer is fitted and is the
    pool masking draws substitution values from.
    """

    name: str
    role: Role
    kind: Kind
    cardinality: int | None = None
    observed_range: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.name:
            raise ValueError("variable name must be non-empty")
        if self.kind is Kind.CATEGORICAL:
            if self.cardinality is None or self.cardinality < 1:
                raise ValueError(
                    f"categorical variable {self.name!r} needs cardinality >= 1"
                )
            if self.observed_range is not None:
                raise ValueError(
                    f"categorical variable {self.name!r} cannot carry an observed_range"
                )
        else:
            if self.cardinality is not None:
                raise ValueError(
                    f"continuous variable {self.name!r} cannot carry a cardinality"
                )
            if self.observed_range is not None:
                lo, hi = self.observed_range
                object.__setattr__(self, "observed_range", (float(lo), float(hi)))
                if not (lo <= hi):
                    raise ValueError(
                        f"variable {self.name!r}: observed_range min must be <= max"
                    )

    def with_observed_range(self, lo: float, hi: float) -> "VariableSpec":
        return VariableSpec(self.name, self.role, self.kind, self.cardinality, (lo, hi))


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """Aligned multivariate series: one spec per column of ``values``.

    Timestamps are opaque ordered strings (ISO-8601 recommended); ordering is
    lexicographic, so ISO labels sort chronologically.
    """

    specs: tuple[VariableSpec, ...]
    values: np.ndarray  # (num_steps, num_variables) float64
    timestamps: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "timestamps", tuple(str(t) for t in self.timestamps))
        values = np.array(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def num_steps(self) -> int:
        return self.values.shape[0]

    @property
    def num_variables(self) -> int:
        return len(self.specs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    def index_of(self, name: str) -> int:
        for i, s in enumerate(self.specs):
            if s.name == name:
                return i
        raise KeyError(f"no variable named {name!r}")

    def spec(self, name: str) -> VariableSpec:
        return self.specs[self.index_of(name)]

    @property
    def forecast_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.specs) if s.role is Role.FORECAST)

    @property
    def predictor_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.specs) if s.role is Role.PREDICTOR)

    def slice_rows(self, start: int, stop: int) -> "TimeSeriesDataset":
        return TimeSeriesDataset(
            self.specs, self.values[start:stop], self.timestamps[start:stop]
        )

    def with_specs(self, specs: Sequence[VariableSpec]) -> "TimeSeriesDataset":
        if len(specs) != self.num_variables:
            raise ValueError("spec count must match column count")
        return TimeSeriesDataset(tuple(specs), self.values, self.timestamps)


def validate_dataset(dataset: TimeSeriesDataset) -> list[str]:
    """Return a list of invariant violations; empty iff the dataset is valid.

    Diagnostic only: never raises, and each violation names the variable or
    row involved.
    """
    violations: list[str] = []
    values = dataset.values

    if values.ndim != 2:
        violations.append(f"values must be 2-D, got {values.ndim}-D")
        return violations
    if values.shape[1] != dataset.num_variables:
        violations.append(
            f"values has {values.shape[1]} columns but {dataset.num_variables} specs"
        )
        return violations
    if values.shape[0] != len(dataset.timestamps):
        violations.append(
            f"values has {values.shape[0]} rows but {len(dataset.timestamps)} timestamps"
        )

    names = dataset.names
    for name in sorted(set(n for n in names if names.count(n) > 1)):
        violations.append(f"duplicate variable name {name!r}")

    if not dataset.forecast_indices:
        violations.append("dataset must declare at least one forecast variable")

    for prev in range(len(dataset.timestamps) - 1):
        if dataset.timestamps[prev] >= dataset.timestamps[prev + 1]:
            violations.append(
                f"timestamps not strictly increasing at row {prev + 1} "
                f"({dataset.timestamps[prev]!r} >= {dataset.timestamps[prev + 1]!r})"
            )

    for i, spec in enumerate(dataset.specs):
        col = values[:, i] if i < values.shape[1] else np.empty(0)
        bad = np.flatnonzero(~np.isfinite(col))
        if bad.size:
            violations.append(
                f"variable {spec.name!r} has a missing/non-finite value at row {bad[0]}"
            )
            continue
        if spec.kind is Kind.CATEGORICAL:
            if not np.all(col == np.floor(col)):
                row = int(np.flatnonzero(col != np.floor(col))[0])
                violations.append(
                    f"categorical variable {spec.name!r} has a non-integer code at row {row}"
                )
            out = np.flatnonzero((col < 0) | (col >= spec.cardinality))
            if out.size:
                violations.append(
                    f"categorical variable {spec.name!r} has code {col[out[0]]:g} outside "
                    f"[0, {spec.cardinality}) at row {int(out[0])}"
                )
        elif spec.role is Role.FORECAST and spec.kind is not Kind.CONTINUOUS:
            violations.append(f"forecast variable {spec.name!r} must be continuous")

    return violations


@dataclass(frozen=True, eq=False)
class Window:
    """One contiguous slice: ``history_length`` past rows plus a
    ``forecast_steps``-row forecast region."""

    data: np.ndarray  # (history_length + forecast_steps, num_variables)
    origin_index: int
    history_length: int
    forecast_steps: int

    def __post_init__(self) -> None:
        expected = self.history_length + self.forecast_steps
        if self.data.shape[0] != expected:
            raise ValueError(
                f"window data has {self.data.shape[0]} rows, expected {expected}"
            )

    @property
    def length(self) -> int:
        return self.history_length + self.forecast_steps

    @property
    def history(self) -> np.ndarray:
        return self.data[: self.history_length]

    @property
    def forecast_region(self) -> np.ndarray:
        return self.data[self.history_length :]


@dataclass(frozen=True, eq=False)
class MaskedBatch:
    """A batch of windows after mask substitution.

    ``inputs`` stays in variable space (one column per variable); embedding of
    categorical codes happens at the model boundary. ``targets`` holds the
    pre-mask ground truth for the whole forecast region and ``loss_mask``
    marks the rows the loss applies to.
    """

    inputs: np.ndarray     # (batch, history_length + forecast_steps, num_variables)
    targets: np.ndarray    # (batch, forecast_steps, num_forecast_vars)
    loss_mask: np.ndarray  # (batch, forecast_steps) bool
    mask_length: int

    def __post_init__(self) -> None:
        if self.loss_mask.shape != self.targets.shape[:2]:
            raise ValueError("loss_mask shape must match targets batch/steps")
        if not 1 <= self.mask_length <= self.targets.shape[1]:
            raise ValueError("mask_length must lie in [1, forecast_steps]")

    @property
    def batch_size(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class CellStat:
    """Mean and standard deviation of one report cell across runs."""

    mean: float
    std: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and math.isfinite(self.std)):
            raise ValueError("report cells must be finite")
        if self.mean < 0 or self.std < 0:
            raise ValueError("report cells must be non-negative")


@dataclass(frozen=True)
class EvalReport:
    """Per-horizon and per-variable error metrics aggregated over seeds."""

    method: Formulation
    base_model: str
    per_horizon_error: Mapping[int, Mapping[str, CellStat]]
    per_variable_error: Mapping[str, Mapping[str, CellStat]]
    overall_error: Mapping[str, CellStat]
    seeds: tuple[int, ...]
    inference_time_seconds: CellStat = field(default=CellStat(0.0, 0.0))

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Formulation(self.method))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @property
    def horizons(self) -> tuple[int, ...]:
        return tuple(sorted(self.per_horizon_error))

    @property
    def metrics(self) -> tuple[str, ...]:
        return tuple(sorted(self.overall_error))
