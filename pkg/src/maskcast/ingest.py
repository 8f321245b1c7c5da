"""CSV ingestion, calendar features, resampling, normalization, splits.

Raw files come in as UTF-8 CSV with a header row, one timestamp column, and
numeric value columns. The pipeline produces normalized
:class:`~maskcast.data.TimeSeriesDataset` splits plus a sidecar metadata file
so that real and synthetic data flow through the same path.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import Kind, Role, TimeSeriesDataset, VariableSpec, validate_dataset
from .errors import (
    ConfigError,
    CoverageError,
    DataError,
    DegenerateScaleError,
    GapError,
    InsufficientDataError,
    SchemaError,
)

CALENDAR_VARIABLES = (
    ("month", 12),
    ("day_of_month", 31),
    ("day_of_week", 7),  # Monday = 0
)


@dataclass(frozen=True)
class DatasetSchema:
    """Declares the timestamp column and, per value column, its role/kind."""

    timestamp_column: str
    columns: tuple[VariableSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if self.timestamp_column in names:
            raise SchemaError(
                f"timestamp column {self.timestamp_column!r} also declared as a variable"
            )
        if len(set(names)) != len(names):
            raise SchemaError("schema declares duplicate column names")


def load_csv(path: str | Path, schema: DatasetSchema) -> TimeSeriesDataset:
    """Load a CSV against a schema, sort rows by timestamp, and validate."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]

        wanted = [schema.timestamp_column] + [c.name for c in schema.columns]
        missing = [name for name in wanted if name not in header]
        if missing:
            raise SchemaError(f"{path}: missing declared column(s) {missing}")
        positions = [header.index(name) for name in wanted]

        rows: list[tuple[str, list[float]]] = []
        for row_number, row in enumerate(reader, start=1):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            if len(row) < len(header):
                raise DataError(f"{path}: row {row_number} has too few cells")
            stamp = row[positions[0]].strip()
            parsed: list[float] = []
            for spec, pos in zip(schema.columns, positions[1:]):
                cell = row[pos].strip()
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {row_number}: cannot parse {cell!r} "
                        f"for column {spec.name!r}"
                    ) from None
            rows.append((stamp, parsed))

    if not rows:
        raise DataError(f"{path}: no data rows")
    stamps = [r[0] for r in rows]
    if len(set(stamps)) != len(stamps):
        dupe = next(s for s in stamps if stamps.count(s) > 1)
        raise DataError(f"{path}: duplicate timestamp {dupe!r}")

    rows.sort(key=lambda r: r[0])
    dataset = TimeSeriesDataset(
        specs=schema.columns,
        values=np.array([r[1] for r in rows], dtype=np.float64),
        timestamps=tuple(r[0] for r in rows),
    )
    violations = validate_dataset(dataset)
    if violations:
        raise DataError(f"{path}: invalid dataset: " + "; ".join(violations))
    return dataset


def _parse_stamp(stamp: str, row: int) -> datetime:
    try:
        return datetime.fromisoformat(stamp)
    except ValueError:
        raise DataError(f"row {row}: cannot parse timestamp {stamp!r}") from None


def downsample_daily_max(dataset: TimeSeriesDataset) -> TimeSeriesDataset:
    """Collapse sub-daily rows to one row per calendar date.

    Continuous variables take the maximum over the date's rows; categorical
    variables (constant within a day) take the date's first value.
    """
    days: dict[date, list[int]] = {}
    order: list[date] = []
    for row, stamp in enumerate(dataset.timestamps):
        d = _parse_stamp(stamp, row).date()
        if d not in days:
            days[d] = []
            order.append(d)
        days[d].append(row)

    order.sort()
    d = order[0]
    while d <= order[-1]:
        if d not in days:
            raise GapError(f"no rows for date {d.isoformat()} inside the covered span")
        d += timedelta(days=1)

    out = np.empty((len(order), dataset.num_variables), dtype=np.float64)
    for r, day in enumerate(order):
        rows = dataset.values[days[day]]
        for i, spec in enumerate(dataset.specs):
            out[r, i] = rows[:, i].max() if spec.kind is Kind.CONTINUOUS else rows[0, i]
    return TimeSeriesDataset(
        dataset.specs, out, tuple(day.isoformat() for day in order)
    )


def derive_calendar(dataset: TimeSeriesDataset) -> TimeSeriesDataset:
    """Append month / day-of-month / day-of-week categorical predictors.

    Codes start at 0 (January = 0, first of month = 0, Monday = 0).
    """
    taken = set(dataset.names)
    for name, _ in CALENDAR_VARIABLES:
        if name in taken:
            raise SchemaError(f"dataset already has a variable named {name!r}")

    codes = np.empty((dataset.num_steps, 3), dtype=np.float64)
    for row, stamp in enumerate(dataset.timestamps):
        d = _parse_stamp(stamp, row).date()
        codes[row] = (d.month - 1, d.day - 1, d.weekday())

    specs = dataset.specs + tuple(
        VariableSpec(name, Role.PREDICTOR, Kind.CATEGORICAL, cardinality=card)
        for name, card in CALENDAR_VARIABLES
    )
    values = np.concatenate([dataset.values, codes], axis=1)
    return TimeSeriesDataset(specs, values, dataset.timestamps)


def broadcast_monthly(
    dataset: TimeSeriesDataset,
    monthly_series: Mapping[str, float] | Sequence[tuple[str, float]],
    name: str,
) -> TimeSeriesDataset:
    """Attach a monthly-resolution series as a piecewise-constant daily predictor.

    ``monthly_series`` maps "YYYY-MM" labels to values; every month present in
    the dataset must be covered.
    """
    if name in dataset.names:
        raise SchemaError(f"dataset already has a variable named {name!r}")
    table = dict(monthly_series)

    column = np.empty((dataset.num_steps, 1), dtype=np.float64)
    for row, stamp in enumerate(dataset.timestamps):
        d = _parse_stamp(stamp, row).date()
        month = f"{d.year:04d}-{d.month:02d}"
        if month not in table:
            raise CoverageError(f"no monthly value for {month}")
        column[row, 0] = float(table[month])

    specs = dataset.specs + (VariableSpec(name, Role.PREDICTOR, Kind.CONTINUOUS),)
    values = np.concatenate([dataset.values, column], axis=1)
    return TimeSeriesDataset(specs, values, dataset.timestamps)


@dataclass(frozen=True)
class Normalizer:
    """Per-variable affine scaling fitted on training rows only.

    Continuous variables are mapped to ``(x - shift) / scale``; categorical
    codes pass through untouched. ``fitted_ranges`` records each continuous
    variable's normalized (min, max) over the fitting rows, which becomes the
    ``observed_range`` masking draws from.
    """

    method: str  # "zscore" | "minmax"
    shifts: Mapping[str, float]
    scales: Mapping[str, float]
    fitted_ranges: Mapping[str, tuple[float, float]]

    def __post_init__(self) -> None:
        if self.method not in ("zscore", "minmax"):
            raise ConfigError(f"unknown normalization method {self.method!r}")
        object.__setattr__(self, "shifts", dict(self.shifts))
        object.__setattr__(self, "scales", dict(self.scales))
        object.__setattr__(
            self,
            "fitted_ranges",
            {k: (float(lo), float(hi)) for k, (lo, hi) in dict(self.fitted_ranges).items()},
        )
        for name, scale in self.scales.items():
            if not (scale > 0):
                raise DegenerateScaleError(f"variable {name!r} has non-positive scale")

    def transform(self, dataset: TimeSeriesDataset) -> TimeSeriesDataset:
        values = dataset.values.copy()
        specs = list(dataset.specs)
        for i, spec in enumerate(dataset.specs):
            if spec.kind is not Kind.CONTINUOUS:
                continue
            if spec.name not in self.shifts:
                raise DataError(f"normalizer was not fitted for variable {spec.name!r}")
            values[:, i] = (values[:, i] - self.shifts[spec.name]) / self.scales[spec.name]
            lo, hi = self.fitted_ranges[spec.name]
            specs[i] = spec.with_observed_range(lo, hi)
        return TimeSeriesDataset(tuple(specs), values, dataset.timestamps)

    def inverse_transform(self, dataset: TimeSeriesDataset) -> TimeSeriesDataset:
        values = dataset.values.copy()
        specs = list(dataset.specs)
        for i, spec in enumerate(dataset.specs):
            if spec.kind is not Kind.CONTINUOUS:
                continue
            values[:, i] = values[:, i] * self.scales[spec.name] + self.shifts[spec.name]
            specs[i] = VariableSpec(spec.name, spec.role, spec.kind)
        return TimeSeriesDataset(tuple(specs), values, dataset.timestamps)

    def invert_columns(self, values: np.ndarray, names: Sequence[str]) -> np.ndarray:
        """Denormalize an array whose last axis holds the named variables."""
        if values.shape[-1] != len(names):
            raise ConfigError("last axis must match the number of variable names")
        out = np.array(values, dtype=np.float64)
        for j, name in enumerate(names):
            if name in self.shifts:
                out[..., j] = out[..., j] * self.scales[name] + self.shifts[name]
        return out


def _resolve_rows(rows: int | tuple[int, int], num_steps: int) -> tuple[int, int]:
    start, stop = (0, rows) if isinstance(rows, int) else rows
    if not (0 <= start < stop <= num_steps):
        raise ConfigError(f"row range [{start}, {stop}) invalid for {num_steps} rows")
    return start, stop


def fit_normalizer(
    dataset: TimeSeriesDataset,
    training_rows: int | tuple[int, int],
    method: str = "zscore",
) -> Normalizer:
    """Fit affine parameters per continuous variable on the given rows."""
    start, stop = _resolve_rows(training_rows, dataset.num_steps)
    shifts: dict[str, float] = {}
    scales: dict[str, float] = {}
    ranges: dict[str, tuple[float, float]] = {}
    for i, spec in enumerate(dataset.specs):
        if spec.kind is not Kind.CONTINUOUS:
            continue
        col = dataset.values[start:stop, i]
        lo, hi = float(col.min()), float(col.max())
        if method == "zscore":
            shift = float(col.mean())
            scale = float(col.std())
            if not (scale > 0):
                raise DegenerateScaleError(
                    f"variable {spec.name!r} is constant over the training rows"
                )
        elif method == "minmax":
            shift, scale = lo, hi - lo
            if not (scale > 0):
                raise DegenerateScaleError(
                    f"variable {spec.name!r} has zero range over the training rows"
                )
        else:
            raise ConfigError(f"unknown normalization method {method!r}")
        shifts[spec.name] = shift
        scales[spec.name] = scale
        ranges[spec.name] = ((lo - shift) / scale, (hi - shift) / scale)
    return Normalizer(method, shifts, scales, ranges)


def chrono_split(
    dataset: TimeSeriesDataset,
    train_fraction: float,
    min_train_rows: int | None = None,
) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    """Split chronologically: first floor(fraction * rows) rows train, rest validation."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    boundary = math.floor(train_fraction * dataset.num_steps)
    if min_train_rows is not None and boundary < min_train_rows:
        raise InsufficientDataError(
            f"split leaves {boundary} training rows, need at least {min_train_rows}"
        )
    return dataset.slice_rows(0, boundary), dataset.slice_rows(boundary, dataset.num_steps)


@dataclass(frozen=True)
class PreparedData:
    """Normalized dataset plus its chronological boundaries.

    ``full`` holds every row; ``train`` is rows [0, train_end), ``validation``
    rows [train_end, test_start); rows from ``test_start`` on are the held-out
    evaluation period.
    """

    full: TimeSeriesDataset
    normalizer: Normalizer
    train_end: int
    test_start: int

    @property
    def train(self) -> TimeSeriesDataset:
        return self.full.slice_rows(0, self.train_end)

    @property
    def validation(self) -> TimeSeriesDataset:
        return self.full.slice_rows(self.train_end, self.test_start)

    @property
    def test(self) -> TimeSeriesDataset:
        return self.full.slice_rows(self.test_start, self.full.num_steps)


def prepare(
    raw: TimeSeriesDataset,
    val_fraction: float = 0.2,
    test_fraction: float = 0.2,
    method: str = "zscore",
    min_train_rows: int | None = None,
) -> PreparedData:
    """Split chronologically, fit the normalizer on training rows, normalize."""
    violations = validate_dataset(raw)
    if violations:
        raise DataError("invalid dataset: " + "; ".join(violations))
    if not 0.0 <= test_fraction < 1.0:
        raise ConfigError(f"test_fraction must lie in [0, 1), got {test_fraction}")

    n = raw.num_steps
    test_start = n - math.floor(test_fraction * n) if test_fraction > 0 else n
    pool = raw.slice_rows(0, test_start)
    train, _ = chrono_split(pool, 1.0 - val_fraction, min_train_rows=min_train_rows)
    normalizer = fit_normalizer(raw, (0, train.num_steps), method=method)
    return PreparedData(
        full=normalizer.transform(raw),
        normalizer=normalizer,
        train_end=train.num_steps,
        test_start=test_start,
    )


# ---------------------------------------------------------------------------
# On-disk format: <dir>/data.csv plus <dir>/metadata.json
# ---------------------------------------------------------------------------

_FORMAT_TAG = "maskcast-dataset-v1"


def _spec_to_dict(spec: VariableSpec) -> dict:
    return {
        "name": spec.name,
        "role": spec.role.value,
        "kind": spec.kind.value,
        "cardinality": spec.cardinality,
        "observed_range": list(spec.observed_range) if spec.observed_range else None,
    }


def _spec_from_dict(d: Mapping) -> VariableSpec:
    rng = d.get("observed_range")
    return VariableSpec(
        name=d["name"],
        role=Role(d["role"]),
        kind=Kind(d["kind"]),
        cardinality=d.get("cardinality"),
        observed_range=tuple(rng) if rng else None,
    )


def save_dataset(
    directory: str | Path,
    dataset: TimeSeriesDataset,
    normalizer: Normalizer | None = None,
    train_end: int | None = None,
    test_start: int | None = None,
) -> Path:
    """Persist a dataset as CSV plus a JSON metadata sidecar; returns the dir."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    with (directory / "data.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("timestamp",) + dataset.names)
        categorical = [s.kind is Kind.CATEGORICAL for s in dataset.specs]
        for stamp, row in zip(dataset.timestamps, dataset.values):
            cells = [
                str(int(v)) if cat else repr(float(v))
                for v, cat in zip(row, categorical)
            ]
            writer.writerow([stamp] + cells)

    meta = {
        "format": _FORMAT_TAG,
        "specs": [_spec_to_dict(s) for s in dataset.specs],
        "normalizer": None
        if normalizer is None
        else {
            "method": normalizer.method,
            "shifts": dict(normalizer.shifts),
            "scales": dict(normalizer.scales),
            "fitted_ranges": {k: list(v) for k, v in normalizer.fitted_ranges.items()},
        },
        "train_end": train_end,
        "test_start": test_start,
    }
    (directory / "metadata.json").write_text(json.dumps(meta, indent=2))
    return directory


def load_dataset(
    directory: str | Path,
) -> tuple[TimeSeriesDataset, Normalizer | None, int | None, int | None]:
    """Load a dataset dir written by :func:`save_dataset`."""
    directory = Path(directory)
    meta_path = directory / "metadata.json"
    if not meta_path.exists():
        raise DataError(f"no metadata sidecar in {directory}")
    meta = json.loads(meta_path.read_text())
    if meta.get("format") != _FORMAT_TAG:
        raise DataError(f"unrecognized dataset format tag {meta.get('format')!r}")

    specs = tuple(_spec_from_dict(d) for d in meta["specs"])
    schema = DatasetSchema("timestamp", tuple(
        VariableSpec(s.name, s.role, s.kind, s.cardinality) for s in specs
    ))
    dataset = load_csv(directory / "data.csv", schema).with_specs(specs)

    normalizer = None
    if meta.get("normalizer"):
        nd = meta["normalizer"]
        normalizer = Normalizer(
            method=nd["method"],
            shifts=nd["shifts"],
            scales=nd["scales"],
            fitted_ranges={k: tuple(v) for k, v in nd["fitted_ranges"].items()},
        )
    return dataset, normalizer, meta.get("train_end"), meta.get("test_start")


def save_prepared(directory: str | Path, prepared: PreparedData) -> Path:
    return save_dataset(
        directory,
        prepared.full,
        normalizer=prepared.normalizer,
        train_end=prepared.train_end,
        test_start=prepared.test_start,
    )


def load_prepared(directory: str | Path) -> PreparedData:
    dataset, normalizer, train_end, test_start = load_dataset(directory)
    if normalizer is None or train_end is None or test_start is None:
        raise DataError(f"{directory} does not hold a prepared (normalized) dataset")
    return PreparedData(dataset, normalizer, train_end, test_start)
