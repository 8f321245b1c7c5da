"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: config errors -> 1, data errors -> 2,
training divergence -> 3.
"""

from __future__ import annotations


class MaskcastError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MaskcastError, ValueError):
    """Invalid configuration value or combination."""


class ContractError(MaskcastError, ValueError):
    """An operation was called outside its contract (bad shapes, ranges, modes)."""


class DataError(MaskcastError, ValueError):
    """Malformed or inconsistent input data."""


class SchemaError(DataError):
    """Declared schema does not match the data on disk."""


class InsufficientDataError(DataError):
    """Not enough rows for the requested windows or split."""


class GapError(DataError):
    """A calendar date inside the covered span has no rows."""


class CoverageError(DataError):
    """A broadcast source does not cover every period in the dataset."""


class DegenerateScaleError(DataError):
    """A variable is constant over the fitting rows and cannot be scaled."""


class EncodingError(ContractError):
    """A categorical code fell outside its declared cardinality."""


class FormulationError(ContractError):
    """The requested training formulation does not apply to this dataset or model."""


class MetricError(ContractError):
    """A metric guard fired (e.g. near-zero denominator for percentage errors)."""


class TrainingDivergedError(MaskcastError, RuntimeError):
    """Loss or gradients became non-finite during training."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch
