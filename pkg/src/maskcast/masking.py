"""Sliding windows, random mask-length sampling, and masked-only loss.

Masking replaces the trailing forecast-variable cells of a window with fresh
uniform draws from each variable's observed range; predictor cells are never
touched, and the loss is computed only where the mask applied.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import torch

from .data import Kind, MaskedBatch, Role, TimeSeriesDataset, VariableSpec, Window
from .errors import ContractError, InsufficientDataError


class MaskSampler:
    """Seeded source of mask lengths and in-range substitution values.

    One sampler per worker; the same seed reproduces the same draw sequence.
    Substitution ranges come from the forecast variables' ``observed_range``.
    """

    def __init__(self, specs: Sequence[VariableSpec], seed: int | np.random.SeedSequence):
        self._rng = np.random.default_rng(seed)
        indices: list[int] = []
        lows: list[float] = []
        highs: list[float] = []
        for i, spec in enumerate(specs):
            if spec.role is not Role.FORECAST:
                continue
            if spec.kind is not Kind.CONTINUOUS:
                raise ContractError(
                    f"forecast variable {spec.name!r} must be continuous to be maskable"
                )
            if spec.observed_range is None:
                raise ContractError(
                    f"forecast variable {spec.name!r} has no observed_range; "
                    "fit a normalizer before masking"
                )
            indices.append(i)
            lows.append(spec.observed_range[0])
            highs.append(spec.observed_range[1])
        if not indices:
            raise ContractError("specs declare no forecast variables")
        self.forecast_indices = tuple(indices)
        self._lows = np.array(lows)
        self._highs = np.array(highs)

    def draw_length(self, max_length: int) -> int:
        if max_length < 1:
            raise ContractError(f"max_length must be >= 1, got {max_length}")
        return int(self._rng.integers(1, max_length + 1))

    def draw_values(self, batch: int, steps: int) -> np.ndarray:
        """Fresh independent uniform draw per masked cell, shape (batch, steps, m)."""
        return self._rng.uniform(
            self._lows, self._highs, size=(batch, steps, len(self.forecast_indices))
        )


def slide_windows(
    dataset: TimeSeriesDataset,
    history_length: int,
    forecast_steps: int,
    stride: int = 1,
) -> list[Window]:
    """Extract windows of ``history_length + forecast_steps`` rows at fixed stride."""
    if history_length < 1 or forecast_steps < 1 or stride < 1:
        raise ContractError("history_length, forecast_steps, and stride must be >= 1")
    length = history_length + forecast_steps
    if dataset.num_steps < length:
        raise InsufficientDataError(
            f"need at least {length} rows for one window, have {dataset.num_steps}"
        )
    return [
        Window(dataset.values[o : o + length], o, history_length, forecast_steps)
        for o in range(0, dataset.num_steps - length + 1, stride)
    ]


def sample_mask_length(sampler: MaskSampler, max_length: int) -> int:
    """One uniform draw from {1, ..., max_length}; shared by a whole mini-batch."""
    return sampler.draw_length(max_length)


def apply_mask(
    windows: Sequence[Window], mask_length: int, sampler: MaskSampler
) -> MaskedBatch:
    """Mask the last ``mask_length`` forecast-region steps of every window.

    Forecast-variable cells in those rows are replaced with fresh uniform
    draws from each variable's observed range; everything else is bit-identical
    to the source windows. Targets keep the pre-mask ground truth.
    """
    if not windows:
        raise ContractError("apply_mask needs at least one window")
    first = windows[0]
    if any(
        w.history_length != first.history_length or w.forecast_steps != first.forecast_steps
        for w in windows
    ):
        raise ContractError("all windows in a batch must share the same partition")
    steps = first.forecast_steps
    if not 1 <= mask_length <= steps:
        raise ContractError(
            f"mask_length must lie in [1, {steps}], got {mask_length}"
        )

    cols = list(sampler.forecast_indices)
    inputs = np.stack([w.data for w in windows]).astype(np.float64)
    targets = inputs[:, first.history_length :, :][:, :, cols].copy()

    masked_rows = slice(inputs.shape[1] - mask_length, inputs.shape[1])
    inputs[:, masked_rows, cols] = sampler.draw_values(len(windows), mask_length)

    loss_mask = np.zeros((len(windows), steps), dtype=bool)
    loss_mask[:, steps - mask_length :] = True
    return MaskedBatch(inputs=inputs, targets=targets, loss_mask=loss_mask, mask_length=mask_length)


def masked_loss(
    predictions: torch.Tensor, batch: MaskedBatch, base_metric: str = "mse"
) -> torch.Tensor:
    """Mean squared error over masked cells only.

    ``predictions`` covers the whole forecast region, shape
    (batch, forecast_steps, num_forecast_vars); cells outside the mask
    contribute exactly zero (they never enter the reduction).
    """
    if base_metric.lower() != "mse":
        raise ContractError(f"unsupported base metric {base_metric!r}")
    if tuple(predictions.shape) != batch.targets.shape:
        raise ContractError(
            f"predictions shape {tuple(predictions.shape)} does not match "
            f"targets shape {batch.targets.shape}"
        )
    targets = torch.as_tensor(batch.targets, dtype=predictions.dtype, device=predictions.device)
    mask = torch.as_tensor(batch.loss_mask, device=predictions.device)
    diff = predictions[mask] - targets[mask]
    return (diff * diff).mean()
