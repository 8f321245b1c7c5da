"""Sequence-model contract and the four base architectures.

Every model maps a variable-space input sequence (batch, steps, num_inputs)
to an equal-length output sequence (batch, steps, num_forecast_vars).
Categorical codes are replaced by learned 5-wide embeddings at the input
boundary; continuous values pass straight through.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import Kind, Role, VariableSpec
from .errors import ConfigError, EncodingError

EMBEDDING_DIM = 5


class Architecture(str, Enum):
    RECURRENT = "recurrent"
    TEMPORAL_CONV = "temporal-conv"
    ATTENTION_ENCODER = "attention-encoder"
    FEED_FORWARD = "feed-forward"


@dataclass(frozen=True)
class RecurrentConfig:
    hidden_size: int = 50
    num_layers: int = 2

    def __post_init__(self) -> None:
        if self.hidden_size < 1 or self.num_layers < 1:
            raise ConfigError("recurrent hidden_size and num_layers must be positive")


@dataclass(frozen=True)
class TemporalConvConfig:
    channels: int = 50
    num_layers: int = 2
    kernel_size: int = 3
    dropout: float = 0.2

    def __post_init__(self) -> None:
        if self.channels < 1 or self.num_layers < 1 or self.kernel_size < 1:
            raise ConfigError("temporal-conv sizes must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")

    @property
    def receptive_field(self) -> int:
        # one causal conv per layer, dilation 2**i
        return 1 + (self.kernel_size - 1) * sum(2**i for i in range(self.num_layers))


@dataclass(frozen=True)
class AttentionConfig:
    model_dim: int = 128
    feedforward_dim: int = 512
    num_heads: int = 8
    num_layers: int = 2
    dropout: float = 0.1

    def __post_init__(self) -> None:
        if min(self.model_dim, self.feedforward_dim, self.num_heads, self.num_layers) < 1:
            raise ConfigError("attention-encoder sizes must be positive")
        if self.model_dim % self.num_heads != 0:
            raise ConfigError(
                f"model_dim {self.model_dim} must be divisible by num_heads {self.num_heads}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")


@dataclass(frozen=True)
class FeedForwardConfig:
    # hidden width is a project default, not a published value
    hidden_size: int = 50

    def __post_init__(self) -> None:
        if self.hidden_size < 1:
            raise ConfigError("feed-forward hidden_size must be positive")


ArchitectureConfig = RecurrentConfig | TemporalConvConfig | AttentionConfig | FeedForwardConfig

_DEFAULT_CONFIGS = {
    Architecture.RECURRENT: RecurrentConfig,
    Architecture.TEMPORAL_CONV: TemporalConvConfig,
    Architecture.ATTENTION_ENCODER: AttentionConfig,
    Architecture.FEED_FORWARD: FeedForwardConfig,
}


@dataclass(frozen=True)
class HyperParams:
    """Architecture choice plus the shared optimizer configuration."""

    architecture: Architecture
    model: ArchitectureConfig | None = None
    learning_rate: float = 0.001
    batch_size: int = 1000
    epochs: int = 1000
    betas: tuple[float, float] = (0.9, 0.999)
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        arch = Architecture(self.architecture)
        object.__setattr__(self, "architecture", arch)
        model = self.model if self.model is not None else _DEFAULT_CONFIGS[arch]()
        if not isinstance(model, _DEFAULT_CONFIGS[arch]):
            raise ConfigError(
                f"model config {type(model).__name__} does not match architecture {arch.value}"
            )
        object.__setattr__(self, "model", model)
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("learning_rate, batch_size, and epochs must be positive")

    @classmethod
    def defaults(cls, architecture: Architecture | str) -> "HyperParams":
        return cls(architecture=Architecture(architecture))


class EmbeddingTable(nn.Module):
    """One (cardinality x 5) learned embedding per categorical variable."""

    def __init__(self, specs: Sequence[VariableSpec]):
        super().__init__()
        self.tables = nn.ModuleDict(
            {
                spec.name: nn.Embedding(spec.cardinality, EMBEDDING_DIM)
                for spec in specs
                if spec.kind is Kind.CATEGORICAL
            }
        )

    def lookup(self, name: str, codes: torch.Tensor) -> torch.Tensor:
        table = self.tables[name]
        bad = (codes < 0) | (codes >= table.num_embeddings)
        if bool(bad.any()):
            code = int(codes[bad][0])
            raise EncodingError(
                f"code {code} out of range [0, {table.num_embeddings}) "
                f"for variable {name!r}"
            )
        return table(codes)


def encoded_width(specs: Sequence[VariableSpec]) -> int:
    """Width after embedding: 1 per continuous, 5 per categorical variable."""
    return sum(
        1 if s.kind is Kind.CONTINUOUS else EMBEDDING_DIM for s in specs
    )


def encode_inputs(
    values: torch.Tensor,
    specs: Sequence[VariableSpec],
    embeddings: EmbeddingTable,
) -> torch.Tensor:
    """Map variable-space values (..., num_vars) to model inputs (..., width).

    Continuous columns pass through; categorical columns are replaced by their
    embedding rows. Output column order follows spec order.
    """
    if values.shape[-1] != len(specs):
        raise EncodingError(
            f"input has {values.shape[-1]} variables, specs declare {len(specs)}"
        )
    pieces: list[torch.Tensor] = []
    for i, spec in enumerate(specs):
        col = values[..., i]
        if spec.kind is Kind.CONTINUOUS:
            pieces.append(col.unsqueeze(-1))
        else:
            pieces.append(embeddings.lookup(spec.name, col.long()))
    return torch.cat(pieces, dim=-1)


class SequenceModel(nn.Module):
    """A core network behind the input encoder; equal-length in/out contract.

    ``input_specs`` lists the variables (in dataset order) this model consumes;
    forward takes exactly those columns, shape (batch, steps, len(input_specs)).
    """

    def __init__(
        self,
        input_specs: Sequence[VariableSpec],
        core: nn.Module,
        output_width: int,
        architecture: Architecture,
        config: ArchitectureConfig,
    ):
        super().__init__()
        self.input_specs = tuple(input_specs)
        self.embeddings = EmbeddingTable(self.input_specs)
        self.core = core
        self.output_width = output_width
        self.architecture = architecture
        self.config = config

    @property
    def encoded_width(self) -> int:
        return encoded_width(self.input_specs)

    def forward(self, values: torch.Tensor) -> torch.Tensor:
        return self.core(encode_inputs(values, self.input_specs, self.embeddings))


class _RecurrentCore(nn.Module):
    def __init__(self, width: int, cfg: RecurrentConfig, output_width: int):
        super().__init__()
        self.lstm = nn.LSTM(
            width, cfg.hidden_size, num_layers=cfg.num_layers, batch_first=True
        )
        self.readout = nn.Linear(cfg.hidden_size, output_width)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out, _ = self.lstm(x)
        return self.readout(out)


class _CausalConvBlock(nn.Module):
    """Left-padded dilated convolution with a residual connection."""

    def __init__(self, c_in: int, c_out: int, kernel_size: int, dilation: int, dropout: float):
        super().__init__()
        self.pad = (kernel_size - 1) * dilation
        self.conv = nn.Conv1d(c_in, c_out, kernel_size, dilation=dilation)
        self.dropout = nn.Dropout(dropout)
        self.residual = nn.Conv1d(c_in, c_out, 1) if c_in != c_out else None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (batch, channels, steps)
        h = self.conv(F.pad(x, (self.pad, 0)))
        h = self.dropout(F.relu(h))
        res = x if self.residual is None else self.residual(x)
        return F.relu(h + res)


class _TemporalConvCore(nn.Module):
    def __init__(self, width: int, cfg: TemporalConvConfig, output_width: int):
        super().__init__()
        blocks = []
        for i in range(cfg.num_layers):
            blocks.append(
                _CausalConvBlock(
                    width if i == 0 else cfg.channels,
                    cfg.channels,
                    cfg.kernel_size,
                    dilation=2**i,
                    dropout=cfg.dropout,
                )
            )
        self.blocks = nn.Sequential(*blocks)
        self.readout = nn.Linear(cfg.channels, output_width)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.blocks(x.transpose(1, 2))
        return self.readout(h.transpose(1, 2))


def sinusoidal_positions(steps: int, dim: int, dtype=torch.float32, device=None) -> torch.Tensor:
    """Fixed additive positional encoding, shape (steps, dim)."""
    position = torch.arange(steps, dtype=dtype, device=device).unsqueeze(1)
    half = torch.arange(0, dim, 2, dtype=dtype, device=device)
    rate = torch.exp(-half * math.log(10000.0) / dim)
    table = torch.zeros(steps, dim, dtype=dtype, device=device)
    table[:, 0::2] = torch.sin(position * rate)
    table[:, 1::2] = torch.cos(position * rate[: dim // 2])
    return table


class _AttentionCore(nn.Module):
    def __init__(self, width: int, cfg: AttentionConfig, output_width: int):
        super().__init__()
        self.project = nn.Linear(width, cfg.model_dim)
        layer = nn.TransformerEncoderLayer(
            d_model=cfg.model_dim,
            nhead=cfg.num_heads,
            dim_feedforward=cfg.feedforward_dim,
            dropout=cfg.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=cfg.num_layers)
        self.readout = nn.Linear(cfg.model_dim, output_width)
        self.model_dim = cfg.model_dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.project(x)
        h = h + sinusoidal_positions(x.shape[1], self.model_dim, dtype=h.dtype, device=h.device)
        return self.readout(self.encoder(h))


class _FeedForwardCore(nn.Module):
    """Per-step two-layer network; no temporal context whatsoever."""

    def __init__(self, width: int, cfg: FeedForwardConfig, output_width: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(width, cfg.hidden_size),
            nn.ReLU(),
            nn.Linear(cfg.hidden_size, output_width),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


def _forecast_width(specs: Sequence[VariableSpec]) -> int:
    m = sum(1 for s in specs if s.role is Role.FORECAST)
    if m == 0:
        raise ConfigError("specs declare no forecast variables")
    return m


def _seeded(seed: int | None) -> None:
    if seed is not None:
        torch.manual_seed(seed)


def build_recurrent(
    specs: Sequence[VariableSpec],
    config: RecurrentConfig | None = None,
    seed: int | None = None,
) -> SequenceModel:
    """Stacked LSTM with a shared per-step linear readout; causal."""
    cfg = config or RecurrentConfig()
    _seeded(seed)
    width = encoded_width(specs)
    m = _forecast_width(specs)
    return SequenceModel(specs, _RecurrentCore(width, cfg, m), m, Architecture.RECURRENT, cfg)


def build_temporal_conv(
    specs: Sequence[VariableSpec],
    config: TemporalConvConfig | None = None,
    seed: int | None = None,
) -> SequenceModel:
    """Causal dilated convolution stack with residual blocks; causal."""
    cfg = config or TemporalConvConfig()
    _seeded(seed)
    width = encoded_width(specs)
    m = _forecast_width(specs)
    return SequenceModel(specs, _TemporalConvCore(width, cfg, m), m, Architecture.TEMPORAL_CONV, cfg)


def build_attention_encoder(
    specs: Sequence[VariableSpec],
    config: AttentionConfig | None = None,
    seed: int | None = None,
) -> SequenceModel:
    """Encoder-only self-attention stack; attends over the full sequence."""
    cfg = config or AttentionConfig()
    _seeded(seed)
    width = encoded_width(specs)
    m = _forecast_width(specs)
    return SequenceModel(
        specs, _AttentionCore(width, cfg, m), m, Architecture.ATTENTION_ENCODER, cfg
    )


def build_feedforward(
    specs: Sequence[VariableSpec],
    config: FeedForwardConfig | None = None,
    seed: int | None = None,
) -> SequenceModel:
    """Per-step network over predictor variables only (for per-step regression)."""
    cfg = config or FeedForwardConfig()
    predictors = tuple(s for s in specs if s.role is Role.PREDICTOR)
    if not predictors:
        raise ConfigError("feed-forward model needs at least one predictor variable")
    _seeded(seed)
    width = encoded_width(predictors)
    m = _forecast_width(specs)
    return SequenceModel(
        predictors, _FeedForwardCore(width, cfg, m), m, Architecture.FEED_FORWARD, cfg
    )


_BUILDERS = {
    Architecture.RECURRENT: build_recurrent,
    Architecture.TEMPORAL_CONV: build_temporal_conv,
    Architecture.ATTENTION_ENCODER: build_attention_encoder,
    Architecture.FEED_FORWARD: build_feedforward,
}


def build_model(
    architecture: Architecture | str,
    specs: Sequence[VariableSpec],
    config: ArchitectureConfig | None = None,
    seed: int | None = None,
) -> SequenceModel:
    """Build any architecture from full dataset specs; see the per-arch builders."""
    return _BUILDERS[Architecture(architecture)](specs, config, seed)
