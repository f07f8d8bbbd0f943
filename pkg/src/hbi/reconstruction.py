"""Representation reconstruction.

Each modality is rebuilt as a gated mix of its single-modal tokens and a
cross-modal summary obtained by attending over those tokens with a query from
the other modality:

* video: query is the text sentence ([CLS]) embedding;
* text: query is the mean of the single-modal video tokens.

Gates are per-row scalars. A gate of 1 keeps the single-modal token, a gate
of 0 keeps the cross-modal one; values outside [0, 1] extrapolate and are
allowed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .errors import DimMismatch, InvalidConfig, ShapeMismatch, UnloadedWeights
from .features import FeatureMatrix

__all__ = [
    "GateConfig",
    "ReconstructedPair",
    "attention_pool",
    "cross_modal_video",
    "cross_modal_text",
    "gate_values",
    "fuse",
    "reconstruct",
    "DEFAULT_VIDEO_GATE",
    "DEFAULT_TEXT_GATE",
]

GATE_MODES = ("constant", "linear")


@dataclass(frozen=True)
class GateConfig:
    """How the fusion gate is produced.

    ``mode="constant"`` uses ``constant_value`` for every row. ``mode="linear"``
    maps each row difference ``single - cross`` to a scalar via
    ``diff @ linear_weights + linear_bias``.
    """

    mode: str = "constant"
    constant_value: float = 1.0
    linear_weights: np.ndarray | None = None
    linear_bias: float = 0.0

    def __post_init__(self):
        if self.mode not in GATE_MODES:
            raise InvalidConfig(f"gate mode must be one of {GATE_MODES}, got {self.mode!r}")
        if self.mode == "constant" and not np.isfinite(self.constant_value):
            raise InvalidConfig("constant gate value must be finite")
        if self.linear_weights is not None:
            object.__setattr__(
                self, "linear_weights", np.asarray(self.linear_weights, dtype=float).ravel()
            )

    @classmethod
    def constant(cls, value: float) -> "GateConfig":
        return cls("constant", float(value))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "GateConfig":
        """Linear gate from a ``1 x (dim + 1)`` or ``(dim + 1) x 1`` matrix whose
        last entry is the bias."""
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or 1 not in matrix.shape or matrix.size < 2:
            raise InvalidConfig(f"gate weight matrix must be a vector of dim+1 values, got {matrix.shape}")
        flat = matrix.ravel()
        return cls("linear", linear_weights=flat[:-1], linear_bias=float(flat[-1]))

    def describe(self) -> dict:
        if self.mode == "constant":
            return {"mode": "constant", "value": self.constant_value}
        return {
            "mode": "linear",
            "dim": None if self.linear_weights is None else int(self.linear_weights.size),
            "bias": self.linear_bias,
        }


DEFAULT_VIDEO_GATE = GateConfig.constant(0.45)
DEFAULT_TEXT_GATE = GateConfig.constant(0.75)


@dataclass(frozen=True)
class ReconstructedPair:
    video: FeatureMatrix
    text: FeatureMatrix
    gamma: np.ndarray
    delta: np.ndarray


def attention_pool(keys: np.ndarray, query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Single-query dot-product attention with keys as values.

    Returns ``(pooled_vector, coefficients)``. No scaling is applied to the
    logits.
    """
    keys = np.asarray(keys, dtype=float)
    query = np.asarray(query, dtype=float).ravel()
    if keys.shape[1] != query.size:
        raise DimMismatch(f"DimMismatch: query dim {query.size} != key dim {keys.shape[1]}")
    coef = softmax(keys @ query)
    return coef @ keys, coef


def cross_modal_video(video_s: FeatureMatrix, text_cls: np.ndarray) -> FeatureMatrix:
    pooled, _ = attention_pool(video_s.data, text_cls)
    return video_s.with_data(np.tile(pooled, (video_s.rows, 1)))


def cross_modal_text(text_s: FeatureMatrix, video_mean: np.ndarray) -> FeatureMatrix:
    pooled, _ = attention_pool(text_s.data, video_mean)
    return text_s.with_data(np.tile(pooled, (text_s.rows, 1)))


def gate_values(single: FeatureMatrix, cross: FeatureMatrix, gate: GateConfig) -> np.ndarray:
    if gate.mode == "constant":
        return np.full(single.rows, float(gate.constant_value))
    if gate.linear_weights is None:
        raise UnloadedWeights("UnloadedWeights: linear gate has no weights loaded")
    if gate.linear_weights.size != single.dim:
        raise DimMismatch(
            f"DimMismatch: gate weights have dim {gate.linear_weights.size}, features {single.dim}"
        )
    return (single.data - cross.data) @ gate.linear_weights + gate.linear_bias


def fuse(
    single: FeatureMatrix, cross: FeatureMatrix, gate: GateConfig
) -> tuple[FeatureMatrix, np.ndarray]:
    """Row-wise ``g * single + (1 - g) * cross``."""
    if single.data.shape != cross.data.shape:
        raise ShapeMismatch(
            f"ShapeMismatch: single {single.data.shape} vs cross {cross.data.shape}"
        )
    g = gate_values(single, cross, gate)
    col = g[:, None]
    return single.with_data(col * single.data + (1.0 - col) * cross.data), g


def reconstruct(
    video_s: FeatureMatrix,
    text_s: FeatureMatrix,
    video_gate: GateConfig = DEFAULT_VIDEO_GATE,
    text_gate: GateConfig = DEFAULT_TEXT_GATE,
    text_cls: np.ndarray | None = None,
) -> ReconstructedPair:
    """Reconstruct both modalities.

    ``text_cls`` defaults to the mean of the text tokens when the producer
    did not supply a sentence embedding.
    """
    if video_s.dim != text_s.dim:
        raise DimMismatch(f"DimMismatch: video dim {video_s.dim} != text dim {text_s.dim}")
    if text_cls is None:
        text_cls = text_s.data.mean(axis=0)
    video_c = cross_modal_video(video_s, text_cls)
    text_c = cross_modal_text(text_s, video_s.data.mean(axis=0))
    video, gamma = fuse(video_s, video_c, video_gate)
    text, delta = fuse(text_s, text_c, text_gate)
    return ReconstructedPair(video, text, gamma, delta)
