"""Alignment objectives.

All distributions are softmaxes computed in log space, so large logits
(e.g. similarities divided by a temperature of 0.01) stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import log_softmax

from .errors import InvalidConfig, MissingLevel, NonFiniteInput, NonPositiveTau, NonSquare, ShapeMismatch
from .features import LEVELS, Level

__all__ = [
    "DistributionPair",
    "LossWeights",
    "LevelLoss",
    "LossReport",
    "RETRIEVAL_WEIGHTS",
    "QA_WEIGHTS",
    "CAPTION_WEIGHTS",
    "to_distributions",
    "kl_rows",
    "banzhaf_loss",
    "contrastive_loss",
    "distillation_loss",
    "total_loss",
]


@dataclass(frozen=True)
class DistributionPair:
    """``v2t`` is row-stochastic, ``t2v`` column-stochastic."""

    v2t: np.ndarray
    t2v: np.ndarray
    log_v2t: np.ndarray
    log_t2v: np.ndarray


def _matrix(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ShapeMismatch(f"ShapeMismatch: {name} must be 2-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput(f"NonFiniteInput: {name} has non-finite entries")
    return x


def to_distributions(scores) -> DistributionPair:
    s = _matrix(scores, "scores")
    log_v2t = log_softmax(s, axis=1)
    log_t2v = log_softmax(s, axis=0)
    return DistributionPair(np.exp(log_v2t), np.exp(log_t2v), log_v2t, log_t2v)


def kl_rows(log_p: np.ndarray, log_q: np.ndarray, axis: int = 1) -> np.ndarray:
    """KL(p || q) along ``axis`` for log-probability arrays."""
    return np.sum(np.exp(log_p) * (log_p - log_q), axis=axis)


def _paired_kl(first, second, first_name: str, second_name: str) -> float:
    a, b = _matrix(first, first_name), _matrix(second, second_name)
    if a.shape != b.shape:
        raise ShapeMismatch(f"ShapeMismatch: {first_name} {a.shape} vs {second_name} {b.shape}")
    da, db = to_distributions(a), to_distributions(b)
    v2t = kl_rows(da.log_v2t, db.log_v2t, axis=1).mean()
    t2v = kl_rows(da.log_t2v, db.log_t2v, axis=0).mean()
    return float(v2t + t2v)


def banzhaf_loss(pred, target) -> float:
    """KL(pred || target) over v2t rows plus over t2v columns, each averaged.

    ``target`` may be an :class:`~hbi.game.InteractionMap` or a plain matrix.
    """
    target = getattr(target, "values", target)
    return _paired_kl(pred, target, "pred", "target")


def distillation_loss(teacher_scores, student_scores) -> float:
    """Batch-level KL(student || teacher); the entity level acts as teacher."""
    return _paired_kl(student_scores, teacher_scores, "student", "teacher")


def contrastive_loss(scores, tau: float = 0.01) -> float:
    """Symmetric InfoNCE over a ``B x B`` matrix with positives on the diagonal."""
    s = _matrix(scores, "scores")
    if s.shape[0] != s.shape[1]:
        raise NonSquare(f"NonSquare: batch similarity matrix has shape {s.shape}")
    if not tau > 0:
        raise NonPositiveTau(f"NonPositiveTau: tau must be > 0, got {tau}")
    logits = s / tau
    row = np.diagonal(log_softmax(logits, axis=1)).mean()
    col = np.diagonal(log_softmax(logits, axis=0)).mean()
    return float(-0.5 * (row + col))


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    lam: float = 0.0
    tau: float = 0.01

    def __post_init__(self):
        if not self.tau > 0:
            raise NonPositiveTau(f"NonPositiveTau: tau must be > 0, got {self.tau}")
        for name in ("alpha", "beta", "lam"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be >= 0, got {getattr(self, name)}")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "lambda": self.lam, "tau": self.tau}


RETRIEVAL_WEIGHTS = LossWeights(alpha=1.0, beta=1.0, lam=0.0)
QA_WEIGHTS = LossWeights(alpha=2.0, beta=1.0, lam=2.5)
CAPTION_WEIGHTS = LossWeights(alpha=1.0, beta=1.0, lam=3.3)


@dataclass(frozen=True)
class LevelLoss:
    contrastive: float
    interaction: float

    def combined(self, alpha: float) -> float:
        return self.contrastive + alpha * self.interaction


@dataclass(frozen=True)
class LossReport:
    levels: dict
    distill_e2a: float
    distill_e2v: float
    task: float
    weights: LossWeights
    total: float = field(default=0.0)

    def recompute(self) -> float:
        w = self.weights
        supervision = sum(self.levels[lv].combined(w.alpha) for lv in LEVELS)
        return supervision + w.beta * (self.distill_e2a + self.distill_e2v) + w.lam * self.task

    def to_dict(self) -> dict:
        return {
            "levels": {
                lv.value: {
                    "contrastive": self.levels[lv].contrastive,
                    "interaction": self.levels[lv].interaction,
                    "combined": self.levels[lv].combined(self.weights.alpha),
                }
                for lv in LEVELS
            },
            "distill_e2a": self.distill_e2a,
            "distill_e2v": self.distill_e2v,
            "task": self.task,
            "weights": self.weights.to_dict(),
            "total": self.total,
        }


def total_loss(
    contrastive: dict,
    interaction: dict,
    distill_e2a: float = 0.0,
    distill_e2v: float = 0.0,
    task: float = 0.0,
    weights: LossWeights = RETRIEVAL_WEIGHTS,
) -> LossReport:
    """Per-level ``L_C + alpha * L_I`` summed over levels, plus
    ``beta * (L_D^e2a + L_D^e2v) + lambda * L_task``."""
    levels = {}
    for lv in LEVELS:
        missing = [name for name, d in (("contrastive", contrastive), ("interaction", interaction))
                   if lv not in d and lv.value not in d]
        if missing:
            raise MissingLevel(f"MissingLevel: no {' or '.join(missing)} term for level {lv.value}")
        levels[lv] = LevelLoss(
            float(contrastive.get(lv, contrastive.get(lv.value))),
            float(interaction.get(lv, interaction.get(lv.value))),
        )
    report = LossReport(levels, float(distill_e2a), float(distill_e2v), float(task), weights)
    return replace(report, total=report.recompute())
