"""Token embedding matrices tagged with modality and semantic level."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteInput, ShapeMismatch


class Level(str, enum.Enum):
    ENTITY = "entity"
    ACTION = "action"
    EVENT = "event"


class Modality(str, enum.Enum):
    VIDEO = "video"
    TEXT = "text"


LEVELS = (Level.ENTITY, Level.ACTION, Level.EVENT)


@dataclass(frozen=True)
class FeatureMatrix:
    """A ``rows x dim`` matrix of token embeddings."""

    data: np.ndarray
    level: Level = Level.ENTITY
    modality: Modality = Modality.VIDEO

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ShapeMismatch(f"feature matrix must be 2-D and non-empty, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteInput("feature matrix contains non-finite entries")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "level", Level(self.level))
        object.__setattr__(self, "modality", Modality(self.modality))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray, level: Level | None = None) -> "FeatureMatrix":
        return FeatureMatrix(data, self.level if level is None else level, self.modality)
