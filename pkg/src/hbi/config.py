"""JSON run configuration.

Paths are resolved relative to the directory holding the config file. All
keys are optional; unknown keys are rejected so typos surface as config
errors. Example::

    {
      "video": "video.hbim",
      "text": "text.hbim",
      "clusters": {"video_action": 6, "video_event": 2, "text_action": 16, "text_event": 4},
      "mode": "sampled", "samples": 1000, "seed": 0,
      "gates": {"entity": {"video": 0.45, "text": 0.75}},
      "loss": {"alpha": 1.0, "beta": 1.0, "lambda": 0.0, "tau": 0.01}
    }
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alignment import HierarchyConfig, default_gates
from .errors import InvalidConfig
from .features import LEVELS, Level, Modality
from .game import DEFAULT_ENUMERATION_CAP
from .io import read_matrix
from .objectives import LossWeights
from .reconstruction import GateConfig

__all__ = ["RunConfig", "load_config", "parse_config"]

_TOP_LEVEL = {
    "video", "text", "text_cls", "clusters", "k_neighbors", "gates", "mode", "samples",
    "seed", "workers", "enumeration_cap", "loss", "token_weights", "temporal_mix",
    "similarity_weights", "bypass_merge", "game", "pred", "scores", "target",
}
_CLUSTER_KEYS = ("video_action", "video_event", "text_action", "text_event")


@dataclass
class RunConfig:
    hierarchy: HierarchyConfig
    loss: LossWeights
    base_dir: Path
    video_path: Path | None = None
    text_path: Path | None = None
    game: dict | None = None
    pred: dict = field(default_factory=dict)
    scores: dict = field(default_factory=dict)
    target: dict = field(default_factory=dict)

    def load_video(self) -> np.ndarray:
        if self.video_path is None:
            raise InvalidConfig("config field 'video' is required")
        return read_matrix(self.video_path).astype(float)

    def load_text(self) -> np.ndarray:
        if self.text_path is None:
            raise InvalidConfig("config field 'text' is required")
        return read_matrix(self.text_path).astype(float)


def _int(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise InvalidConfig(f"config field '{name}' must be an integer >= {minimum}, got {value!r}")
    return value


def _float(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise InvalidConfig(f"config field '{name}' must be a finite number, got {value!r}")
    return float(value)


def _path(base: Path, value, name: str) -> Path:
    if not isinstance(value, str) or not value:
        raise InvalidConfig(f"config field '{name}' must be a path string")
    p = base / value
    if not p.exists():
        raise InvalidConfig(f"config field '{name}': file not found: {p}")
    return p


def _level(key: str, name: str) -> Level:
    try:
        return Level(key)
    except ValueError:
        raise InvalidConfig(f"config field '{name}': unknown level {key!r}") from None


def _modality(key: str, name: str) -> Modality:
    try:
        return Modality(key)
    except ValueError:
        raise InvalidConfig(f"config field '{name}': unknown modality {key!r}") from None


def _gate(spec, base: Path, name: str) -> GateConfig:
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return GateConfig.constant(_float(spec, name))
    if not isinstance(spec, dict):
        raise InvalidConfig(f"config field '{name}' must be a number or an object")
    mode = spec.get("mode", "constant")
    if mode == "constant":
        return GateConfig.constant(_float(spec.get("value"), f"{name}.value"))
    if mode == "linear":
        if "weights" not in spec:
            raise InvalidConfig(f"config field '{name}.weights' is required for a linear gate")
        return GateConfig.from_matrix(read_matrix(_path(base, spec["weights"], f"{name}.weights")))
    raise InvalidConfig(f"config field '{name}.mode' must be 'constant' or 'linear'")


def _per_level_modality(spec, base: Path, name: str) -> dict:
    """``{level: {modality: path}}`` -> ``{(Level, Modality): array}``."""
    if not isinstance(spec, dict):
        raise InvalidConfig(f"config field '{name}' must be an object")
    out = {}
    for lkey, inner in spec.items():
        level = _level(lkey, name)
        if not isinstance(inner, dict):
            raise InvalidConfig(f"config field '{name}.{lkey}' must be an object")
        for mkey, value in inner.items():
            modality = _modality(mkey, f"{name}.{lkey}")
            m = read_matrix(_path(base, value, f"{name}.{lkey}.{mkey}")).astype(float)
            out[(level, modality)] = m
    return out


def _vector_entries(mats: dict) -> dict:
    return {k: v.ravel() for k, v in mats.items()}


def _level_paths(spec, base: Path, name: str) -> dict:
    if isinstance(spec, str):
        p = _path(base, spec, name)
        return {lv: p for lv in LEVELS}
    if not isinstance(spec, dict):
        raise InvalidConfig(f"config field '{name}' must be a path or an object of paths")
    return {_level(k, name): _path(base, v, f"{name}.{k}") for k, v in spec.items()}


def parse_config(raw: dict, base_dir: str | os.PathLike = ".") -> RunConfig:
    base = Path(base_dir)
    if not isinstance(raw, dict):
        raise InvalidConfig("config must be a JSON object")
    unknown = sorted(set(raw) - _TOP_LEVEL)
    if unknown:
        raise InvalidConfig(f"unknown config field(s): {', '.join(unknown)}")

    h = HierarchyConfig()
    clusters = raw.get("clusters")
    if clusters is not None:
        if isinstance(clusters, list):
            if len(clusters) != 4:
                raise InvalidConfig("config field 'clusters' must list 4 counts")
            clusters = dict(zip(_CLUSTER_KEYS, clusters))
        if not isinstance(clusters, dict):
            raise InvalidConfig("config field 'clusters' must be an object or a list")
        for key, value in clusters.items():
            if key not in _CLUSTER_KEYS:
                raise InvalidConfig(f"unknown config field 'clusters.{key}'")
            setattr(h, key, _int(value, f"clusters.{key}", 1))
    if raw.get("k_neighbors") is not None:
        h.k_neighbors = _int(raw["k_neighbors"], "k_neighbors", 1)
    mode = raw.get("mode", h.mode)
    if mode not in ("exact", "sampled"):
        raise InvalidConfig(f"config field 'mode' must be 'exact' or 'sampled', got {mode!r}")
    h.mode = mode
    h.samples = _int(raw.get("samples", h.samples), "samples", 1)
    h.seed = _int(raw.get("seed", h.seed), "seed", 0)
    h.workers = _int(raw.get("workers", h.workers), "workers", 1)
    h.enumeration_cap = _int(raw.get("enumeration_cap", DEFAULT_ENUMERATION_CAP), "enumeration_cap", 0)
    h.bypass_merge = bool(raw.get("bypass_merge", False))

    gates = default_gates()
    for lkey, spec in (raw.get("gates") or {}).items():
        level = _level(lkey, "gates")
        if not isinstance(spec, dict):
            raise InvalidConfig(f"config field 'gates.{lkey}' must be an object")
        video_gate, text_gate = gates[level]
        for mkey in spec:
            _modality(mkey, f"gates.{lkey}")
        if "video" in spec:
            video_gate = _gate(spec["video"], base, f"gates.{lkey}.video")
        if "text" in spec:
            text_gate = _gate(spec["text"], base, f"gates.{lkey}.text")
        gates[level] = (video_gate, text_gate)
    h.gates = gates

    if "text_cls" in raw:
        h.text_cls = read_matrix(_path(base, raw["text_cls"], "text_cls")).astype(float).ravel()
    if "token_weights" in raw:
        h.token_weights = _vector_entries(_per_level_modality(raw["token_weights"], base, "token_weights"))
    if "temporal_mix" in raw:
        h.temporal_mix = _per_level_modality(raw["temporal_mix"], base, "temporal_mix")
    if "similarity_weights" in raw:
        h.similarity_weights = _vector_entries(
            _per_level_modality(raw["similarity_weights"], base, "similarity_weights")
        )

    loss_raw = raw.get("loss") or {}
    unknown = sorted(set(loss_raw) - {"alpha", "beta", "lambda", "tau"})
    if unknown:
        raise InvalidConfig(f"unknown config field(s) in 'loss': {', '.join(unknown)}")
    defaults = LossWeights()
    tau = _float(loss_raw.get("tau", defaults.tau), "loss.tau")
    if tau <= 0:
        raise InvalidConfig("config field 'loss.tau' must be > 0")
    values = {}
    for key, attr in (("alpha", "alpha"), ("beta", "beta"), ("lambda", "lam")):
        v = _float(loss_raw.get(key, getattr(defaults, attr)), f"loss.{key}")
        if v < 0:
            raise InvalidConfig(f"config field 'loss.{key}' must be >= 0")
        values[attr] = v
    loss = LossWeights(tau=tau, **values)

    game = raw.get("game")
    if game is not None and not isinstance(game, dict):
        raise InvalidConfig("config field 'game' must be an object")

    return RunConfig(
        hierarchy=h,
        loss=loss,
        base_dir=base,
        video_path=_path(base, raw["video"], "video") if "video" in raw else None,
        text_path=_path(base, raw["text"], "text") if "text" in raw else None,
        game=game,
        pred=_level_paths(raw["pred"], base, "pred") if "pred" in raw else {},
        scores=_level_paths(raw["scores"], base, "scores") if "scores" in raw else {},
        target=_level_paths(raw["target"], base, "target") if "target" in raw else {},
    )


def load_config(path: str | os.PathLike) -> RunConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {p}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config {p} is not valid JSON: {exc}") from exc
    return parse_config(raw, p.parent)
