"""Synthetic inputs for tests and demos.

``write_fixtures`` lays out one directory per fixture, each with a
``config.json`` where a command can run against it directly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .io import write_matrix

__all__ = ["unit_rows", "gaussian_blobs", "write_fixtures"]


def unit_rows(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    x = rng.standard_normal((rows, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def gaussian_blobs(
    rng: np.random.Generator, per_blob: int = 8, dim: int = 4, offset: float = 5.0, sigma: float = 0.1
) -> tuple[np.ndarray, np.ndarray]:
    """Two blobs centred at ``+-offset * e_1``; returns ``(points, labels)``."""
    centre = np.zeros(dim)
    centre[0] = offset
    a = centre + sigma * rng.standard_normal((per_blob, dim))
    b = -centre + sigma * rng.standard_normal((per_blob, dim))
    return np.vstack([a, b]), np.repeat([0, 1], per_blob)


def _config(path: Path, cfg: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg, indent=2) + "\n", encoding="utf-8")
    return path


def write_fixtures(out_dir, seed: int = 0) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    written = []

    written.append(_config(out / "additive" / "config.json", {
        "mode": "exact",
        "game": {"type": "additive", "weights": [1, 2, 3, 4], "split": 2},
    }))
    written.append(_config(out / "unanimity" / "config.json", {
        "mode": "exact",
        "game": {"type": "unanimity", "n": 3, "carrier": [0, 1], "split": 1},
    }))
    written.append(_config(out / "overcap" / "config.json", {
        "mode": "exact",
        "game": {"type": "additive", "weights": [1.0] * 30, "split": 15},
    }))

    rand = out / "random"
    rand.mkdir(exist_ok=True)
    write_matrix(rand / "video.hbim", unit_rows(rng, 12, 512))
    write_matrix(rand / "text.hbim", unit_rows(rng, 32, 512))
    written += [rand / "video.hbim", rand / "text.hbim"]
    written.append(_config(rand / "config.json", {
        "video": "video.hbim",
        "text": "text.hbim",
        "mode": "sampled",
        "samples": 1000,
        "seed": seed,
    }))
    for name, shape in (("entity", (12, 32)), ("action", (6, 16)), ("event", (2, 4))):
        p = rand / f"pred_{name}.hbim"
        write_matrix(p, rng.standard_normal(shape))
        written.append(p)
    for name in ("entity", "action", "event"):
        p = rand / f"scores_{name}.hbim"
        write_matrix(p, rng.uniform(-1.0, 1.0, size=(8, 8)))
        written.append(p)
    p = rand / "scores_batch1.hbim"
    write_matrix(p, rng.uniform(-1.0, 1.0, size=(1, 1)))
    written.append(p)

    written.append(_config(out / "too_many_clusters" / "config.json", {
        "video": "../random/video.hbim",
        "text": "../random/text.hbim",
        "clusters": {"video_action": 20, "video_event": 2, "text_action": 16, "text_event": 4},
    }))

    blobs = out / "blobs"
    blobs.mkdir(exist_ok=True)
    points, labels = gaussian_blobs(rng)
    write_matrix(blobs / "tokens.hbim", points)
    (blobs / "labels.json").write_text(json.dumps(labels.tolist()) + "\n", encoding="utf-8")
    written += [blobs / "tokens.hbim", blobs / "labels.json"]
    return written
