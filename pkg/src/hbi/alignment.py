"""Cross-modal similarity game and the three-level interaction pipeline.

The characteristic function of a coalition is the weighted max-alignment
similarity restricted to the coalition's video and text rows, with the token
weights renormalised over the members present. A coalition lacking either
modality scores exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClusterCountExceedsTokens,
    DimMismatch,
    InvalidConfig,
    ShapeMismatch,
    ZeroNormRow,
)
from .features import LEVELS, FeatureMatrix, Level, Modality
from .game import (
    DEFAULT_ENUMERATION_CAP,
    CharacteristicFn,
    InteractionMap,
    PlayerSet,
    interaction_matrix,
)
from .merge import ClusterAssignment, MergeConfig, dpc_knn, weighted_merge
from .reconstruction import (
    DEFAULT_TEXT_GATE,
    DEFAULT_VIDEO_GATE,
    GateConfig,
    reconstruct,
)

__all__ = [
    "alignment_matrix",
    "uniform_weights",
    "SimilarityGame",
    "similarity_score",
    "coalition_similarity",
    "HierarchyConfig",
    "LevelResult",
    "HierarchyResult",
    "run_hierarchy",
    "default_gates",
]


def _rows(m: FeatureMatrix | np.ndarray) -> np.ndarray:
    return m.data if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=float)


def alignment_matrix(video: FeatureMatrix | np.ndarray, text: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Cosine similarity of every video row with every text row."""
    v, t = _rows(video), _rows(text)
    if v.shape[1] != t.shape[1]:
        raise DimMismatch(f"DimMismatch: video dim {v.shape[1]} != text dim {t.shape[1]}")
    nv = np.linalg.norm(v, axis=1)
    nt = np.linalg.norm(t, axis=1)
    if np.any(nv == 0) or np.any(nt == 0):
        raise ZeroNormRow("ZeroNormRow: cosine similarity undefined for a zero row")
    return np.clip((v / nv[:, None]) @ (t / nt[:, None]).T, -1.0, 1.0)


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def _simplex(w: np.ndarray | None, n: int, name: str) -> np.ndarray:
    if w is None:
        return uniform_weights(n)
    w = np.asarray(w, dtype=float).ravel()
    if w.size != n:
        raise ShapeMismatch(f"ShapeMismatch: {name} has {w.size} entries for {n} rows")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise InvalidConfig(f"{name} must be non-negative and sum to 1")
    return w


def _masked_max(a: np.ndarray, mask: np.ndarray, axis: int) -> np.ndarray:
    return np.where(mask, a, -np.inf).max(axis=axis)


class SimilarityGame(CharacteristicFn):
    """Players are the video rows followed by the text rows."""

    def __init__(self, video, text, weights_v=None, weights_t=None):
        self.video = video if isinstance(video, FeatureMatrix) else FeatureMatrix(video, modality=Modality.VIDEO)
        self.text = text if isinstance(text, FeatureMatrix) else FeatureMatrix(text, modality=Modality.TEXT)
        self.alignment = alignment_matrix(self.video, self.text)
        self.n_video, self.n_text = self.alignment.shape
        self.n_players = self.n_video + self.n_text
        self.weights_v = _simplex(weights_v, self.n_video, "weights_v")
        self.weights_t = _simplex(weights_t, self.n_text, "weights_t")

    @property
    def players(self) -> PlayerSet:
        return PlayerSet(self.n_players, self.n_video)

    def _phi(self, mv, mt, rowmax, colmax) -> np.ndarray:
        # rowmax[s, i] = max over the coalition's text of a_ij, colmax likewise
        with np.errstate(invalid="ignore", divide="ignore"):
            sv = np.where(mv, self.weights_v, 0.0).sum(axis=1)
            st = np.where(mt, self.weights_t, 0.0).sum(axis=1)
            vt = np.where(mv, self.weights_v * rowmax, 0.0).sum(axis=1)
            tt = np.where(mt, self.weights_t * colmax, 0.0).sum(axis=1)
            both = mv.any(axis=1) & mt.any(axis=1) & (sv > 0) & (st > 0)
            return np.where(both, 0.5 * (vt / sv + tt / st), 0.0)

    def values(self, masks):
        masks = np.asarray(masks, dtype=bool)
        mv, mt = masks[:, : self.n_video], masks[:, self.n_video :]
        a = self.alignment[None]
        rowmax = _masked_max(a, mt[:, None, :], axis=2)
        colmax = _masked_max(a, mv[:, :, None], axis=1)
        return self._phi(mv, mt, rowmax, colmax)

    def brackets(self, i, j, base):
        nv = self.n_video
        if (i < nv) == (j < nv):
            return super().brackets(i, j, base)
        a, b = (i, j - nv) if i < nv else (j, i - nv)
        A = self.alignment
        mv, mt = base[:, :nv], base[:, nv:]
        rowmax = _masked_max(A[None], mt[:, None, :], axis=2)
        colmax = _masked_max(A[None], mv[:, :, None], axis=1)
        mv_a = mv.copy()
        mv_a[:, a] = True
        mt_b = mt.copy()
        mt_b[:, b] = True
        # adding text b can only raise row maxima; adding video a only column maxima
        rowmax_b = np.maximum(rowmax, A[:, b][None, :])
        colmax_a = np.maximum(colmax, A[a][None, :])
        f_ab = self._phi(mv_a, mt_b, rowmax_b, colmax_a)
        f_c = self._phi(mv, mt, rowmax, colmax)
        f_a = self._phi(mv_a, mt, rowmax, colmax_a)
        f_b = self._phi(mv, mt_b, rowmax_b, colmax)
        return (f_ab + f_c) - (f_a + f_b)


def similarity_score(game: SimilarityGame) -> float:
    """Weighted mean of the per-row best matches, averaged over both directions."""
    a = game.alignment
    v2t = float(game.weights_v @ a.max(axis=1))
    t2v = float(game.weights_t @ a.max(axis=0))
    return 0.5 * (v2t + t2v)


def coalition_similarity(game: SimilarityGame, members) -> float:
    """Similarity restricted to ``members`` (a boolean mask or an index list
    over video rows then text rows)."""
    members = np.asarray(members)
    if members.dtype != bool:
        mask = np.zeros(game.n_players, dtype=bool)
        mask[members.astype(np.intp)] = True
        members = mask
    if members.shape != (game.n_players,):
        raise ShapeMismatch(f"ShapeMismatch: mask of length {members.size} for {game.n_players} players")
    return game.value(members)


def default_gates() -> dict[Level, tuple[GateConfig, GateConfig]]:
    return {
        Level.ENTITY: (DEFAULT_VIDEO_GATE, DEFAULT_TEXT_GATE),
        Level.ACTION: (DEFAULT_VIDEO_GATE, GateConfig.constant(1.4)),
        Level.EVENT: (DEFAULT_VIDEO_GATE, DEFAULT_TEXT_GATE),
    }


@dataclass
class HierarchyConfig:
    """Settings for the three-level pipeline.

    Keys of ``token_weights``, ``temporal_mix`` and ``similarity_weights`` are
    ``(level, modality)``; for the first two the level is the one being
    merged *from*.
    """

    video_action: int = 6
    video_event: int = 2
    text_action: int = 16
    text_event: int = 4
    k_neighbors: int | None = None
    gates: dict = field(default_factory=default_gates)
    mode: str = "sampled"
    samples: int = 1000
    seed: int = 0
    workers: int = 1
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP
    text_cls: np.ndarray | None = None
    token_weights: dict = field(default_factory=dict)
    temporal_mix: dict = field(default_factory=dict)
    similarity_weights: dict = field(default_factory=dict)
    bypass_merge: bool = False

    def cluster_counts(self, level: Level) -> tuple[int, int]:
        if level == Level.ACTION:
            return self.video_action, self.text_action
        if level == Level.EVENT:
            return self.video_event, self.text_event
        raise InvalidConfig(f"no cluster counts for level {level}")

    def merge_config(self, source: Level, modality: Modality, n_clusters: int) -> MergeConfig:
        key = (source, modality)
        return MergeConfig(
            n_clusters=n_clusters,
            k_neighbors=self.k_neighbors,
            token_weights=self.token_weights.get(key),
            temporal_mix=self.temporal_mix.get(key),
            bypass_attention=self.bypass_merge,
        )


@dataclass
class LevelResult:
    level: Level
    video_single: FeatureMatrix
    text_single: FeatureMatrix
    video: FeatureMatrix
    text: FeatureMatrix
    gamma: np.ndarray
    delta: np.ndarray
    interaction: InteractionMap
    similarity: float
    video_clusters: ClusterAssignment | None = None
    text_clusters: ClusterAssignment | None = None


@dataclass
class HierarchyResult:
    levels: dict

    def __getitem__(self, level) -> LevelResult:
        return self.levels[Level(level)]


def _merge_step(tokens: FeatureMatrix, target: Level, n_clusters: int, config: HierarchyConfig):
    if n_clusters > tokens.rows:
        raise ClusterCountExceedsTokens(
            f"ClusterCountExceedsTokens: {tokens.modality.value} {target.value} clusters "
            f"({n_clusters}) exceed {tokens.rows} tokens"
        )
    mc = config.merge_config(tokens.level, tokens.modality, n_clusters)
    assign = dpc_knn(tokens, mc)
    return weighted_merge(tokens, assign, mc, level=target), assign


def run_hierarchy(
    video_entity: FeatureMatrix | np.ndarray,
    text_entity: FeatureMatrix | np.ndarray,
    config: HierarchyConfig | None = None,
) -> HierarchyResult:
    """Entity, action and event levels in sequence.

    Clustering always consumes the single-modal tokens of the previous level;
    each level's interaction map and similarity use the reconstructed tokens.
    """
    config = config or HierarchyConfig()
    vs = FeatureMatrix(_rows(video_entity), Level.ENTITY, Modality.VIDEO)
    ts = FeatureMatrix(_rows(text_entity), Level.ENTITY, Modality.TEXT)
    if vs.dim != ts.dim:
        raise DimMismatch(f"DimMismatch: video dim {vs.dim} != text dim {ts.dim}")
    for level in (Level.ACTION, Level.EVENT):
        nv, nt = config.cluster_counts(level)
        if nv > vs.rows or nt > ts.rows:
            raise ClusterCountExceedsTokens(
                f"ClusterCountExceedsTokens: {level.value} clusters ({nv}, {nt}) exceed "
                f"tokens ({vs.rows}, {ts.rows})"
            )

    levels = {}
    v_assign = t_assign = None
    for level in LEVELS:
        if level != Level.ENTITY:
            nv, nt = config.cluster_counts(level)
            vs, v_assign = _merge_step(vs, level, nv, config)
            ts, t_assign = _merge_step(ts, level, nt, config)
        video_gate, text_gate = config.gates[level]
        pair = reconstruct(vs, ts, video_gate, text_gate, text_cls=config.text_cls)
        game = SimilarityGame(
            pair.video,
            pair.text,
            config.similarity_weights.get((level, Modality.VIDEO)),
            config.similarity_weights.get((level, Modality.TEXT)),
        )
        imap = interaction_matrix(
            game,
            game.players,
            mode=config.mode,
            budget=config.samples,
            seed=config.seed,
            workers=config.workers,
            cap=config.enumeration_cap,
            level=level.value,
        )
        levels[level] = LevelResult(
            level=level,
            video_single=vs,
            text_single=ts,
            video=pair.video,
            text=pair.text,
            gamma=pair.gamma,
            delta=pair.delta,
            interaction=imap,
            similarity=similarity_score(game),
            video_clusters=v_assign,
            text_clusters=t_assign,
        )
    return HierarchyResult(levels)
