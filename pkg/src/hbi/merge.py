"""Token merging: DPC-KNN clustering followed by weight-augmented attention.

Clustering follows density-peaks with a K-nearest-neighbour density:

    rho_i = exp(-mean_{k in KNN(i)} ||x_k - x_i||^2)
    xi_i  = min_{j denser than i} ||x_j - x_i||^2   (max over all j for the densest)

and the ``n_clusters`` tokens with the largest ``rho * xi`` become centres.
Ties are broken towards the lowest token index everywhere, including the
"denser than" relation, so assignments are fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import softmax

from .errors import (
    ClusterCountExceedsTokens,
    InconsistentAssignment,
    ShapeMismatch,
    TooFewTokens,
)
from .features import FeatureMatrix, Level

__all__ = [
    "MergeConfig",
    "ClusterAssignment",
    "MergeResult",
    "default_k",
    "dpc_knn",
    "weighted_merge",
    "merge_tokens",
]

_NEXT_LEVEL = {Level.ENTITY: Level.ACTION, Level.ACTION: Level.EVENT, Level.EVENT: Level.EVENT}


def default_k(n_tokens: int) -> int:
    return min(5, n_tokens - 1)


@dataclass(frozen=True)
class MergeConfig:
    """Settings for one merge step.

    ``token_weights`` biases both the within-cluster averaging and the
    attention logits (all zeros by default). ``temporal_mix`` is an optional
    ``N x N`` matrix applied to the tokens (``mix @ X``) before clustering;
    identity by default. ``bypass_attention`` returns the cluster queries
    instead of the attention output and exists for identity checks.
    """

    n_clusters: int
    k_neighbors: int | None = None
    token_weights: np.ndarray | None = None
    temporal_mix: np.ndarray | None = None
    bypass_attention: bool = False

    def resolve_k(self, n_tokens: int) -> int:
        return default_k(n_tokens) if self.k_neighbors is None else int(self.k_neighbors)

    def weights_for(self, n_tokens: int) -> np.ndarray:
        if self.token_weights is None:
            return np.zeros(n_tokens)
        w = np.asarray(self.token_weights, dtype=float).ravel()
        if w.size != n_tokens:
            raise ShapeMismatch(f"ShapeMismatch: {w.size} token weights for {n_tokens} tokens")
        return w


@dataclass(frozen=True)
class ClusterAssignment:
    centers: np.ndarray  # token indices, ascending
    labels: np.ndarray  # cluster id (position in ``centers``) per token
    density: np.ndarray
    distance_index: np.ndarray
    score: np.ndarray
    k_neighbors: int

    @property
    def n_clusters(self) -> int:
        return self.centers.size

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def to_dict(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "labels": self.labels.tolist(),
            "density": self.density.tolist(),
            "distance_index": self.distance_index.tolist(),
            "k_neighbors": self.k_neighbors,
        }


def _as_array(tokens: FeatureMatrix | np.ndarray) -> np.ndarray:
    return tokens.data if isinstance(tokens, FeatureMatrix) else np.asarray(tokens, dtype=float)


def _clustering_features(x: np.ndarray, config: MergeConfig) -> np.ndarray:
    if config.temporal_mix is None:
        return x
    mix = np.asarray(config.temporal_mix, dtype=float)
    if mix.shape != (x.shape[0], x.shape[0]):
        raise ShapeMismatch(
            f"ShapeMismatch: temporal mix {mix.shape} for {x.shape[0]} tokens"
        )
    return mix @ x


def dpc_knn(tokens: FeatureMatrix | np.ndarray, config: MergeConfig) -> ClusterAssignment:
    x = _clustering_features(_as_array(tokens), config)
    n = x.shape[0]
    if not 1 <= config.n_clusters <= n:
        raise ClusterCountExceedsTokens(
            f"ClusterCountExceedsTokens: n_clusters={config.n_clusters} for {n} tokens"
        )
    k = config.resolve_k(n)
    if not 1 <= k <= n - 1:
        raise TooFewTokens(f"TooFewTokens: k_neighbors={k} needs at least {k + 1} tokens, got {n}")

    d2 = cdist(x, x, "sqeuclidean")
    off_diag = d2.copy()
    np.fill_diagonal(off_diag, np.inf)
    nearest = np.argsort(off_diag, axis=1, kind="stable")[:, :k]
    log_rho = -np.take_along_axis(d2, nearest, axis=1).mean(axis=1)

    idx = np.arange(n)
    denser = (log_rho[None, :] > log_rho[:, None]) | (
        (log_rho[None, :] == log_rho[:, None]) & (idx[None, :] < idx[:, None])
    )
    has_denser = denser.any(axis=1)
    xi = np.where(
        has_denser,
        np.where(denser, d2, np.inf).min(axis=1),
        d2.max(axis=1),
    )

    # rank in log space: exp(-mean d^2) underflows for widely spaced tokens
    with np.errstate(divide="ignore"):
        log_score = log_rho + np.log(xi)
    ranking = np.lexsort((idx, -log_score))
    centers = np.sort(ranking[: config.n_clusters])

    labels = np.argmin(d2[:, centers], axis=1)
    labels[centers] = np.arange(centers.size)

    rho = np.exp(log_rho)
    return ClusterAssignment(
        centers=centers,
        labels=labels,
        density=rho,
        distance_index=xi,
        score=rho * xi,
        k_neighbors=k,
    )


@dataclass(frozen=True)
class MergeResult:
    tokens: FeatureMatrix
    queries: np.ndarray
    attention: np.ndarray | None


def _check_assignment(assign: ClusterAssignment, n: int) -> None:
    c = assign.centers
    if assign.labels.shape != (n,):
        raise InconsistentAssignment(
            f"InconsistentAssignment: {assign.labels.size} labels for {n} tokens"
        )
    if c.size == 0 or np.unique(c).size != c.size or c.min() < 0 or c.max() >= n:
        raise InconsistentAssignment("InconsistentAssignment: invalid cluster centres")
    if assign.labels.min() < 0 or assign.labels.max() >= c.size:
        raise InconsistentAssignment("InconsistentAssignment: label refers to no centre")
    if np.bincount(assign.labels, minlength=c.size).min() == 0:
        raise InconsistentAssignment("InconsistentAssignment: empty cluster")


def merge_tokens(
    tokens: FeatureMatrix | np.ndarray,
    assign: ClusterAssignment,
    config: MergeConfig,
    level: Level | None = None,
) -> MergeResult:
    """Merge tokens into one row per cluster, keeping the intermediates.

    Queries are softmax(weight)-weighted averages of each cluster's members;
    the output is ``softmax(Q K^T / sqrt(d) + W) V`` with ``K = V = tokens``
    and ``W`` added per key.
    """
    fm = tokens if isinstance(tokens, FeatureMatrix) else FeatureMatrix(tokens)
    x = fm.data
    n, d = x.shape
    _check_assignment(assign, n)
    w = config.weights_for(n)

    queries = np.empty((assign.n_clusters, d))
    for c in range(assign.n_clusters):
        members = assign.members(c)
        queries[c] = softmax(w[members]) @ x[members]

    if config.bypass_attention:
        out, attn = queries, None
    else:
        attn = softmax(queries @ x.T / math.sqrt(d) + w[None, :], axis=1)
        # a convex combination lies in the per-coordinate hull; rounding in a
        # near one-hot row can overshoot it by an ulp
        out = np.clip(attn @ x, x.min(axis=0), x.max(axis=0))
    target = _NEXT_LEVEL[fm.level] if level is None else Level(level)
    return MergeResult(fm.with_data(out, level=target), queries, attn)


def weighted_merge(
    tokens: FeatureMatrix | np.ndarray,
    assign: ClusterAssignment,
    config: MergeConfig,
    level: Level | None = None,
) -> FeatureMatrix:
    return merge_tokens(tokens, assign, config, level).tokens
