"""Cooperative games and pairwise Banzhaf interaction.

Coalitions are boolean masks over a fixed player universe; a batch of
coalitions is an ``(m, n)`` boolean array. Characteristic functions evaluate
batches so that enumeration and sampling stay vectorised.

The pairwise interaction of players ``i`` and ``j`` averages the bracket

    phi(C | {i, j}) + phi(C) - phi(C | {i}) - phi(C | {j})

uniformly over every coalition ``C`` of the remaining players. The merged
player ``[{i, j}]`` is represented by adding both members to ``C``.
"""

from __future__ import annotations

import abc
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    EmptyModality,
    EnumerationTooLarge,
    IdenticalPlayers,
    InvalidConfig,
    ZeroSamples,
)

__all__ = [
    "DEFAULT_ENUMERATION_CAP",
    "PlayerSet",
    "CharacteristicFn",
    "AdditiveGame",
    "UnanimityGame",
    "TabularGame",
    "InteractionEstimate",
    "InteractionMap",
    "exact_interaction",
    "sampled_interaction",
    "sample_coalitions",
    "interaction_matrix",
]

DEFAULT_ENUMERATION_CAP = 22

_EXACT_CHUNK = 1 << 14
_SAMPLE_CHUNK = 1 << 13


@dataclass(frozen=True)
class PlayerSet:
    """Player universe ``[0, n)``; players ``[0, split)`` are video tokens."""

    n: int
    split: int

    def __post_init__(self):
        if self.n < 0 or not 0 <= self.split <= self.n:
            raise InvalidConfig(f"invalid player set n={self.n}, split={self.split}")

    @property
    def n_video(self) -> int:
        return self.split

    @property
    def n_text(self) -> int:
        return self.n - self.split

    def text_player(self, b: int) -> int:
        return self.split + b


class CharacteristicFn(abc.ABC):
    """Maps coalitions to real payoffs.

    Implementations must be pure: evaluating the same coalition twice gives
    bit-identical results, and concurrent calls from several threads are safe.
    """

    n_players: int

    @abc.abstractmethod
    def values(self, masks: np.ndarray) -> np.ndarray:
        """Evaluate an ``(m, n_players)`` boolean batch, returning shape ``(m,)``."""

    def value(self, mask: Sequence[bool] | np.ndarray) -> float:
        mask = np.asarray(mask, dtype=bool)
        return float(self.values(mask[None, :])[0])

    def brackets(self, i: int, j: int, base: np.ndarray) -> np.ndarray:
        """Interaction bracket for each base coalition (``i`` and ``j`` unset).

        Subclasses may override this with a faster incremental evaluation; the
        result must agree with this reference to rounding error.
        """
        m = base.shape[0]
        with_i = base.copy()
        with_i[:, i] = True
        with_j = base.copy()
        with_j[:, j] = True
        with_both = with_i.copy()
        with_both[:, j] = True
        v = self.values(np.concatenate([with_both, base, with_i, with_j])).reshape(4, m)
        return (v[0] + v[1]) - (v[2] + v[3])


class AdditiveGame(CharacteristicFn):
    """phi(C) = sum of member weights. Every pairwise interaction is zero."""

    def __init__(self, weights: Iterable[float]):
        self.weights = np.asarray(list(weights), dtype=float)
        self.n_players = self.weights.size

    def values(self, masks):
        return np.where(masks, self.weights, 0.0).sum(axis=1)


class UnanimityGame(CharacteristicFn):
    """phi(C) = 1 iff every carrier player is in C."""

    def __init__(self, n_players: int, carrier: Iterable[int]):
        self.n_players = n_players
        self.carrier = np.asarray(sorted(set(carrier)), dtype=np.intp)

    def values(self, masks):
        return masks[:, self.carrier].all(axis=1).astype(float)


class TabularGame(CharacteristicFn):
    """Game given by an explicit table of ``2**n`` coalition values.

    Coalition ``C`` is stored at index ``sum(1 << p for p in C)``.
    """

    def __init__(self, table: np.ndarray):
        table = np.asarray(table, dtype=float)
        n = int(round(math.log2(table.size))) if table.size else -1
        if n < 0 or 1 << n != table.size:
            raise InvalidConfig("table length must be a power of two")
        self.table = table
        self.n_players = n
        self._place = (np.ones(1, dtype=np.int64) << np.arange(n, dtype=np.int64))

    @classmethod
    def random(cls, n_players: int, rng: np.random.Generator) -> "TabularGame":
        return cls(rng.uniform(0.0, 1.0, size=1 << n_players))

    def values(self, masks):
        return self.table[masks.astype(np.int64) @ self._place]


@dataclass(frozen=True)
class InteractionEstimate:
    value: float
    stderr: float = 0.0
    samples: int = 0

    @property
    def exact(self) -> bool:
        return self.samples == 0

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples}


@dataclass
class InteractionMap:
    """Video-by-text matrix of pairwise interactions."""

    values: np.ndarray
    stderr: np.ndarray
    mode: str
    samples: int = 0
    level: str | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _check_pair(players: PlayerSet, i: int, j: int) -> None:
    if i == j:
        raise IdenticalPlayers(f"players i and j must differ (got {i})")
    for p in (i, j):
        if not 0 <= p < players.n:
            raise InvalidConfig(f"player index {p} out of range for n={players.n}")


def _check_fn(fn: CharacteristicFn, players: PlayerSet) -> None:
    if fn.n_players != players.n:
        raise InvalidConfig(
            f"characteristic function has {fn.n_players} players, player set has {players.n}"
        )


def _others(n: int, i: int, j: int) -> np.ndarray:
    keep = np.ones(n, dtype=bool)
    keep[[i, j]] = False
    return np.flatnonzero(keep)


def _subset_masks(others: np.ndarray, n: int, start: int, stop: int) -> np.ndarray:
    codes = np.arange(start, stop, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(others.size, dtype=np.int64)) & 1
    masks = np.zeros((stop - start, n), dtype=bool)
    masks[:, others] = bits.astype(bool)
    return masks


def exact_interaction(
    fn: CharacteristicFn,
    players: PlayerSet,
    i: int,
    j: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> InteractionEstimate:
    """Banzhaf interaction of ``i`` and ``j`` by full enumeration of the
    ``2**(n-2)`` coalitions of the other players."""
    _check_pair(players, i, j)
    _check_fn(fn, players)
    n = players.n
    if n - 2 > cap:
        raise EnumerationTooLarge(
            f"EnumerationTooLarge: n-2={n - 2} exceeds the enumeration cap {cap}"
        )
    others = _others(n, i, j)
    total = 1 << others.size
    partial = []
    for start in range(0, total, _EXACT_CHUNK):
        base = _subset_masks(others, n, start, min(total, start + _EXACT_CHUNK))
        partial.append(float(np.sum(fn.brackets(i, j, base))))
    return InteractionEstimate(math.fsum(partial) / total)


def _stream_key(seed: int, i: int, j: int) -> np.ndarray:
    if seed < 0:
        raise InvalidConfig(f"seed must be non-negative, got {seed}")
    lo, hi = sorted((i, j))
    return np.random.SeedSequence(seed, spawn_key=(lo, hi)).generate_state(2, dtype=np.uint64)


def sample_coalitions(n: int, i: int, j: int, seed: int, start: int, stop: int) -> np.ndarray:
    """Coalitions for samples ``start..stop-1`` of the (seed, pair) stream.

    Each sample owns a fixed slice of a Philox counter stream, so any
    partition of the sample range into chunks yields identical coalitions.
    Every player other than ``i`` and ``j`` is included with probability 1/2.
    """
    blocks = max(1, -(-n // 256))  # one Philox block = 4 x 64 random bits
    bg = np.random.Philox(key=_stream_key(seed, i, j), counter=[start * blocks, 0, 0, 0])
    raw = bg.random_raw((stop - start) * blocks * 4).astype("<u8")
    raw = raw.reshape(stop - start, blocks * 4)
    bits = np.unpackbits(raw.view(np.uint8), axis=1, bitorder="little")[:, :n]
    masks = bits.astype(bool)
    masks[:, [i, j]] = False
    return masks


def _map(func: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def sampled_interaction(
    fn: CharacteristicFn,
    players: PlayerSet,
    i: int,
    j: int,
    samples: int,
    seed: int,
    workers: int = 1,
) -> InteractionEstimate:
    """Unbiased Monte Carlo estimate of the pairwise Banzhaf interaction.

    Returns the sample mean of the bracket and its standard error
    (sample standard deviation over ``sqrt(samples)``). The result depends
    only on ``seed`` and the pair, never on ``workers``.
    """
    _check_pair(players, i, j)
    _check_fn(fn, players)
    if samples < 1:
        raise ZeroSamples(f"ZeroSamples: samples must be >= 1, got {samples}")
    n = players.n
    ranges = [
        (start, min(samples, start + _SAMPLE_CHUNK)) for start in range(0, samples, _SAMPLE_CHUNK)
    ]

    def run(bounds):
        return fn.brackets(i, j, sample_coalitions(n, i, j, seed, *bounds))

    values = np.concatenate(_map(run, ranges, workers))
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    return InteractionEstimate(mean, stderr, samples)


def interaction_matrix(
    fn: CharacteristicFn,
    players: PlayerSet,
    mode: str = "exact",
    budget: int = 1000,
    seed: int = 0,
    workers: int = 1,
    cap: int = DEFAULT_ENUMERATION_CAP,
    level: str | None = None,
) -> InteractionMap:
    """Interaction of every (video, text) pair.

    Pairs are computed independently, so the matrix is the same for any
    number of workers.
    """
    if players.n_video < 1 or players.n_text < 1:
        raise EmptyModality(
            f"EmptyModality: need video and text players (got {players.n_video}, {players.n_text})"
        )
    if mode not in ("exact", "sampled"):
        raise InvalidConfig(f"mode must be 'exact' or 'sampled', got {mode!r}")
    if mode == "exact" and players.n - 2 > cap:
        raise EnumerationTooLarge(
            f"EnumerationTooLarge: n-2={players.n - 2} exceeds the enumeration cap {cap}"
        )
    pairs = [(a, b) for a in range(players.n_video) for b in range(players.n_text)]

    def run(pair):
        a, b = pair
        j = players.text_player(b)
        if mode == "exact":
            return exact_interaction(fn, players, a, j, cap=cap)
        return sampled_interaction(fn, players, a, j, budget, seed)

    results = _map(run, pairs, workers)
    shape = (players.n_video, players.n_text)
    values = np.array([r.value for r in results]).reshape(shape)
    stderr = np.array([r.stderr for r in results]).reshape(shape)
    return InteractionMap(
        values, stderr, mode, samples=0 if mode == "exact" else budget, level=level
    )
