"""Evaluation-time caches: interpolated unigram/class caches over recent
history with optional recency decay, and cross-sentence state carryover.

Caches never touch model parameters; they only reshape the scoring
distribution.  The recency-weighted cache counts are renormalized over the
vocabulary so the interpolated output stays a probability distribution.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .models import HiddenState, zero_state

DECAY_MODES = ("constant", "linear", "exponential")


@dataclass
class CacheConfig:
    lam: float = 0.5          # weight on the model; 1.0 disables the cache
    length: int = 100         # number of recent words kept
    decay: str = "constant"
    gamma: float = 0.9        # exponential decay base
    mode: str = "word"        # "word" or "class"

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"interpolation weight must be in [0,1], got {self.lam}")
        if self.length < 1:
            raise ValueError(f"cache length must be >= 1, got {self.length}")
        if self.decay not in DECAY_MODES:
            raise ValueError(f"decay must be one of {DECAY_MODES}, got {self.decay!r}")
        if self.mode not in ("word", "class"):
            raise ValueError(f"cache mode must be word or class, got {self.mode!r}")


class WordCache:
    """Ring of the last <= N indices; age 1 is the most recent entry."""

    def __init__(self, length: int):
        self._ring: deque[int] = deque(maxlen=length)

    def push(self, index: int):
        self._ring.appendleft(int(index))

    def clear(self):
        self._ring.clear()

    def __len__(self):
        return len(self._ring)

    def entries(self) -> list[int]:
        """Cached indices ordered by age, newest first."""
        return list(self._ring)


def _rho(n: int, config: CacheConfig) -> np.ndarray:
    j = np.arange(1, n + 1, dtype=np.float64)
    if config.decay == "constant":
        return np.ones(n)
    if config.decay == "linear":
        return 1.0 - (j - 1.0) / n
    return config.gamma ** (j - 1.0)


def cache_probability(cache: WordCache, index: int, config: CacheConfig) -> float:
    """Recency-weighted fraction of cache slots holding ``index``, normalized
    so the cache factor sums to one over the vocabulary.  Empty cache: 0."""
    n = len(cache)
    if n == 0:
        return 0.0
    rho = _rho(n, config)
    hits = np.fromiter((1.0 if e == index else 0.0 for e in cache.entries()),
                       dtype=np.float64, count=n)
    return float((rho * hits).sum() / rho.sum())


# A class cache is the same recency statistic over class indices.
class_cache_probability = cache_probability


def cache_distribution(cache: WordCache, k: int, config: CacheConfig) -> np.ndarray:
    """Dense normalized cache factor over k symbols (zeros when empty)."""
    out = np.zeros(k)
    n = len(cache)
    if n == 0:
        return out
    rho = _rho(n, config)
    np.add.at(out, cache.entries(), rho)
    return out / rho.sum()


def interpolate(p_model: float, p_cache: float, lam: float) -> float:
    """Convex combination of the model and cache probabilities."""
    return lam * p_model + (1.0 - lam) * p_cache


def carryover_initial_state(previous: HiddenState | None, document_start: bool,
                            n_h: int, with_cell: bool = False) -> HiddenState:
    """Zero state at a document start, otherwise the stored final state of the
    directly preceding sentence."""
    if document_start or previous is None:
        return zero_state(n_h, with_cell)
    return previous.copy()
