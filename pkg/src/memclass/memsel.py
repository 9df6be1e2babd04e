"""Choosing memories: coverage objective, randomized initialization,
restart + single-swap local search, and an exhaustive reference search."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import MemorySet
from .kernels import cover_score_numpy, local_search

FULL_MATRIX_LIMIT = 2000
EXHAUSTIVE_LIMIT = 10**6


class SearchSizeError(ValueError):
    pass


@dataclass(frozen=True)
class SearchParams:
    zg: int = 5  # global restarts
    zl: int = 100  # local swap proposals per restart
    b_t: float = 0.5
    seed: int = 0
    q: int | None = None  # force this many memories (see learn_memories)

    def __post_init__(self):
        if self.zg < 1:
            raise ValueError("zg must be at least 1")
        if self.zl < 0:
            raise ValueError("zl must be non-negative")
        if not 0.0 < self.b_t < 1.0:
            raise ValueError("b_t must lie strictly inside (0, 1)")
        if self.q is not None and self.q < 1:
            raise ValueError("q must be at least 1")

    @classmethod
    def from_dict(cls, d):
        return cls(zg=int(d.get("zg", 5)), zl=int(d.get("zl", 100)), b_t=float(d.get("b_t", 0.5)),
                   seed=int(d.get("seed", 0)), q=d.get("q"))

    def to_dict(self):
        out = {"zg": self.zg, "zl": self.zl, "b_t": self.b_t, "seed": self.seed}
        if self.q is not None:
            out["q"] = self.q
        return out


@dataclass(frozen=True)
class RestartTrace:
    initial_objective: float
    final_objective: float
    accepted: int
    q: int
    objectives: tuple = field(default=(), repr=False)  # after every proposal


@dataclass(frozen=True)
class SearchTrace:
    restarts: tuple
    best_objective: float
    best_memories: tuple

    def to_dict(self):
        return {
            "restarts": [
                {"initial": r.initial_objective, "final": r.final_objective, "accepted": r.accepted, "q": r.q}
                for r in self.restarts
            ],
            "best_objective": self.best_objective,
            "best_memories": list(self.best_memories),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


class SimilarityCache:
    """Rows ``s(x_i, .)`` over embedded data.

    Up to ``full_limit`` points the whole matrix is computed once; above it
    rows are computed on first use and memoized.
    """

    def __init__(self, sim, feats, full_limit=FULL_MATRIX_LIMIT):
        self.sim = sim
        self.feats = np.asarray(feats)
        self.n = len(self.feats)
        self.matrix = sim.score_matrix(self.feats, self.feats) if self.n <= full_limit else None
        self._rows = {}

    def row(self, i):
        if self.matrix is not None:
            return self.matrix[i]
        r = self._rows.get(i)
        if r is None:
            r = self.sim.score_matrix(self.feats[i:i + 1], self.feats)[0]
            self._rows[i] = r
        return r

    def rows(self, indices):
        return np.stack([self.row(int(i)) for i in indices])

    @property
    def source(self):
        """What :func:`memclass.kernels.local_search` should search over."""
        return self.matrix if self.matrix is not None else self.row


def _cache_for(data, sim, cache, feats=None, threads=None):
    if cache is not None:
        return cache
    if feats is None:
        feats = sim.embed_dataset(data, threads=threads)
    return SimilarityCache(sim, feats)


def clustering_objective(memories, data, sim, cache=None) -> float:
    """``sum_i max_j s(m_j, x_i)`` over every datapoint."""
    memories = list(memories)
    if not memories:
        raise ValueError("memory list is empty")
    if any(not 0 <= m < data.n for m in memories):
        raise ValueError("memory index out of range")
    cache = _cache_for(data, sim, cache)
    return cover_score_numpy(cache.rows(memories))


def generate_initial_memories(data, sim, b_t, rng, cache=None):
    """Pick random uncovered points as memories until every point is covered.

    Each pick removes every still-uncovered point with similarity above
    ``b_t`` to it, and always removes the pick itself.
    """
    if not 0.0 < b_t < 1.0:
        raise ValueError("b_t must lie strictly inside (0, 1)")
    if data.n == 0:
        raise ValueError("dataset is empty")
    cache = _cache_for(data, sim, cache)
    remaining = np.ones(cache.n, dtype=bool)
    memories = []
    while remaining.any():
        candidates = np.flatnonzero(remaining)
        m = int(candidates[rng.integers(len(candidates))])
        remaining &= ~(cache.row(m) > b_t)
        remaining[m] = False
        memories.append(m)
    return memories


def _fit_to_q(init, q, n, rng):
    if len(init) >= q:
        return init[:q]
    pool = np.setdiff1d(np.arange(n), init)
    extra = rng.choice(pool, size=q - len(init), replace=False)
    return list(init) + [int(i) for i in extra]


def restart_rng(seed, restart):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x6D656D, int(restart)])))


def learn_memories(data, sim, p: SearchParams, cache=None, feats=None, threads=None):
    """Randomized medoid search over q-subsets (single-swap neighborhoods).

    Each of ``p.zg`` restarts initializes with
    :func:`generate_initial_memories`, then tries ``p.zl`` uniformly random
    single swaps, keeping a swap only if it strictly raises the objective.
    The best restart wins (first one on ties). When ``p.q`` is set, every
    restart's initial set is cut to its first ``q`` picks or padded with
    random non-members.
    """
    if data.n == 0:
        raise ValueError("dataset is empty")
    cache = _cache_for(data, sim, cache, feats, threads)
    n = cache.n
    if p.q is not None and p.q > n:
        raise ValueError(f"q={p.q} exceeds the dataset size {n}")
    restarts = []
    best = None
    for g in range(p.zg):
        rng = restart_rng(p.seed, g)
        init = generate_initial_memories(data, sim, p.b_t, rng, cache)
        if p.q is not None:
            init = _fit_to_q(init, p.q, n, rng)
        q = len(init)
        nonmembers = np.setdiff1d(np.arange(n), init)
        steps = p.zl if len(nonmembers) else 0
        positions = rng.integers(0, q, size=steps)
        picks = rng.integers(0, max(len(nonmembers), 1), size=steps)
        members, final, accepted, scores = local_search(cache.source, init, nonmembers, positions, picks)
        members = [int(m) for m in members]
        restarts.append(RestartTrace(float(scores[0]), float(final), int(accepted), q, tuple(float(s) for s in scores)))
        if best is None or final > best[0]:
            best = (float(final), members)
    trace = SearchTrace(tuple(restarts), best[0], tuple(best[1]))
    return MemorySet.uniform(best[1], p.b_t), trace


def exhaustive_memories(data, sim, q, cache=None):
    """The q-subset with the highest objective (lexicographically first on ties)."""
    cache = _cache_for(data, sim, cache)
    n = cache.n
    if not 1 <= q <= n:
        raise ValueError(f"q must lie in [1, {n}]")
    if math.comb(n, q) > EXHAUSTIVE_LIMIT:
        raise SearchSizeError(f"C({n}, {q}) = {math.comb(n, q)} subsets exceeds the {EXHAUSTIVE_LIMIT} guard")
    rows = cache.rows(range(n))
    best, best_set = -math.inf, None
    for combo in itertools.combinations(range(n), q):
        score = cover_score_numpy(rows[list(combo)])
        if score > best:
            best, best_set = score, combo
    return list(best_set)
