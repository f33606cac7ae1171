"""Cycle-by-cycle sampling of the measurement chain and block efficiency statistics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .engines import HarmonicEngine, ScaleInvariantEngine, TwoLevelEngine, thermal_weights
from .errors import EstimationError, ParameterError
from .joint import harmonic_transitions

__all__ = [
    "CycleSample",
    "CycleSampler",
    "BlockEstimate",
    "sample_cycle",
    "sample_blocks",
    "empirical_rate",
    "BLOCK_CHUNK",
]

# blocks per RNG substream; fixed so results do not depend on the thread count
BLOCK_CHUNK = 4096


@dataclass(frozen=True)
class CycleSample:
    w1: float
    q2: float
    w3: float

    @property
    def w(self) -> float:
        return self.w1 + self.w3


class CycleSampler:
    """Inverse-CDF sampler of ``(n, m, k, l)`` level indices for one engine.

    Harmonic transition rows are truncated to the Gibbs level count and
    renormalized; the discarded mass sits at levels with negligible
    occupation.
    """

    def __init__(self, engine, baths, n_levels=None):
        self.engine = engine
        self.baths = baths
        if isinstance(engine, TwoLevelEngine):
            cold, hot = thermal_weights(engine, baths)
            trans = np.array([[engine.u, engine.v], [engine.v, engine.u]])
            e0, et = engine.energies()
        elif isinstance(engine, HarmonicEngine):
            cold, hot = thermal_weights(engine, baths, n_levels)
            trans = harmonic_transitions(engine.q_star, cold.size).entries
            e0, et = engine.energies(cold.size)
        elif isinstance(engine, ScaleInvariantEngine):
            cold, hot = thermal_weights(engine, baths)
            trans = np.eye(cold.size)
            e0, et = engine.energies()
        else:
            raise ParameterError(f"unknown engine type {type(engine).__name__}")
        self.lattice = not isinstance(engine, ScaleInvariantEngine)
        self.e0, self.et = e0, et
        self.cold_cum = np.cumsum(cold)[None, :]
        self.hot_cum = np.cumsum(hot)[None, :]
        self.trans_cum = np.cumsum(trans, axis=1)

    def indices(self, rng, size):
        """Arrays ``n, m, k, l`` of length ``size``."""
        u = rng.random((4, size))
        zero = np.zeros(size, dtype=np.int64)
        n = _kernels.inverse_cdf(self.cold_cum, zero, u[0])
        m = _kernels.inverse_cdf(self.trans_cum, n, u[1])
        k = _kernels.inverse_cdf(self.hot_cum, zero, u[2])
        l = _kernels.inverse_cdf(self.trans_cum, k, u[3])
        return n, m, k, l

    def energies(self, n, m, k, l):
        """Work in expansion, hot heat and work in compression."""
        return self.et[m] - self.e0[n], self.et[k] - self.et[m], self.e0[l] - self.et[k]


def sample_cycle(engine, baths, rng, sampler=None) -> CycleSample:
    """One cycle: cold Gibbs draw, expansion jump, hot Gibbs draw, compression jump."""
    sampler = sampler or CycleSampler(engine, baths)
    n, m, k, l = sampler.indices(rng, 1)
    w1, q2, w3 = sampler.energies(n, m, k, l)
    return CycleSample(float(w1[0]), float(q2[0]), float(w3[0]))


@dataclass
class BlockEstimate:
    s: int
    n_blocks: int
    seed: int
    q2_sum: np.ndarray
    w_sum: np.ndarray
    eta_values: np.ndarray  # included blocks only
    excluded: int
    edges: np.ndarray
    counts: np.ndarray  # histogram of eta_values; values outside the edges are dropped
    metadata: dict = field(default_factory=dict)

    @property
    def included(self) -> int:
        return self.eta_values.size

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def _block_chunk(sampler, s, n_blocks, seed_seq):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    n, m, k, l = sampler.indices(rng, s * n_blocks)
    if sampler.lattice:
        dq0, dqt = sampler.engine.quanta
        d1 = (k - m).reshape(n_blocks, s).sum(axis=1)
        d2 = (l - n).reshape(n_blocks, s).sum(axis=1)
        q2 = dqt * d1
        w = -dqt * d1 + dq0 * d2 + 0.0
        return q2.astype(float), w.astype(float)
    w1, q2, w3 = sampler.energies(n, m, k, l)
    return q2.reshape(n_blocks, s).sum(axis=1), (w1 + w3).reshape(n_blocks, s).sum(axis=1)


def sample_blocks(engine, baths, s, n_blocks, seed=0, threads=1, bins=101,
                  eta_range=(-0.5, 1.5), n_levels=None) -> BlockEstimate:
    """Sample ``n_blocks`` blocks of ``s`` cycles and histogram their efficiencies.

    The block efficiency is ``-sum(W) / sum(Q2)``; blocks with
    ``sum(Q2) <= 0`` are excluded and counted.  Each chunk of
    :data:`BLOCK_CHUNK` blocks draws from its own spawned substream, so the
    output depends only on ``seed``.
    """
    if int(s) != s or s < 1:
        raise ParameterError(f"block length must be a positive integer, got {s!r}")
    if int(n_blocks) != n_blocks or n_blocks < 1:
        raise ParameterError(f"block count must be a positive integer, got {n_blocks!r}")
    s, n_blocks = int(s), int(n_blocks)
    sampler = CycleSampler(engine, baths, n_levels)
    sizes = [min(BLOCK_CHUNK, n_blocks - i) for i in range(0, n_blocks, BLOCK_CHUNK)]
    streams = np.random.SeedSequence(int(seed)).spawn(len(sizes))
    jobs = list(zip(sizes, streams))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            parts = list(pool.map(lambda job: _block_chunk(sampler, s, *job), jobs))
    else:
        parts = [_block_chunk(sampler, s, *job) for job in jobs]
    q2 = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts])
    ok = q2 > 0
    eta = -w[ok] / q2[ok]
    edges = np.linspace(eta_range[0], eta_range[1], int(bins) + 1)
    counts, _ = np.histogram(eta, bins=edges)
    return BlockEstimate(s, n_blocks, int(seed), q2, w, eta, int((~ok).sum()), edges, counts)


def empirical_rate(blocks: BlockEstimate, min_count=1):
    """Per-bin ``(center, -ln(p)/s, stderr, count)`` with ``p`` the fraction of all blocks.

    Bins with fewer than ``min_count`` blocks are omitted.  The standard
    error propagates the binomial error of ``p`` through the logarithm.
    """
    if blocks.included == 0:
        raise EstimationError("every block had nonpositive heat input")
    total = blocks.n_blocks
    rows = []
    for c, count in zip(blocks.centers, blocks.counts):
        if count < max(1, min_count):
            continue
        p = count / total
        se_p = math.sqrt(p * (1.0 - p) / total)
        rows.append((float(c), -math.log(p) / blocks.s, se_p / (p * blocks.s), int(count)))
    return rows
