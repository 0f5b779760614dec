"""Synthetic graphs for demos, tests and timing checks."""

from __future__ import annotations

import numpy as np

from .graph import Graph, from_keys


def _pair_keys(u: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    keep = u != v
    u, v = u[keep], v[keep]
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    return np.unique(lo.astype(np.int64) * n + hi)


def gnp(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi graph; exact Bernoulli sampling over all pairs (fine for n in the hundreds)."""
    iu, ju = np.triu_indices(n, 1)
    pick = rng.random(iu.size) < p
    return from_keys(iu[pick].astype(np.int64) * n + ju[pick], n)


def planted_keys(n: int, block_size: int, avg_in: float, avg_out: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Edge keys of a planted partition: contiguous blocks of ``block_size`` vertices,
    about ``avg_in`` neighbours inside the block and ``avg_out`` outside."""
    m_in = int(round(n * avg_in / 2))
    m_out = int(round(n * avg_out / 2))
    u = rng.integers(0, n, m_in)
    block = u // block_size
    lo = block * block_size
    hi = np.minimum(lo + block_size, n)
    v = lo + (rng.random(m_in) * (hi - lo)).astype(np.int64)
    a = rng.integers(0, n, m_out)
    b = rng.integers(0, n, m_out)
    return _pair_keys(np.concatenate([u, a]), np.concatenate([v, b]), n)


def planted_partition(n: int, block_size: int, avg_in: float, avg_out: float,
                      rng: np.random.Generator) -> Graph:
    return from_keys(planted_keys(n, block_size, avg_in, avg_out, rng), n)


def layer_pair_with_core(n: int, block_size: int, avg_degree: float, shared: float,
                         rng: np.random.Generator) -> tuple[Graph, Graph]:
    """Two layers over one universe sharing a fraction ``shared`` of their edges.

    Both layers follow the same planted blocks, so their intersection keeps
    the community structure.
    """
    core = planted_keys(n, block_size, avg_degree * shared * 0.9, avg_degree * shared * 0.1, rng)
    rest = avg_degree * (1 - shared)
    k1 = np.union1d(core, planted_keys(n, block_size, rest * 0.9, rest * 0.1, rng))
    k2 = np.union1d(core, planted_keys(n, block_size, rest * 0.9, rest * 0.1, rng))
    return from_keys(k1, n), from_keys(k2, n)
