"""Compiled enumeration passes over vertex subsets.

Each pass returns a histogram of induced-subgraph codes: bit ``k`` of a code is
set when the ``k``-th vertex pair (lexicographic order, see ``graph.pair_index``)
is an edge. Tallies are integers reduced in a fixed order, so the result does
not depend on the thread count.
"""

from __future__ import annotations

import numpy as np
import numba
from numba import njit, prange



@njit(cache=True, parallel=True)
def triad_histogram(adj):
    n = adj.shape[0]
    rows = np.zeros((n, 8), dtype=np.int64)
    for a in prange(n):
        for b in range(a + 1, n):
            ab = adj[a, b]
            for c in range(b + 1, n):
                code = ab | (adj[a, c] << 1) | (adj[b, c] << 2)
                rows[a, code] += 1
    return rows.sum(axis=0)


@njit(cache=True, parallel=True)
def tetrad_histogram(adj):
    n = adj.shape[0]
    rows = np.zeros((n, 64), dtype=np.int64)
    for a in prange(n):
        for b in range(a + 1, n):
            c0 = adj[a, b]
            for c in range(b + 1, n):
                c1 = c0 | (adj[a, c] << 1) | (adj[b, c] << 3)
                for d in range(c + 1, n):
                    code = c1 | (adj[a, d] << 2) | (adj[b, d] << 4) | (adj[c, d] << 5)
                    rows[a, code] += 1
    return rows.sum(axis=0)


@njit(cache=True, parallel=True)
def pentad_histogram(adj):
    # pair order on (0..4): 01 02 03 04 12 13 14 23 24 34
    n = adj.shape[0]
    rows = np.zeros((n, 1024), dtype=np.int64)
    for a in prange(n):
        for b in range(a + 1, n):
            c0 = adj[a, b]
            for c in range(b + 1, n):
                c1 = c0 | (adj[a, c] << 1) | (adj[b, c] << 4)
                for d in range(c + 1, n):
                    c2 = c1 | (adj[a, d] << 2) | (adj[b, d] << 5) | (adj[c, d] << 7)
                    for e in range(d + 1, n):
                        code = c2 | (adj[a, e] << 3) | (adj[b, e] << 6) | (adj[c, e] << 8) | (adj[d, e] << 9)
                        rows[a, code] += 1
    return rows.sum(axis=0)


@njit(cache=True)
def _subset_codes(adj, idx, pair_u, pair_v, out):
    # codes of the induced subgraphs on the rows of idx (one subset per row)
    m = idx.shape[0]
    npairs = pair_u.shape[0]
    for r in range(m):
        code = 0
        for k in range(npairs):
            if adj[idx[r, pair_u[k]], idx[r, pair_v[k]]]:
                code |= 1 << k
        out[r] = code


def subset_codes(adj: np.ndarray, idx: np.ndarray, pairs) -> np.ndarray:
    """Induced-subgraph code of each row of ``idx`` (rows are vertex tuples)."""
    pu = np.array([u for u, _ in pairs], dtype=np.int64)
    pv = np.array([v for _, v in pairs], dtype=np.int64)
    out = np.empty(idx.shape[0], dtype=np.int64)
    _subset_codes(np.ascontiguousarray(adj, dtype=np.uint8), np.ascontiguousarray(idx, dtype=np.int64), pu, pv, out)
    return out


@njit(cache=True)
def _next_combination(comb, n):
    p = comb.shape[0]
    i = p - 1
    while i >= 0 and comb[i] == n - p + i:
        i -= 1
    if i < 0:
        return False
    comb[i] += 1
    for j in range(i + 1, p):
        comb[j] = comb[j - 1] + 1
    return True


@njit(cache=True)
def subset_histogram(adj, p, pair_u, pair_v):
    """Histogram of induced codes over all ``p``-subsets (generic, any ``p``)."""
    n = adj.shape[0]
    npairs = pair_u.shape[0]
    hist = np.zeros(1 << npairs, dtype=np.int64)
    if n < p:
        return hist
    comb = np.arange(p)
    while True:
        code = 0
        for k in range(npairs):
            if adj[comb[pair_u[k]], comb[pair_v[k]]]:
                code |= 1 << k
        hist[code] += 1
        if not _next_combination(comb, n):
            break
    return hist


def set_threads(k: int | None) -> None:
    if k:
        numba.set_num_threads(max(1, min(int(k), numba.config.NUMBA_NUM_THREADS)))
