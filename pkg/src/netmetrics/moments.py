"""Subgraph densities, graphlet stitching, covariance of densities, transitivity
inference and degree-moment formulas.

Counting works on histograms of induced-subgraph codes (see ``_kernels``): one
pass over all ``p``-subsets yields every order-``p`` statistic at once, and all
arithmetic before the final normalization is on exact integers.
"""

from __future__ import annotations

import itertools
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from ._rng import stream
from .graph import (
    Graph,
    Graphlet,
    _perm_maps,
    canonical_code,
    graphlet,
    labeled_copies,
    name_of,
    pair_index,
)

DEFAULT_SUBSAMPLE = 1_000_000
MIN_SUBSAMPLE = 10_000
MAX_COUNT_ORDER = 6
MAX_EXACT_STITCH_ORDER = 6


class MomentWarning(UserWarning):
    """Noisy or ill-conditioned moment estimate (small subsample, negative variance)."""


def _as_graphlet(s) -> Graphlet:
    return s if isinstance(s, Graphlet) else graphlet(str(s))


def _label(s: Graphlet) -> str:
    return s.name or name_of(s.p, s.code) or f"p{s.p}:{s.code}"


def as_adjacency(g) -> np.ndarray:
    """Symmetric ``int64`` 0/1 adjacency of an undirected graph or array."""
    if isinstance(g, Graph):
        if g.directed:
            raise ValueError("subgraph moments are defined for undirected graphs")
        a = g.adjacency()
    else:
        a = np.asarray(g)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if np.any(np.diagonal(a)):
            raise ValueError("adjacency has self-loops")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
    return np.ascontiguousarray(a, dtype=np.int64)


# ---------------------------------------------------------------------------
# code tables

def code_histogram(adj: np.ndarray, p: int) -> np.ndarray:
    """Counts of induced-subgraph codes over all ``p``-subsets (sorted vertex order)."""
    if p == 3:
        return _kernels.triad_histogram(adj)
    if p == 4:
        return _kernels.tetrad_histogram(adj)
    if p == 5:
        return _kernels.pentad_histogram(adj)
    pairs = pair_index(p)
    pu = np.array([u for u, _ in pairs], dtype=np.int64)
    pv = np.array([v for _, v in pairs], dtype=np.int64)
    return _kernels.subset_histogram(adj, p, pu, pv)


@lru_cache(maxsize=None)
def _code_bits(p: int) -> np.ndarray:
    npairs = p * (p - 1) // 2
    codes = np.arange(1 << npairs, dtype=np.int64)
    return ((codes[:, None] >> np.arange(npairs)) & 1).astype(np.int64)


def _permuted_all(p: int, perm_rows: np.ndarray) -> np.ndarray:
    """Images of every code under each permutation row: shape (n_codes, n_rows)."""
    return _code_bits(p) @ (np.int64(1) << perm_rows.T)


@lru_cache(maxsize=None)
def canonical_table(p: int) -> np.ndarray:
    """Canonical (minimal) code of every code of order ``p``."""
    maps = _perm_maps(p)
    best = None
    for start in range(0, maps.shape[0], 120):
        chunk = _permuted_all(p, maps[start:start + 120]).min(axis=1)
        best = chunk if best is None else np.minimum(best, chunk)
    best.setflags(write=False)
    return best


@lru_cache(maxsize=None)
def injective_table(p: int, code: int) -> np.ndarray:
    """For every host code, the number of labeled copies of ``code`` it contains."""
    copies = np.array(sorted(labeled_copies(p, code)), dtype=np.int64)
    host = np.arange(1 << (p * (p - 1) // 2), dtype=np.int64)
    out = np.zeros(host.shape[0], dtype=np.int64)
    for start in range(0, copies.shape[0], 64):
        c = copies[start:start + 64]
        out += ((host[:, None] & c[None, :]) == c[None, :]).sum(axis=1)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# counting

@dataclass(frozen=True)
class MomentEstimate:
    """Induced and injective counts of one graphlet, with their normalizations."""

    name: str
    p: int
    induced_count: int
    injective_count: int
    n_subsets: int
    iso_count: int

    @property
    def induced_density(self) -> float:
        return self.induced_count / (self.n_subsets * self.iso_count)

    @property
    def injective_density(self) -> float:
        return self.injective_count / (self.n_subsets * self.iso_count)

    @property
    def induced_share(self) -> float:
        """Fraction of ``p``-subsets whose induced subgraph is of this type."""
        return self.induced_count / self.n_subsets

    @property
    def induced_density_exact(self) -> Fraction:
        return Fraction(self.induced_count, self.n_subsets * self.iso_count)

    @property
    def injective_density_exact(self) -> Fraction:
        return Fraction(self.injective_count, self.n_subsets * self.iso_count)

    @property
    def induced_share_exact(self) -> Fraction:
        return Fraction(self.induced_count, self.n_subsets)


def count_patterns(g, patterns: Iterable = ("triangle", "twostar"), *, histograms: dict | None = None) -> dict[str, MomentEstimate]:
    """Exact induced and injective counts for each pattern.

    One enumeration pass is made per distinct pattern order. ``histograms`` may
    carry precomputed code histograms keyed by order; computed ones are added.
    """
    adj = as_adjacency(g)
    n = adj.shape[0]
    hist = {} if histograms is None else histograms
    out: dict[str, MomentEstimate] = {}
    for pat in patterns:
        s = _as_graphlet(pat)
        p = s.p
        if p < 2 or p > MAX_COUNT_ORDER:
            raise ValueError(f"pattern order must be in [2, {MAX_COUNT_ORDER}]")
        if n < p:
            raise ValueError(f"graph has {n} nodes, pattern {_label(s)} needs {p}")
        if p not in hist:
            if p == 2:
                e = int(np.triu(adj, 1).sum())
                hist[2] = np.array([math.comb(n, 2) - e, e], dtype=np.int64)
            else:
                hist[p] = code_histogram(adj, p)
        h = hist[p]
        canon = canonical_code(p, s.code)
        induced = int(h[canonical_table(p) == canon].sum())
        injective = int(h @ injective_table(p, s.code))
        out[_label(s)] = MomentEstimate(
            name=_label(s), p=p, induced_count=induced, injective_count=injective,
            n_subsets=math.comb(n, p), iso_count=len(labeled_copies(p, canon)),
        )
    return out


def triad_census(g) -> dict[str, MomentEstimate]:
    """The four order-3 isomorphism classes."""
    return count_patterns(g, ("empty3", "one-edge", "twostar", "triangle"))


# ---------------------------------------------------------------------------
# stitching

@dataclass(frozen=True)
class StitchEntry:
    """One isomorphism class of stitchings; free pairs are left unconstrained."""

    graphlet: Graphlet
    free_pairs: frozenset
    multiplicity: int

    @property
    def name(self) -> str:
        return _label(self.graphlet)


@dataclass(frozen=True)
class StitchingMultiset:
    """Non-isomorphic stitchings of ``R`` and ``S`` sharing ``q`` vertices.

    ``R`` sits on vertices ``0..p-1`` and ``S`` on ``p-q..2p-q-1``. ``placements``
    holds the codes (over all pairs of the ``2p-q`` vertices, free pairs zero)
    of every label-consistent pair of copies.
    """

    R: Graphlet
    S: Graphlet
    q: int
    entries: tuple
    placements: frozenset = field(repr=False)

    @property
    def p(self) -> int:
        return self.R.p

    @property
    def m(self) -> int:
        return 2 * self.R.p - self.q

    @property
    def iso_product(self) -> int:
        return self.R.iso_count() * self.S.iso_count()

    @property
    def free_pairs(self) -> list[tuple[int, int]]:
        p, q = self.p, self.q
        return [(a, b) for a in range(p - q) for b in range(p, self.m)]

    @property
    def constrained_mask(self) -> int:
        free = set(self.free_pairs)
        return sum(1 << k for k, pr in enumerate(pair_index(self.m)) if pr not in free)

    @property
    def total(self) -> int:
        return sum(e.multiplicity for e in self.entries)

    def counts(self) -> Counter:
        c: Counter = Counter()
        for e in self.entries:
            c[e.name] += e.multiplicity
        return c

    def er_value(self, rho: float) -> float:
        """Stitching frequency under Erdos-Renyi(``rho``), from the placements."""
        n_constrained = bin(self.constrained_mask).count("1")
        tot = sum(rho ** bin(c).count("1") * (1 - rho) ** (n_constrained - bin(c).count("1")) for c in self.placements)
        return tot / self.iso_product


def _embed(p: int, m: int, offset: int, code: int) -> int:
    pos = {pr: k for k, pr in enumerate(pair_index(m))}
    out = 0
    for k, (a, b) in enumerate(pair_index(p)):
        if code >> k & 1:
            out |= 1 << pos[(a + offset, b + offset)]
    return out


@lru_cache(maxsize=None)
def _stitching(rc: tuple, sc: tuple, q: int) -> StitchingMultiset:
    R = Graphlet(rc[0], frozenset(rc[1]), rc[2])
    S = Graphlet(sc[0], frozenset(sc[1]), sc[2])
    p = R.p
    m = 2 * p - q
    overlap = [(a, b) for a, b in pair_index(m) if p - q <= a and b < p]
    pos = {pr: k for k, pr in enumerate(pair_index(m))}
    omask = sum(1 << pos[pr] for pr in overlap)
    r_emb = [_embed(p, m, 0, c) for c in labeled_copies(p, R.code)]
    s_emb = [_embed(p, m, p - q, c) for c in labeled_copies(p, S.code)]
    placements = {r | s for r in r_emb for s in s_emb if (r & omask) == (s & omask)}

    free = [(a, b) for a in range(p - q) for b in range(p, m)]
    fcode = sum(1 << pos[pr] for pr in free)
    fimg = _permuted_codes_vec(m, fcode)
    classes: dict[tuple, list[int]] = {}
    for c in sorted(placements):
        uimg = _permuted_codes_vec(m, c)
        k = np.lexsort((fimg, uimg))[0]
        classes.setdefault((int(uimg[k]), int(fimg[k])), []).append(c)
    pairs = pair_index(m)
    entries = []
    for (_, _), members in sorted(classes.items()):
        rep = members[0]
        edges = frozenset(pairs[k] for k in range(len(pairs)) if rep >> k & 1)
        g = Graphlet(m, edges, name_of(m, rep))
        entries.append(StitchEntry(g, frozenset(free), len(members)))
    return StitchingMultiset(R, S, q, tuple(entries), frozenset(placements))


def _permuted_codes_vec(p: int, code: int) -> np.ndarray:
    maps = _perm_maps(p)
    bits = np.array([(code >> k) & 1 for k in range(maps.shape[1])], dtype=np.int64)
    return (bits[None, :] << maps).sum(axis=1)


def stitching_multiset(R, S, q: int) -> StitchingMultiset:
    """Group label-consistent placements of ``R`` and ``S`` by isomorphism."""
    R, S = _as_graphlet(R), _as_graphlet(S)
    if R.p != S.p:
        raise ValueError("stitched graphlets must have equal order")
    if R.p > 4:
        raise ValueError("stitching supports graphlets of order at most 4")
    if not 1 <= q <= R.p:
        raise ValueError(f"overlap q={q} must lie in [1, {R.p}]")
    key = lambda s: (s.p, tuple(sorted(s.edges)), _label(s))
    return _stitching(key(R), key(S), q)


@lru_cache(maxsize=None)
def _match_table(ms: StitchingMultiset) -> np.ndarray:
    """For each sorted-subset code, the number of vertex orderings that match."""
    m = ms.m
    maps = _perm_maps(m)
    targets = np.array(sorted(ms.placements), dtype=np.int64)
    mask = np.int64(ms.constrained_mask)
    table = np.zeros(1 << (m * (m - 1) // 2), dtype=np.int64)
    for start in range(0, maps.shape[0], 120):
        img = _permuted_all(m, maps[start:start + 120]) & mask
        table += np.isin(img, targets).sum(axis=1)
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class StitchFrequency:
    value: float
    se: float
    n_tuples: int
    method: str


def _random_tuples(n: int, m: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform ordered ``m``-tuples of distinct vertices."""
    out = np.empty((0, m), dtype=np.int64)
    while out.shape[0] < size:
        need = size - out.shape[0]
        if n >= 4 * m * m:
            draw = rng.integers(0, n, size=(int(need * 1.2) + 16, m))
            s = np.sort(draw, axis=1)
            draw = draw[np.all(s[:, 1:] != s[:, :-1], axis=1)]
        else:
            draw = np.argsort(rng.random((min(need, 200_000), n)), axis=1)[:, :m]
        out = np.vstack([out, draw[:need]])
    return out


def stitching_frequency(g, ms: StitchingMultiset, method: str = "exact", M: int = DEFAULT_SUBSAMPLE,
                        seed=None, *, histograms: dict | None = None) -> StitchFrequency:
    """Average match probability of the stitching over ordered ``(2p-q)``-tuples,
    normalized by ``|iso(R)||iso(S)|``.

    ``exact`` enumerates every subset (feasible while ``2p-q <= 6``);
    ``subsample`` draws ``M`` uniform tuples and reports a standard error.
    """
    adj = as_adjacency(g)
    n, m = adj.shape[0], ms.m
    if n < m:
        raise ValueError(f"stitching over {m} vertices needs at least {m} nodes, graph has {n}")
    if method == "exact":
        if m > MAX_EXACT_STITCH_ORDER:
            raise ValueError(f"exact stitching is limited to {MAX_EXACT_STITCH_ORDER} vertices; use subsample")
        hist = {} if histograms is None else histograms
        if m not in hist:
            hist[m] = code_histogram(adj, m)
        hits = int(hist[m] @ _match_table(ms))
        denom = math.comb(n, m) * math.factorial(m) * ms.iso_product
        return StitchFrequency(hits / denom, 0.0, math.comb(n, m) * math.factorial(m), "exact")
    if method == "subsample":
        if M < MIN_SUBSAMPLE:
            warnings.warn(f"subsample of {M} tuples is below {MIN_SUBSAMPLE}; estimate is noisy", MomentWarning, stacklevel=2)
        rng = stream(seed, "stitching", ms.q, ms.R.code, ms.S.code, ms.p)
        tuples = _random_tuples(n, m, int(M), rng)
        codes = _kernels.subset_codes(adj, tuples, pair_index(m)) & ms.constrained_mask
        hit = np.isin(codes, np.array(sorted(ms.placements), dtype=np.int64)).astype(float)
        scale = ms.iso_product
        return StitchFrequency(hit.mean() / scale, hit.std(ddof=1) / math.sqrt(len(hit)) / scale, len(hit), "subsample")
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# order-3 stitching by projection sums

ORDER3 = ("triangle", "twostar")


def _triad_projections(adj: np.ndarray):
    """Node, dyad and triad tallies of triangles and induced two-stars.

    Returns integer arrays: node tallies (n, 2), dyad tallies over ``i < j``
    (n_pairs, 2) and the triad totals (2,), columns ordered (triangle, twostar).
    """
    a = adj.astype(np.int64)
    deg = a.sum(axis=1)
    common = a @ a
    tri_node = (common * a).sum(axis=1) // 2
    two_node = deg * (deg - 1) // 2 - tri_node + a @ deg - deg - 2 * tri_node
    iu, ju = np.triu_indices(a.shape[0], 1)
    link = a[iu, ju]
    c = common[iu, ju]
    tri_dyad = link * c
    two_dyad = link * (deg[iu] + deg[ju] - 2 - 2 * c) + (1 - link) * c
    node = np.stack([tri_node, two_node], axis=1)
    dyad = np.stack([tri_dyad, two_dyad], axis=1)
    totals = np.array([tri_node.sum() // 3, two_node.sum() // 3], dtype=np.int64)
    return node, dyad, totals


def order3_stitching_projection(g) -> dict[int, np.ndarray]:
    """Exact order-3 stitching frequencies for (triangle, twostar) without tuple passes.

    Pairs of triads sharing ``q`` vertices are tallied through node sums
    (``P1 + 2 P2 + 3 P3``), dyad sums (``P2 + 3 P3``) and triad sums (``P3``).
    """
    adj = as_adjacency(g)
    n = adj.shape[0]
    if n < 3:
        raise ValueError("need at least three nodes")
    node, dyad, tot = _triad_projections(adj)
    node_sum = np.array([[int(x) for x in row] for row in (node.T.astype(object) @ node.astype(object))], dtype=object)
    dyad_sum = dyad.T.astype(object) @ dyad.astype(object)
    p3 = np.diag([int(tot[0]), int(tot[1])]).astype(object)
    p2 = dyad_sum - 3 * p3
    p1 = node_sum - 2 * p2 - 3 * p3
    c3 = math.comb(n, 3)
    pair_counts = {1: c3 * 3 * math.comb(n - 3, 2), 2: c3 * 3 * (n - 3), 3: c3}
    iso = np.array([1, 3], dtype=object)
    iso2 = np.outer(iso, iso)
    out = {}
    for q, tally in ((1, p1), (2, p2), (3, p3)):
        npairs = pair_counts[q]
        out[q] = np.array([[float(Fraction(int(tally[r, s]), npairs * int(iso2[r, s]))) if npairs else 0.0
                            for s in range(2)] for r in range(2)])
    return out


# ---------------------------------------------------------------------------
# covariance of densities

@dataclass
class MomentCovariance:
    """Estimated covariance of induced densities and its stitching components."""

    names: tuple
    densities: np.ndarray
    matrix: np.ndarray
    components: dict
    weights: dict
    n: int
    mode: str
    component_se: dict = field(default_factory=dict)
    negative_variance: bool = False

    @property
    def se(self) -> np.ndarray:
        """Standard errors; negative variances are clamped to zero."""
        return np.sqrt(np.clip(np.diag(self.matrix), 0.0, None))

    def index(self, name: str) -> int:
        return self.names.index(name)


def covariance_weights(n: int, p: int) -> dict[int, float]:
    """Weight of the ``q``-overlap term: ``C(p,q) C(n-p,p-q) / C(n,p)``."""
    cp = math.comb(n, p)
    return {q: math.comb(p, q) * math.comb(n - p, p - q) / cp for q in range(1, p + 1)}


def moment_covariance(g, patterns: Sequence = ORDER3, mode: str = "exact", M: int = DEFAULT_SUBSAMPLE,
                      seed=None) -> MomentCovariance:
    """Finite-``N`` covariance of the induced densities of order-3 patterns.

    ``mode``: ``exact`` (tuple passes up to the pentad pass), ``projection``
    (same values from node/dyad sums, cheap for large graphs) or ``subsample``.
    All overlap terms are kept, together with the product correction.
    """
    adj = as_adjacency(g)
    n = adj.shape[0]
    pats = [_as_graphlet(s) for s in patterns]
    if any(s.p != 3 for s in pats):
        raise ValueError("moment_covariance handles order-3 patterns")
    if n < 6 and mode != "projection":
        raise ValueError("covariance needs at least six nodes")
    if n < 3:
        raise ValueError("need at least three nodes")
    names = tuple(_label(s) for s in pats)
    hist: dict = {}
    est = count_patterns(adj, pats, histograms=hist)
    dens = np.array([est[nm].induced_density for nm in names])
    k = len(pats)
    comps = {q: np.zeros((k, k)) for q in (1, 2, 3)}
    comp_se = {q: np.zeros((k, k)) for q in (1, 2, 3)}
    if mode == "projection":
        if not set(names) <= set(ORDER3):
            raise ValueError("projection mode covers triangle and twostar")
        proj = order3_stitching_projection(adj)
        sel = [ORDER3.index(nm) for nm in names]
        for q in comps:
            comps[q] = proj[q][np.ix_(sel, sel)]
    elif mode in ("exact", "subsample"):
        for q in (1, 2, 3):
            if n < 6 - q:
                continue
            for a in range(k):
                for b in range(a, k):
                    ms = stitching_multiset(pats[a], pats[b], q)
                    if mode == "exact":
                        f = stitching_frequency(adj, ms, "exact", histograms=hist)
                    else:
                        f = stitching_frequency(adj, ms, "subsample", M=M, seed=seed)
                    comps[q][a, b] = comps[q][b, a] = f.value
                    comp_se[q][a, b] = comp_se[q][b, a] = f.se
    else:
        raise ValueError(f"unknown covariance mode {mode!r}")
    w = covariance_weights(n, 3)
    mat = sum(w[q] * comps[q] for q in comps) - sum(w.values()) * np.outer(dens, dens)
    mat = 0.5 * (mat + mat.T)
    neg = bool(np.any(np.diag(mat) < 0))
    if neg:
        warnings.warn("negative plug-in variance; standard error clamped at 0", MomentWarning, stacklevel=2)
    return MomentCovariance(names, dens, mat, comps, w, n, mode, comp_se, neg)


# ---------------------------------------------------------------------------
# transitivity

def transitivity_from_densities(p_triangle: float, p_twostar: float) -> float:
    """``P(triangle) / (P(twostar) + P(triangle))``."""
    denom = p_twostar + p_triangle
    if denom == 0:
        raise ZeroDivisionError("transitivity is undefined without connected triads")
    return p_triangle / denom


@dataclass(frozen=True)
class Transitivity:
    ti: float
    ti_injective: float
    se: float | None
    p_triangle: float
    p_twostar: float


def transitivity(g) -> float:
    """Global clustering coefficient from induced triad densities."""
    est = count_patterns(g, ORDER3)
    return transitivity_from_densities(est["triangle"].induced_density, est["twostar"].induced_density)


def transitivity_injective(g) -> float:
    """``Q(triangle) / Q(twostar)``; algebraically equal to ``transitivity``."""
    est = count_patterns(g, ORDER3)
    if est["twostar"].injective_count == 0:
        raise ZeroDivisionError("transitivity is undefined without connected triads")
    return est["triangle"].injective_density / est["twostar"].injective_density


def transitivity_gradient(p_triangle: float, p_twostar: float) -> np.ndarray:
    """Gradient in (P(triangle), P(twostar))."""
    d = (p_triangle + p_twostar) ** 2
    return np.array([p_twostar / d, -p_triangle / d])


def transitivity_se(cov: MomentCovariance) -> float:
    """Delta-method standard error of the transitivity index."""
    it, iw = cov.index("triangle"), cov.index("twostar")
    grad = transitivity_gradient(cov.densities[it], cov.densities[iw])
    sub = cov.matrix[np.ix_([it, iw], [it, iw])]
    v = float(grad @ sub @ grad)
    return math.sqrt(max(v, 0.0))


def transitivity_report(g, mode: str = "exact", M: int = DEFAULT_SUBSAMPLE, seed=None) -> Transitivity:
    est = count_patterns(g, ORDER3)
    pt, pw = est["triangle"].induced_density, est["twostar"].induced_density
    ti = transitivity_from_densities(pt, pw)
    ti_inj = est["triangle"].injective_density / est["twostar"].injective_density
    cov = moment_covariance(g, ORDER3, mode=mode, M=M, seed=seed)
    return Transitivity(ti, ti_inj, transitivity_se(cov), pt, pw)


# ---------------------------------------------------------------------------
# Erdos-Renyi closed forms

@dataclass(frozen=True)
class ERClosedForms:
    rho: float
    xi: dict
    limit_cov: np.ndarray


def er_closed_forms(rho: float) -> ERClosedForms:
    """Stitching frequencies of (triangle, twostar) under ER(``rho``) and the
    leading q=2 covariance matrix (order: triangle, twostar)."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie strictly between 0 and 1")
    r, c = rho, 1.0 - rho
    xi = {
        ("twostar", "twostar", 1): r ** 4 * c ** 2,
        ("twostar", "twostar", 2): 4 / 9 * r ** 3 * c ** 2 + 1 / 9 * r ** 4 * c,
        ("twostar", "twostar", 3): r ** 2 * c / 3,
        ("triangle", "triangle", 1): r ** 6,
        ("triangle", "triangle", 2): r ** 5,
        ("triangle", "triangle", 3): r ** 3,
        ("twostar", "triangle", 1): r ** 5 * c,
        ("twostar", "triangle", 2): 2 / 3 * r ** 4 * c,
        ("twostar", "triangle", 3): 0.0,
    }
    off = r * (2 - 3 * r) / 3
    limit = r ** 3 * c * np.array([[r ** 2, off], [off, (2 - 3 * r) ** 2 / 9]])
    return ERClosedForms(rho, xi, limit)


# ---------------------------------------------------------------------------
# degree moments

def compositions(m: int, k: int):
    """Ordered ``k``-tuples of positive integers summing to ``m``."""
    if k == 0:
        if m == 0:
            yield ()
        return
    for cut in itertools.combinations(range(1, m), k - 1):
        bounds = (0, *cut, m)
        yield tuple(bounds[i + 1] - bounds[i] for i in range(k))


@lru_cache(maxsize=None)
def composition_sum(m: int, k: int) -> int:
    """``sum over compositions of m into k parts of m! / (p_1! ... p_k!)``."""
    fm = math.factorial(m)
    return sum(fm // math.prod(math.factorial(x) for x in comp) for comp in compositions(m, k))


def degree_moment_coefficient(n: int, m: int, k: int) -> int:
    return math.comb(n - 1, k) * composition_sum(m, k)


def _star_key(k: int) -> tuple[str, ...]:
    if k == 1:
        return ("edge", "1-star", 1)
    if k == 2:
        return ("twostar", "2-star", 2)
    if k == 3:
        return ("threestar", "3-star", 3)
    if k == 4:
        return ("fourstar", "4-star", 4)
    return (f"{k}-star", k)


def degree_moment_theoretical(n: int, m: int, star_densities: Mapping) -> float:
    """``E[D^m] = sum_k C(n-1,k) surj(m,k) Q(k-star)`` given edge and star densities.

    ``star_densities`` maps ``k`` (or a name such as ``"edge"``, ``"twostar"``,
    ``"3-star"``) to the injective density of the ``k``-star.
    """
    if not 1 <= m <= 6:
        raise ValueError("moment order must be in [1, 6]")
    vals = {}
    missing = []
    for k in range(1, m + 1):
        for key in _star_key(k):
            if key in star_densities:
                vals[k] = star_densities[key]
                break
        else:
            missing.append("edge" if k == 1 else f"{k}-star")
    if missing:
        raise KeyError(f"missing densities for: {', '.join(missing)}")
    return float(sum(degree_moment_coefficient(n, m, k) * vals[k] for k in range(1, m + 1)))


def degree_moment_empirical(g, m: int) -> float:
    """``(1/N) sum_i D_i^m``."""
    adj = as_adjacency(g)
    d = adj.sum(axis=1).astype(float)
    return float(np.mean(d ** m))


def star_density_from_degrees(g, k: int) -> Fraction:
    """Injective ``k``-star density ``sum_i C(d_i,k) / (C(N,k+1)(k+1))`` (``k=1``: edge density)."""
    adj = as_adjacency(g)
    n = adj.shape[0]
    if k + 1 > n:
        raise ValueError(f"a {k}-star needs {k + 1} nodes, graph has {n}")
    d = [int(x) for x in adj.sum(axis=1)]
    num = sum(math.comb(x, k) for x in d)
    if k == 1:
        return Fraction(num, 2 * math.comb(n, 2))
    return Fraction(num, math.comb(n, k + 1) * (k + 1))


def star_densities(g, m: int) -> dict[int, float]:
    """Injective star densities for ``k = 1..m`` from the degree sequence.

    Stars with more vertices than the graph get 0; their coefficient ``C(N-1,k)`` vanishes too.
    """
    n = as_adjacency(g).shape[0]
    return {k: float(star_density_from_degrees(g, k)) if k < n else 0.0 for k in range(1, m + 1)}
