"""Graph containers, edge-list I/O and small-graphlet isomorphism."""

from __future__ import annotations

import io
import itertools
import os
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

DENSE_THRESHOLD = 4096
MAX_GRAPHLET_ORDER = 7


class EdgeListError(ValueError):
    """Raised for malformed or forbidden edge-list input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Graph:
    """Immutable simple graph on nodes ``0..n-1``.

    Undirected edges are stored once as ``(min, max)``; directed edges as
    ``(tail, head)``. A dense boolean adjacency matrix is built when
    ``n <= dense_threshold``; neighbor sets are always available.
    """

    n: int
    edges: frozenset
    directed: bool = False
    labels: tuple | None = None
    duplicates: int = 0
    dense_threshold: int = DENSE_THRESHOLD
    _out: tuple = field(init=False, repr=False, compare=False)
    _in: tuple = field(init=False, repr=False, compare=False)
    _dense: np.ndarray | None = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        out = [set() for _ in range(self.n)]
        inn = [set() for _ in range(self.n)]
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) outside [0, {self.n})")
            if not self.directed and u > v:
                raise ValueError("undirected edges must be stored as (min, max)")
            out[u].add(v)
            inn[v].add(u)
            if not self.directed:
                out[v].add(u)
                inn[u].add(v)
        object.__setattr__(self, "_out", tuple(frozenset(s) for s in out))
        object.__setattr__(self, "_in", tuple(frozenset(s) for s in inn))
        dense = None
        if self.n <= self.dense_threshold:
            dense = np.zeros((self.n, self.n), dtype=np.uint8)
            if self.edges:
                e = np.array(sorted(self.edges), dtype=np.int64)
                dense[e[:, 0], e[:, 1]] = 1
                if not self.directed:
                    dense[e[:, 1], e[:, 0]] = 1
            dense.setflags(write=False)
        object.__setattr__(self, "_dense", dense)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], directed: bool = False, **kw) -> "Graph":
        """Build a graph, normalizing undirected pairs and dropping duplicates."""
        norm = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not directed and u > v:
                u, v = v, u
            norm.add((u, v))
        return cls(n=n, edges=frozenset(norm), directed=directed, **kw)

    @classmethod
    def from_adjacency(cls, adj: np.ndarray, directed: bool = False) -> "Graph":
        adj = np.asarray(adj)
        n = adj.shape[0]
        if directed:
            rows, cols = np.nonzero(adj)
            pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if i != j]
        else:
            rows, cols = np.nonzero(np.triu(adj, 1))
            pairs = list(zip(rows.tolist(), cols.tolist()))
        return cls.from_edges(n, pairs, directed=directed)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> frozenset:
        """Out-neighbors (all neighbors when undirected)."""
        return self._out[i]

    def in_neighbors(self, i: int) -> frozenset:
        return self._in[i]

    def has_edge(self, u: int, v: int) -> bool:
        if self._dense is not None:
            return bool(self._dense[u, v])
        return v in self._out[u]

    def has_edge_sparse(self, u: int, v: int) -> bool:
        return v in self._out[u]

    @property
    def is_dense(self) -> bool:
        return self._dense is not None

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency as ``uint8``; built on demand above the threshold."""
        if self._dense is not None:
            return self._dense
        dense = np.zeros((self.n, self.n), dtype=np.uint8)
        for u, v in self.edges:
            dense[u, v] = 1
            if not self.directed:
                dense[v, u] = 1
        return dense

    def label_of(self, i: int):
        return self.labels[i] if self.labels is not None else i


def _iter_lines(source) -> Iterable[str]:
    if isinstance(source, (list, tuple)):
        return source
    if isinstance(source, io.IOBase):
        return source.read().splitlines()
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source and os.path.isfile(source)):
        with open(source, encoding="utf-8") as fh:
            return fh.read().splitlines()
    return str(source).splitlines()


_SPLIT = re.compile(r"[,\s]+")


def load_edgelist(source, directed: bool = False, n_hint: int | None = None) -> Graph:
    """Parse ``u v`` lines (whitespace or comma separated, ``#`` comments).

    Integer ids are used as-is. If any id is not a nonnegative integer, every
    id is treated as a string label and mapped to dense ids in order of first
    appearance. Duplicate edges are dropped and counted in ``Graph.duplicates``.
    """
    raw: list[tuple[str, str, int]] = []
    for lineno, line in enumerate(_iter_lines(source), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = [p for p in _SPLIT.split(text) if p]
        if len(parts) != 2:
            raise EdgeListError(f"expected two node ids, got {text!r}", lineno)
        if parts[0] == parts[1]:
            raise EdgeListError(f"self-loop on node {parts[0]!r}", lineno)
        raw.append((parts[0], parts[1], lineno))

    numeric = all(u.isdigit() and v.isdigit() for u, v, _ in raw)
    labels = None
    if numeric:
        pairs = [(int(u), int(v), ln) for u, v, ln in raw]
        n = max((max(u, v) for u, v, _ in pairs), default=-1) + 1
    else:
        index: dict[str, int] = {}
        for u, v, _ in raw:
            for tok in (u, v):
                if tok not in index:
                    index[tok] = len(index)
        pairs = [(index[u], index[v], ln) for u, v, ln in raw]
        n = len(index)
        labels = tuple(index)
    if n_hint is not None and n_hint > n:
        if labels is not None:
            labels = labels + tuple(range(n, n_hint))
        n = n_hint

    seen = set()
    dup = 0
    for u, v, _ in pairs:
        key = (u, v) if directed or u < v else (v, u)
        if key in seen:
            dup += 1
        seen.add(key)
    return Graph(n=n, edges=frozenset(seen), directed=directed, labels=labels, duplicates=dup)


def save_edgelist(g: Graph, path=None) -> str:
    """Sorted ``u v`` lines; returns the text and writes it if ``path`` is given."""
    lines = [f"{g.label_of(u)} {g.label_of(v)}" for u, v in sorted(g.edges)]
    text = "\n".join(lines) + ("\n" if lines else "")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def density(g: Graph) -> float:
    """Share of connected dyads, ``2|E| / (n(n-1))``."""
    if g.directed:
        raise ValueError("density is defined here for undirected graphs")
    if g.n < 2:
        raise ValueError("density needs at least two nodes")
    return 2.0 * g.n_edges / (g.n * (g.n - 1))


def degree_sequence(g: Graph):
    """Degrees; ``(out, in)`` arrays for a directed graph."""
    out = np.fromiter((len(g.neighbors(i)) for i in range(g.n)), dtype=np.int64, count=g.n)
    if g.directed:
        inn = np.fromiter((len(g.in_neighbors(i)) for i in range(g.n)), dtype=np.int64, count=g.n)
        return out, inn
    return out


# ---------------------------------------------------------------------------
# graphlets

def pair_index(p: int) -> list[tuple[int, int]]:
    """Vertex pairs of ``K_p`` in lexicographic order; bit ``k`` of a code is pair ``k``."""
    return list(itertools.combinations(range(p), 2))


@dataclass(frozen=True)
class Graphlet:
    """Small undirected labeled graph on ``{0..p-1}``."""

    p: int
    edges: frozenset
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 1 <= self.p <= MAX_GRAPHLET_ORDER:
            raise ValueError(f"graphlet order must be in [1, {MAX_GRAPHLET_ORDER}]")
        norm = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError("graphlets have no self-loops")
            if not (0 <= u < self.p and 0 <= v < self.p):
                raise ValueError("graphlet edge outside vertex range")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_code(cls, p: int, code: int, name: str | None = None) -> "Graphlet":
        pairs = pair_index(p)
        return cls(p, frozenset(pairs[k] for k in range(len(pairs)) if code >> k & 1), name)

    @property
    def code(self) -> int:
        pos = {pr: k for k, pr in enumerate(pair_index(self.p))}
        return sum(1 << pos[e] for e in self.edges)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def canonical(self) -> tuple:
        return canonical_edges(self.p, self.code)

    def iso_count(self) -> int:
        """Number of distinct labeled graphs on ``p`` vertices isomorphic to this one."""
        return len(labeled_copies(self.p, canonical_code(self.p, self.code)))

    def relabel(self, perm: Sequence[int]) -> "Graphlet":
        return Graphlet(self.p, frozenset((perm[u], perm[v]) for u, v in self.edges), self.name)


@lru_cache(maxsize=None)
def _perm_maps(p: int) -> np.ndarray:
    """For each permutation, the image index of every pair index."""
    pairs = pair_index(p)
    pos = {pr: k for k, pr in enumerate(pairs)}
    maps = []
    for perm in itertools.permutations(range(p)):
        row = []
        for u, v in pairs:
            a, b = perm[u], perm[v]
            row.append(pos[(a, b) if a < b else (b, a)])
        maps.append(row)
    return np.array(maps, dtype=np.int64)


def permute_code(p: int, code: int, perm_row: np.ndarray) -> int:
    out = 0
    k = 0
    c = code
    while c:
        if c & 1:
            out |= 1 << int(perm_row[k])
        c >>= 1
        k += 1
    return out


def permuted_codes(p: int, code: int) -> np.ndarray:
    """Image of ``code`` under every vertex permutation (one entry per permutation)."""
    maps = _perm_maps(p)
    bits = np.array([(code >> k) & 1 for k in range(maps.shape[1])], dtype=np.int64)
    return (bits[None, :] << maps).sum(axis=1)


@lru_cache(maxsize=None)
def labeled_copies(p: int, code: int) -> frozenset:
    """All codes reachable from ``code`` by relabeling vertices."""
    return frozenset(int(c) for c in np.unique(permuted_codes(p, code)))


@lru_cache(maxsize=None)
def canonical_code(p: int, code: int) -> int:
    """Smallest code in the isomorphism class (the canonical representative)."""
    return min(labeled_copies(p, code))


def canonical_edges(p: int, code: int) -> tuple:
    c = canonical_code(p, code)
    pairs = pair_index(p)
    return tuple(pairs[k] for k in range(len(pairs)) if c >> k & 1)


def is_isomorphic(a: Graphlet, b: Graphlet) -> bool:
    """True iff some vertex bijection preserves adjacency and non-adjacency."""
    if a.p != b.p or a.n_edges != b.n_edges:
        return False
    return canonical_code(a.p, a.code) == canonical_code(b.p, b.code)


def induced_subgraph(g: Graph, vertices: Sequence[int]) -> Graphlet:
    """Graphlet on ``{0..p-1}`` holding the edges of ``g`` among ``vertices`` (in order)."""
    vs = [int(v) for v in vertices]
    if len(set(vs)) != len(vs):
        raise ValueError("induced_subgraph needs distinct vertices")
    for v in vs:
        if not 0 <= v < g.n:
            raise ValueError(f"vertex {v} outside graph")
    p = len(vs)
    edges = [(a, b) for a, b in pair_index(p) if g.has_edge(vs[a], vs[b]) or (g.directed and g.has_edge(vs[b], vs[a]))]
    return Graphlet(p, frozenset(edges))


def _g(p, edges, name):
    return Graphlet(p, frozenset(edges), name)


def star(k: int) -> Graphlet:
    """Star with ``k`` leaves, center at vertex 0."""
    return _g(k + 1, [(0, i) for i in range(1, k + 1)], f"{k}-star" if k > 1 else "edge")


def path(p: int) -> Graphlet:
    return _g(p, [(i, i + 1) for i in range(p - 1)], f"{p}-path")


def cycle(p: int) -> Graphlet:
    return _g(p, [(i, (i + 1) % p) for i in range(p)], f"{p}-cycle")


def complete(p: int) -> Graphlet:
    return _g(p, pair_index(p), f"K{p}")


def empty(p: int) -> Graphlet:
    return _g(p, [], f"empty{p}")


EDGE = _g(2, [(0, 1)], "edge")
TWOSTAR = _g(3, [(0, 1), (0, 2)], "twostar")
TRIANGLE = _g(3, [(0, 1), (0, 2), (1, 2)], "triangle")
ONE_EDGE3 = _g(3, [(0, 1)], "one-edge")
EMPTY3 = _g(3, [], "empty3")

GRAPHLETS: dict[str, Graphlet] = {
    "edge": EDGE,
    "twostar": TWOSTAR,
    "triangle": TRIANGLE,
    "one-edge": ONE_EDGE3,
    "empty3": EMPTY3,
    "threestar": _g(4, [(0, 1), (0, 2), (0, 3)], "threestar"),
    "fourpath": _g(4, [(0, 1), (1, 2), (2, 3)], "fourpath"),
    "fourcycle": _g(4, [(0, 1), (1, 2), (2, 3), (0, 3)], "fourcycle"),
    "tailed-triangle": _g(4, [(0, 1), (0, 2), (1, 2), (2, 3)], "tailed-triangle"),
    "chordal-cycle": _g(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)], "chordal-cycle"),
    "K4": complete(4),
    "fourstar": _g(5, [(0, 1), (0, 2), (0, 3), (0, 4)], "fourstar"),
    "tailed-threestar": _g(5, [(0, 1), (0, 2), (0, 3), (3, 4)], "tailed-threestar"),
    "fivepath": _g(5, [(0, 1), (1, 2), (2, 3), (3, 4)], "fivepath"),
    "bowtie": _g(5, [(0, 1), (0, 2), (1, 2), (0, 3), (0, 4), (3, 4)], "bowtie"),
    "two-tailed-triangle": _g(5, [(0, 1), (0, 2), (1, 2), (0, 3), (0, 4)], "two-tailed-triangle"),
    "long-tailed-triangle": _g(5, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)], "long-tailed-triangle"),
}


def graphlet(name: str) -> Graphlet:
    """Look up a named graphlet; also accepts ``k-star`` for any ``k``."""
    if name in GRAPHLETS:
        return GRAPHLETS[name]
    m = re.fullmatch(r"(\d+)-star", name)
    if m:
        return star(int(m.group(1)))
    raise KeyError(f"unknown graphlet {name!r}; known: {sorted(GRAPHLETS)}")


def name_of(p: int, code: int) -> str | None:
    """Catalog name of the isomorphism class of ``code``, if any."""
    c = canonical_code(p, code)
    for nm, gl in GRAPHLETS.items():
        if gl.p == p and canonical_code(p, gl.code) == c:
            return nm
    return None
