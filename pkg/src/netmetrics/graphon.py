"""Exchangeable random-graph samplers and the beta-model likelihood.

Every sampler follows the same recipe: draw node latents ``U_i``, then link
``i < j`` when an independent uniform ``V_ij`` falls below the edge
probability ``h(U_i, U_j)``. Latents are returned so tests can condition on them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ._rng import stream
from .graph import Graph


class GraphonConfigError(ValueError):
    """Invalid graphon configuration (probabilities outside [0, 1], bad grid, ...)."""


@dataclass(frozen=True)
class GraphonSpec:
    """Edge-probability law for undirected exchangeable graphs.

    Kinds:

    ``constant``   ``h = rho`` (Erdos-Renyi).
    ``beta``       ``h = expit(U_i + U_j)`` with ``U`` normal or two-point.
    ``threshold``  ``h = 1(U_i + U_j >= alpha)`` with uniform ``U``.
    ``grid``       ``h = rho_n * w(U_i, U_j)``, ``w`` bilinear on a k-by-k grid.
    """

    kind: str
    rho: float = 0.0
    u_law: str = "normal"
    mu: float = 0.0
    sigma: float = 1.0
    support: tuple = (0.0, 1.0)
    p_low: float = 0.5
    alpha: float = 1.0
    w: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == "constant":
            if not 0.0 <= self.rho <= 1.0:
                raise GraphonConfigError(f"edge probability {self.rho} outside [0, 1]")
        elif self.kind == "beta":
            if self.u_law not in ("normal", "two-point"):
                raise GraphonConfigError(f"unknown U law {self.u_law!r}")
            if self.u_law == "normal" and self.sigma < 0:
                raise GraphonConfigError("sigma must be nonnegative")
            if self.u_law == "two-point" and not 0.0 <= self.p_low <= 1.0:
                raise GraphonConfigError("two-point mass must be in [0, 1]")
        elif self.kind == "threshold":
            if not 0.0 <= self.alpha <= 2.0:
                raise GraphonConfigError(f"threshold level {self.alpha} outside [0, 2]")
        elif self.kind == "grid":
            w = np.asarray(self.w, dtype=float)
            if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
                raise GraphonConfigError("w must be a non-empty square table")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise GraphonConfigError("w must be finite and nonnegative")
            w = 0.5 * (w + w.T)
            w.setflags(write=False)
            object.__setattr__(self, "w", w)
            if self.rho < 0 or self.rho * w.max() > 1.0 + 1e-12:
                raise GraphonConfigError(f"rho_n * max(w) = {self.rho * w.max():.6g} exceeds 1")
        else:
            raise GraphonConfigError(f"unknown graphon kind {self.kind!r}")

    @classmethod
    def constant(cls, rho: float) -> "GraphonSpec":
        return cls("constant", rho=float(rho))

    @classmethod
    def beta(cls, mu: float = 0.0, sigma: float = 1.0) -> "GraphonSpec":
        return cls("beta", u_law="normal", mu=float(mu), sigma=float(sigma))

    @classmethod
    def beta_two_point(cls, low: float, high: float, p_low: float = 0.5) -> "GraphonSpec":
        return cls("beta", u_law="two-point", support=(float(low), float(high)), p_low=float(p_low))

    @classmethod
    def threshold(cls, alpha: float) -> "GraphonSpec":
        return cls("threshold", alpha=float(alpha))

    @classmethod
    def grid(cls, w, rho_n: float = 1.0) -> "GraphonSpec":
        return cls("grid", rho=float(rho_n), w=np.asarray(w, dtype=float))

    def draw_latent(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "beta":
            if self.u_law == "normal":
                return rng.normal(self.mu, self.sigma, size=n)
            low, high = self.support
            return np.where(rng.random(n) < self.p_low, low, high)
        return rng.random(n)

    def edge_prob(self, ui, vj) -> np.ndarray:
        """``h(U_i, U_j)`` evaluated elementwise."""
        ui = np.asarray(ui, dtype=float)
        vj = np.asarray(vj, dtype=float)
        if self.kind == "constant":
            return np.full(np.broadcast(ui, vj).shape, self.rho)
        if self.kind == "beta":
            return expit(ui + vj)
        if self.kind == "threshold":
            return (ui + vj >= self.alpha).astype(float)
        return self.rho * bilinear(self.w, ui, vj)

    def w_integral(self) -> float:
        """``int int w`` for the grid kind (exact for the bilinear interpolant)."""
        if self.kind != "grid":
            raise GraphonConfigError("w_integral is defined for grid graphons")
        # cell-centred nodes with flat extension: each hat integrates to 1/k
        return float(self.w.mean())

    def expected_average_degree(self, n: int) -> float:
        return (n - 1) * self.rho * self.w_integral()


def bilinear(w: np.ndarray, u, v) -> np.ndarray:
    """Interpolate ``w`` (values at cell centres ``(i + 1/2)/k``) at ``(u, v)``.

    Outside the outermost centres the value is held flat.
    """
    k = w.shape[0]
    if k == 1:
        return np.full(np.broadcast(u, v).shape, float(w[0, 0]))
    x = np.clip(np.asarray(u, dtype=float) * k - 0.5, 0.0, k - 1.0)
    y = np.clip(np.asarray(v, dtype=float) * k - 0.5, 0.0, k - 1.0)
    i0 = np.minimum(np.floor(x).astype(np.int64), k - 2)
    j0 = np.minimum(np.floor(y).astype(np.int64), k - 2)
    fx = x - i0
    fy = y - j0
    return ((1 - fx) * (1 - fy) * w[i0, j0] + fx * (1 - fy) * w[i0 + 1, j0]
            + (1 - fx) * fy * w[i0, j0 + 1] + fx * fy * w[i0 + 1, j0 + 1])


def load_grid(path) -> GraphonSpec:
    """Read a grid graphon: header ``k rho_n`` then ``k`` rows of ``k`` values."""
    with open(path, encoding="utf-8") as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise GraphonConfigError("grid file header must be 'k rho_n'")
    try:
        k = int(rows[0][0])
        rho_n = float(rows[0][1])
        body = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise GraphonConfigError(f"grid file is not numeric: {exc}") from None
    if body.shape != (k, k):
        raise GraphonConfigError(f"expected {k} rows of {k} values, got shape {body.shape}")
    return GraphonSpec.grid(body, rho_n)


def _sample_upper(n: int, prob_row, seed, purpose: str) -> np.ndarray:
    adj = np.zeros((n, n), dtype=np.uint8)
    for i in range(n - 1):
        v = stream(seed, purpose, i).random(n - i - 1)
        adj[i, i + 1:] = v < prob_row(i)
    return adj | adj.T


def sample_adjacency(spec: GraphonSpec, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Dense symmetric 0/1 adjacency and latents; the fast path behind ``sample_graph``."""
    if n < 2:
        raise ValueError("need at least two nodes")
    u = spec.draw_latent(n, stream(seed, "graphon-latent"))
    adj = _sample_upper(n, lambda i: spec.edge_prob(u[i], u[i + 1:]), seed, "graphon-dyads")
    return adj, u


def sample_graph(spec: GraphonSpec, n: int, seed) -> tuple[Graph, np.ndarray]:
    """Draw one graph from ``spec``; returns ``(graph, latents)``."""
    adj, u = sample_adjacency(spec, n, seed)
    return Graph.from_adjacency(adj), u


def sample_threshold(n: int, alpha: float, seed) -> Graph:
    """Random threshold graph ``D_ij = 1(U_i + U_j >= alpha)`` with uniform ``U``."""
    return sample_graph(GraphonSpec.threshold(alpha), n, seed)[0]


def erdos_renyi(n: int, rho: float, seed) -> np.ndarray:
    """Adjacency of an Erdos-Renyi graph (array form, for Monte Carlo loops)."""
    return sample_adjacency(GraphonSpec.constant(rho), n, seed)[0]


def beta_model_loglik(g, u) -> float:
    """``sum_{i<j} d_ij (U_i + U_j) - log(1 + exp(U_i + U_j))``."""
    adj = g.adjacency() if isinstance(g, Graph) else np.asarray(g)
    if isinstance(g, Graph) and g.directed:
        raise ValueError("beta model is for undirected graphs")
    u = np.asarray(u, dtype=float)
    if u.shape != (adj.shape[0],):
        raise ValueError("need one latent per node")
    iu, ju = np.triu_indices(adj.shape[0], 1)
    s = u[iu] + u[ju]
    return float(np.sum(adj[iu, ju] * s - np.logaddexp(0.0, s)))
