"""Composite-likelihood dyadic regression with dyadic-robust variance estimates.

Scores ``s_ij`` are kept per ordered dyad as an ``(n, n, K)`` array with zeros
on the diagonal. Every variance estimator below is built from the symmetrized
scores ``a_ij = (s_ij + s_ji) / 2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit, log_ndtr

from ._rng import stream

PINV_RCOND = 1e-10


class ConvergenceError(RuntimeError):
    """Newton iterations did not converge; ``last`` holds the final iterate."""

    def __init__(self, message: str, last: np.ndarray | None = None):
        super().__init__(message)
        self.last = last


# ---------------------------------------------------------------------------
# families: log-likelihood, first and second derivatives in the index

def _poisson(y, eta):
    mu = np.exp(eta)
    return y * eta - mu, y - mu, -mu


def _logit(y, eta):
    p = expit(eta)
    return y * eta - np.logaddexp(0.0, eta), y - p, -p * (1.0 - p)


def _mills(eta):
    # phi(eta) / Phi(eta), stable in the left tail
    return np.exp(-0.5 * eta * eta - 0.5 * math.log(2 * math.pi) - log_ndtr(eta))


def _probit(y, eta):
    ll = y * log_ndtr(eta) + (1.0 - y) * log_ndtr(-eta)
    lam1 = _mills(eta)
    lam0 = _mills(-eta)
    d1 = y * lam1 - (1.0 - y) * lam0
    d2 = -y * lam1 * (lam1 + eta) - (1.0 - y) * lam0 * (lam0 - eta)
    return ll, d1, d2


def _gaussian(y, eta):
    r = y - eta
    return -0.5 * r * r, r, -np.ones_like(eta)


FAMILIES: dict[str, Callable] = {"poisson": _poisson, "logit": _logit, "probit": _probit, "gaussian": _gaussian}


def family_terms(family: str, y, eta):
    """``(l, dl/d eta, d2l/d eta2)`` elementwise."""
    try:
        return FAMILIES[family](y, eta)
    except KeyError:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}") from None


# ---------------------------------------------------------------------------
# data

def _haversine_km(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(lon2) - np.radians(lon1)
    h = np.sin(dp / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2) ** 2
    return 2 * 6371.0088 * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def build_features(node_data: Mapping[str, np.ndarray], recipe: Sequence[str], n: int) -> tuple[np.ndarray, list[str]]:
    """Dyad features ``W_ij`` from node columns.

    Terms: ``const``, ``send:col``, ``recv:col``, ``absdiff:col``, ``prod:col``,
    ``cross:a,b`` (sender ``a`` times receiver ``b``) and ``logdist:lat,lon``
    (log great-circle distance in km). Diagonal cells
    are zero.
    """
    cols = []
    names = []
    for term in recipe:
        kind, _, arg = term.partition(":")
        kind = kind.strip()
        arg = arg.strip()

        def col(name):
            if name not in node_data:
                raise KeyError(f"recipe term {term!r}: unknown node column {name!r}")
            v = np.asarray(node_data[name], dtype=float)
            if v.shape != (n,):
                raise ValueError(f"node column {name!r} must have length {n}")
            return v

        if kind == "const":
            w = np.ones((n, n))
        elif kind == "send":
            w = np.repeat(col(arg)[:, None], n, axis=1)
        elif kind == "recv":
            w = np.repeat(col(arg)[None, :], n, axis=0)
        elif kind == "absdiff":
            v = col(arg)
            w = np.abs(v[:, None] - v[None, :])
        elif kind == "prod":
            v = col(arg)
            w = v[:, None] * v[None, :]
        elif kind == "cross":
            a_name, _, b_name = arg.partition(",")
            w = col(a_name.strip())[:, None] * col(b_name.strip())[None, :]
        elif kind == "logdist":
            lat_name, _, lon_name = arg.partition(",")
            lat, lon = col(lat_name.strip()), col(lon_name.strip())
            d = _haversine_km(lat[:, None], lon[:, None], lat[None, :], lon[None, :])
            off = ~np.eye(n, dtype=bool)
            if np.any(d[off] <= 0):
                raise ValueError("logdist: two distinct nodes share a location")
            w = np.zeros((n, n))
            w[off] = np.log(d[off])
        else:
            raise ValueError(f"unknown recipe term {term!r}")
        np.fill_diagonal(w, 0.0)
        cols.append(w)
        names.append(term)
    return np.stack(cols, axis=2), names


@dataclass
class DyadicDataset:
    """Ordered-dyad outcomes ``y[i, j]`` with features ``w[i, j, :]``.

    ``observed`` marks available off-diagonal cells (all of them for a complete
    dyad census). For undirected data only ``i < j`` cells enter the fit and
    scores are mirrored.
    """

    y: np.ndarray
    w: np.ndarray
    names: list = field(default_factory=list)
    directed: bool = True
    observed: np.ndarray | None = None
    node_data: dict = field(default_factory=dict)
    recipe: tuple = ()

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        n = self.y.shape[0]
        if self.y.shape != (n, n) or self.w.shape[:2] != (n, n):
            raise ValueError("y must be (n, n) and w must be (n, n, K)")
        if self.w.ndim == 2:
            self.w = self.w[:, :, None]
        if not self.names:
            self.names = [f"x{k}" for k in range(self.w.shape[2])]
        off = ~np.eye(n, dtype=bool)
        obs = off.copy() if self.observed is None else (np.asarray(self.observed, dtype=bool) & off)
        obs &= np.isfinite(self.y)
        if not np.all(np.isfinite(self.w[obs])):
            raise ValueError("features must be finite on observed dyads")
        if not self.directed:
            if not np.allclose(np.where(obs & obs.T, self.y, 0), np.where(obs & obs.T, self.y.T, 0)):
                raise ValueError("undirected data needs y[i, j] == y[j, i]")
        self.observed = obs

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.w.shape[2]

    @property
    def complete(self) -> bool:
        return bool(self.observed.sum() == self.n * (self.n - 1))

    @classmethod
    def from_recipe(cls, node_data: Mapping[str, np.ndarray], y: np.ndarray, recipe: Sequence[str], directed: bool = True,
                    observed=None) -> "DyadicDataset":
        y = np.asarray(y, dtype=float)
        w, names = build_features(node_data, recipe, y.shape[0])
        return cls(y, w, names, directed, observed, dict(node_data), tuple(recipe))

    def fit_mask(self) -> np.ndarray:
        """Cells entering the criterion."""
        if self.directed:
            return self.observed
        return np.triu(self.observed, 1)

    def subset(self, idx: np.ndarray) -> "DyadicDataset":
        idx = np.asarray(idx)
        return DyadicDataset(self.y[np.ix_(idx, idx)], self.w[np.ix_(idx, idx)], list(self.names), self.directed,
                             self.observed[np.ix_(idx, idx)])


def read_node_csv(path) -> tuple[list[str], dict[str, np.ndarray]]:
    """Node covariates with a header and an ``id`` column; returns ids and columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "id" not in rows[0]:
        raise ValueError(f"{path}: node file needs a header with an 'id' column")
    ids = [r["id"].strip() for r in rows]
    cols = {}
    for name in rows[0]:
        if name == "id":
            continue
        try:
            cols[name] = np.array([float(r[name]) for r in rows])
        except ValueError:
            raise ValueError(f"{path}: column {name!r} is not numeric") from None
    return ids, cols


def read_dyad_csv(path, ids: Sequence[str], directed: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Outcomes from ``i,j,y`` rows; returns ``(y, observed)``."""
    pos = {s: k for k, s in enumerate(ids)}
    n = len(ids)
    y = np.full((n, n), np.nan)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            if lineno == 1 and row[0].strip() == "i":
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: line {lineno}: expected i,j,y")
            a, b = row[0].strip(), row[1].strip()
            if a not in pos or b not in pos:
                raise ValueError(f"{path}: line {lineno}: unknown node id")
            if a == b:
                raise ValueError(f"{path}: line {lineno}: self-dyad")
            y[pos[a], pos[b]] = float(row[2])
            if not directed:
                y[pos[b], pos[a]] = float(row[2])
    return y, np.isfinite(y)


# ---------------------------------------------------------------------------
# fitting

@dataclass
class FitResult:
    family: str
    theta: np.ndarray
    names: list
    scores: np.ndarray
    hessian: np.ndarray
    loglik: float
    converged: bool
    n_iter: int
    grad_norm: float
    dataset: DyadicDataset = field(repr=False)
    separated: bool = False
    complete: bool = True

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def sym_scores(self) -> np.ndarray:
        return 0.5 * (self.scores + self.scores.transpose(1, 0, 2))

    def score_mean(self) -> np.ndarray:
        n = self.n
        return self.scores.sum(axis=(0, 1)) / (n * (n - 1))


def _criterion(ds: DyadicDataset, family: str, theta: np.ndarray, weights: np.ndarray | None, need: int):
    mask = ds.fit_mask()
    wts = mask.astype(float) if weights is None else np.where(mask, weights, 0.0)
    total = wts.sum()
    eta = ds.w @ theta
    yy = np.where(mask, ds.y, 0.0)
    ll, d1, d2 = family_terms(family, yy, eta)
    val = float(np.sum(wts * ll) / total)
    if need == 0:
        return val, None, None, total
    g = np.einsum("ij,ijk->k", wts * d1, ds.w) / total
    h = np.einsum("ij,ijk,ijl->kl", wts * d2, ds.w, ds.w) / total
    return val, g, h, total


def newton(ds: DyadicDataset, family: str, theta0=None, tol: float = 1e-10, max_iter: int = 100, weights=None):
    """Maximize the average composite log-likelihood; returns ``(theta, loglik, n_iter, grad_norm)``."""
    theta = np.zeros(ds.k) if theta0 is None else np.array(theta0, dtype=float)
    val, g, h, _ = _criterion(ds, family, theta, weights, 2)
    for it in range(1, max_iter + 1):
        step = -np.linalg.pinv(h, rcond=PINV_RCOND) @ g
        t = 1.0
        while True:
            cand = theta + t * step
            cval = _criterion(ds, family, cand, weights, 0)[0]
            if np.isfinite(cval) and cval >= val - 1e-14 * abs(val):
                break
            t *= 0.5
            if t < 1e-12:
                raise ConvergenceError("line search failed", theta)
        theta = cand
        val, g, h, _ = _criterion(ds, family, theta, weights, 2)
        if np.max(np.abs(t * step)) < tol and np.max(np.abs(g)) < tol:
            return theta, val, it, float(np.max(np.abs(g)))
    raise ConvergenceError(f"no convergence after {max_iter} Newton steps", theta)


def _scores(ds: DyadicDataset, family: str, theta: np.ndarray) -> np.ndarray:
    eta = ds.w @ theta
    yy = np.where(ds.observed, ds.y, 0.0)
    _, d1, _ = family_terms(family, yy, eta)
    s = np.where(ds.fit_mask(), d1, 0.0)[:, :, None] * ds.w
    if not ds.directed:
        s = s + s.transpose(1, 0, 2)
    return s


def fit_composite(ds: DyadicDataset, family: str = "poisson", init=None, tol: float = 1e-10, max_iter: int = 100) -> FitResult:
    """Composite maximum likelihood: Newton steps with step halving and a pseudo-inverse Hessian."""
    theta, val, it, gnorm = newton(ds, family, init, tol, max_iter)
    _, _, h, _ = _criterion(ds, family, theta, None, 2)
    separated = False
    if family in ("logit", "probit"):
        eta = ds.w @ theta
        separated = bool(np.max(np.abs(eta[ds.fit_mask()])) > 30)
    return FitResult(family, theta, list(ds.names), _scores(ds, family, theta), 0.5 * (h + h.T), val, True, it, gnorm,
                     ds, separated, ds.complete)


# ---------------------------------------------------------------------------
# variance estimators

def sigma1_hat(a: np.ndarray) -> np.ndarray:
    """Average of ``a_ij a_ik'`` over the ``N(N-1)(N-2)`` ordered pairs of dyads sharing agent ``i``."""
    n = a.shape[0]
    r = a.sum(axis=1)
    inner = np.einsum("ijk,ijl->kl", a, a)
    return (r.T @ r - inner) / (n * (n - 1) * (n - 2))


def sigma23_hat(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    return 0.5 * np.einsum("ijk,ijl->kl", a, a) / math.comb(n, 2)


def omega_fg(s: np.ndarray) -> np.ndarray:
    """Pairs-of-dyads estimator from ordered scores, via row and column sums.

    The four coincidence events of the quadruple sum overlap only in
    ``(i1, i2) = (j1, j2)`` and ``(i1, i2) = (j2, j1)``, which are removed once.
    """
    n = s.shape[0]
    rc = s.sum(axis=1) + s.sum(axis=0)
    tot = rc.T @ rc - np.einsum("ijk,ijl->kl", s, s) - np.einsum("ijk,jil->kl", s, s)
    return tot / (n * (n - 1) ** 2)


def hajek_means(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    return a.sum(axis=1) / (n - 1)


def leave_one_out_means(a: np.ndarray) -> np.ndarray:
    """``S_{N,-i}``: average of ``a`` over the dyads without agent ``i``."""
    n = a.shape[0]
    total = 0.5 * a.sum(axis=(0, 1))
    return (total[None, :] - a.sum(axis=1)) / math.comb(n - 1, 2)


@dataclass
class VarianceReport:
    n: int
    hessian: np.ndarray
    sigma1: np.ndarray
    sigma23: np.ndarray
    sigma1_tilde: np.ndarray
    omega: np.ndarray
    omega_fg: np.ndarray
    omega_jk: np.ndarray
    omega_jkbc: np.ndarray
    flags: list = field(default_factory=list)

    def omega_for(self, kind: str) -> np.ndarray:
        table = {"analog": self.omega, "fg": self.omega_fg, "jk": self.omega_jk, "jkbc": self.omega_jkbc,
                 "leading": 4 * self.sigma1}
        try:
            return table[kind]
        except KeyError:
            raise ValueError(f"unknown variance kind {kind!r}; choose from {sorted(table)}") from None

    def vcov(self, kind: str = "fg") -> np.ndarray:
        """``V(sqrt(N)(theta_hat - theta))`` as the sandwich ``Gamma^-1 Omega Gamma^-1``."""
        ginv = np.linalg.pinv(self.hessian, rcond=PINV_RCOND)
        v = ginv @ self.omega_for(kind) @ ginv.T
        return 0.5 * (v + v.T)

    def se(self, kind: str = "fg") -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov(kind)), 0.0, None) / self.n)


def variance_report(fit: FitResult) -> VarianceReport:
    """Analog, pairs-of-dyads, jackknife and bias-corrected jackknife estimates of ``V(sqrt(N) S_N)``."""
    n = fit.n
    if n < 4:
        raise ValueError("variance estimates need at least four agents")
    a = fit.sym_scores
    s1 = sigma1_hat(a)
    s23 = sigma23_hat(a)
    s1 = 0.5 * (s1 + s1.T)
    sbar = hajek_means(a)
    s1t = sbar.T @ sbar / n
    omega = 4 * s1 + 2.0 / (n - 1) * (s23 - 2 * s1)
    fg = omega_fg(fit.scores)
    diff = leave_one_out_means(a) - fit.score_mean()[None, :]
    jk = (n - 2) ** 2 / n * diff.T @ diff
    jkbc = jk - 2.0 / (n - 1) * s23
    flags = []
    if not fit.complete:
        flags.append("incomplete dyad census: missing scores treated as zero")
    if fit.separated:
        flags.append("possible separation: fitted index exceeds 30 in magnitude")
    return VarianceReport(n, fit.hessian, s1, s23, s1t, omega, fg, jk, jkbc, flags)


# ---------------------------------------------------------------------------
# bootstraps

@dataclass
class BootstrapResult:
    scheme: str
    replicates: np.ndarray
    dropped: int
    se: np.ndarray
    ci: np.ndarray
    level: float
    omega: np.ndarray | None = None


def _ci(theta: np.ndarray, reps: np.ndarray, level: float, method: str) -> np.ndarray:
    alpha = 1 - level
    if method == "percentile":
        return np.quantile(reps, [alpha / 2, 1 - alpha / 2], axis=0).T
    if method == "normal":
        from scipy.stats import norm

        z = norm.ppf(1 - alpha / 2)
        sd = reps.std(axis=0, ddof=1)
        return np.stack([theta - z * sd, theta + z * sd], axis=1)
    raise ValueError(f"unknown interval method {method!r}")


def node_weights(n: int, dist: str, rng: np.random.Generator) -> np.ndarray:
    if dist == "exponential":
        return rng.exponential(1.0, n)
    if dist == "multinomial":
        return rng.multinomial(n, np.full(n, 1.0 / n)).astype(float)
    raise ValueError(f"unknown weight law {dist!r}")


MAMMEN_LOW = -(math.sqrt(5) - 1) / 2
MAMMEN_HIGH = (math.sqrt(5) + 1) / 2
MAMMEN_P_LOW = (math.sqrt(5) + 1) / (2 * math.sqrt(5))


def mammen_weights(n: int, rng: np.random.Generator) -> np.ndarray:
    """Two-point weights with mean 0, variance 1 and third moment 1."""
    return np.where(rng.random(n) < MAMMEN_P_LOW, MAMMEN_LOW, MAMMEN_HIGH)


def pigeonhole_sample(ds: DyadicDataset, rng: np.random.Generator) -> DyadicDataset:
    """Resample agents with replacement; cells pairing an agent with itself get a
    uniformly drawn observed off-diagonal (outcome, features) cell."""
    n = ds.n
    idx = rng.integers(0, n, n)
    y = ds.y[np.ix_(idx, idx)].copy()
    w = ds.w[np.ix_(idx, idx)].copy()
    obs = ds.observed[np.ix_(idx, idx)].copy()
    src_i, src_j = np.nonzero(ds.fit_mask())
    hit_a, hit_b = np.nonzero((idx[:, None] == idx[None, :]) & ~np.eye(n, dtype=bool))
    for a, b in zip(hit_a, hit_b):
        if not ds.directed and a > b:
            continue
        k = rng.integers(0, len(src_i))
        y[a, b] = ds.y[src_i[k], src_j[k]]
        w[a, b] = ds.w[src_i[k], src_j[k]]
        obs[a, b] = True
        if not ds.directed:
            y[b, a], w[b, a], obs[b, a] = y[a, b], w[a, b], True
    return DyadicDataset(y, w, list(ds.names), ds.directed, obs)


def menzel_score_mean(fit: FitResult, idx: np.ndarray, v: np.ndarray) -> np.ndarray:
    """One BS-N draw of the score mean over resampled agents ``idx`` with weights ``v``
    (indexed by original agent)."""
    s = fit.scores
    n = fit.n
    ego = s.sum(axis=1) / (n - 1)
    alt = s.sum(axis=0) / (n - 1)
    e = s - ego[:, None, :] - alt[None, :, :]
    e[np.arange(n), np.arange(n)] = 0.0
    sb = ego[idx][:, None, :] + alt[idx][None, :, :] + (v[idx][:, None] * v[idx][None, :])[:, :, None] * e[np.ix_(idx, idx)]
    iu, ju = np.triu_indices(n, 1)
    return 0.5 * (sb[iu, ju] + sb[ju, iu]).mean(axis=0)


def bootstrap(fit: FitResult, scheme: str = "weighted", B: int = 999, seed=None, dist: str = "exponential",
              level: float = 0.95, ci: str = "percentile") -> BootstrapResult:
    """Weighted, pigeonhole or BS-N bootstrap around a fitted dyadic model.

    Replicates that fail to converge are dropped and counted.
    """
    if B < 100:
        raise ValueError("use at least 100 bootstrap replicates")
    ds = fit.dataset
    n = fit.n
    reps = []
    dropped = 0
    omega = None
    if scheme == "menzel-bsn":
        sbs = []
        for b in range(B):
            rng = stream(seed, "bootstrap-bsn", b)
            idx = rng.integers(0, n, n)
            v = mammen_weights(n, rng)
            sbs.append(menzel_score_mean(fit, idx, v))
        sbs = np.array(sbs)
        omega = n * np.cov(sbs, rowvar=False, ddof=1).reshape(ds.k, ds.k)
        ginv = np.linalg.pinv(fit.hessian, rcond=PINV_RCOND)
        reps = fit.theta[None, :] - sbs @ ginv.T
        vc = ginv @ omega @ ginv.T
        se = np.sqrt(np.clip(np.diag(vc), 0, None) / n)
        return BootstrapResult(scheme, reps, 0, se, _ci(fit.theta, reps, level, ci), level, omega)
    for b in range(B):
        rng = stream(seed, f"bootstrap-{scheme}", b)
        try:
            if scheme == "weighted":
                v = node_weights(n, dist, rng)
                th = newton(ds, fit.family, fit.theta, weights=v[:, None] * v[None, :])[0]
            elif scheme == "pigeonhole":
                th = newton(pigeonhole_sample(ds, rng), fit.family, fit.theta)[0]
            else:
                raise ValueError(f"unknown bootstrap scheme {scheme!r}")
        except (ConvergenceError, np.linalg.LinAlgError, FloatingPointError):
            dropped += 1
            continue
        if not np.all(np.isfinite(th)):
            dropped += 1
            continue
        reps.append(th)
    reps = np.array(reps).reshape(-1, ds.k)
    se = reps.std(axis=0, ddof=1)
    return BootstrapResult(scheme, reps, dropped, se, _ci(fit.theta, reps, level, ci), level)
