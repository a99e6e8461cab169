"""Triad probit: composite likelihood over pairs of dyads sharing one agent.

Each component is the probability of the four outcomes ``(Y_ij, Y_ji, Y_ik, Y_ki)``
under a correlated random-effects probit, a four-variate normal orthant
probability evaluated by GHK simulation. Draws are fixed per (seed, triad,
centre), so the simulated criterion is smooth in the parameters and does not
depend on thread scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange
from scipy.optimize import minimize
from scipy.special import ndtr, ndtri

from ._rng import stream
from .asf import PolicyDataset, PvrFit, basis_values
from .dyadic import DyadicDataset, PINV_RCOND, fit_composite

DEFAULT_DRAWS = 512
PARAM_NAMES = ("zeta", "sigma_a", "sigma_b", "rho")
# lower-triangular entries of a 4x4 Cholesky factor, row by row
_TRIL = [(d, l) for d in range(4) for l in range(d + 1)]
_TRIL_INDEX = np.full((4, 4), -1, dtype=np.int64)
for _k, (_d, _l) in enumerate(_TRIL):
    _TRIL_INDEX[_d, _l] = _k


class ParameterRegionError(ValueError):
    """Correlation matrix implied by the parameters is not positive definite."""


# ---------------------------------------------------------------------------
# correlation structure

def sigma_matrix(zeta: float, sigma_a: float, sigma_b: float, rho: float) -> np.ndarray:
    """Correlation of the latent shocks of ``(ij, ji, ik, ki)``."""
    den = 1.0 + sigma_a ** 2 + sigma_b ** 2
    if den <= 0:
        raise ParameterRegionError("1 + sigma_a^2 + sigma_b^2 must be positive")
    recip = (zeta + 2 * rho * sigma_a * sigma_b) / den
    cross = rho * sigma_a * sigma_b / den
    ego = sigma_a ** 2 / den
    alt = sigma_b ** 2 / den
    return np.array([
        [1.0, recip, ego, cross],
        [recip, 1.0, cross, alt],
        [ego, cross, 1.0, recip],
        [cross, alt, recip, 1.0],
    ])


def sigma_jacobian(zeta: float, sigma_a: float, sigma_b: float, rho: float) -> np.ndarray:
    """Derivatives of ``sigma_matrix`` in (zeta, sigma_a, sigma_b, rho): shape (4, 4, 4)."""
    sa, sb = sigma_a, sigma_b
    den = 1.0 + sa ** 2 + sb ** 2
    sig = sigma_matrix(zeta, sa, sb, rho)
    out = np.zeros((4, 4, 4))

    def numer(d12, d13, d14, d24, dden):
        m = np.array([
            [dden, d12, d13, d14],
            [d12, dden, d14, d24],
            [d13, d14, dden, d12],
            [d14, d24, d12, dden],
        ])
        return (m - sig * dden) / den

    out[0] = numer(1.0, 0.0, 0.0, 0.0, 0.0)
    out[1] = numer(2 * rho * sb, 2 * sa, rho * sb, 0.0, 2 * sa)
    out[2] = numer(2 * rho * sa, 0.0, rho * sa, 2 * sb, 2 * sb)
    out[3] = numer(2 * sa * sb, 0.0, sa * sb, 0.0, 0.0)
    return out


def checked_cholesky(sig: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(sig)
    except np.linalg.LinAlgError:
        raise ParameterRegionError("correlation matrix is not positive definite") from None


def cholesky_jacobian(chol: np.ndarray, dsig: np.ndarray) -> np.ndarray:
    """``dL = L tril*(L^-1 dSigma L^-T)`` with the diagonal halved, for each direction."""
    linv = np.linalg.inv(chol)
    out = np.empty_like(dsig)
    for k in range(dsig.shape[0]):
        x = linv @ dsig[k] @ linv.T
        x = np.tril(x) - 0.5 * np.diag(np.diag(x))
        out[k] = chol @ x
    return out


# ---------------------------------------------------------------------------
# GHK: generic orthant probabilities

@dataclass(frozen=True)
class OrthantProb:
    p: float
    se: float
    draws: int


def orthant_prob(sigma, lower, upper, draws: int = DEFAULT_DRAWS, seed=None) -> OrthantProb:
    """``P(lower < Z < upper)`` for ``Z ~ N(0, sigma)`` by GHK with antithetic draws.

    The standard error treats antithetic pair averages as independent.
    """
    sigma = np.asarray(sigma, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    dim = sigma.shape[0]
    chol = checked_cholesky(sigma)
    half = max(1, draws // 2)
    u = stream(seed, "ghk", dim).random((half, max(dim - 1, 1)))
    u = np.concatenate([u, 1.0 - u])
    z = np.zeros((2 * half, dim))
    prob = np.ones(2 * half)
    for d in range(dim):
        mu = z[:, :d] @ chol[d, :d]
        a = ndtr((lower[d] - mu) / chol[d, d])
        b = ndtr((upper[d] - mu) / chol[d, d])
        width = np.clip(b - a, 0.0, 1.0)
        prob *= width
        if d < dim - 1:
            t = np.clip(a + u[:, d] * width, 1e-16, 1 - 1e-16)
            z[:, d] = ndtri(t)
    pairs = 0.5 * (prob[:half] + prob[half:])
    se = float(pairs.std(ddof=1) / math.sqrt(half)) if half > 1 else float("nan")
    return OrthantProb(float(prob.mean()), se, 2 * half)


def bounds_for(y, index) -> tuple[np.ndarray, np.ndarray]:
    """Integration limits: ``(-inf, index)`` when ``y = 1`` and ``[index, inf)`` when ``y = 0``."""
    y = np.asarray(y)
    index = np.asarray(index, dtype=float)
    lower = np.where(y == 1, -np.inf, index)
    upper = np.where(y == 1, index, np.inf)
    return lower, upper


# ---------------------------------------------------------------------------
# compiled kernel

@njit(cache=True, inline="always")
def _splitmix(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = x
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return x, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _ndtri(p):
    # Wichura's AS241 (PPND16)
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r
                   + 45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r
                 + 133.14166789178437745) * r + 3.387132872796366608)
        den = (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r
                   + 21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r
                 + 42.313330701600911252) * r + 1.0)
        return q * num / den
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r
                   + 1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                 + 4.6303378461565452959) * r + 1.42343711074968357734)
        den = (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r
                   + 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r
                 + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r
                   + 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                 + 5.4637849111641143699) * r + 6.6579046435011037772)
        den = (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r
                   + 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
                 + 0.59983220655588793769) * r + 1.0)
    val = num / den
    return -val if q < 0 else val


@njit(cache=True)
def _phi(x):
    return math.exp(-0.5 * x * x) * 0.3989422804014327


@njit(cache=True)
def _cdf(x):
    return 0.5 * math.erfc(-x * 0.7071067811865476)


@njit(cache=True)
def _ghk_item(chol, tril_index, c, s, draws, key, grad_out):
    """Log orthant probability for one item and its gradient in
    (4 bounds, 10 Cholesky entries). Antithetic uniforms from a keyed hash."""
    z = np.zeros(4)
    dz = np.zeros((4, 14))
    u = np.zeros(3)
    dmu = np.zeros(14)
    de = np.zeros(14)
    dlog = np.zeros(14)
    gsum = np.zeros(14)
    psum = 0.0
    state = key
    for r in range(draws):
        if r % 2 == 0:
            for d in range(3):
                state, bits = _splitmix(state)
                u[d] = ((bits >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)
        else:
            for d in range(3):
                u[d] = 1.0 - u[d]
        prob = 1.0
        for k in range(14):
            dlog[k] = 0.0
        for d in range(4):
            mu = 0.0
            for k in range(14):
                dmu[k] = 0.0
            for l in range(d):
                mu += chol[d, l] * z[l]
                dmu[4 + tril_index[d, l]] += z[l]
                for k in range(14):
                    dmu[k] += chol[d, l] * dz[l, k]
            ldd = chol[d, d]
            e = (c[d] - mu) / ldd
            for k in range(14):
                de[k] = -dmu[k] / ldd
            de[d] += 1.0 / ldd
            de[4 + tril_index[d, d]] -= e / ldd
            se = s[d] * e
            pd = _cdf(se)
            if pd < 1e-300:
                pd = 1e-300
            dens = _phi(e)
            ratio = s[d] * dens / pd
            for k in range(14):
                dlog[k] += ratio * de[k]
            prob *= pd
            if d < 3:
                if s[d] > 0:
                    t = u[d] * pd
                    w = u[d] * dens
                else:
                    t = (1.0 - pd) + u[d] * pd
                    w = (1.0 - u[d]) * dens
                if t < 1e-16:
                    t = 1e-16
                elif t > 1.0 - 1e-16:
                    t = 1.0 - 1e-16
                zd = _ndtri(t)
                z[d] = zd
                inv = 1.0 / max(_phi(zd), 1e-300)
                for k in range(14):
                    dz[d, k] = w * de[k] * inv
        psum += prob
        for k in range(14):
            gsum[k] += prob * dlog[k]
    p = psum / draws
    if psum <= 0.0:
        for k in range(14):
            grad_out[k] = 0.0
        return math.log(1e-300)
    for k in range(14):
        grad_out[k] = gsum[k] / psum
    return math.log(p)


@njit(cache=True)
def _triad_offsets(n):
    off = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        m = n - 1 - i
        off[i + 1] = off[i] + m * (m - 1) // 2
    return off


@njit(cache=True, parallel=True)
def _triad_kernel(y, index, feats, chol, tril_index, draws, seed, offsets, ll, g_eta, g_chol):
    n = y.shape[0]
    kdim = feats.shape[2]
    for ip in prange(n):
        i = np.int64(ip)
        t = offsets[i]
        c = np.zeros(4)
        s = np.zeros(4)
        grad = np.zeros(14)
        ag = np.zeros(kdim)
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                tot = 0.0
                for kk in range(kdim):
                    ag[kk] = 0.0
                for q in range(10):
                    g_chol[t, q] = 0.0
                for centre in range(3):
                    if centre == 0:
                        h, a, b = i, j, k
                    elif centre == 1:
                        h, a, b = j, i, k
                    else:
                        h, a, b = k, i, j
                    # dyads (ha, ah, hb, bh)
                    c[0] = index[h, a]
                    c[1] = index[a, h]
                    c[2] = index[h, b]
                    c[3] = index[b, h]
                    s[0] = 1.0 if y[h, a] > 0.5 else -1.0
                    s[1] = 1.0 if y[a, h] > 0.5 else -1.0
                    s[2] = 1.0 if y[h, b] > 0.5 else -1.0
                    s[3] = 1.0 if y[b, h] > 0.5 else -1.0
                    key = np.uint64(seed) * np.uint64(0x100000001B3)
                    key = key ^ (np.uint64(i) * np.uint64(0x9E3779B1) + np.uint64(j) * np.uint64(0x85EBCA77)
                                 + np.uint64(k) * np.uint64(0xC2B2AE3D) + np.uint64(centre) * np.uint64(0x27D4EB2F))
                    key = _splitmix(key)[0]
                    tot += _ghk_item(chol, tril_index, c, s, draws, key, grad)
                    for kk in range(kdim):
                        ag[kk] += (grad[0] * feats[h, a, kk] + grad[1] * feats[a, h, kk]
                                   + grad[2] * feats[h, b, kk] + grad[3] * feats[b, h, kk])
                    for q in range(10):
                        g_chol[t, q] += grad[4 + q] / 3.0
                ll[t] = tot / 3.0
                for kk in range(kdim):
                    g_eta[t, kk] = ag[kk] / 3.0
                t += 1


@njit(cache=True)
def _triad_list(n):
    m = n * (n - 1) * (n - 2) // 6
    out = np.empty((m, 3), dtype=np.int64)
    t = 0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                out[t, 0] = i
                out[t, 1] = j
                out[t, 2] = k
                t += 1
    return out


# ---------------------------------------------------------------------------
# criterion

@dataclass(frozen=True)
class TriadProbitParams:
    eta: np.ndarray
    zeta: float = 0.0
    sigma_a: float = 0.0
    sigma_b: float = 0.0
    rho: float = 0.0

    def vector(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.eta, dtype=float), [self.zeta, self.sigma_a, self.sigma_b, self.rho]])

    @classmethod
    def from_vector(cls, v, k: int) -> "TriadProbitParams":
        v = np.asarray(v, dtype=float)
        return cls(v[:k].copy(), float(v[k]), float(v[k + 1]), float(v[k + 2]), float(v[k + 3]))

    def sigma(self) -> np.ndarray:
        return sigma_matrix(self.zeta, self.sigma_a, self.sigma_b, self.rho)


def triad_scores(ds: DyadicDataset, params: TriadProbitParams, draws: int = DEFAULT_DRAWS, seed=0):
    """Per-triad symmetrized log-likelihoods and their gradients in
    ``(eta, zeta, sigma_a, sigma_b, rho)``; triads in lexicographic order."""
    if draws < 2 or draws % 2:
        raise ValueError("draws must be an even number >= 2")
    n = ds.n
    if n < 3:
        raise ValueError("need at least three agents")
    sig = params.sigma()
    chol = checked_cholesky(sig)
    dchol = cholesky_jacobian(chol, sigma_jacobian(params.zeta, params.sigma_a, params.sigma_b, params.rho))
    feats = np.ascontiguousarray(ds.w)
    index = feats @ np.asarray(params.eta, dtype=float)
    y = np.nan_to_num(ds.y, nan=0.0)
    offsets = _triad_offsets(n)
    m = int(offsets[-1])
    ll = np.empty(m)
    g_eta = np.empty((m, ds.k))
    g_chol = np.empty((m, 10))
    seed_int = int(seed or 0) & 0xFFFFFFFF
    _triad_kernel(y, index, feats, chol, _TRIL_INDEX, int(draws), seed_int, offsets, ll, g_eta, g_chol)
    dl = np.array([[dchol[p][d, l] for (d, l) in _TRIL] for p in range(4)])  # (4 params, 10 entries)
    g_sig = g_chol @ dl.T
    return ll, np.concatenate([g_eta, g_sig], axis=1)


def triad_loglik(ds: DyadicDataset, params: TriadProbitParams, draws: int = DEFAULT_DRAWS, seed=0) -> float:
    """``L_N = C(N,3)^-1 sum_{i<j<k} l_ijk``."""
    return float(triad_scores(ds, params, draws, seed)[0].mean())


# ---------------------------------------------------------------------------
# estimation

_FIELD_INDEX = {name: k for k, name in enumerate(PARAM_NAMES)}


def _to_natural(u: np.ndarray, k: int, free: tuple, fixed: dict) -> np.ndarray:
    v = np.empty(k + 4)
    v[:k] = u[:k]
    pos = k
    for name in PARAM_NAMES:
        if name in free:
            val = u[pos]
            pos += 1
            v[k + _FIELD_INDEX[name]] = math.tanh(val) if name in ("zeta", "rho") else val
        else:
            v[k + _FIELD_INDEX[name]] = fixed.get(name, 0.0)
    return v


def _natural_jacobian(u: np.ndarray, k: int, free: tuple) -> np.ndarray:
    """d natural / d u for the free coordinates: shape (k + 4, len(u))."""
    jac = np.zeros((k + 4, len(u)))
    jac[:k, :k] = np.eye(k)
    pos = k
    for name in PARAM_NAMES:
        if name in free:
            val = u[pos]
            jac[k + _FIELD_INDEX[name], pos] = 1.0 - math.tanh(val) ** 2 if name in ("zeta", "rho") else 1.0
            pos += 1
    return jac


@dataclass
class TriadProbitFit:
    params: TriadProbitParams
    names: list
    loglik: float
    scores: np.ndarray
    hessian: np.ndarray
    sigma_q: dict
    free: tuple
    n: int
    draws: int
    converged: bool
    message: str
    grad_norm: float
    vcov_leading: np.ndarray = field(repr=False, default=None)
    vcov_full: np.ndarray = field(repr=False, default=None)

    def se(self, kind: str = "full") -> np.ndarray:
        """Standard errors; ``nan`` where the all-terms variance estimate is negative.

        The ``leading`` kind uses a positive semidefinite node-mean estimate and is always defined.
        """
        v = self.vcov_full if kind == "full" else self.vcov_leading
        d = np.diag(v) / self.n
        return np.where(d >= 0, np.sqrt(np.abs(d)), np.nan)

    @property
    def theta(self) -> np.ndarray:
        return self.params.vector()[self.active]

    @property
    def active(self) -> np.ndarray:
        k = len(self.params.eta)
        idx = list(range(k)) + [k + _FIELD_INDEX[nm] for nm in PARAM_NAMES if nm in self.free]
        return np.array(idx)


def score_sigma_q(scores: np.ndarray, n: int) -> dict[int, np.ndarray]:
    """Average ``s_A s_B'`` over ordered pairs of distinct triads sharing exactly ``q``
    agents (``q = 3``: the same triad), from node and dyad sums of triad scores."""
    tri = _triad_list(n)
    k = scores.shape[1]
    node = np.zeros((n, k))
    for col in range(3):
        np.add.at(node, tri[:, col], scores)
    keys = np.concatenate([tri[:, a] * n + tri[:, b] for a, b in ((0, 1), (0, 2), (1, 2))])
    vals = np.concatenate([scores] * 3)
    _, inv = np.unique(keys, return_inverse=True)
    dsum = np.zeros((inv.max() + 1, k))
    np.add.at(dsum, inv, vals)
    dyad_sum = dsum.T @ dsum
    p3 = scores.T @ scores
    p2 = dyad_sum - 3 * p3
    p1 = node.T @ node - 2 * p2 - 3 * p3
    c3 = math.comb(n, 3)
    counts = {1: c3 * 3 * math.comb(n - 3, 2), 2: c3 * 3 * (n - 3), 3: c3}
    return {q: (p / counts[q] if counts[q] else np.zeros((k, k))) for q, p in ((1, p1), (2, p2), (3, p3))}


def hajek_sigma1(scores: np.ndarray, n: int) -> np.ndarray:
    """``N^-1 sum_i sbar_i sbar_i'`` with ``sbar_i`` the mean score of triads containing ``i``.

    Positive semidefinite, unlike the one-shared-agent U-statistic in ``score_sigma_q``.
    """
    tri = _triad_list(n)
    node = np.zeros((n, scores.shape[1]))
    for col in range(3):
        np.add.at(node, tri[:, col], scores)
    node /= math.comb(n - 1, 2)
    return node.T @ node / n


def score_variance(sigma_q: dict, n: int) -> np.ndarray:
    """Exact ``N V(S_N)`` for a third-order U-statistic mean of scores."""
    return (9 * (n - 3) * (n - 4) * sigma_q[1] + 18 * (n - 3) * sigma_q[2] + 6 * sigma_q[3]) / ((n - 1) * (n - 2))


def fit_triad_probit(ds: DyadicDataset, init: TriadProbitParams | None = None, draws: int = DEFAULT_DRAWS, seed=0,
                     free: tuple = PARAM_NAMES, fixed: dict | None = None, tol: float = 1e-6,
                     max_iter: int = 200) -> TriadProbitFit:
    """Maximize the simulated triad composite likelihood by BFGS with analytic gradients."""
    if ds.n < 4:
        raise ValueError("triad probit needs at least four agents")
    y = ds.y[ds.observed]
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("triad probit needs binary outcomes")
    if not ds.directed:
        raise ValueError("triad probit models directed outcomes")
    fixed = dict(fixed or {})
    free = tuple(nm for nm in PARAM_NAMES if nm in free)
    k = ds.k
    if init is None:
        eta0 = fit_composite(ds, "probit").theta
        init = TriadProbitParams(eta0, 0.0, 0.3, 0.3, 0.0)
    start = [*np.asarray(init.eta, dtype=float)]
    for name in free:
        val = getattr(init, name)
        start.append(math.atanh(np.clip(val, -0.99, 0.99)) if name in ("zeta", "rho") else val)
    start = np.array(start)

    def objective(u):
        v = _to_natural(u, k, free, fixed)
        try:
            ll, g = triad_scores(ds, TriadProbitParams.from_vector(v, k), draws, seed)
        except ParameterRegionError:
            return 1e10, np.zeros_like(u)
        grad = g.mean(axis=0) @ _natural_jacobian(u, k, free)
        return -float(ll.mean()), -grad

    res = minimize(objective, start, jac=True, method="BFGS", options={"gtol": tol, "maxiter": max_iter})
    v = _to_natural(res.x, k, free, fixed)
    if "sigma_a" in free and "sigma_b" in free and v[k + 1] < 0 and v[k + 2] < 0:
        v[k + 1], v[k + 2] = -v[k + 1], -v[k + 2]
    params = TriadProbitParams.from_vector(v, k)
    ll, scores = triad_scores(ds, params, draws, seed)
    active = np.array(list(range(k)) + [k + _FIELD_INDEX[nm] for nm in free])
    scores = scores[:, active]
    hess = _numeric_hessian(ds, params, active, draws, seed)
    n = ds.n
    sq = score_sigma_q(scores, n)
    ginv = np.linalg.pinv(hess, rcond=PINV_RCOND)
    lead = 9 * ginv @ hajek_sigma1(scores, n) @ ginv.T
    full = ginv @ score_variance(sq, n) @ ginv.T
    names = list(ds.names) + [nm for nm in free]
    return TriadProbitFit(params, names, float(ll.mean()), scores, hess, sq, free, n, draws, bool(res.success),
                          str(res.message), float(np.max(np.abs(scores.mean(axis=0)))),
                          0.5 * (lead + lead.T), 0.5 * (full + full.T))


def _numeric_hessian(ds, params, active, draws, seed, h: float = 1e-5) -> np.ndarray:
    base = params.vector()
    k = len(params.eta)
    m = len(active)
    hess = np.zeros((m, m))
    for col, idx in enumerate(active):
        step = np.zeros_like(base)
        step[idx] = h
        gp = triad_scores(ds, TriadProbitParams.from_vector(base + step, k), draws, seed)[1].mean(axis=0)[active]
        gm = triad_scores(ds, TriadProbitParams.from_vector(base - step, k), draws, seed)[1].mean(axis=0)[active]
        hess[:, col] = (gp - gm) / (2 * h)
    return 0.5 * (hess + hess.T)


def simulate_triad_probit(feats: np.ndarray, params: TriadProbitParams, seed) -> np.ndarray:
    """Directed binary outcomes ``Y_ij = 1(eps_ij < T_ij' eta)`` with shocks scaled so
    that ``eps`` has the correlation ``sigma_matrix``."""
    n = feats.shape[0]
    rng = stream(seed, "triad-probit-dgp")
    sa, sb, rho, zeta = params.sigma_a, params.sigma_b, params.rho, params.zeta
    cov_ab = np.array([[sa ** 2, rho * sa * sb], [rho * sa * sb, sb ** 2]])
    ab = rng.multivariate_normal(np.zeros(2), cov_ab, size=n, method="svd")
    v = rng.multivariate_normal(np.zeros(2), [[1.0, zeta], [zeta, 1.0]], size=(n, n), method="svd")
    v_ij = np.triu(v[:, :, 0], 1) + np.triu(v[:, :, 1], 1).T
    eps = (ab[:, 0][:, None] + ab[:, 1][None, :] + v_ij) / math.sqrt(1 + sa ** 2 + sb ** 2)
    y = (eps < feats @ np.asarray(params.eta, dtype=float)).astype(float)
    np.fill_diagonal(y, np.nan)
    return y


def link_probability(fit: TriadProbitFit, feats: np.ndarray) -> np.ndarray:
    """``Phi(T_ij' eta)``: the marginal link probability at the fitted index."""
    return ndtr(np.asarray(feats, dtype=float) @ np.asarray(fit.params.eta, dtype=float))


@dataclass(frozen=True)
class _IndexCoefficients:
    theta: np.ndarray


@dataclass(frozen=True)
class _FixedVcov:
    matrix: np.ndarray

    def vcov(self, kind: str = "fg") -> np.ndarray:
        return self.matrix


def as_pvr(fit: TriadProbitFit, data: PolicyDataset, terms, kind: str = "full") -> PvrFit:
    """Wrap the fitted index as a probit proxy-variable regression for ``asf``.

    ``terms`` must be the basis the triad probit was fitted on, evaluated at
    ``(W_i, X_j, R_i, S_j)``. The first-stage variance is the ``eta`` block of
    the triad-probit covariance, whichever ``omega`` kind ``asf`` requests.
    """
    terms = tuple(t.strip() for t in terms)
    k = len(fit.params.eta)
    if len(terms) != k:
        raise ValueError(f"{len(terms)} basis terms for {k} index coefficients")
    feats = basis_values(terms, data.w[:, None], data.x[None, :], data.r[:, None, :], data.s[None, :, :])
    if feats.shape[:2] != (fit.n, fit.n):
        raise ValueError("policy data and triad-probit fit cover different agents")
    v = fit.vcov_full if kind == "full" else fit.vcov_leading
    return PvrFit(data, "probit", terms, _IndexCoefficients(np.asarray(fit.params.eta, dtype=float)),
                  _FixedVcov(v[:k, :k]), ["first stage: triad probit"])
