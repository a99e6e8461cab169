"""Average structural function (ASF) estimation for dyadic policies.

A parametric proxy-variable regression ``q(w, x, r, s; gamma)`` is fitted by
dyadic composite likelihood on ``(W_i, X_j, R_i, S_j)``. The ASF at ``(w, x)``
averages fitted values over all ego/alter proxy pairs; its standard error adds
the proxy-sampling term ``4 Xi`` to the first-stage term ``M V M'``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .dyadic import DyadicDataset, FitResult, VarianceReport, fit_composite, variance_report

MAX_DISCRETE_LEVELS = 20


class OverlapError(ValueError):
    """Estimated ``p_w(r) p_x(s)`` falls below the overlap floor in some cells."""

    def __init__(self, message: str, cells: list):
        super().__init__(message)
        self.cells = cells


class IdentificationError(ValueError):
    """Proxy-variable basis is rank deficient or lacks a constant."""


@dataclass
class PolicyDataset:
    """Per-node ego treatment ``w``, alter treatment ``x``, proxies ``r`` and ``s``;
    per-ordered-dyad outcome ``y``."""

    w: np.ndarray
    x: np.ndarray
    r: np.ndarray
    s: np.ndarray
    y: np.ndarray
    w_support: tuple | None = None
    x_support: tuple | None = None

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.r = np.atleast_2d(np.asarray(self.r, dtype=float).T).T
        self.s = np.atleast_2d(np.asarray(self.s, dtype=float).T).T
        self.y = np.asarray(self.y, dtype=float)
        n = self.w.shape[0]
        for name, arr in (("x", self.x), ("r", self.r), ("s", self.s)):
            if arr.shape[0] != n:
                raise ValueError(f"{name} must have one row per node")
        if self.y.shape != (n, n):
            raise ValueError("y must be (n, n)")
        if self.w_support is None:
            self.w_support = tuple(np.unique(self.w))
        if self.x_support is None:
            self.x_support = tuple(np.unique(self.x))
        if not set(np.unique(self.w)) <= set(self.w_support):
            raise ValueError("ego treatment outside its declared support")
        if not set(np.unique(self.x)) <= set(self.x_support):
            raise ValueError("alter treatment outside its declared support")

    @property
    def n(self) -> int:
        return self.w.shape[0]


def _factor_values(name: str, w, x, r, s):
    if name == "w":
        return w
    if name == "x":
        return x
    if name in ("r", "s"):
        return (r if name == "r" else s)[..., 0]
    if name[0] in "rs" and name[1:].isdigit():
        return (r if name[0] == "r" else s)[..., int(name[1:])]
    raise ValueError(f"unknown basis factor {name!r}; use 1, w, x, r, s, r<k>, s<k>")


def basis_values(terms: Sequence[str], w, x, r, s) -> np.ndarray:
    """Evaluate basis terms such as ``1``, ``w``, ``w*x``, ``r0*s1`` (last axis = term)."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    shape = np.broadcast_shapes(w.shape, x.shape, r.shape[:-1], s.shape[:-1])
    cols = []
    for term in terms:
        val = np.ones(shape)
        if term.strip() != "1":
            for factor in term.split("*"):
                val = val * _factor_values(factor.strip(), w, x, r, s)
        cols.append(np.broadcast_to(val, shape))
    return np.stack(cols, axis=-1)


def _mean_fn(family: str):
    if family == "poisson":
        return np.exp, np.exp
    if family == "logit":
        return expit, lambda e: expit(e) * (1 - expit(e))
    if family == "probit":
        return norm.cdf, norm.pdf
    if family == "gaussian":
        return (lambda e: e), np.ones_like
    raise ValueError(f"unknown family {family!r}")


@dataclass
class PvrFit:
    """Fitted proxy-variable regression with its dyadic-robust first-stage variance."""

    data: PolicyDataset
    family: str
    terms: tuple
    fit: FitResult
    variance: VarianceReport
    diagnostics: list = field(default_factory=list)

    @property
    def gamma(self) -> np.ndarray:
        return self.fit.theta

    def q_matrix(self, w, x, gamma=None):
        """``q(w, x, R_i, S_j)`` for every ordered pair and its gradient in ``gamma``."""
        g = self.gamma if gamma is None else np.asarray(gamma, dtype=float)
        d = self.data
        t = basis_values(self.terms, w, x, d.r[:, None, :], d.s[None, :, :])
        eta = t @ g
        mean, dmean = _mean_fn(self.family)
        return mean(eta), dmean(eta)[..., None] * t


def fit_pvr(data: PolicyDataset, family: str = "poisson", terms: Sequence[str] = ("1", "w", "x", "w*x", "r", "s"),
            tol: float = 1e-10) -> PvrFit:
    """Fit ``q`` on ordered dyads with features ``T(W_i, X_j, R_i, S_j)``."""
    terms = tuple(t.strip() for t in terms)
    if "1" not in terms:
        raise IdentificationError("the basis must include a constant term '1'")
    n = data.n
    feats = basis_values(terms, data.w[:, None], data.x[None, :], data.r[:, None, :], data.s[None, :, :])
    feats = feats.copy()
    feats[np.arange(n), np.arange(n)] = 0.0
    off = ~np.eye(n, dtype=bool)
    rank = np.linalg.matrix_rank(feats[off])
    if rank < len(terms):
        raise IdentificationError(f"basis has rank {rank} < {len(terms)} terms over the observed dyads")
    diagnostics = []
    if not any(set(t.split("*")) >= {"w", "x"} for t in terms):
        diagnostics.append("basis has no ego-by-alter treatment interaction")
    if _is_continuous(data.r) or _is_continuous(data.s):
        diagnostics.append("continuous proxies: the parametric PVR extrapolates between proxy values")
        warnings.warn(diagnostics[-1], stacklevel=2)
    ds = DyadicDataset(data.y, feats, list(terms), directed=True)
    fit = fit_composite(ds, family, tol=tol)
    return PvrFit(data, family, terms, fit, variance_report(fit), diagnostics)


def _is_continuous(a: np.ndarray) -> bool:
    return any(len(np.unique(a[:, k])) > MAX_DISCRETE_LEVELS for k in range(a.shape[1]))


def overlap_cells(data: PolicyDataset, w, x, kappa: float) -> list[tuple]:
    """Proxy cells ``(r, s)`` where ``p_w(r) p_x(s) < kappa`` (discrete proxies)."""
    bad = []
    r_keys = [tuple(float(v) for v in row) for row in data.r]
    s_keys = [tuple(float(v) for v in row) for row in data.s]
    p_w = {}
    for key in set(r_keys):
        sel = np.array([k == key for k in r_keys])
        p_w[key] = float(np.mean(data.w[sel] == w))
    p_x = {}
    for key in set(s_keys):
        sel = np.array([k == key for k in s_keys])
        p_x[key] = float(np.mean(data.x[sel] == x))
    for rk in sorted(p_w):
        for sk in sorted(p_x):
            if p_w[rk] * p_x[sk] < kappa:
                bad.append((w, x, rk, sk, p_w[rk] * p_x[sk]))
    return bad


@dataclass
class AsfEstimate:
    w: float
    x: float
    value: float
    psi: np.ndarray
    jacobian: np.ndarray
    xi: float
    first_stage: float
    variance: float
    n: int
    variance_label: str
    gamma_vcov: np.ndarray = field(repr=False, default=None)
    notes: list = field(default_factory=list)

    @property
    def se(self) -> float:
        return math.sqrt(max(self.variance, 0.0) / self.n)


def _u_stat_fg(k: np.ndarray) -> float:
    """Pairs-of-dyads variance of ``sqrt(N)`` times the mean of a symmetric kernel."""
    n = k.shape[0]
    off = ~np.eye(n, dtype=bool)
    kk = np.where(off, k, 0.0)
    r = kk.sum(axis=1)
    s1 = (r @ r - np.sum(kk * kk)) / (n * (n - 1) * (n - 2))
    s23 = np.sum(kk * kk) / (n * (n - 1))
    return 4 * s1 + 2.0 / (n - 1) * (s23 - 2 * s1)


def asf(pvr: PvrFit, w, x, *, kappa: float | None = None, omega: str = "fg", variance: str = "sandwich",
        xi: str = "hajek", gamma=None, first_stage: bool = True) -> AsfEstimate:
    """ASF at ``(w, x)`` with its influence values, Jacobian and standard error.

    ``variance``: ``sandwich`` uses ``M V M'`` with ``V = Gamma^-1 Omega Gamma^-1``
    for the chosen ``omega`` kind; ``sigma1`` uses ``4 M (Gamma' Sigma1^-1 Gamma)^-1 M'``.
    ``xi``: ``hajek`` uses ``4 mean(psi^2)``; ``fg`` the pairs-of-dyads analog.
    The covariance between the two pieces is taken to be zero.
    """
    d = pvr.data
    if w not in d.w_support or x not in d.x_support:
        raise ValueError(f"({w}, {x}) outside the declared treatment supports")
    if kappa is not None:
        if _is_continuous(d.r) or _is_continuous(d.s):
            warnings.warn("overlap check skipped for continuous proxies", stacklevel=2)
        else:
            bad = overlap_cells(d, w, x, kappa)
            if bad:
                cells = ", ".join(f"(w={c[0]}, x={c[1]}, r={c[2]}, s={c[3]}): {c[4]:.3g}" for c in bad)
                raise OverlapError(f"overlap below {kappa}: {cells}", bad)
    n = d.n
    q, dq = pvr.q_matrix(w, x, gamma)
    off = ~np.eye(n, dtype=bool)
    vals = q[off]
    # a proxy-free basis gives a constant kernel, whose average is that constant
    value = float(vals[0]) if np.ptp(vals) == 0 else float(vals.mean())
    sym = 0.5 * (q + q.T)
    psi = np.where(off, sym, 0.0).sum(axis=1) / (n - 1) - value
    jac = dq[off].mean(axis=0)
    if xi == "hajek":
        xi_term = 4 * float(np.mean(psi ** 2))
    elif xi == "fg":
        xi_term = _u_stat_fg(sym - value)
    else:
        raise ValueError(f"unknown xi kind {xi!r}")
    vc = _gamma_vcov(pvr.variance, omega, variance)
    fs = float(jac @ vc @ jac) if first_stage else 0.0
    label = f"{'4*mean(psi^2)' if xi == 'hajek' else 'pairs-of-dyads'} + " + (
        f"M V M' with V from omega={omega}" if variance == "sandwich" else "4 M (Gamma' Sigma1^-1 Gamma)^-1 M'")
    if not first_stage:
        label = label.split(" + ")[0] + " (first stage held fixed)"
    return AsfEstimate(float(w), float(x), value, psi, jac, xi_term, fs, xi_term + fs, n, label, vc,
                       ["cross-covariance of the proxy and first-stage terms set to zero"])


def _gamma_vcov(rep: VarianceReport, omega: str, variance: str) -> np.ndarray:
    if variance == "sandwich":
        return rep.vcov(omega)
    if variance == "sigma1":
        g = rep.hessian
        return 4 * np.linalg.pinv(g.T @ np.linalg.pinv(rep.sigma1) @ g)
    raise ValueError(f"unknown variance kind {variance!r}")


@dataclass
class Contrast:
    value: float
    se: float
    weights: tuple


def asf_contrast(estimates: Sequence[AsfEstimate], weights: Sequence[float]) -> Contrast:
    """Linear combination of ASF cells with a standard error from stacked influence values."""
    if len(estimates) != len(weights):
        raise ValueError("one weight per ASF cell")
    if not estimates:
        raise ValueError("no ASF cells supplied")
    c = np.asarray(weights, dtype=float)
    n = estimates[0].n
    psi = np.stack([e.psi for e in estimates])
    jac = np.stack([e.jacobian for e in estimates])
    value = float(c @ np.array([e.value for e in estimates]))
    vc = estimates[0].gamma_vcov
    cj = c @ jac
    var = 4 * float(c @ (psi @ psi.T / n) @ c) + float(cj @ vc @ cj)
    return Contrast(value, math.sqrt(max(var, 0.0) / n), tuple(c))


def _cells(pvr: PvrFit, pairs, **kw):
    return [asf(pvr, w, x, **kw) for w, x in pairs]


def ate(pvr: PvrFit, **kw) -> Contrast:
    """``m(1,1) - m(0,0)``."""
    return asf_contrast(_cells(pvr, [(1, 1), (0, 0)], **kw), [1, -1])


def complementarity(pvr: PvrFit, **kw) -> Contrast:
    """``m(1,1) - m(0,1) - m(1,0) + m(0,0)``."""
    return asf_contrast(_cells(pvr, [(1, 1), (0, 1), (1, 0), (0, 0)], **kw), [1, -1, -1, 1])


def simulate_linear_policy(n: int, alpha: float, beta: float, gamma: float, delta: float, seed,
                           proxy_effect: float = 1.0, noise: float = 1.0) -> PolicyDataset:
    """``Y_ij = alpha + beta W_i + gamma X_j + delta W_i X_j + A_i + B_j + V_ij`` with
    treatments selected on binary proxies that also shift ``A`` and ``B``."""
    from ._rng import stream

    rng = stream(seed, "asf-linear")
    r = rng.integers(0, 2, n).astype(float)
    s = rng.integers(0, 2, n).astype(float)
    w = (rng.random(n) < 0.3 + 0.4 * r).astype(float)
    x = (rng.random(n) < 0.3 + 0.4 * s).astype(float)
    a = proxy_effect * r + rng.normal(0, 0.5, n)
    b = proxy_effect * s + rng.normal(0, 0.5, n)
    y = alpha + beta * w[:, None] + gamma * x[None, :] + delta * w[:, None] * x[None, :] + a[:, None] + b[None, :]
    y = y + noise * rng.normal(size=(n, n))
    np.fill_diagonal(y, np.nan)
    return PolicyDataset(w, x, r, s, y, (0.0, 1.0), (0.0, 1.0))
