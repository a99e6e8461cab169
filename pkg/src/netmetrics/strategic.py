"""Strategic network formation.

Three model families share this module:

* transitive-closure utility with complete information: marginal utility
  ``alpha + beta * (common neighbours) - U_ij``, pairwise stability, minimum and
  maximum equilibria by monotone fixed-point iteration, and simulated
  minimum-distance fitting on subgraph frequencies;
* directed links with private information: equilibrium beliefs and the
  two-step probit estimator;
* sequential meetings with logistic link revision: the Markov chain and its
  exact exponential-family stationary law for small graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit
from scipy.special import expit, ndtr

from ._rng import stream
from .dyadic import DyadicDataset, fit_composite
from .moments import count_patterns, moment_covariance


class UnsupportedVariantError(ValueError):
    """Requested computation needs assumptions the parameters violate."""


class EmptyCellError(ValueError):
    """Some covariate configuration has no observed ordered dyad."""

    def __init__(self, cells):
        self.cells = list(cells)
        super().__init__(f"no observed dyads in covariate cells {self.cells}")


# ---------------------------------------------------------------------------
# transitive-closure utility

SHOCK_LAWS = ("normal", "logistic", "dyad-logistic", "dyad-normal")


@dataclass(frozen=True)
class TransitivityParams:
    """``MU_ij = alpha + beta * sum_k d_ik d_jk - U_ij``.

    ``u_law`` sets the shock distribution: ``normal``/``logistic`` draw each
    directed ``U_ij`` independently; the ``dyad-`` laws draw the dyad total
    ``V_ij = U_ij + U_ji`` from the named law and split it evenly.
    """

    alpha: float
    beta: float
    u_law: str = "dyad-logistic"

    def __post_init__(self):
        if self.u_law not in SHOCK_LAWS:
            raise ValueError(f"unknown shock law {self.u_law!r}; choose from {SHOCK_LAWS}")


def draw_shocks(n: int, law: str, seed, replicate: int = 0) -> np.ndarray:
    """Directed ``n x n`` utility shocks with a zero diagonal."""
    rng = stream(seed, "formation-shocks", replicate)
    if law in ("normal", "logistic"):
        u = rng.standard_normal((n, n)) if law == "normal" else rng.logistic(size=(n, n))
    elif law in ("dyad-normal", "dyad-logistic"):
        v = rng.standard_normal((n, n)) if law == "dyad-normal" else rng.logistic(size=(n, n))
        v = np.triu(v, 1)
        u = 0.5 * (v + v.T)
    else:
        raise ValueError(f"unknown shock law {law!r}")
    np.fill_diagonal(u, 0.0)
    return u


def common_neighbours(adj: np.ndarray) -> np.ndarray:
    a = np.asarray(adj, dtype=np.int64)
    cn = a @ a
    np.fill_diagonal(cn, 0)
    return cn


def transitive_utility(adj: np.ndarray, i: int, params: TransitivityParams, u: np.ndarray) -> float:
    """Agent ``i``'s utility with each closed triangle through ``i`` valued at ``beta``.

    Its one-link differences reproduce ``marginal_utility``: a new link ``ij``
    closes ``cn_ij`` triangles, each shared between the two link slots of ``i``.
    """
    a = np.asarray(adj, dtype=np.int64)
    row = a[i]
    triangles = 0.5 * float(row @ a @ row)
    return float(np.sum(row * (params.alpha - u[i]))) + params.beta * triangles


def marginal_utility(adj: np.ndarray, i: int, j: int, params: TransitivityParams, u: np.ndarray) -> float:
    """``alpha + beta * (common neighbours of i and j) - U_ij``.

    The link ``ij`` itself never enters the common-neighbour count, so the
    value is the same whether the link is present (deletion) or absent (addition).
    """
    if i == j:
        raise ValueError("marginal utility needs i != j")
    a = np.asarray(adj, dtype=np.int64)
    cn = int(a[i] @ a[j])
    return params.alpha + params.beta * cn - float(u[i, j])


def marginal_utilities(adj: np.ndarray, params: TransitivityParams, u: np.ndarray) -> np.ndarray:
    mu = params.alpha + params.beta * common_neighbours(adj) - u
    np.fill_diagonal(mu, 0.0)
    return mu


def phi_map(adj: np.ndarray, params: TransitivityParams, u: np.ndarray, transfers: bool = True) -> np.ndarray:
    """One synchronous best-response sweep over all dyads."""
    mu = marginal_utilities(adj, params, u)
    if transfers:
        out = (mu + mu.T) >= 0
    else:
        out = (mu >= 0) & (mu.T >= 0)
    np.fill_diagonal(out, False)
    return out.astype(np.uint8)


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    violations: list

    def __bool__(self) -> bool:
        return self.stable


def is_pairwise_stable(adj: np.ndarray, params: TransitivityParams, u: np.ndarray, transfers: bool = True,
                       max_report: int = 10) -> StabilityReport:
    """Check the stability conditions dyad by dyad.

    Violations are ``(i, j, reason)`` with ``i < j``; at most ``max_report`` are listed.
    """
    a = np.asarray(adj)
    n = a.shape[0]
    if not np.array_equal(a, a.T):
        raise ValueError("pairwise stability is defined for undirected networks")
    mu = marginal_utilities(a, params, u)
    found = []
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            linked = bool(a[i, j])
            if transfers:
                surplus = mu[i, j] + mu[j, i]
                bad = (linked and surplus < 0) or (not linked and surplus >= 0)
                reason = "negative joint surplus" if linked else "nonnegative joint surplus"
            else:
                if linked:
                    bad = mu[i, j] < 0 or mu[j, i] < 0
                    reason = "an endpoint gains by dissolving"
                else:
                    bad = (mu[i, j] > 0 and mu[j, i] >= 0) or (mu[j, i] > 0 and mu[i, j] >= 0)
                    reason = "both endpoints gain by forming"
            if bad:
                total += 1
                if len(found) < max_report:
                    found.append((i, j, reason))
    return StabilityReport(total == 0, found)


@dataclass(frozen=True)
class EquilibriumPair:
    """Minimum and maximum pairwise-stable networks for one shock draw."""

    draw: int
    low: np.ndarray
    high: np.ndarray
    sweeps_low: int
    sweeps_high: int


def _iterate(start: np.ndarray, params, u, transfers: bool, increasing: bool) -> tuple[np.ndarray, int]:
    d = start
    limit = d.shape[0] * (d.shape[0] - 1) // 2 + 1
    for sweep in range(1, limit + 1):
        nxt = phi_map(d, params, u, transfers)
        if increasing and np.any(nxt < d):
            raise RuntimeError("sweep from the empty network removed a link")
        if not increasing and np.any(nxt > d):
            raise RuntimeError("sweep from the complete network added a link")
        if np.array_equal(nxt, d):
            return d, sweep
        d = nxt
    raise RuntimeError("fixed-point iteration exceeded the sweep bound")


def min_max_equilibria(params: TransitivityParams, u: np.ndarray, transfers: bool = True,
                       draw: int = 0) -> EquilibriumPair:
    """Iterate the best-response map from the empty and from the complete network."""
    if params.beta < 0:
        raise UnsupportedVariantError("minimum and maximum equilibria need beta >= 0")
    n = u.shape[0]
    empty = np.zeros((n, n), dtype=np.uint8)
    full = np.ones((n, n), dtype=np.uint8)
    np.fill_diagonal(full, 0)
    low, s_low = _iterate(empty, params, u, transfers, True)
    high, s_high = _iterate(full, params, u, transfers, False)
    return EquilibriumPair(draw, low, high, s_low, s_high)


# ---------------------------------------------------------------------------
# simulated moments and minimum distance

DEFAULT_MOTIFS = ("triangle", "twostar")


def motif_frequencies(adj: np.ndarray, patterns: Sequence = DEFAULT_MOTIFS) -> np.ndarray:
    """Injective homomorphism frequencies of ``patterns``."""
    est = count_patterns(adj, patterns)
    return np.array([est[p].injective_density for p in patterns])


@dataclass(frozen=True)
class SimulatedMoments:
    names: tuple
    low: np.ndarray | None
    high: np.ndarray | None
    low_draws: np.ndarray | None = field(default=None, repr=False)
    high_draws: np.ndarray | None = field(default=None, repr=False)


def simulate_moments(params: TransitivityParams, n: int, B: int, patterns: Sequence = DEFAULT_MOTIFS,
                     selection: str = "both", seed=0, transfers: bool = True) -> SimulatedMoments:
    """Average motif frequencies of the minimum and/or maximum equilibria over ``B`` shock draws.

    Draw ``b`` uses the substream ``(seed, b)`` so different parameter values
    share common random numbers.
    """
    if B < 50:
        raise ValueError("use at least 50 shock draws")
    if selection not in ("min", "max", "both"):
        raise ValueError("selection must be 'min', 'max' or 'both'")
    patterns = tuple(patterns)
    lows, highs = [], []
    for b in range(B):
        u = draw_shocks(n, params.u_law, seed, b)
        eq = min_max_equilibria(params, u, transfers, b)
        if selection in ("min", "both"):
            lows.append(motif_frequencies(eq.low, patterns))
        if selection in ("max", "both"):
            highs.append(motif_frequencies(eq.high, patterns))
    lo = np.array(lows) if lows else None
    hi = np.array(highs) if highs else None
    return SimulatedMoments(patterns, None if lo is None else lo.mean(0), None if hi is None else hi.mean(0), lo, hi)


def observed_motif_moments(g) -> tuple[np.ndarray, np.ndarray]:
    """Injective (triangle, twostar) frequencies and their estimated covariance.

    The covariance maps the induced-density covariance through
    ``Q(triangle) = P(triangle)`` and ``Q(twostar) = P(twostar) + P(triangle)``.
    """
    cov = moment_covariance(g, ("triangle", "twostar"), mode="projection")
    lift = np.array([[1.0, 0.0], [1.0, 1.0]])
    return lift @ cov.densities, lift @ cov.matrix @ lift.T


@dataclass(frozen=True)
class SmdResult:
    mode: str
    grid: np.ndarray
    objective: np.ndarray | None
    theta_hat: np.ndarray | None
    identified_set: np.ndarray | None
    pi_low: np.ndarray
    pi_high: np.ndarray
    caveat: str = ("moment covariance assumes exchangeable-array dependence, which the finite-N "
                   "equilibrium model need not satisfy")

    @property
    def empty(self) -> bool:
        return self.identified_set is not None and len(self.identified_set) == 0


def smd_fit(observed: np.ndarray, omega: np.ndarray, grid, n: int, B: int = 50, seed=0,
            mode: str = "equality", u_law: str = "dyad-logistic", patterns: Sequence = DEFAULT_MOTIFS,
            transfers: bool = True, slack: float = 2.5) -> SmdResult:
    """Grid search over ``(alpha, beta)``.

    ``equality``: minimize the quadratic distance between the maximum-equilibrium
    moments and ``observed``. ``inequality``: keep grid points whose simulated
    band contains ``observed`` componentwise, widened by ``slack`` standard
    errors of sampling plus simulation noise.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[1] != 2:
        raise ValueError("grid rows must be (alpha, beta)")
    observed = np.asarray(observed, dtype=float)
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    if mode not in ("equality", "inequality"):
        raise ValueError("mode must be 'equality' or 'inequality'")
    if mode == "equality":
        if np.linalg.cond(omega) > 1e12:
            raise np.linalg.LinAlgError("moment covariance is not invertible")
        w = np.linalg.inv(omega)
    lows, highs, obj, keep = [], [], [], []
    for alpha, beta in grid:
        sim = simulate_moments(TransitivityParams(alpha, beta, u_law), n, B, patterns,
                               "max" if mode == "equality" else "both", seed, transfers)
        highs.append(sim.high)
        if mode == "equality":
            r = sim.high - observed
            obj.append(float(r @ w @ r))
            lows.append(np.full_like(sim.high, np.nan))
        else:
            lows.append(sim.low)
            sim_var = 0.5 * (sim.low_draws.var(0, ddof=1) + sim.high_draws.var(0, ddof=1)) / B
            band = slack * np.sqrt(np.clip(np.diag(omega), 0, None) + sim_var)
            keep.append(bool(np.all(sim.low - band <= observed) and np.all(observed <= sim.high + band)))
    lows, highs = np.array(lows), np.array(highs)
    if mode == "equality":
        obj = np.array(obj)
        return SmdResult(mode, grid, obj, grid[int(np.argmin(obj))], None, lows, highs)
    return SmdResult(mode, grid, None, None, grid[np.array(keep, dtype=bool)], lows, highs)


# ---------------------------------------------------------------------------
# directed links with private information

def _support(p: np.ndarray) -> np.ndarray:
    """``sum_{k != i, j} P_ki P_kj`` (the diagonal of ``P`` is zero)."""
    s = p.T @ p
    np.fill_diagonal(s, 0.0)
    return s


def belief_map(p: np.ndarray, feats: np.ndarray, alpha: float, beta: float, gamma: float,
               delta: np.ndarray) -> np.ndarray:
    index = alpha + beta * p.T + gamma * _support(p) + feats @ np.asarray(delta, dtype=float)
    out = ndtr(index)
    np.fill_diagonal(out, 0.0)
    return out


@dataclass(frozen=True)
class BeliefSolution:
    p: np.ndarray
    residual: float
    iterations: int
    converged: bool


def solve_beliefs(feats: np.ndarray, alpha: float, beta: float, gamma: float, delta, damping: float = 0.5,
                  tol: float = 1e-10, max_iter: int = 10_000, start: np.ndarray | None = None) -> BeliefSolution:
    """Damped iteration ``P <- (1 - damping) P + damping phi(P)`` to a self-consistent belief matrix."""
    feats = np.asarray(feats, dtype=float)
    n = feats.shape[0]
    p = np.full((n, n), 0.5) if start is None else np.array(start, dtype=float)
    np.fill_diagonal(p, 0.0)
    resid = np.inf
    for it in range(1, max_iter + 1):
        new = belief_map(p, feats, alpha, beta, gamma, delta)
        resid = float(np.max(np.abs(new - p)))
        if resid < tol:
            return BeliefSolution(new, float(np.max(np.abs(belief_map(new, feats, alpha, beta, gamma, delta) - new))),
                                  it, True)
        p = (1 - damping) * p + damping * new
    return BeliefSolution(p, resid, max_iter, False)


def simulate_private_information(feats: np.ndarray, alpha: float, beta: float, gamma: float, delta, seed,
                                 **solver) -> tuple[np.ndarray, BeliefSolution]:
    """Bayes-Nash network: ``D_ij = 1(index_ij(P) >= U_ij)`` with standard normal ``U``."""
    sol = solve_beliefs(feats, alpha, beta, gamma, delta, **solver)
    n = sol.p.shape[0]
    u = stream(seed, "private-information-shocks").random((n, n))
    d = (u < sol.p).astype(np.uint8)
    np.fill_diagonal(d, 0)
    return d, sol


def covariate_cells(feats: np.ndarray, observed: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Label ordered dyads by their covariate configuration ``t(X_i, X_j)``.

    Returns ``(labels, configurations)``; the diagonal is labelled ``-1``.
    """
    feats = np.asarray(feats, dtype=float)
    n = feats.shape[0]
    off = ~np.eye(n, dtype=bool)
    configs, inv = np.unique(feats[off], axis=0, return_inverse=True)
    labels = np.full((n, n), -1, dtype=np.int64)
    labels[off] = inv.ravel()
    if observed is not None:
        seen = np.unique(labels[np.asarray(observed, dtype=bool) & off])
        missing = sorted(set(range(len(configs))) - set(seen.tolist()))
        if missing:
            raise EmptyCellError([tuple(configs[c]) for c in missing])
    return labels, configs


def cell_link_rates(d: np.ndarray, feats: np.ndarray, observed: np.ndarray | None = None) -> np.ndarray:
    """``P_hat_ij``: mean of ``D_kl`` over observed dyads sharing the configuration of ``(i, j)``."""
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    obs = ~np.eye(n, dtype=bool) if observed is None else (np.asarray(observed, dtype=bool) & ~np.eye(n, dtype=bool))
    labels, configs = covariate_cells(feats, obs)
    m = len(configs)
    num = np.bincount(labels[obs], weights=d[obs], minlength=m)
    den = np.bincount(labels[obs], minlength=m)
    rate = num / den
    out = np.zeros((n, n))
    off = labels >= 0
    out[off] = rate[labels[off]]
    return out


@dataclass
class TwoStepFit:
    theta: np.ndarray
    names: list
    p_hat: np.ndarray
    fit: object
    restricted: bool


def two_step_fit(d: np.ndarray, feats: np.ndarray, names: Sequence | None = None, restricted: bool = False,
                 observed: np.ndarray | None = None) -> TwoStepFit:
    """Cell-mean beliefs, then a probit of ``D_ij`` on ``(1, P_ji, support_ij, t_ij)``.

    ``restricted`` drops the reciprocity and support regressors. Columns of
    ``t`` that are constant across dyads are dropped in favour of the intercept.
    """
    d = np.asarray(d, dtype=float)
    feats = np.asarray(feats, dtype=float)
    if feats.ndim == 2:
        feats = feats[:, :, None]
    n = d.shape[0]
    off = ~np.eye(n, dtype=bool)
    names = list(names) if names is not None else [f"t{k}" for k in range(feats.shape[2])]
    keep = [k for k in range(feats.shape[2]) if np.ptp(feats[:, :, k][off]) > 0]
    p_hat = cell_link_rates(d, feats, observed)
    cols = [np.ones((n, n))]
    col_names = ["const"]
    if not restricted:
        cols += [p_hat.T, _support(p_hat)]
        col_names += ["reciprocity", "support"]
    cols += [feats[:, :, k] for k in keep]
    col_names += [names[k] for k in keep]
    w = np.stack(cols, axis=-1)
    y = d.copy()
    np.fill_diagonal(y, np.nan)
    ds = DyadicDataset(y, w, col_names, directed=True, observed=observed)
    design = w[ds.observed]
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise ValueError("second-step regressors are collinear; beliefs and t(X_i, X_j) vary over too few "
                         "covariate cells to separate the coefficients")
    fit = fit_composite(ds, "probit")
    return TwoStepFit(fit.theta, col_names, p_hat, fit, restricted)


# ---------------------------------------------------------------------------
# sequential meetings

@dataclass(frozen=True)
class MeetingParams:
    """Link index ``R_ij' alpha + (beta / N)(deg_i + deg_j)`` with degrees excluding ``ij``."""

    alpha: np.ndarray
    beta: float
    meeting: np.ndarray | None = None

    def baseline(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if r.ndim == 2:
            r = r[:, :, None]
        return r @ np.atleast_1d(np.asarray(self.alpha, dtype=float))


def _pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(n, 1)
    return iu.astype(np.int64), ju.astype(np.int64)


def meeting_probabilities(n: int, meeting=None) -> np.ndarray:
    """Probabilities over dyads ``i < j`` in row-major order."""
    m = n * (n - 1) // 2
    if meeting is None:
        return np.full(m, 1.0 / m)
    meeting = np.asarray(meeting, dtype=float)
    if meeting.shape == (n, n):
        iu, ju = _pairs(n)
        meeting = meeting[iu, ju]
    if meeting.shape != (m,) or np.any(meeting <= 0):
        raise ValueError("meeting probabilities must be positive, one per dyad")
    if not math.isclose(meeting.sum(), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError("meeting probabilities must sum to 1")
    return meeting


def meeting_potential(adj: np.ndarray, r: np.ndarray, params: MeetingParams) -> float:
    """``sum_{i<j} d_ij R_ij' alpha + (beta / N) sum_i C(deg_i, 2)``."""
    a = np.asarray(adj, dtype=np.int64)
    n = a.shape[0]
    base = params.baseline(r)
    deg = a.sum(1)
    return float(np.sum(np.triu(a, 1) * base)) + params.beta / n * float(np.sum(deg * (deg - 1) // 2))


def link_index(adj: np.ndarray, r: np.ndarray, params: MeetingParams, i: int, j: int) -> float:
    a = np.asarray(adj, dtype=np.int64)
    n = a.shape[0]
    deg_i = int(a[i].sum()) - int(a[i, j])
    deg_j = int(a[j].sum()) - int(a[i, j])
    return float(params.baseline(r)[i, j]) + params.beta / n * (deg_i + deg_j)


def adjacency_code(adj: np.ndarray) -> int:
    iu, ju = _pairs(adj.shape[0])
    bits = np.asarray(adj)[iu, ju].astype(np.int64)
    return int(bits @ (1 << np.arange(len(bits), dtype=np.int64)))


def adjacency_from_code(n: int, code: int) -> np.ndarray:
    iu, ju = _pairs(n)
    a = np.zeros((n, n), dtype=np.uint8)
    bits = (code >> np.arange(len(iu))) & 1
    a[iu, ju] = bits
    return a | a.T


@dataclass(frozen=True)
class ExactLaw:
    n: int
    probs: np.ndarray   # indexed by adjacency_code
    potential: np.ndarray


def ergm_exact(n: int, r: np.ndarray, params: MeetingParams) -> ExactLaw:
    """Stationary law ``exp(Q(d)) / sum_v exp(Q(v))`` over all graphs on ``n <= 5`` nodes."""
    if n > 5:
        raise ValueError("exact enumeration is limited to n <= 5")
    m = n * (n - 1) // 2
    iu, ju = _pairs(n)
    codes = np.arange(1 << m, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(m)) & 1).astype(np.int64)
    base = params.baseline(r)[iu, ju]
    deg = np.zeros((len(codes), n), dtype=np.int64)
    for e in range(m):
        deg[:, iu[e]] += bits[:, e]
        deg[:, ju[e]] += bits[:, e]
    pot = bits @ base + params.beta / n * (deg * (deg - 1) // 2).sum(1)
    w = np.exp(pot - pot.max())
    return ExactLaw(n, w / w.sum(), pot)


def independent_logit_law(n: int, r: np.ndarray, params: MeetingParams) -> np.ndarray:
    """Product of independent logistic dyads with index ``R_ij' alpha`` (the ``beta = 0`` law)."""
    m = n * (n - 1) // 2
    iu, ju = _pairs(n)
    p = expit(params.baseline(r)[iu, ju])
    out = np.ones(1 << m)
    for code in range(1 << m):
        for e in range(m):
            out[code] *= p[e] if (code >> e) & 1 else 1.0 - p[e]
    return out


@njit(cache=True)
def _chain(adj, base, beta_over_n, iu, ju, dyads, uniforms, burn_in, record, counts):
    n = adj.shape[0]
    deg = np.zeros(n, dtype=np.int64)
    code = 0
    for e in range(iu.shape[0]):
        if adj[iu[e], ju[e]]:
            deg[iu[e]] += 1
            deg[ju[e]] += 1
            code |= 1 << e
    flips = 0
    for t in range(dyads.shape[0]):
        e = dyads[t]
        i = iu[e]
        j = ju[e]
        cur = adj[i, j]
        x = base[e] + beta_over_n * (deg[i] + deg[j] - 2 * cur)
        p = 1.0 / (1.0 + math.exp(-x))
        new = 1 if uniforms[t] < p else 0
        if new != cur:
            flips += 1
            adj[i, j] = new
            adj[j, i] = new
            step = 1 if new else -1
            deg[i] += step
            deg[j] += step
            code ^= 1 << e
        if record and t >= burn_in:
            counts[code] += 1
    return flips


@dataclass(frozen=True)
class ChainRun:
    terminal: np.ndarray
    flips: int
    state_counts: np.ndarray | None


def meeting_chain(adj0: np.ndarray, r: np.ndarray, params: MeetingParams, steps: int, seed,
                  burn_in: int = 0, record_states: bool = False) -> ChainRun:
    """Run the sequential-meeting chain for ``steps`` periods.

    ``record_states`` tallies post-burn-in visits by ``adjacency_code`` (``n <= 6``).
    """
    adj = np.array(adj0, dtype=np.int64)
    n = adj.shape[0]
    if not np.array_equal(adj, adj.T) or np.any(np.diag(adj)):
        raise ValueError("initial network must be undirected without self-links")
    iu, ju = _pairs(n)
    probs = meeting_probabilities(n, params.meeting)
    rng = stream(seed, "meeting-chain")
    dyads = rng.choice(len(iu), size=steps, p=probs).astype(np.int64)
    uniforms = rng.random(steps)
    if record_states and n > 6:
        raise ValueError("state tallies are limited to n <= 6")
    counts = np.zeros(1 << len(iu) if record_states else 1, dtype=np.int64)
    base = params.baseline(r)[iu, ju]
    flips = _chain(adj, base, params.beta / n, iu, ju, dyads, uniforms, burn_in, record_states, counts)
    return ChainRun(adj.astype(np.uint8), int(flips), counts if record_states else None)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def all_graphs(n: int):
    """Every undirected graph on ``n`` nodes as ``(code, adjacency)``."""
    m = n * (n - 1) // 2
    for code in range(1 << m):
        yield code, adjacency_from_code(n, code)


def pairwise_stable_set(params: TransitivityParams, u: np.ndarray, transfers: bool = True) -> list[int]:
    """Codes of all pairwise-stable networks, by exhaustive search (small ``n`` only)."""
    n = u.shape[0]
    if n > 6:
        raise ValueError("exhaustive search is limited to n <= 6")
    return [code for code, a in all_graphs(n) if is_pairwise_stable(a, params, u, transfers, max_report=0)]

