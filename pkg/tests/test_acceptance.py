"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N PASS/FAIL`` line; the lines are also
repeated in the pytest terminal summary.
"""

import math
import os
import time
from fractions import Fraction

import numpy as np
from scipy import stats
from scipy.special import expit, ndtr, ndtri

from netmetrics.asf import asf, ate, fit_pvr, simulate_linear_policy
from netmetrics.dyadic import DyadicDataset, build_features, fit_composite, variance_report
from netmetrics.graph import density, load_edgelist, star
from netmetrics.graphon import GraphonSpec, erdos_renyi, sample_adjacency
from netmetrics.moments import (
    ORDER3, code_histogram, composition_sum, count_patterns, degree_moment_theoretical, er_closed_forms,
    moment_covariance, order3_stitching_projection, star_density_from_degrees, transitivity_from_densities,
    transitivity_injective, transitivity_report, triad_census,
)
from netmetrics.strategic import (
    MeetingParams, TransitivityParams, adjacency_code, all_graphs, draw_shocks, ergm_exact, independent_logit_law,
    meeting_chain, min_max_equilibria, pairwise_stable_set, simulate_private_information, total_variation,
    two_step_fit,
)
from netmetrics.triad_probit import (
    TriadProbitParams, bounds_for, fit_triad_probit, orthant_prob, sigma_matrix, simulate_triad_probit,
)

from criteria_report import verdict
from oracles import fg_quadruple_sum, probit_mle, stable_networks

DATA_ENV = "NETMETRICS_NYAKATOKE"


def test_c01_village_network():
    rng = np.random.default_rng(119)
    adj = np.triu(rng.random((119, 119)) < 0.0698, 1)
    adj = (adj | adj.T).astype(np.uint8)
    start = time.perf_counter()
    hist = code_histogram(adj, 5)
    moment_covariance(adj, ORDER3, mode="exact")
    elapsed = time.perf_counter() - start
    timing_ok = int(hist.sum()) == math.comb(119, 5) == 182_637_273 and elapsed < 60
    detail = f"exact pentad pass over {int(hist.sum())} pentads in {elapsed:.1f} s"
    path = os.environ.get(DATA_ENV)
    if not path:
        verdict(1, "exact pentad pass at N=119 under 60 s", timing_ok,
                detail + f"; data checks skipped, set {DATA_ENV} to the edge list to run them")
        return
    g = load_edgelist(path, n_hint=119)
    cov = moment_covariance(g, ORDER3, mode="exact")
    rep = transitivity_report(g, mode="exact")
    se_tri, se_two = cov.se[cov.index("triangle")], cov.se[cov.index("twostar")]
    checks = {
        "n": g.n == 119,
        "density": abs(density(g) - 0.0698) <= 1e-4,
        "ti": abs(rep.ti - 0.1884) <= 5e-4,
        "p_triangle": abs(rep.p_triangle - 0.00115) <= 1e-5,
        "p_twostar": abs(rep.p_twostar - 0.00496) <= 1e-5,
        "se_triangle": abs(se_tri - 0.00030) <= 1e-5,
        "se_twostar": abs(se_two - 0.00100) <= 1e-5,
        "se_ti": abs(rep.se - 0.011) <= 1e-3,
    }
    bad = [k for k, v in checks.items() if not v]
    values = (f"density {density(g):.4f}, TI {rep.ti:.4f} (se {rep.se:.3f}), P(tri) {rep.p_triangle:.5f} "
              f"(se {se_tri:.5f}), P(2star) {rep.p_twostar:.5f} (se {se_two:.5f})")
    verdict(1, "village network statistics and pentad timing", timing_ok and not bad,
            f"{values}; {detail}" + (f"; mismatched {bad}" if bad else ""))


def test_c02_transitivity_identity():
    from_reported = transitivity_from_densities(0.00115, 0.00496)
    lo = transitivity_from_densities(0.001145, 0.004965)
    hi = transitivity_from_densities(0.001155, 0.004955)
    rng = np.random.default_rng(2)
    exact = True
    for _ in range(200):
        n = int(rng.integers(5, 60))
        adj = erdos_renyi(n, rng.uniform(0.1, 0.9), seed=int(rng.integers(1 << 30)))
        est = count_patterns(adj, ORDER3)
        t, s = est["triangle"], est["twostar"]
        if t.induced_count + s.induced_count == 0:
            continue
        ratio = t.induced_density_exact / (t.induced_density_exact + s.induced_density_exact)
        ti = transitivity_from_densities(t.induced_density, s.induced_density)
        exact &= abs(Fraction(ti) - ratio) <= Fraction(1, 10 ** 15) * ratio
    ok = round(from_reported, 4) == 0.1882 and lo <= 0.1884 <= hi and exact
    verdict(2, "TI = P(tri) / (P(2star) + P(tri)) on reported densities and on every input", ok,
            f"reported densities give {from_reported:.4f}; rounding interval [{lo:.4f}, {hi:.4f}]")


def test_c03_triad_identities():
    rng = np.random.default_rng(3)
    worst_ti = 0.0
    partition = injective = True
    for k in range(1000):
        n = int(rng.integers(5, 201))
        if k % 2:
            adj = erdos_renyi(n, rng.uniform(0.01, 0.99), seed=k)
        else:
            adj, _ = sample_adjacency(GraphonSpec.beta(rng.normal(-1, 1), rng.uniform(0.2, 2)), n, seed=k)
        census = triad_census(adj)
        partition &= sum(e.induced_share_exact for e in census.values()) == 1
        t, s = census["triangle"], census["twostar"]
        q = count_patterns(adj, ("twostar",))["twostar"].injective_density_exact
        injective &= q == s.induced_density_exact + t.induced_density_exact
        if t.induced_count + s.induced_count:
            a = transitivity_from_densities(t.induced_density, s.induced_density)
            worst_ti = max(worst_ti, abs(a - transitivity_injective(adj)))
    verdict(3, "triad partition, Q(2star) = P(2star) + P(tri), TI formulas agree on 1000 graphs",
            partition and injective and worst_ti <= 1e-15, f"max TI gap {worst_ti:.1e}")


def random_dyadic(n, seed):
    rng = np.random.default_rng(seed)
    nodes = {"x": rng.normal(size=n), "z": rng.normal(size=n)}
    w, names = build_features(nodes, ["const", "send:x", "absdiff:z"], n)
    a, b = rng.normal(size=n), rng.normal(size=n)
    directed = bool(seed % 3)
    if seed % 2:
        y = rng.poisson(np.exp(0.2 + 0.3 * w[:, :, 1] + 0.3 * (a[:, None] + b[None, :]))).astype(float)
        family = "poisson"
    else:
        y = w @ np.array([0.5, 1.0, -0.5]) + a[:, None] + b[None, :] + rng.normal(size=(n, n))
        family = "gaussian"
    if not directed:
        y = np.triu(y, 1) + np.triu(y, 1).T
    np.fill_diagonal(y, np.nan)
    return DyadicDataset(y, w, names, directed), family


def test_c04_variance_identities():
    rng = np.random.default_rng(4)
    gaps = {"fg_jkbc": 0.0, "sigma_tilde": 0.0, "fg_oracle": 0.0}
    for seed in range(100):
        n = int(rng.integers(6, 41))
        ds, family = random_dyadic(n, seed)
        fit = fit_composite(ds, family)
        rep = variance_report(fit)
        tilde = rep.sigma1 + (rep.sigma23 - rep.sigma1) / (n - 1)
        gaps["fg_jkbc"] = max(gaps["fg_jkbc"], np.abs(rep.omega_fg - rep.omega_jkbc).max())
        gaps["sigma_tilde"] = max(gaps["sigma_tilde"], np.abs(rep.sigma1_tilde - tilde).max())
        gaps["fg_oracle"] = max(gaps["fg_oracle"], np.abs(rep.omega_fg - fg_quadruple_sum(fit.scores)).max())
    ok = gaps["fg_jkbc"] <= 1e-10 and gaps["sigma_tilde"] <= 1e-12 and gaps["fg_oracle"] <= 1e-10
    verdict(4, "FG = JK-BC, Sigma1-tilde identity, FG = quadruple-sum oracle on 100 datasets", ok,
            ", ".join(f"{k} {v:.1e}" for k, v in gaps.items()))


def _sample_cov_with_se(x):
    c = x - x.mean(axis=0)
    prod = c[:, :, None] * c[:, None, :]
    r = len(x)
    return prod.sum(0) / (r - 1), prod.std(axis=0, ddof=1) / math.sqrt(r)


def test_c05_er_closed_forms():
    worst = 0.0
    for rho in (0.1, 0.3, 0.5):
        forms = er_closed_forms(rho).xi
        draws = {q: [] for q in (1, 2, 3)}
        for seed in range(200):
            proj = order3_stitching_projection(erdos_renyi(60, rho, seed=seed))
            for q in draws:
                draws[q].append(proj[q])
        for (r, s, q), target in forms.items():
            vals = np.array(draws[q])[:, ORDER3.index(r), ORDER3.index(s)]
            se = vals.std(ddof=1) / math.sqrt(len(vals))
            z = 0.0 if se == 0 and vals.mean() == target else abs(vals.mean() - target) / se if se else np.inf
            worst = max(worst, z)
    worst_limit = 0.0
    n = 200
    for rho in (0.3, 0.5):
        dens = np.array([[e.induced_density for e in count_patterns(erdos_renyi(n, rho, seed=10_000 + s)).values()]
                         for s in range(1000)])
        cov, se = _sample_cov_with_se(dens)
        target = 9 * er_closed_forms(rho).limit_cov / math.comb(n, 2)
        worst_limit = max(worst_limit, float(np.max(np.abs(cov - target) / se)))
    ok = worst <= 3 and worst_limit <= 4
    verdict(5, "ER stitching frequencies and the q=2 limiting covariance", ok,
            f"worst stitching gap {worst:.2f} MC SE (rho 0.1, 0.3, 0.5; 200 graphs at N=60); "
            f"worst covariance gap {worst_limit:.2f} SE (rho 0.3, 0.5; 1000 graphs at N=200)")


def _surjections(m, k):
    return sum((-1) ** j * math.comb(k, j) * (k - j) ** m for j in range(k + 1))


def test_c06_degree_moments():
    rng = np.random.default_rng(6)
    per_node = star_exact = True
    for seed in range(60):
        n = int(rng.integers(5, 40))
        adj = erdos_renyi(n, rng.uniform(0.05, 0.95), seed=seed)
        deg = [int(d) for d in adj.sum(axis=1)]
        for m in range(1, 7):
            per_node &= all(d ** m == sum(composition_sum(m, k) * math.comb(d, k) for k in range(1, m + 1))
                            for d in deg)
            per_node &= all(composition_sum(m, k) == _surjections(m, k) for k in range(1, m + 1))
        for k in range(1, 5):
            enum = count_patterns(adj, (star(k),))
            star_exact &= next(iter(enum.values())).injective_density_exact == star_density_from_degrees(adj, k)
    worst = 0.0
    for n, rho in ((10, 0.3), (50, 0.1), (200, 0.7)):
        theory = degree_moment_theoretical(n, 2, {1: rho, 2: rho ** 2})
        worst = max(worst, abs(theory - stats.binom(n - 1, rho).moment(2)))
    verdict(6, "degree-moment expansion, k-star densities from degrees, ER second moment", per_node and star_exact
            and worst <= 1e-10, f"max |E[D^2] - binomial| {worst:.1e}")


THETA0 = np.array([-1.0, 0.5, -0.5])


def copula_logit(n, seed, heterogeneity=1.0):
    """``P(Y_ij = 1 | W) = expit(W_ij' theta0)`` exactly; dependence enters through a
    Gaussian copula with ego and alter effects."""
    rng = np.random.default_rng(seed)
    nodes = {"x": rng.normal(size=n), "z": rng.normal(size=n)}
    w, names = build_features(nodes, ["const", "send:x", "absdiff:z"], n)
    a = heterogeneity * rng.normal(size=n)
    b = heterogeneity * rng.normal(size=n)
    latent = (a[:, None] + b[None, :] + rng.normal(size=(n, n))) / math.sqrt(1 + 2 * heterogeneity ** 2)
    y = (ndtr(latent) < expit(w @ THETA0)).astype(float)
    np.fill_diagonal(y, np.nan)
    return DyadicDataset(y, w, names)


def test_c07_dyadic_coverage():
    z = stats.norm.ppf(0.975)
    hits = []
    for seed in range(500):
        fit = fit_composite(copula_logit(100, seed), "logit")
        hits.append(np.abs(fit.theta - THETA0) <= z * variance_report(fit).se("fg"))
    coverage = np.mean(hits, axis=0)
    medians = {}
    for n in (50, 100, 200):
        medians[n] = float(np.median([np.linalg.norm(variance_report(
            fit_composite(copula_logit(n, 20_000 + s, 0.0), "logit")).sigma1) for s in range(100)]))
    ratios = [medians[100] / medians[50], medians[200] / medians[100]]
    ok = bool(np.all((coverage >= 0.90) & (coverage <= 0.98))) and max(ratios) <= 0.5
    verdict(7, "FG 95% intervals cover in [0.90, 0.98]; median |Sigma1| at least halves as N doubles", ok,
            f"coverage {np.round(coverage, 3).tolist()}; doubling ratios {np.round(ratios, 3).tolist()}")


def test_c08_asf():
    base = simulate_linear_policy(100, 1.0, 0.5, 0.3, 0.4, seed=0)
    pvr = fit_pvr(base, "gaussian", terms=("1", "w", "x", "w*x"))
    g = pvr.gamma
    exact = True
    for w in (0, 1):
        for x in (0, 1):
            value = asf(pvr, w, x).value
            exact &= value == pvr.q_matrix(w, x)[0][0, 1]
            exact &= math.isclose(value, g[0] + g[1] * w + g[2] * x + g[3] * w * x, rel_tol=4e-16, abs_tol=4e-16)
    hits = 0
    for seed in range(200):
        c = ate(fit_pvr(simulate_linear_policy(100, 1.0, 0.5, 0.3, 0.4, seed=seed), "gaussian"), omega="fg")
        hits += abs(c.value - 1.2) <= 2 * c.se
    verdict(8, "constant PVR returns q(w, x); ATE within 2 SE in at least 90% of 200 seeds", exact and hits >= 180,
            f"{hits}/200 seeds")


def test_c09_triad_probit():
    identity = np.array_equal(sigma_matrix(0, 0, 0, 0), np.eye(4))
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(200):
        idx = rng.normal(size=4)
        lo, hi = bounds_for(rng.integers(0, 2, 4), idx)
        res = orthant_prob(np.eye(4), lo, hi, draws=64, seed=int(rng.integers(1 << 30)))
        prod = float(np.prod(ndtr(hi) - ndtr(lo)))
        worst = max(worst, abs(res.p - prod) - 3 * res.se)
    n = 30
    x = rng.normal(size=n)
    w, names = build_features({"x": x}, ["const", "send:x"], n)
    y = simulate_triad_probit(w, TriadProbitParams(np.array([-0.4, 0.5])), seed=9)
    ds = DyadicDataset(y, w, names)
    fit = fit_triad_probit(ds, draws=64, seed=1)
    probit = fit_composite(ds, "probit").theta
    # the all-terms variance can be indefinite at this size; the leading-term one is PSD
    gap = np.abs(fit.params.eta - probit) / fit.se("leading")[:2]
    ok = identity and worst <= 1e-12 and bool(np.all(gap <= 2))
    verdict(9, "Sigma(0) = I, independent orthants equal normal products, independence fit matches probit", ok,
            f"orthant excess over 3 SE {worst:.1e}; eta gaps {np.round(gap, 3).tolist()} SE")


def test_c10_strategic():
    p = TransitivityParams(0.0, 1.0)
    triangle_u = np.zeros((3, 3))
    empty_u = np.zeros((3, 3))
    for (i, j), (v_tri, v_empty) in {(0, 1): (-0.5, 2.5), (0, 2): (-0.3, 3.0), (1, 2): (1.5, 1.5)}.items():
        triangle_u[i, j] = triangle_u[j, i] = v_tri / 2
        empty_u[i, j] = empty_u[j, i] = v_empty / 2
    tri_code = adjacency_code(np.ones((3, 3), dtype=np.uint8) - np.eye(3, dtype=np.uint8))
    three_agent = pairwise_stable_set(p, triangle_u) == [tri_code] and pairwise_stable_set(p, empty_u) == [0]

    rng = np.random.default_rng(10)
    sandwich = True
    for draw in range(100):
        params = TransitivityParams(rng.uniform(-1.5, 0.5), rng.uniform(0.0, 1.5))
        u = draw_shocks(5, params.u_law, 10, draw)
        eq = min_max_equilibria(params, u, draw=draw)
        for a in stable_networks(5, params.alpha, params.beta, u):
            sandwich &= bool(np.all(eq.low <= a) and np.all(a <= eq.high))

    n = 4
    r = np.stack([np.ones((n, n)), -np.abs(np.subtract.outer(np.arange(n), np.arange(n))) / n], axis=-1)
    mp = MeetingParams(np.array([-0.6, 0.8]), 2.0)
    run = meeting_chain(np.zeros((n, n)), r, mp, 1_010_000, seed=10, burn_in=10_000, record_states=True)
    tv = total_variation(run.state_counts / run.state_counts.sum(), ergm_exact(n, r, mp).probs)
    mp0 = MeetingParams(mp.alpha, 0.0)
    tv0 = total_variation(ergm_exact(n, r, mp0).probs, independent_logit_law(n, r, mp0))

    m = 40
    xb = rng.integers(0, 2, m).astype(float)
    feats = np.stack([np.multiply.outer(xb, np.ones(m)), np.multiply.outer(np.ones(m), xb),
                      np.multiply.outer(xb, xb)], axis=-1)
    d, _ = simulate_private_information(feats, -0.4, 0.0, 0.0, [0.3, -0.2, 0.4], seed=10)
    two_step = two_step_fit(d, feats, restricted=True).theta
    off = ~np.eye(m, dtype=bool)
    y = d.astype(float)
    np.fill_diagonal(y, np.nan)
    direct = fit_composite(DyadicDataset(y, np.concatenate([np.ones((m, m, 1)), feats], axis=-1)), "probit").theta
    oracle = probit_mle(d[off], np.column_stack([np.ones(off.sum()), feats[off]]))
    # four binary cells and four coefficients: the fit reproduces each cell's link rate
    ego, alter, link = feats[..., 0][off], feats[..., 1][off], d[off]
    z = {(a, b): ndtri(link[(ego == a) & (alter == b)].mean()) for a in (0, 1) for b in (0, 1)}
    closed = np.array([z[0, 0], z[1, 0] - z[0, 0], z[0, 1] - z[0, 0], z[1, 1] - z[1, 0] - z[0, 1] + z[0, 0]])
    leung_gap = max(np.abs(two_step - route).max() for route in (direct, oracle, closed))

    ok = three_agent and sandwich and tv < 0.02 and tv0 <= 1e-12 and leung_gap <= 1e-8
    verdict(10, "three-agent equilibria, min/max bracket every stable network, meeting chain law, two-step probit",
            ok, f"three-agent {three_agent}; bracket on 100 draws {sandwich}; chain TV {tv:.4f}; "
                f"beta=0 TV {tv0:.1e}; two-step gap {leung_gap:.1e}")
