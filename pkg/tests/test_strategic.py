import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit

from netmetrics.graph import Graph
from netmetrics.strategic import (
    EmptyCellError, MeetingParams, TransitivityParams, UnsupportedVariantError, adjacency_code, adjacency_from_code,
    all_graphs, cell_link_rates, draw_shocks, ergm_exact, independent_logit_law, is_pairwise_stable, link_index,
    marginal_utility, meeting_chain, meeting_potential, meeting_probabilities, min_max_equilibria,
    observed_motif_moments, pairwise_stable_set, phi_map, simulate_moments, simulate_private_information, smd_fit,
    solve_beliefs, total_variation, transitive_utility, two_step_fit,
)

from oracles import mu_loop, probit_mle, stable_networks


def dyad_shocks(n, v):
    """Split dyad totals ``V_ij`` evenly into directed shocks."""
    u = np.zeros((n, n))
    for (i, j), val in v.items():
        u[i, j] = u[j, i] = val / 2
    return u


def random_graph(n, p, rng):
    a = np.triu(rng.random((n, n)) < p, 1)
    return (a | a.T).astype(np.uint8)


TRIANGLE = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=np.uint8)


class TestMarginalUtility:
    def test_empty_graph(self):
        assert marginal_utility(np.zeros((3, 3)), 0, 1, TransitivityParams(1.0, 5.0), np.zeros((3, 3))) == 1.0

    def test_missing_edge_of_triangle(self):
        a = TRIANGLE.copy()
        a[1, 2] = a[2, 1] = 0
        u = np.full((3, 3), 0.25)
        assert marginal_utility(a, 1, 2, TransitivityParams(0.5, 2.0), u) == 0.5 + 2.0 - 0.25

    def test_same_for_deletion_and_addition(self):
        p = TransitivityParams(0.3, 0.7)
        u = np.zeros((3, 3))
        a = TRIANGLE.copy()
        b = a.copy()
        b[1, 2] = b[2, 1] = 0
        assert marginal_utility(a, 1, 2, p, u) == marginal_utility(b, 1, 2, p, u)

    def test_self_pair(self):
        with pytest.raises(ValueError):
            marginal_utility(np.zeros((3, 3)), 1, 1, TransitivityParams(0, 0), np.zeros((3, 3)))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 9), st.integers(0, 10 ** 6), st.floats(-2, 2), st.floats(0, 2))
    def test_utility_difference_and_loop(self, n, seed, alpha, beta):
        rng = np.random.default_rng(seed)
        a = random_graph(n, 0.5, rng)
        u = rng.normal(size=(n, n))
        p = TransitivityParams(alpha, beta)
        i, j = rng.choice(n, 2, replace=False)
        with_ij, without = a.copy(), a.copy()
        with_ij[i, j] = with_ij[j, i] = 1
        without[i, j] = without[j, i] = 0
        diff = transitive_utility(with_ij, i, p, u) - transitive_utility(without, i, p, u)
        mu = marginal_utility(a, i, j, p, u)
        assert mu == pytest.approx(diff, abs=1e-12)
        assert mu == pytest.approx(mu_loop(a.tolist(), i, j, alpha, beta, u), abs=1e-12)


class TestStability:
    def test_three_agent_triangle_unique(self):
        p = TransitivityParams(0.0, 1.0)
        u = dyad_shocks(3, {(0, 1): -0.5, (0, 2): -0.3, (1, 2): 1.5})
        assert pairwise_stable_set(p, u) == [adjacency_code(TRIANGLE)]
        for code, a in all_graphs(3):
            rep = is_pairwise_stable(a, p, u)
            assert bool(rep) == (code == adjacency_code(TRIANGLE))
            assert rep.stable or rep.violations

    def test_three_agent_empty_unique(self):
        p = TransitivityParams(0.0, 1.0)
        u = dyad_shocks(3, {(0, 1): 2.5, (0, 2): 3.0, (1, 2): 1.5})
        assert pairwise_stable_set(p, u) == [0]

    def test_violations_listed(self):
        p = TransitivityParams(0.0, 1.0)
        u = dyad_shocks(3, {(0, 1): -0.5, (0, 2): -0.3, (1, 2): 1.5})
        rep = is_pairwise_stable(np.zeros((3, 3), dtype=np.uint8), p, u)
        assert not rep
        assert [v[:2] for v in rep.violations] == [(0, 1), (0, 2)]
        assert len(is_pairwise_stable(np.zeros((3, 3)), p, u, max_report=1).violations) == 1

    def test_directed_input_rejected(self):
        a = np.zeros((3, 3))
        a[0, 1] = 1
        with pytest.raises(ValueError):
            is_pairwise_stable(a, TransitivityParams(0, 0), np.zeros((3, 3)))

    @pytest.mark.parametrize("transfers", [True, False])
    def test_no_externality_is_dyadwise_threshold(self, transfers):
        rng = np.random.default_rng(0)
        n = 6
        p = TransitivityParams(0.2, 0.0, "normal")
        u = draw_shocks(n, "normal", 3)
        if transfers:
            a = (u + u.T <= 0.4).astype(np.uint8)
        else:
            a = ((u <= 0.2) & (u.T <= 0.2)).astype(np.uint8)
        np.fill_diagonal(a, 0)
        assert is_pairwise_stable(a, p, u, transfers)
        stable = pairwise_stable_set(p, u, transfers)
        assert stable == [adjacency_code(a)]
        flip = a.copy()
        i, j = rng.choice(n, 2, replace=False)
        flip[i, j] = flip[j, i] = 1 - flip[i, j]
        assert not is_pairwise_stable(flip, p, u, transfers)

    def test_without_transfers_needs_mutual_consent(self):
        p = TransitivityParams(0.0, 0.0, "normal")
        u = np.array([[0.0, -1.0], [0.5, 0.0]])
        linked = np.array([[0, 1], [1, 0]], dtype=np.uint8)
        assert is_pairwise_stable(linked, p, u, transfers=True)
        assert not is_pairwise_stable(linked, p, u, transfers=False)
        assert is_pairwise_stable(np.zeros((2, 2), dtype=np.uint8), p, u, transfers=False)


class TestEquilibria:
    def test_negative_externality_unsupported(self):
        with pytest.raises(UnsupportedVariantError):
            min_max_equilibria(TransitivityParams(0.0, -0.1), np.zeros((4, 4)))

    def test_no_externality_unique(self):
        p = TransitivityParams(-0.3, 0.0)
        eq = min_max_equilibria(p, draw_shocks(30, p.u_law, 1))
        np.testing.assert_array_equal(eq.low, eq.high)

    @pytest.mark.parametrize("seed", range(20))
    def test_bounds_every_stable_network(self, seed):
        n = 5
        rng = np.random.default_rng(seed)
        p = TransitivityParams(rng.uniform(-1.5, 0.5), rng.uniform(0, 1.5))
        u = draw_shocks(n, p.u_law, seed)
        eq = min_max_equilibria(p, u)
        stable = stable_networks(n, p.alpha, p.beta, u)
        assert sorted(adjacency_code(a) for a in stable) == pairwise_stable_set(p, u)
        assert is_pairwise_stable(eq.low, p, u) and is_pairwise_stable(eq.high, p, u)
        for a in stable:
            assert np.all(eq.low <= a) and np.all(a <= eq.high)

    def test_sweeps_are_monotone(self):
        p = TransitivityParams(-0.8, 0.6)
        u = draw_shocks(12, p.u_law, 4)
        d = np.zeros((12, 12), dtype=np.uint8)
        while True:
            nxt = phi_map(d, p, u)
            assert np.all(nxt >= d)
            if np.array_equal(nxt, d):
                break
            d = nxt
        np.testing.assert_array_equal(d, min_max_equilibria(p, u).low)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(3, 10), st.integers(0, 10 ** 6), st.booleans())
    def test_phi_is_monotone(self, n, seed, transfers):
        rng = np.random.default_rng(seed)
        small = random_graph(n, 0.3, rng)
        big = small | random_graph(n, 0.3, rng)
        p = TransitivityParams(rng.normal(), rng.uniform(0, 2), "normal")
        u = draw_shocks(n, "normal", seed)
        assert np.all(phi_map(small, p, u, transfers) <= phi_map(big, p, u, transfers))

    def test_sweep_bound(self):
        p = TransitivityParams(-0.2, 0.9)
        eq = min_max_equilibria(p, draw_shocks(15, p.u_law, 5))
        assert max(eq.sweeps_low, eq.sweeps_high) <= math.comb(15, 2) + 1


class TestSimulatedMoments:
    def test_minimum_draws(self):
        with pytest.raises(ValueError):
            simulate_moments(TransitivityParams(0, 0), 10, 49)

    def test_no_externality_bands_coincide(self):
        sim = simulate_moments(TransitivityParams(-0.5, 0.0), 20, 50, seed=1)
        np.testing.assert_array_equal(sim.low, sim.high)

    def test_edge_density_is_logistic(self):
        alpha = -0.6
        sim = simulate_moments(TransitivityParams(alpha, 0.0), 40, 100, patterns=("edge",), seed=2)
        se = sim.high_draws[:, 0].std(ddof=1) / math.sqrt(100)
        assert abs(sim.high[0] - expit(2 * alpha)) <= 3 * se

    def test_max_dominates_min(self):
        sim = simulate_moments(TransitivityParams(-1.0, 0.08), 30, 50, seed=3)
        assert np.all(sim.high >= sim.low)
        assert np.all(sim.high_draws >= sim.low_draws)


class TestSmd:
    @staticmethod
    def observed(theta, n, seed, selection="high"):
        p = TransitivityParams(*theta)
        eq = min_max_equilibria(p, draw_shocks(n, p.u_law, 10_000 + seed))
        return observed_motif_moments(Graph.from_adjacency(getattr(eq, selection)))

    def test_single_point_grid(self):
        obs, om = self.observed((-1.0, 0.05), 30, 0)
        res = smd_fit(obs, om, [(-0.7, 0.02)], 30, B=50)
        np.testing.assert_array_equal(res.theta_hat, [-0.7, 0.02])
        assert res.caveat

    def test_singular_covariance(self):
        with pytest.raises(np.linalg.LinAlgError):
            smd_fit(np.array([0.1, 0.2]), np.zeros((2, 2)), [(0.0, 0.0)], 10)

    def test_empty_identified_set_reported(self):
        obs, om = self.observed((-1.0, 0.05), 40, 1)
        res = smd_fit(obs, om / 100, [(1.0, 0.0)], 40, B=50, mode="inequality")
        assert res.empty

    @pytest.mark.parametrize("selection", ["low", "high"])
    def test_truth_in_inequality_set(self, selection):
        theta = (-1.0, 0.05)
        grid = [(-1.0, 0.05), (-1.5, 0.0), (0.0, 0.2)]
        for seed in range(5):
            obs, om = self.observed(theta, 40, seed, selection)
            res = smd_fit(obs, om, grid, 40, B=50, seed=seed, mode="inequality")
            assert any(np.allclose(row, theta) for row in res.identified_set)

    @pytest.mark.slow
    def test_recovers_truth_within_grid_step(self):
        theta = np.array([-1.0, 0.05])
        step = np.array([0.25, 0.05])
        grid = [(a, b) for a in (-1.25, -1.0, -0.75) for b in (0.0, 0.05, 0.1)]
        hits = 0
        for seed in range(50):
            obs, om = self.observed(theta, 50, seed)
            res = smd_fit(obs, om, grid, 50, B=50, seed=seed)
            hits += bool(np.all(np.abs(res.theta_hat - theta) <= step + 1e-12))
        assert hits >= 40


def binary_features(n, seed):
    x = np.random.default_rng(seed).integers(0, 2, n).astype(float)
    return np.stack([x[:, None] * np.ones(n), np.ones(n)[:, None] * x, x[:, None] * x[None, :]], axis=-1)


class TestPrivateInformation:
    def test_belief_fixed_point(self):
        feats = binary_features(25, 1)
        sol = solve_beliefs(feats, -0.8, 0.4, 0.3, [0.2, -0.1, 0.3])
        assert sol.converged and sol.residual < 1e-10

    def test_nonconvergence_reported(self):
        sol = solve_beliefs(binary_features(10, 2), -0.8, 0.4, 0.3, [0.2, -0.1, 0.3], max_iter=2)
        assert not sol.converged

    def test_single_cell_gives_density(self):
        rng = np.random.default_rng(3)
        d = (rng.random((12, 12)) < 0.3).astype(float)
        np.fill_diagonal(d, 0)
        p = cell_link_rates(d, np.zeros((12, 12, 1)))
        off = ~np.eye(12, dtype=bool)
        np.testing.assert_allclose(p[off], d[off].mean(), rtol=1e-14)

    def test_cell_rates_reproduce_density(self):
        feats = binary_features(20, 4)
        d, _ = simulate_private_information(feats, -0.5, 0.3, 0.2, [0.1, 0.2, -0.3], seed=4)
        p = cell_link_rates(d, feats)
        off = ~np.eye(20, dtype=bool)
        assert np.all((p >= 0) & (p <= 1))
        assert p[off].mean() == pytest.approx(d[off].mean(), rel=1e-13)

    def test_empty_cell_listed(self):
        feats = binary_features(8, 5)
        obs = np.ones((8, 8), dtype=bool)
        both = (feats[:, :, 2] == 1)
        obs[both] = False
        with pytest.raises(EmptyCellError) as info:
            cell_link_rates(np.zeros((8, 8)), feats, obs)
        assert info.value.cells == [(1.0, 1.0, 1.0)]

    def test_no_interaction_matches_probit(self):
        n = 40
        feats = binary_features(n, 6)
        d, _ = simulate_private_information(feats, -0.4, 0.0, 0.0, [0.3, -0.2, 0.4], seed=6)
        fit = two_step_fit(d, feats, ["x_ego", "x_alter", "x_both"], restricted=True)
        off = ~np.eye(n, dtype=bool)
        design = np.column_stack([np.ones(off.sum()), feats[off]])
        np.testing.assert_allclose(fit.theta, probit_mle(d[off], design), rtol=0, atol=1e-8)

    def test_unrestricted_needs_cell_variation(self):
        feats = binary_features(30, 7)
        d, _ = simulate_private_information(feats, -0.4, 0.2, 0.1, [0.3, -0.2, 0.4], seed=7)
        with pytest.raises(ValueError, match="collinear"):
            two_step_fit(d, feats)


def meeting_setup(n, seed, beta=2.0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    r = np.stack([np.ones((n, n)), -np.abs(x[:, None] - x[None, :])], axis=-1)
    return r, MeetingParams(np.array([-0.6, 0.8]), beta)


class TestMeetingChain:
    def test_exact_law_normalized(self):
        r, p = meeting_setup(5, 1)
        law = ergm_exact(5, r, p)
        assert law.probs.sum() == pytest.approx(1.0, abs=1e-12)
        a = adjacency_from_code(5, 77)
        assert law.potential[77] == pytest.approx(meeting_potential(a, r, p), rel=1e-13)

    def test_exact_refuses_large(self):
        r, p = meeting_setup(6, 1)
        with pytest.raises(ValueError):
            ergm_exact(6, r, p)

    def test_no_externality_factorizes(self):
        r, p = meeting_setup(4, 2, beta=0.0)
        assert total_variation(ergm_exact(4, r, p).probs, independent_logit_law(4, r, p)) <= 1e-12

    def test_code_roundtrip(self):
        for code, a in all_graphs(4):
            assert adjacency_code(a) == code

    def test_meeting_probabilities_validated(self):
        with pytest.raises(ValueError):
            meeting_probabilities(3, [0.5, 0.5, 0.0])
        with pytest.raises(ValueError):
            meeting_probabilities(3, [0.2, 0.2, 0.2])
        assert meeting_probabilities(3).sum() == pytest.approx(1.0)

    def test_kernel_detailed_balance(self):
        n = 3
        r, p = meeting_setup(n, 3)
        p = MeetingParams(p.alpha, p.beta, np.array([0.5, 0.3, 0.2]))
        law = ergm_exact(n, r, p).probs
        rho = meeting_probabilities(n, p.meeting)
        iu, ju = np.triu_indices(n, 1)
        for code, a in all_graphs(n):
            for e in range(len(iu)):
                b = a.copy()
                b[iu[e], ju[e]] = b[ju[e], iu[e]] = 1 - a[iu[e], ju[e]]
                pr = expit(link_index(a, r, p, iu[e], ju[e]))
                fwd = rho[e] * (pr if b[iu[e], ju[e]] else 1 - pr)
                back = rho[e] * (1 - pr if b[iu[e], ju[e]] else pr)
                assert law[code] * fwd == pytest.approx(law[adjacency_code(b)] * back, rel=1e-12)

    def test_empirical_flux_balances(self):
        n, steps = 3, 20_000
        r, p = meeting_setup(n, 4)
        adj = np.zeros((n, n), dtype=np.uint8)
        flux = np.zeros((8, 8))
        # consecutive single-step runs give the transition sequence
        for t in range(steps):
            nxt = meeting_chain(adj, r, p, 1, seed=t).terminal
            flux[adjacency_code(adj), adjacency_code(nxt)] += 1
            adj = nxt
        for a, b in itertools.combinations(range(8), 2):
            both = flux[a, b] + flux[b, a]
            assert abs(flux[a, b] - flux[b, a]) <= 4 * math.sqrt(both) + 1, (a, b)
        assert flux.sum() == steps

    def test_chain_matches_exact_law(self):
        r, p = meeting_setup(4, 5)
        law = ergm_exact(4, r, p).probs
        run = meeting_chain(np.zeros((4, 4)), r, p, 1_010_000, seed=5, burn_in=10_000, record_states=True)
        freq = run.state_counts / run.state_counts.sum()
        assert run.state_counts.sum() == 1_000_000
        assert total_variation(freq, law) < 0.02
        assert np.all(run.state_counts > 0)

    def test_start_state_irrelevant(self):
        r, p = meeting_setup(4, 6)
        full = np.ones((4, 4), dtype=np.uint8) - np.eye(4, dtype=np.uint8)
        a = meeting_chain(np.zeros((4, 4)), r, p, 200_000, seed=1, burn_in=1000, record_states=True)
        b = meeting_chain(full, r, p, 200_000, seed=2, burn_in=1000, record_states=True)
        assert total_variation(a.state_counts / a.state_counts.sum(), b.state_counts / b.state_counts.sum()) < 0.03

    def test_rejects_directed_start(self):
        r, p = meeting_setup(3, 7)
        a = np.zeros((3, 3))
        a[0, 1] = 1
        with pytest.raises(ValueError):
            meeting_chain(a, r, p, 10, seed=0)
