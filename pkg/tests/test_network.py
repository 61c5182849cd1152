"""Graph generation, mixing matrices, and absolute-probability sequences."""

import numpy as np
import pytest

from tvhsgt.errors import ConfigError, DiagnosticsError
from tvhsgt.network import (
    Digraph,
    GraphStats,
    build_mixing_pair,
    complete_digraph,
    generate_round_graph,
    graph_stats,
    load_graph_sequence,
    phi_sequence,
    phi_table,
    pi_sequence,
    random_base_digraph,
    ring_digraph,
    save_graph_sequence,
)


def all_pairs_reachable(g: Digraph) -> bool:
    """Brute-force reachability oracle over every ordered node pair."""
    n = g.n
    reach = np.eye(n, dtype=bool)
    for j, i in g.edges:
        reach[j, i] = True
    for _ in range(n):
        reach = reach | (reach @ reach)
    return bool(reach.all())


def tv_pairs(n=5, rounds=200, keep=0.5, seed=42, base=None):
    base = base or complete_digraph(n)
    return [
        build_mixing_pair(generate_round_graph(base, keep, seed, t), t=t)
        for t in range(rounds)
    ]


class TestDigraph:
    def test_rejects_single_node(self):
        with pytest.raises(ConfigError):
            Digraph.from_edges(1, [])

    def test_rejects_disconnected(self):
        with pytest.raises(ConfigError):
            Digraph.from_edges(3, [(0, 1)])

    def test_self_loops_implied(self):
        g = ring_digraph(4)
        assert all((i, i) in g.edges for i in range(4))

    def test_neighbor_sets(self):
        g = ring_digraph(3)
        assert g.in_neighbors(1) == [0]
        assert g.out_neighbors(1) == [2]


class TestRoundGraphs:
    def test_keep_prob_one_is_identity(self):
        base = complete_digraph(6)
        assert generate_round_graph(base, 1.0, 0, 3) is base

    def test_two_nodes_forced_edges(self):
        base = complete_digraph(2)
        for seed in range(20):
            g = generate_round_graph(base, 0.3, seed, 0)
            assert (0, 1) in g.edges and (1, 0) in g.edges

    def test_sampled_graphs_strongly_connected(self):
        base = ring_digraph(5)
        for t in range(50):
            g = generate_round_graph(base, 0.5, 7, t)
            assert all_pairs_reachable(g)

    def test_deterministic_per_seed_round(self):
        base = complete_digraph(7)
        a = generate_round_graph(base, 0.4, 11, 9)
        b = generate_round_graph(base, 0.4, 11, 9)
        assert a.edges == b.edges
        c = generate_round_graph(base, 0.4, 11, 10)
        assert a.edges != c.edges

    def test_bad_keep_prob(self):
        with pytest.raises(ConfigError):
            generate_round_graph(complete_digraph(3), 0.0, 0, 0)

    def test_random_base_is_connected(self):
        g = random_base_digraph(8, 0.2, seed=5)
        assert all_pairs_reachable(g)


class TestMixingPair:
    def test_two_node_full_graph_uniform(self):
        pair = build_mixing_pair(complete_digraph(2))
        np.testing.assert_allclose(pair.A, [[0.5, 0.5], [0.5, 0.5]])
        np.testing.assert_allclose(pair.B, [[0.5, 0.5], [0.5, 0.5]])

    def test_three_ring_half_weights(self):
        pair = build_mixing_pair(ring_digraph(3))
        assert ((pair.A > 0).sum(axis=1) == 2).all()
        assert np.all(pair.A[pair.A > 0] == 0.5)
        assert ((pair.B > 0).sum(axis=0) == 2).all()
        assert np.all(pair.B[pair.B > 0] == 0.5)

    def test_stochasticity_within_1e12(self):
        for pair in tv_pairs(n=6, rounds=40, keep=0.4, seed=9):
            assert np.abs(pair.A.sum(axis=1) - 1.0).max() <= 1e-12
            assert np.abs(pair.B.sum(axis=0) - 1.0).max() <= 1e-12

    def test_min_entries_positive(self):
        pair = build_mixing_pair(complete_digraph(4))
        assert pair.a_min == pytest.approx(0.25)
        assert pair.b_min == pytest.approx(0.25)


class TestProbSequences:
    def test_pi_uniform_for_doubly_stochastic(self):
        pairs = [build_mixing_pair(ring_digraph(4), t=t) for t in range(10)]
        pi = pi_sequence(pairs)
        np.testing.assert_allclose(pi, 0.25, atol=1e-15)

    def test_pi_single_round_hand_case(self):
        pair = build_mixing_pair(complete_digraph(2), t=0)
        B = np.array([[1.0, 0.5], [0.0, 0.5]])
        pair = type(pair)(t=0, graph=pair.graph, A=pair.A, B=B, a_min=0.5, b_min=0.5)
        pi = pi_sequence([pair])
        np.testing.assert_allclose(pi[1], [0.75, 0.25])

    def test_pi_lower_bound(self):
        pairs = tv_pairs(n=4, rounds=60, keep=0.5, seed=3)
        pi = pi_sequence(pairs)
        b = min(p.b_min for p in pairs)
        assert pi.min() >= b**4 / 4 - 1e-15

    def test_phi_uniform_for_doubly_stochastic(self):
        pairs = [build_mixing_pair(ring_digraph(5), t=t) for t in range(600)]
        phi = phi_sequence(pairs, 0)
        np.testing.assert_allclose(phi, 0.2, atol=1e-9)

    def test_phi_matches_left_perron_vector(self):
        # static chain: phi is the left Perron vector of A, which an
        # independent eigensolve provides
        g = Digraph.from_edges(3, [(0, 1), (1, 2), (2, 0), (0, 2)])
        pair = build_mixing_pair(g)
        pairs = [pair] * 400
        phi = phi_sequence(pairs, 0, tol=1e-12)
        w, v = np.linalg.eig(pair.A.T)
        lead = np.argmax(w.real)
        perron = np.abs(v[:, lead].real)
        perron /= perron.sum()
        np.testing.assert_allclose(phi, perron, atol=1e-10)

    def test_phi_consistency_relation(self):
        pairs = tv_pairs(n=5, rounds=260, keep=0.5, seed=21)
        tol = 1e-10
        phi = phi_table(pairs, 60, tol=tol)
        for t in range(60):
            err = np.abs(phi[t + 1] @ pairs[t].A - phi[t]).max()
            assert err <= 10 * tol

    def test_phi_lower_bound(self):
        pairs = tv_pairs(n=4, rounds=220, keep=0.6, seed=2)
        phi = phi_table(pairs, 40)
        a = min(p.a_min for p in pairs)
        assert phi.min() >= a**4 / 4 - 1e-15

    def test_phi_window_exhaustion_raises(self):
        pairs = tv_pairs(n=6, rounds=3, keep=0.5, seed=1)
        with pytest.raises(DiagnosticsError):
            phi_sequence(pairs, 0, tol=1e-14)

    def test_phi_sequence_agrees_with_table(self):
        pairs = tv_pairs(n=4, rounds=260, keep=0.7, seed=13)
        phi = phi_table(pairs, 5, tol=1e-11)
        for t in range(5):
            np.testing.assert_allclose(
                phi_sequence(pairs, t, tol=1e-11), phi[t], atol=1e-9
            )


class TestGraphStats:
    def test_complete_diameter_one(self):
        assert graph_stats(complete_digraph(5)) == GraphStats(1, 1)

    def test_ring4_diameter_three(self):
        assert graph_stats(ring_digraph(4)).diameter == 3

    def test_ring4_edge_utility_brute_force(self):
        # unique paths on a directed ring: edge utility equals the count
        # from exhaustive enumeration of all ordered pairs
        g = ring_digraph(4)
        usage = {}
        for src in range(4):
            for dst in range(4):
                if src == dst:
                    continue
                v = src
                while v != dst:
                    usage[(v, (v + 1) % 4)] = usage.get((v, (v + 1) % 4), 0) + 1
                    v = (v + 1) % 4
        assert graph_stats(g).max_edge_utility == max(usage.values())


class TestGraphSequenceIO:
    def test_round_trip(self, tmp_path):
        graphs = [
            generate_round_graph(complete_digraph(5), 0.5, 4, t) for t in range(8)
        ]
        path = tmp_path / "seq.txt"
        save_graph_sequence(path, graphs)
        loaded = load_graph_sequence(path)
        assert len(loaded) == len(graphs)
        for a, b in zip(graphs, loaded):
            assert a.edges == b.edges

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "seq.txt"
        path.write_text("nonsense header\n")
        with pytest.raises(ConfigError):
            load_graph_sequence(path)
