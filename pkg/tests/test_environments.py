import numpy as np
import pytest
from scipy.stats import chisquare

from cba.bases import connected_components, shortest_path_metric
from cba.contextual import comparator_reward
from cba.core import ABSTAIN
from cba.environments import (ParseError, RewardModel,
                              draw_context, draw_reward, draw_reward_vector,
                              expected_policy_reward, gen_gaussian_knn,
                              gen_sbm, load_edge_list, planted_ball_policy,
                              save_graph_files)


class TestRewardModel:
    def test_defaults(self):
        model = RewardModel()
        assert model.p_accept_match == 0.9
        assert model.expected_reward(1, 1) == pytest.approx(0.8)
        assert model.expected_reward(0, 1) == pytest.approx(-0.8)
        assert model.expected_reward(2, ABSTAIN) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            RewardModel(p_accept_match=1.2)
        with pytest.raises(ValueError):
            RewardModel(reward_reject=-2.0)


class TestDrawReward:
    def test_abstain_always_zero(self):
        rng = np.random.default_rng(0)
        model = RewardModel()
        assert all(draw_reward(model, lab, ABSTAIN, rng) == 0.0
                   for lab in (0, 1, 2))

    def test_certain_match(self):
        rng = np.random.default_rng(0)
        model = RewardModel(p_accept_match=1.0)
        assert all(draw_reward(model, 1, 1, rng) == 1.0 for _ in range(50))

    def test_monte_carlo_mean(self):
        rng = np.random.default_rng(3)
        model = RewardModel(p_accept_match=0.9)
        n = 10**5
        draws = np.array([draw_reward(model, 2, 2, rng) for _ in range(n)])
        sigma = np.sqrt(4 * 0.9 * 0.1 / n)  # Var(2 Bernoulli - 1) / n
        assert abs(draws.mean() - 0.8) < 3 * sigma
        assert set(np.unique(draws)) <= {-1.0, 1.0}

    def test_vector_support(self):
        rng = np.random.default_rng(5)
        vec = draw_reward_vector(RewardModel(), 1, 4, rng)
        assert vec.shape == (4,)
        assert set(np.unique(vec)) <= {-1.0, 1.0}


class TestDrawContext:
    def test_single_context(self):
        assert draw_context(1, np.random.default_rng(0)) == 0

    def test_seed_determinism(self):
        a = [draw_context(10, np.random.default_rng(4)) for _ in range(5)]
        b = [draw_context(10, np.random.default_rng(4)) for _ in range(5)]
        assert a == b

    def test_chi_square_uniform(self):
        rng = np.random.default_rng(9)
        n, draws = 10, 10**5
        counts = np.bincount([draw_context(n, rng) for _ in range(draws)],
                             minlength=n)
        _, pvalue = chisquare(counts)
        assert pvalue > 0.001


class TestGenSbm:
    def test_reference_scale_node_count(self):
        lg = gen_sbm(2, 160, 480, np.random.default_rng(0))
        assert lg.n_nodes == 800
        assert lg.n_classes == 2
        assert np.sum(lg.labels == 0) == 480

    def test_single_clique_without_background(self):
        lg = gen_sbm(1, 6, 0, np.random.default_rng(0))
        assert lg.n_nodes == 6
        assert lg.graph.n_edges == 15

    def test_foreground_degree_at_least_clique(self):
        lg = gen_sbm(2, 8, 20, np.random.default_rng(1))
        deg = np.zeros(lg.n_nodes)
        for u, v, _ in lg.graph.edges():
            deg[u] += 1
            deg[v] += 1
        assert np.all(deg[lg.labels > 0] >= 7)

    def test_connected_and_deterministic(self):
        a = gen_sbm(2, 10, 30, np.random.default_rng(42))
        b = gen_sbm(2, 10, 30, np.random.default_rng(42))
        assert a.graph.edges() == b.graph.edges()
        n_comp, _ = connected_components(
            a.n_nodes, [(u, v) for u, v, _ in a.graph.edges()])
        assert n_comp == 1

    def test_multiple_cliques_need_background(self):
        with pytest.raises(ValueError):
            gen_sbm(2, 5, 0, np.random.default_rng(0))


class TestGenGaussianKnn:
    def test_reference_scale_node_count(self):
        lg = gen_gaussian_knn(4, 160, 0.2, 480, 1.75, 7,
                              np.random.default_rng(0))
        assert lg.n_nodes == 1120
        assert lg.n_classes == 4

    def test_complete_when_k_large(self):
        lg = gen_gaussian_knn(2, 3, 0.2, 2, 1.0, 10, np.random.default_rng(1))
        assert lg.graph.n_edges == 8 * 7 // 2

    def test_degree_at_least_k(self):
        lg = gen_gaussian_knn(2, 20, 0.2, 10, 1.0, 4, np.random.default_rng(2))
        deg = np.zeros(lg.n_nodes)
        for u, v, _ in lg.graph.edges():
            deg[u] += 1
            deg[v] += 1
        assert np.all(deg >= 4)

    def test_too_many_classes(self):
        with pytest.raises(ValueError):
            gen_gaussian_knn(5, 2, 0.1, 0, 1.0, 2, np.random.default_rng(0))


class TestLoadEdgeList:
    def write(self, tmp_path, edge_lines, label_lines):
        e = tmp_path / "edges.txt"
        l = tmp_path / "labels.txt"
        e.write_text("\n".join(edge_lines) + "\n")
        l.write_text("\n".join(label_lines) + "\n")
        return e, l

    def test_smaller_component_dropped(self, tmp_path):
        e, l = self.write(tmp_path,
                          ["0 1", "1 2", "3 4  # small component"],
                          ["0 a", "1 a", "2 b", "3 b", "4 b"])
        lg = load_edge_list(e, l)
        assert lg.n_nodes == 3
        assert lg.labels.tolist() == [1, 1, 2]

    def test_background_empty_keeps_labels(self, tmp_path):
        e, l = self.write(tmp_path, ["0 1", "1 2"], ["0 x", "1 y", "2 x"])
        lg = load_edge_list(e, l, background_classes=())
        assert lg.labels.tolist() == [1, 2, 1]

    def test_background_relabeling(self, tmp_path):
        e, l = self.write(tmp_path, ["0 1", "1 2"], ["0 x", "1 y", "2 x"])
        lg = load_edge_list(e, l, background_classes={"x"})
        assert lg.labels.tolist() == [0, 1, 0]

    def test_noise_flips_exact_floor_count(self, tmp_path):
        edges = [f"{i} {i + 1}" for i in range(99)]
        labels = [f"{i} {'a' if i % 2 else 'b'}" for i in range(100)]
        e, l = self.write(tmp_path, edges, labels)
        clean = load_edge_list(e, l)
        noisy = load_edge_list(e, l, noise_fraction=0.15,
                               rng=np.random.default_rng(8))
        flipped = np.sum(clean.labels != noisy.labels)
        assert flipped == 15  # floor(0.15 * 100)

    def test_parse_errors_carry_line_numbers(self, tmp_path):
        e, l = self.write(tmp_path, ["0 1", "junk line here"],
                          ["0 a", "1 a"])
        with pytest.raises(ParseError, match="edges.txt:2"):
            load_edge_list(e, l)

    def test_roundtrip_with_save(self, tmp_path):
        lg = gen_sbm(2, 5, 6, np.random.default_rng(3))
        save_graph_files(lg, tmp_path / "e.txt", tmp_path / "l.txt")
        again = load_edge_list(tmp_path / "e.txt", tmp_path / "l.txt",
                               background_classes={"0"})
        assert again.n_nodes == lg.n_nodes
        assert np.array_equal(again.labels, lg.labels)


class TestPlantedPolicy:
    def test_sbm_policy_is_the_cliques(self):
        lg = gen_sbm(2, 40, 120, np.random.default_rng(0))
        metric = shortest_path_metric(lg.graph)
        model = RewardModel()
        policy = planted_ball_policy(lg, metric, model)
        assert len(policy.pieces) == 2
        for el, action, weight in policy.pieces:
            assert weight == 1.0
            assert el == frozenset(np.nonzero(lg.labels == action)[0].tolist())

    def test_expected_reward_formula(self):
        lg = gen_sbm(2, 40, 120, np.random.default_rng(0))
        metric = shortest_path_metric(lg.graph)
        model = RewardModel()
        policy = planted_ball_policy(lg, metric, model)
        want = (40 * 2 / lg.n_nodes) * (2 * model.p_accept_match - 1)
        assert expected_policy_reward(policy, lg, model) == pytest.approx(want)

    def test_policy_reward_on_trace(self):
        lg = gen_sbm(1, 4, 3, np.random.default_rng(1))
        metric = shortest_path_metric(lg.graph)
        policy = planted_ball_policy(lg, metric, RewardModel())
        trace = [(x, np.array([1.0])) for x in range(lg.n_nodes)]
        inside = sum(1 for x in range(lg.n_nodes)
                     if any(x in el for el, _, _ in policy.pieces))
        assert comparator_reward(policy, trace) == pytest.approx(inside)
