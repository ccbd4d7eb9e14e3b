import numpy as np
import pytest

from cba.tree import BallOrder, SuffixProductForest, SuffixProductTree


class ArrayOracle:
    """Brute-force reference: explicit value array in leaf-position order."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float).copy()

    def query(self, pos):
        return self.values[pos:].sum()

    def update(self, pos, u):
        self.values[pos:] *= u

    def leaf(self, pos):
        return self.values[pos]


class TestBallOrder:
    def test_from_distances_tie_break_by_id(self):
        order = BallOrder.from_distances(1, [1.0, 0.0, 1.0])
        assert order.order.tolist() == [1, 0, 2]

    def test_rejects_non_permutation(self):
        with pytest.raises(ValueError):
            BallOrder(center=0, order=np.array([0, 0, 1]))

    def test_rejects_center_not_first(self):
        with pytest.raises(ValueError):
            BallOrder(center=1, order=np.array([0, 1, 2]))

    def test_positions_inverse(self):
        order = BallOrder(center=2, order=np.array([2, 0, 1]))
        pos = order.positions()
        assert pos.tolist() == [1, 2, 0]


class TestBuild:
    def test_root_sum(self):
        tree = SuffixProductTree([1.0, 1.0, 1.0, 1.0])
        assert tree.query(0) == pytest.approx(4.0)

    def test_zero_tree(self):
        tree = SuffixProductTree([0.0, 0.0])
        assert all(p == 0.0 for p in tree.psi[1:])

    def test_padding_neutral(self):
        tree = SuffixProductTree([3.0])
        assert tree.n_leaves == 2
        assert tree.query(0) == pytest.approx(3.0)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            SuffixProductTree([1.0, -1.0])


class TestQueryUpdate:
    def test_suffix_of_uniform(self):
        tree = SuffixProductTree([1.0] * 4)
        assert tree.query(2) == pytest.approx(2.0)
        assert tree.query(0) == pytest.approx(4.0)

    def test_update_then_query(self):
        tree = SuffixProductTree([1.0] * 4)
        tree.update(1, 2.0)
        assert tree.query(0) == pytest.approx(7.0)  # 1 + 2 + 2 + 2

    def test_identity_update(self):
        tree = SuffixProductTree([1.0, 2.0, 3.0, 4.0])
        before = [tree.query(q) for q in range(4)]
        tree.update(2, 1.0)
        assert [tree.query(q) for q in range(4)] == before

    def test_point_five_example(self):
        tree = SuffixProductTree([1.0] * 4)
        tree.update(3, 5.0)
        assert tree.query(3) == pytest.approx(5.0)
        assert tree.query(0) == pytest.approx(8.0)

    def test_update_errors(self):
        tree = SuffixProductTree([1.0, 1.0])
        for bad in (0.0, -1.0, float("nan"), float("inf")):
            with pytest.raises(ValueError):
                tree.update(0, bad)

    def test_unknown_context(self):
        tree = SuffixProductTree([1.0, 1.0])
        with pytest.raises(KeyError):
            tree.query(5)
        with pytest.raises(KeyError):
            tree.leaf_value(-1)

    def test_respects_leaf_order(self):
        order = BallOrder(center=2, order=np.array([2, 0, 1]))
        tree = SuffixProductTree([5.0, 1.0, 3.0], order=order)
        # context 0 sits at position 1, so its suffix holds positions 1..2
        assert tree.query(0) == pytest.approx(1.0 + 3.0)
        tree.update(0, 2.0)
        assert tree.leaf_value(2) == pytest.approx(5.0)
        assert tree.leaf_value(0) == pytest.approx(2.0)
        assert tree.leaf_value(1) == pytest.approx(6.0)


class TestLeafValue:
    def test_initial_values(self):
        tree = SuffixProductTree([2.0, 3.0])
        assert tree.leaf_value(0) == pytest.approx(2.0)
        assert tree.leaf_value(1) == pytest.approx(3.0)

    def test_after_update(self):
        tree = SuffixProductTree([2.0, 3.0])
        tree.update(1, 4.0)
        assert tree.leaf_value(1) == pytest.approx(12.0)

    def test_pad_leaf_is_zero(self):
        tree = SuffixProductTree([2.0, 3.0, 1.0])
        assert tree._leaf_value_at(3) == 0.0


def random_op_equivalence(n, n_ops, seed, tree_sizes=True, check_every=0):
    rng = np.random.default_rng(seed)
    initial = rng.uniform(0.0, 2.0, size=n)
    tree = SuffixProductTree(initial)
    oracle = ArrayOracle(initial)
    for i in range(n_ops):
        q = int(rng.integers(n))
        if rng.random() < 0.5:
            got, want = tree.query(q), oracle.query(q)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12)
        else:
            u = float(np.exp(rng.uniform(-0.5, 0.5)))
            tree.update(q, u)
            oracle.update(q, u)
        if check_every and i % check_every == 0:
            tree.check_invariant(tol=1e-9)
    for q in range(n):
        assert tree.leaf_value(q) == pytest.approx(oracle.leaf(q),
                                                   rel=1e-9, abs=1e-12)


class TestDifferential:
    @pytest.mark.parametrize("n", [2, 3, 7, 16, 33, 256])
    def test_matches_array_oracle(self, n):
        random_op_equivalence(n, 2000, seed=n)

    def test_invariant_holds_during_ops(self):
        random_op_equivalence(13, 500, seed=99, check_every=1)

    def test_drift_stays_small_over_1e5_updates(self):
        rng = np.random.default_rng(8)
        n = 64
        tree = SuffixProductTree(np.ones(n))
        oracle = ArrayOracle(np.ones(n))
        for _ in range(100_000):
            q = int(rng.integers(n))
            u = float(np.exp(rng.uniform(-0.2, 0.2)))
            tree.update(q, u)
            oracle.update(q, u)
        for q in range(n):
            assert tree.query(q) == pytest.approx(oracle.query(q), rel=1e-6)

    def test_debug_mode_checks_every_update(self):
        tree = SuffixProductTree([1.0, 2.0, 3.0], debug=True)
        for q, u in ((0, 2.0), (2, 0.5), (1, 3.0)):
            tree.update(q, u)
        # corrupt a partial sum off the next update path: the debug check
        # after the update must catch it
        tree.psi[3] *= 2.0
        with pytest.raises(AssertionError):
            tree.update(0, 1.5)


class TestForest:
    def test_matches_single_trees(self):
        rng = np.random.default_rng(21)
        n, centers, actions = 6, 4, 3
        orders = [BallOrder.from_distances(c, np.abs(np.arange(n) - c))
                  for c in range(centers)]
        forest = SuffixProductForest(centers, actions, n, initial_value=0.7)
        trees = [[SuffixProductTree(np.full(n, 0.7), order=orders[c])
                  for _ in range(actions)] for c in range(centers)]
        posmat = np.stack([o.positions() for o in orders])
        for _ in range(400):
            x = int(rng.integers(n))
            pos = np.ascontiguousarray(posmat[:, x])
            got = forest.query_all(pos)
            for c in range(centers):
                for k in range(actions):
                    assert got[c, k] == pytest.approx(trees[c][k].query(x),
                                                      rel=1e-12, abs=1e-15)
            factors = np.exp(rng.uniform(-0.3, 0.3, size=actions))
            forest.update_all(pos, factors)
            for c in range(centers):
                for k in range(actions):
                    trees[c][k].update(x, float(factors[k]))

    def test_drift_triggers_rebuild_and_preserves_values(self):
        forest = SuffixProductForest(2, 1, 4, initial_value=1.0)
        oracle = [ArrayOracle(np.ones(4)) for _ in range(2)]
        pos = np.array([1, 2], dtype=np.int64)
        tiny = np.array([1e-160])
        for i in range(3):
            forest.update_all(pos, tiny)
            for c in range(2):
                oracle[c].update(int(pos[c]), 1e-160)
        assert forest.rebuilds >= 1
        for x_pos in range(4):
            got = forest.query_all(np.array([x_pos, x_pos], dtype=np.int64))
            for c in range(2):
                want = oracle[c].query(x_pos)
                assert got[c, 0] == pytest.approx(want, rel=1e-9, abs=1e-300)

    def test_leaf_values_roundtrip(self):
        forest = SuffixProductForest(2, 2, 3, initial_value=0.5)
        forest.update_all(np.array([0, 1], dtype=np.int64),
                          np.array([2.0, 3.0]))
        leaves = forest.leaf_values()
        assert leaves.shape == (2, 2, 4)
        assert leaves[0, 0, 0] == pytest.approx(1.0)   # suffix from pos 0
        assert leaves[1, 0, 0] == pytest.approx(0.5)   # pos 0 before suffix
        assert leaves[1, 1, 1] == pytest.approx(1.5)
        assert np.all(leaves[:, :, 3] == 0.0)          # pad leaves stay zero
