import numpy as np
import pytest
from hypothesis import given, strategies as st

from nldtlab.cart import (AxisTree, CartParams, best_split, cart_complexity, fit_cart, gini, split_quality)
from nldtlab.core import Dataset, accuracy, split
from nldtlab.datagen import SyntheticSpec, generate

from oracles import gini_exact, split_quality_exact

counts = st.tuples(st.integers(0, 200), st.integers(0, 200)).filter(lambda c: sum(c) > 0)


def test_gini_examples():
    assert gini((10, 0)) == 0.0
    assert gini((5, 5)) == 0.5
    assert gini((3, 1)) == pytest.approx(0.375, abs=1e-15)
    with pytest.raises(ValueError):
        gini((0, 0))


def test_split_quality_examples():
    assert split_quality((5, 0), (0, 5)) == 0.0
    assert split_quality((5, 5), (5, 5)) == 0.5
    assert split_quality((4, 1), (1, 4)) == pytest.approx(0.32, abs=1e-15)
    with pytest.raises(ValueError):
        split_quality((0, 0), (3, 2))


@given(counts)
def test_gini_matches_exact_arithmetic(c):
    g = gini(c)
    assert abs(g - float(gini_exact(c))) < 1e-12
    assert 0.0 <= g <= 0.5
    assert (g == 0.0) == (min(c) == 0)


@given(counts, counts)
def test_split_never_worse_than_parent(left, right):
    s = split_quality(left, right)
    assert abs(s - float(split_quality_exact(left, right))) < 1e-12
    parent = (left[0] + right[0], left[1] + right[1])
    assert s <= gini(parent) + 1e-12


def test_best_split_examples():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    s = best_split(X, np.array([0, 0, 1, 1]))
    assert (s.feature, s.threshold, s.quality) == (0, 2.5, 0.0)
    assert best_split(X, np.array([1, 1, 1, 1])) is None
    assert best_split(np.ones((4, 2)), np.array([0, 1, 0, 1])) is None


def test_best_split_tie_breaks_by_feature_then_threshold():
    X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]])
    s = best_split(X, np.array([0, 1, 0, 1]))
    # several cuts tie; the lowest feature and threshold must win
    alts = [(j, t) for j in range(2) for t in (1.5, 2.5, 3.5)]
    qs = {jt: split_quality(*_child_counts(X[:, jt[0]], np.array([0, 1, 0, 1]), jt[1])) for jt in alts}
    best_q = min(qs.values())
    first = min(jt for jt, q in qs.items() if abs(q - best_q) < 1e-12)
    assert (s.feature, s.threshold) == first


def _child_counts(col, y, t):
    left = col <= t
    return ((int((y[left] == 0).sum()), int((y[left] == 1).sum())),
            (int((y[~left] == 0).sum()), int((y[~left] == 1).sum())))


def test_separable_1d_gives_stump():
    X = np.linspace(0, 1, 20)[:, None]
    y = (X[:, 0] > 0.42).astype(int)
    tree = fit_cart(Dataset(X, y))
    assert cart_complexity(tree) == 3
    assert tree.max_depth() == 1
    assert accuracy(tree.predict(X), y) == 1.0


def test_xor_needs_zero_gain_root():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    ds = Dataset(X, y)
    tree = fit_cart(ds, CartParams(max_depth=2, min_impurity_decrease=0.0))
    assert accuracy(tree.predict(X), y) == 1.0
    internal = [f for f in tree.feature if f >= 0]
    assert len(internal) == 3 and set(internal) == {0, 1}
    # with the default gain threshold the root split gains nothing and is refused
    assert cart_complexity(fit_cart(ds, CartParams(max_depth=2))) == 1


def test_single_leaf_complexity():
    ds = Dataset(np.ones((5, 1)), np.array([0, 1, 0, 1, 1]))
    tree = fit_cart(ds)
    assert cart_complexity(tree) == 1
    assert tree.predict(np.array([[0.0], [5.0]])).tolist() == [1, 1]


def test_leaf_tie_goes_to_class_0():
    ds = Dataset(np.ones((4, 1)), np.array([0, 1, 0, 1]))
    assert fit_cart(ds).predict(np.ones((1, 1)))[0] == 0


@pytest.mark.parametrize("params", [CartParams(), CartParams(max_depth=3), CartParams(min_leaf=5)])
def test_structural_invariants(params):
    ds = generate(SyntheticSpec("ds3", n_per_class=100, seed=1))
    tree = fit_cart(ds, params)
    leaves = tree.leaf_index
    for i in range(tree.n_nodes):
        if tree.feature[i] < 0:
            assert sum(tree.counts[i]) >= params.min_leaf
            assert tree.depth[i] <= params.max_depth
        else:
            parent = gini(tree.counts[i])
            s = split_quality(tree.counts[tree.left[i]], tree.counts[tree.right[i]])
            assert s < parent - params.min_impurity_decrease
    # prediction totality and agreement of the vectorised and scalar paths
    rng = np.random.default_rng(0)
    P = rng.uniform(-1, 2, size=(300, 2))
    vec = tree.predict(P)
    assert vec.tolist() == [tree.predict_one(p) for p in P]
    assert all(tree.feature[leaves(p)] < 0 for p in P)


def test_routing_is_less_equal():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    tree = fit_cart(Dataset(X, np.array([0, 0, 1, 1])))
    assert tree.threshold[0] == 2.5
    assert tree.predict(np.array([[2.5], [2.5000001]])).tolist() == [0, 1]


def test_json_round_trip_and_render():
    ds = generate(SyntheticSpec("ds1", n_per_class=60, seed=2))
    tree = fit_cart(ds)
    back = AxisTree.from_dict(tree.to_dict())
    np.testing.assert_array_equal(back.predict(ds.features), tree.predict(ds.features))
    assert back.max_depth() == tree.max_depth()
    text = tree.render(["a", "b"])
    assert text.startswith("if ") and "<=" in text and "class" in text


def test_cart_ds3_accuracy_near_reported():
    ds = generate(SyntheticSpec("ds3", seed=0))
    accs = []
    for i in range(50):
        pair = split(ds, 0.7, i)
        accs.append(accuracy(fit_cart(pair.train).predict(pair.test.features), pair.test.labels))
    assert abs(100 * np.mean(accs) - 95.0) <= 5.0


@pytest.mark.xfail(strict=True, reason="grow-until-pure defaults give far more than 14.5 nodes; see notes")
def test_cart_ds1_complexity_near_reported():
    ds = generate(SyntheticSpec("ds1", seed=0))
    sizes = [cart_complexity(fit_cart(split(ds, 0.7, i).train)) for i in range(50)]
    assert abs(np.mean(sizes) - 14.5) <= 6.0
