import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nldtlab.cart import split_quality
from nldtlab.core import Dataset, FeatureTransform, accuracy, split
from nldtlab.datagen import SyntheticSpec, generate
from nldtlab.nldt import (EXPONENTS, NldtNode, NldtParams, NldtTree, PowerLawRule, RuleDomainError, canonical_rule,
                          eval_rule, fit_nldt, lower_level_search, nldt_complexity, predict_nldt, rule_complexity,
                          split_impurity, upper_level_search, with_params)


def _rule(B, m, w, thetas):
    return PowerLawRule(np.array(B), m, np.array(w, float), np.array(thetas, float))


# ---------------------------------------------------------------- rules


def test_eval_rule_examples():
    zero = _rule([[0, 0], [0, 0], [0, 0]], 0, [0.2, -0.1, 0.3], [0.05])
    for x in ([1.0, 1.0], [1.7, 1.2], [2.0, 2.0]):
        assert eval_rule(zero, x) == pytest.approx(0.45, abs=1e-15)
    lin = _rule([[1, 0]], 0, [0.5], [-0.75])
    assert eval_rule(lin, [1.5, 1.93]) == 0.0
    plain = _rule([[2, -1], [0, 3]], 0, [0.4, -0.6], [0.1])
    mod = _rule([[2, -1], [0, 3]], 1, [0.4, -0.6], [0.1, 0.0])
    rng = np.random.default_rng(0)
    for x in rng.uniform(1, 2, size=(50, 2)):
        assert eval_rule(mod, x) == abs(eval_rule(plain, x))


def test_eval_rule_refuses_non_finite():
    r = _rule([[-1, 0]], 0, [1.0], [0.0])
    with pytest.raises(RuleDomainError):
        eval_rule(r, [0.0, 1.0])


@settings(max_examples=200)
@given(st.lists(st.sampled_from(EXPONENTS), min_size=6, max_size=6),
       st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       st.lists(st.floats(-1, 1), min_size=2, max_size=2), st.integers(0, 1),
       st.lists(st.floats(1, 2), min_size=2, max_size=2))
def test_rules_finite_on_normalised_domain(b, w, th, m, x):
    r = _rule(np.reshape(b, (3, 2)), m, w, th[: m + 1])
    assert np.isfinite(eval_rule(r, x))


def test_rule_complexity_examples():
    assert rule_complexity(_rule([[0, 0], [0, 0]], 0, [0, 0], [0])) == 0
    assert rule_complexity(_rule([[2, 0], [-1, 0]], 0, [1, 1], [0])) == 2


def _five_feature_rule():
    # terms in x2, x3, x4, x7, x10 spread over three power laws (like the cancer root rule)
    B = np.zeros((3, 10), int)
    B[0, 1], B[0, 2] = 1, -1
    B[1, 3], B[1, 6] = 2, 1
    B[2, 9], B[2, 1] = -2, 1
    return _rule(B, 1, [0.3, -0.2, 0.7], [-0.4, 0.1])


def test_two_node_rule_counts():
    r = _five_feature_rule()
    assert rule_complexity(r) == int(np.count_nonzero(r.B)) == 6
    assert r.features() == [1, 2, 3, 6, 9]
    tree = _manual_tree(r, d=10)
    assert nldt_complexity(tree) == 5


def _manual_tree(root_rule, d, second=None):
    nodes = [NldtNode(0, (5, 5), root_rule, 0.0, 1, 2), NldtNode(1, (5, 0)), NldtNode(1, (0, 5))]
    if second is not None:
        nodes[2] = NldtNode(1, (2, 5), second, 0.0, 3, 4)
        nodes += [NldtNode(2, (2, 0)), NldtNode(2, (0, 5))]
    tf = FeatureTransform(np.ones(d), np.zeros(d))
    return NldtTree(nodes, tf, NldtParams())


def test_two_node_tree_complexity():
    a = _rule([[1, 1, 0], [0, 0, 0]], 0, [1, 0], [0])
    b = _rule([[0, 2, 0], [0, 0, -1]], 0, [1, 1], [0])
    assert nldt_complexity(_manual_tree(a, 3, b)) == 4
    leaf_only = NldtTree([NldtNode(0, (3, 1))], FeatureTransform(np.ones(3), np.zeros(3)), NldtParams())
    assert nldt_complexity(leaf_only) == 0


def test_split_impurity_examples():
    Z = np.linspace(1, 2, 10)[:, None]
    y = (Z[:, 0] > 1.5).astype(int)
    assert split_impurity(_rule([[1]], 0, [1.0], [-1.5]), Z, y) == 0.0
    assert split_impurity(_rule([[0]], 0, [0.5], [0.1]), Z, y) == 1.0
    rng = np.random.default_rng(2)
    Zr = rng.uniform(1, 2, size=(10, 2))
    yr = np.array([0, 1, 1, 0, 1, 0, 0, 1, 1, 0])
    r = _rule([[1, -1], [0, 2]], 1, [0.6, -0.3], [0.05, 0.1])
    left = r.evaluate(Zr) <= 0
    lc = (int((yr[left] == 0).sum()), int((yr[left] == 1).sum()))
    rc = (int((yr[~left] == 0).sum()), int((yr[~left] == 1).sum()))
    assert 0 < left.sum() < 10
    assert split_impurity(r, Zr, yr) == pytest.approx(split_quality(lc, rc), abs=1e-15)


def test_canonical_rule_preserves_sign_and_bounds():
    r = _rule([[1, 0], [1, 0], [0, 0]], 0, [0.9, 0.8, 0.7], [0.9])
    c = canonical_rule(r)
    assert rule_complexity(c) == 1
    assert np.all(np.abs(c.w) <= 1) and np.all(np.abs(c.thetas) <= 1)
    rng = np.random.default_rng(0)
    Z = rng.uniform(1, 2, size=(100, 2))
    assert np.array_equal(r.evaluate(Z) <= 0, c.evaluate(Z) <= 0)


# ---------------------------------------------------------------- lower level


def _threshold_node(n=80, seed=0):
    rng = np.random.default_rng(seed)
    Z = rng.uniform(1, 2, size=(n, 3))
    y = (Z[:, 1] > 1.4).astype(int)
    return Z, y


def test_lower_level_separates_single_feature():
    Z, y = _threshold_node()
    B = np.zeros((3, 3), int)
    B[0, 1] = 1
    zero = sum(lower_level_search(B, 0, Z, y, NldtParams(), np.random.default_rng(s)).impurity == 0.0
               for s in range(50))
    assert zero >= 48


def test_lower_level_bounds_and_determinism():
    ds = generate(SyntheticSpec("ds3", n_per_class=80, seed=1))
    Z = FeatureTransform.fit(ds.features).apply(ds.features)
    B = np.array([[2, 0], [0, 1], [0, 0]])
    for m in (0, 1):
        a = lower_level_search(B, m, Z, ds.labels, NldtParams(), np.random.default_rng(4))
        b = lower_level_search(B, m, Z, ds.labels, NldtParams(), np.random.default_rng(4))
        assert a.impurity == b.impurity and np.array_equal(a.w, b.w)
        assert np.all(np.abs(a.w) <= 1) and np.all(np.abs(a.thetas) <= 1)
        assert len(a.thetas) == m + 1
        r = PowerLawRule(B, m, a.w, a.thetas)
        assert split_impurity(r, Z, ds.labels) == pytest.approx(a.impurity, abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_lower_level_beats_random_sampling(seed):
    ds = generate(SyntheticSpec("ds3", n_per_class=100, seed=seed))
    Z = FeatureTransform.fit(ds.features).apply(ds.features)
    rng = np.random.default_rng(100 + seed)
    B = rng.choice(EXPONENTS, size=(3, 2))
    m = int(rng.integers(2))
    found = lower_level_search(B, m, Z, ds.labels, NldtParams(), np.random.default_rng(seed)).impurity
    samples = rng.uniform(-1, 1, size=(1000, 3 + m + 1))
    baseline = min(split_impurity(PowerLawRule(B, m, s[:3], s[3:]), Z, ds.labels) for s in samples)
    assert found <= baseline


@pytest.mark.parametrize("seed", range(4))
def test_lower_level_monotone_in_budget(seed):
    ds = generate(SyntheticSpec("ds4", n_per_class=80, seed=seed))
    Z = FeatureTransform.fit(ds.features).apply(ds.features)
    B = np.array([[1, 1], [0, 1], [1, 0]])
    prev = np.inf
    for gens in (5, 10, 20, 40):
        p = NldtParams(lower_gens=gens, lower_stall=10**6)
        q = lower_level_search(B, 1, Z, ds.labels, p, np.random.default_rng(seed)).impurity
        assert q <= prev
        prev = q


# ---------------------------------------------------------------- upper level


def test_upper_level_prefers_single_feature():
    ones = 0
    for s in range(50):
        Z, y = _threshold_node(60, seed=s)
        res = upper_level_search(Z, y, NldtParams(), np.random.default_rng(s))
        ones += res.feasible and res.complexity == 1
    assert ones >= 45


def test_upper_level_rejects_pure_node():
    with pytest.raises(ValueError):
        upper_level_search(np.ones((10, 2)) * 1.5, np.zeros(10, int))


def test_upper_level_result_consistent():
    ds = generate(SyntheticSpec("ds3", n_per_class=60, seed=0))
    Z = FeatureTransform.fit(ds.features).apply(ds.features)
    res = upper_level_search(Z, ds.labels, NldtParams(), np.random.default_rng(0))
    assert res.feasible and res.impurity <= 0.05
    assert res.complexity == rule_complexity(res.rule)
    assert split_impurity(res.rule, Z, ds.labels) == res.impurity


# ---------------------------------------------------------------- trees


def _audit(tree):
    E = set(tree.params.exponents)
    for nd in tree.conditional_nodes():
        assert nd.impurity <= tree.params.tau_i
        assert np.all(np.abs(nd.rule.w) <= 1) and np.all(np.abs(nd.rule.thetas) <= 1)
        assert set(np.unique(nd.rule.B).tolist()) <= E


def test_ds1_single_rule_tree():
    ds = generate(SyntheticSpec("ds1", seed=0))
    pair = split(ds, 0.7, 0)
    tree = fit_nldt(pair.train, NldtParams(max_depth=1, seed=0))
    assert len(tree.conditional_nodes()) == 1
    assert accuracy(tree.predict(pair.test.features), pair.test.labels) >= 0.95
    _audit(tree)


def test_ds1_mostly_depth_one():
    ds = generate(SyntheticSpec("ds1", seed=0))
    single = 0
    for i in range(50):
        tree = fit_nldt(split(ds, 0.7, i).train, NldtParams(seed=i))
        single += len(tree.conditional_nodes()) == 1
        _audit(tree)
    assert single >= 45


def test_one_class_dataset_is_a_leaf():
    ds = Dataset(np.random.default_rng(0).uniform(size=(20, 3)), np.ones(20, int), degenerate=True)
    tree = fit_nldt(ds)
    assert len(tree.nodes) == 1 and tree.nodes[0].is_leaf
    assert tree.predict(ds.features).tolist() == [1] * 20


def test_infeasible_node_becomes_leaf_and_is_recorded():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(60, 2))
    y = rng.integers(0, 2, 60)
    p = NldtParams(tau_i=0.0, upper_gens=2, lower_gens=3, max_depth=1)
    tree = fit_nldt(Dataset(X, y), p)
    assert tree.nodes[0].is_leaf and tree.events


def test_prediction_trace_oracle():
    ds = generate(SyntheticSpec("ds4", n_per_class=150, seed=2))
    tree = fit_nldt(ds, NldtParams(seed=2))
    assert tree.conditional_nodes()
    rng = np.random.default_rng(5)
    lo, hi = ds.features.min(0), ds.features.max(0)
    P = rng.uniform(lo, hi, size=(100, 2))
    for x in P:
        z = tree.transform.apply(x)
        i = 0
        while not tree.nodes[i].is_leaf:
            nd = tree.nodes[i]
            i = nd.left if eval_rule(nd.rule, z) <= 0 else nd.right
        assert predict_nldt(tree, x) == tree.nodes[i].label
    # training rows route exactly as at fit time
    np.testing.assert_array_equal(tree.predict(ds.features), tree.predict(ds.features.copy()))


def test_boundary_point_goes_left():
    r = _rule([[1, 0]], 0, [0.5], [-0.75])
    tree = _manual_tree(r, d=2)
    assert predict_nldt(tree, [1.5, 1.2]) == 0
    assert predict_nldt(tree, [1.5000001, 1.2]) == 1


def test_tree_json_round_trip_and_render():
    ds = generate(SyntheticSpec("ds3", n_per_class=100, seed=0))
    tree = fit_nldt(ds, NldtParams(seed=1))
    back = NldtTree.from_dict(tree.to_dict())
    np.testing.assert_array_equal(back.predict(ds.features), tree.predict(ds.features))
    assert nldt_complexity(back) == nldt_complexity(tree)
    assert "<= 0" in tree.render()


def test_params_validation():
    with pytest.raises(ValueError):
        NldtParams(exponents=(1, 2, 3))
    p = with_params(NldtParams(), exponents=(-1, 0, 1, 2, 3))
    assert p.exponents == (-1, 0, 1, 2, 3)
