import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nldtlab.core import Dataset, accuracy, split
from nldtlab.datagen import SyntheticSpec, generate
from nldtlab.svm import (SvmModel, decision_value, dual_objective, rbf_kernel, rbf_matrix, solve_dual, svm_complexity,
                         to_signed)

from oracles import brute_force_dual


def test_rbf_examples():
    assert rbf_kernel([0.3, 0.7], [0.3, 0.7], 2.0) == 1.0
    assert rbf_kernel([0, 0], [1, 0], 1.0) == pytest.approx(math.exp(-1.0), abs=1e-15)
    with pytest.raises(ValueError):
        rbf_kernel([0, 0], [1, 0, 0], 1.0)
    with pytest.raises(ValueError):
        rbf_kernel([0], [1], 0.0)


@given(arrays(float, 3, elements=st.floats(-10, 10)), arrays(float, 3, elements=st.floats(-10, 10)),
       st.floats(0.01, 5))
def test_rbf_symmetric(p, q, g):
    assert rbf_kernel(p, q, g) == rbf_kernel(q, p, g)
    assert 0.0 <= rbf_kernel(p, q, g) <= 1.0


def test_two_point_instance():
    ds = Dataset(np.array([[0.0, 0.0], [2.0, 0.0]]), np.array([0, 1]))
    m = solve_dual(ds, C=1000.0, gamma=0.5)
    assert svm_complexity(m) == 2
    # the perpendicular bisector x1 = 1 is the zero set
    assert abs(decision_value(m, [1.0, 0.0])) < 1e-9
    assert abs(decision_value(m, [1.0, 3.0])) < 1e-9
    assert decision_value(m, [0.9, 0.0]) < 0 < decision_value(m, [1.1, 0.0])


def _random_instance(rng, n):
    X = rng.uniform(0, 1, size=(n, 2))
    y = np.array([0, 1] + list(rng.integers(0, 2, n - 2)))
    return Dataset(X, y)


def _kkt_violation(model, ds):
    t = to_signed(ds.labels)
    ty = t * model.decision_function(ds.features)
    a, C = model.alphas, model.C
    eps = 1e-8 * C
    worst = 0.0
    for ai, m in zip(a, ty):
        if ai <= eps:
            worst = max(worst, (1 - m))
        elif ai >= C - eps:
            worst = max(worst, m - 1)
        else:
            worst = max(worst, abs(m - 1))
    return worst


@pytest.mark.parametrize("seed", range(12))
def test_dual_matches_active_set_oracle(seed):
    rng = np.random.default_rng(seed)
    ds = _random_instance(rng, 4 + seed % 3)
    C = [1.0, 10.0, 1000.0][seed % 3]
    gamma = float(rng.uniform(0.5, 5.0))
    m = solve_dual(ds, C=C, gamma=gamma)
    t = to_signed(ds.labels)
    K = rbf_matrix(ds.features, ds.features, gamma)
    best, _ = brute_force_dual(K * np.outer(t, t), t, C)
    assert abs(m.objective - best) <= 1e-4
    assert _kkt_violation(m, ds) <= 1e-3
    assert np.all(m.alphas >= 0) and np.all(m.alphas <= C)
    assert abs(m.alphas @ t) <= 1e-3


def test_feasibility_and_monotone_objective_along_the_trace():
    ds = generate(SyntheticSpec("ds3", n_per_class=60, seed=0))
    trace = []
    m = solve_dual(ds, C=10.0, trace=trace)
    assert m.converged
    assert np.all(np.diff(trace) >= -1e-9)
    t = to_signed(ds.labels)
    assert abs(m.alphas @ t) <= 1e-9
    assert abs(trace[-1] - m.objective) <= 1e-9


def test_free_support_vectors_sit_on_the_margin():
    ds = generate(SyntheticSpec("ds1", n_per_class=80, seed=3))
    m = solve_dual(ds, C=1000.0)
    t = to_signed(ds.labels)
    free = (m.alphas > 1e-8) & (m.alphas < m.C - 1e-8)
    assert free.any()
    margins = t[free] * m.decision_function(ds.features[free])
    assert np.all(np.abs(margins - 1) <= 1e-3)


def test_decision_value_matches_direct_sum():
    rng = np.random.default_rng(7)
    ds = _random_instance(rng, 4)
    m = solve_dual(ds, C=5.0, gamma=1.3)
    t = to_signed(ds.labels)
    for x in rng.uniform(-1, 2, size=(20, 2)):
        direct = sum(a * ti * math.exp(-1.3 * float(((x - xi) ** 2).sum()))
                     for a, ti, xi in zip(m.alphas, t, ds.features)) + m.bias
        assert decision_value(m, x) == pytest.approx(direct, abs=1e-12)


def test_zero_alphas_give_constant_bias():
    m = SvmModel(1.0, 1.0, 0.25, np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.zeros(3))
    assert decision_value(m, [5.0, -2.0]) == 0.25
    assert svm_complexity(m) == 0


def test_complexity_threshold_count():
    m = SvmModel(2.0, 1.0, 0.0, np.zeros((0, 1)), np.zeros(0), np.zeros(0), np.array([0.0, 0.5, 2.0, 1e-12]),
                 sv_epsilon=1e-8)
    assert svm_complexity(m) == 2


def test_rejects_bad_inputs():
    ds = Dataset(np.zeros((3, 1)), np.array([0, 0, 0]), degenerate=True)
    with pytest.raises(ValueError):
        solve_dual(ds)
    with pytest.raises(ValueError):
        solve_dual(Dataset(np.eye(2), np.array([0, 1])), C=0.0)


def test_non_convergence_is_flagged():
    ds = generate(SyntheticSpec("ds4", n_per_class=60, seed=0))
    m = solve_dual(ds, C=1000.0, max_passes=0)
    assert not m.converged and m.iterations == 0


def test_json_round_trip():
    ds = generate(SyntheticSpec("ds1", n_per_class=50, seed=1))
    m = solve_dual(ds)
    back = SvmModel.from_dict(m.to_dict())
    np.testing.assert_allclose(back.decision_function(ds.features), m.decision_function(ds.features), atol=1e-12)
    assert svm_complexity(back) == svm_complexity(m)


def _mean_sv_and_acc(family, C, runs, n_per_class=250):
    ds = generate(SyntheticSpec(family, n_per_class=n_per_class, seed=0))
    svs, accs = [], []
    for i in range(runs):
        pair = split(ds, 0.7, i)
        m = solve_dual(pair.train, C=C)
        svs.append(svm_complexity(m))
        accs.append(accuracy(m.predict(pair.test.features), pair.test.labels))
    return float(np.mean(svs)), float(np.mean(accs))


def test_ds1_sv_count_near_reported():
    sv, acc = _mean_sv_and_acc("ds1", 1000.0, 50)
    assert abs(sv - 8.36) <= 4.0


def test_ds4_sv_count_falls_with_C():
    lo, _ = _mean_sv_and_acc("ds4", 1.0, 10)
    hi, _ = _mean_sv_and_acc("ds4", 1000.0, 10)
    assert lo > hi


def test_dual_objective_helper():
    t = np.array([1.0, -1.0])
    K = np.eye(2)
    assert dual_objective(np.array([1.0, 1.0]), t, K) == 2.0 - 0.5 * 2.0
