import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netclass.dataset import LabeledDataset
from netclass.explain import (expected_margin, h_statistics, interaction_2d, partial_dependence,
                              pd_raw, shap_dependence, shap_global_summary, shap_values, tree_shap,
                              waterfall)
from netclass.gbt import GbtModel, Hyperparams, RegressionTree, train

LEAF = -1


def tree(feature, threshold, left, right, value, weight):
    return RegressionTree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
                          np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                          np.array(value, dtype=float), np.array(weight, dtype=float))


def stump(f, t, v_left, v_right, w_left, w_right):
    return tree([f, LEAF, LEAF], [t, 0, 0], [1, 0, 0], [2, 0, 0], [0, v_left, v_right],
                [w_left + w_right, w_left, w_right])


def model_of(trees_per_class, nf, lr=1.0, base=None):
    k = len(trees_per_class)
    base = np.zeros(k) if base is None else np.asarray(base, dtype=float)
    return GbtModel(list(range(k)), base, trees_per_class, lr, tuple(f"f{i}" for i in range(nf)))


def fitted(nf=5, n_classes=3, seed=0, trees=15, depth=4):
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(n_classes), 30)
    X = rng.normal(size=(len(y), nf)) + 0.7 * y[:, None] * rng.normal(size=nf)
    d = LabeledDataset(X, y, [f"g{i:03d}" for i in range(len(y))], tuple(f"f{i}" for i in range(nf)))
    return train(d, Hyperparams(trees=trees, tree_depth=depth, mtry=max(1, nf - 2), seed=seed)), X


# -- brute force oracles --------------------------------------------------------------------

def cond_expectation(t, x, S, node=0):
    """Path-dependent E[tree | x_S]: follow x on S, weight children by node weights elsewhere."""
    f = t.feature[node]
    if f == LEAF:
        return t.value[node]
    l, r = t.left[node], t.right[node]
    if f in S:
        return cond_expectation(t, x, S, l if x[f] < t.threshold[node] else r)
    return (t.weight[l] * cond_expectation(t, x, S, l)
            + t.weight[r] * cond_expectation(t, x, S, r)) / t.weight[node]


def brute_shapley(m, c, x):
    d = len(x)
    v = {}
    for size in range(d + 1):
        for S in itertools.combinations(range(d), size):
            v[S] = m.learning_rate * sum(cond_expectation(t, x, set(S)) for t in m.trees[c])
    phi = np.zeros(d)
    for i in range(d):
        others = [j for j in range(d) if j != i]
        for size in range(d):
            w = math.factorial(size) * math.factorial(d - size - 1) / math.factorial(d)
            for S in itertools.combinations(others, size):
                phi[i] += w * (v[tuple(sorted(S + (i,)))] - v[S])
    return phi


def brute_pd(m, c, feats, X_eval, X_bg):
    out = []
    for e in X_eval:
        hybrid = X_bg.copy()
        hybrid[:, list(feats)] = e[list(feats)]
        out.append(m.class_margin(hybrid, c).mean())
    return np.array(out)


# -- SHAP ------------------------------------------------------------------------------------

def test_local_accuracy_on_fitted_model():
    m, X = fitted(nf=8, n_classes=5, trees=20, depth=5)
    phi, base = shap_values(m, X)
    margin = m.predict_margin(X)
    assert np.max(np.abs(base + phi.sum(axis=2) - margin)) < 1e-6


def test_base_is_training_mean_margin():
    m, X = fitted()
    for c in range(m.n_classes):
        assert expected_margin(m, c) == pytest.approx(m.class_margin(X, c).mean(), abs=1e-9)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_tree_shap_matches_exhaustive_shapley(seed):
    m, X = fitted(nf=5, seed=seed, trees=6, depth=4)
    phi, _ = shap_values(m, X[:12])
    for r in range(12):
        for c in range(m.n_classes):
            assert np.max(np.abs(phi[r, c] - brute_shapley(m, c, X[r]))) < 1e-8


def test_unused_feature_gets_zero():
    m = model_of([[stump(0, 0.0, -1, 1, 5, 5), stump(2, 0.5, 2, 0, 3, 7)]], nf=4)
    X = np.random.default_rng(0).normal(size=(50, 4))
    phi, _ = shap_values(m, X)
    assert np.all(phi[:, 0, 1] == 0) and np.all(phi[:, 0, 3] == 0)


def test_symmetric_features_get_equal_phi():
    # two trees identical up to swapping features 0 and 1
    a = tree([0, 1, LEAF, LEAF, LEAF], [0.0, 0.5, 0, 0, 0], [1, 3, 0, 0, 0], [2, 4, 0, 0, 0],
             [0, 0, 2.0, -1.0, 0.5], [10, 6, 4, 2, 4])
    b = tree([1, 0, LEAF, LEAF, LEAF], [0.0, 0.5, 0, 0, 0], [1, 3, 0, 0, 0], [2, 4, 0, 0, 0],
             [0, 0, 2.0, -1.0, 0.5], [10, 6, 4, 2, 4])
    m = model_of([[a, b]], nf=3)
    for v in (-1.0, 0.2, 0.7, 3.0):
        phi, _ = shap_values(m, np.array([[v, v, 9.0]]))
        assert abs(phi[0, 0, 0] - phi[0, 0, 1]) < 1e-8


def test_single_stump_phi_is_margin_minus_expectation():
    m = model_of([[stump(1, 0.0, -2.0, 3.0, 4, 6)]], nf=3, lr=0.5, base=[0.1])
    x = np.array([9.0, -1.0, 9.0])   # left branch
    exp = tree_shap(m, x)[0]
    assert exp.phi[1] == pytest.approx(exp.prediction - exp.base_value, abs=1e-15)
    assert exp.phi[0] == 0 and exp.phi[2] == 0
    assert exp.base_value == pytest.approx(0.1 + 0.5 * (0.4 * -2 + 0.6 * 3))


def test_tree_shap_rejects_empty_background():
    m = model_of([[stump(0, 0.0, -1, 1, 1, 1)]], nf=2)
    with pytest.raises(ValueError, match="empty"):
        tree_shap(m, [0.0, 0.0], background=np.zeros((0, 2)))


def test_summary_ranking_and_row_order():
    m = model_of([[stump(0, 0.0, -1, 1, 5, 5), stump(2, 0.5, 2, 0, 3, 7)],
                  [stump(2, 0.1, 1, -1, 5, 5)]], nf=4)
    X = np.random.default_rng(1).normal(size=(40, 4))
    s = shap_global_summary(m, X)
    names = [n for n, _ in s.ranking(0)]
    assert names[-2:] == ["f1", "f3"] and s.ranking(0)[-1][1] == 0.0
    perm = shap_global_summary(m, X[::-1])
    assert s.ranking(1) == perm.ranking(1)
    rows = list(s.rows())
    assert len(rows) == 2 * 4 and rows[0][3] == 1


def test_dependence_shape_and_constant_feature():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(60, 4))
    X[:, 3] = 1.0
    y = (X[:, 0] > 0).astype(int)
    d = LabeledDataset(X, y, [f"g{i:02d}" for i in range(60)], tuple(f"f{i}" for i in range(4)))
    m = train(d, Hyperparams(trees=5, tree_depth=2))
    dep = shap_dependence(m, X, 3, color_feature=0)
    for code, table in dep.items():
        assert table.shape == (len(X), 3)
        assert np.all(table[:, 1] == 0)


def test_waterfall_sums_to_margin():
    m, X = fitted()
    wf = waterfall(m, X[3])
    margin = m.predict_margin(X[3:4])[0]
    for c, rows in wf.items():
        phis = [p for _, _, p in rows]
        assert sum(phis) + expected_margin(m, c) == pytest.approx(margin[c], abs=1e-9)
        assert all(abs(a) >= abs(b) for a, b in zip(phis, phis[1:]))


# -- partial dependence ----------------------------------------------------------------------

def test_pd_zero_tree_model_is_zero():
    m = model_of([[], []], nf=3, base=[0.3, -0.3])
    X = np.random.default_rng(0).normal(size=(20, 3))
    pd = partial_dependence(m, 0, [1], X)
    assert np.all(pd.values == 0)


def test_pd_stump_is_centred_step():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 3))
    m = model_of([[stump(0, 0.0, -2.0, 3.0, 25, 25)]], nf=3, lr=0.5)
    q = np.mean(X[:, 0] < 0.0)
    centre = 0.5 * (q * -2.0 + (1 - q) * 3.0)
    pd = partial_dependence(m, 0, [0], X, grid=[np.array([-1.0, -0.1, 0.2, 1.5])])
    assert np.allclose(pd.values, [0.5 * -2 - centre] * 2 + [0.5 * 3 - centre] * 2, atol=1e-14)
    other = partial_dependence(m, 0, [2], X)
    assert np.all(np.abs(other.values) < 1e-14)


@pytest.mark.parametrize("feats", [(0,), (1, 3), (0, 2, 4)])
def test_pd_kernel_matches_hybrid_means(feats):
    m, X = fitted(nf=5, trees=8)
    for c in range(m.n_classes):
        fast = pd_raw(m, c, feats, X[:15], X)
        assert np.allclose(fast, brute_pd(m, c, feats, X[:15], X), atol=1e-10)


def test_pd_rejects_bad_features():
    m, X = fitted(nf=4)
    with pytest.raises(ValueError):
        partial_dependence(m, 0, [1, 1], X)
    with pytest.raises(ValueError):
        partial_dependence(m, 0, [0, 1, 2, 3], X)


# -- H statistics ----------------------------------------------------------------------------

def additive_fixture(nf=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(120, nf))
    trees = [stump(j, float(rng.normal(scale=0.5)), float(rng.normal()), float(rng.normal()), 60, 60)
             for j in range(nf)]
    trees.append(stump(1, 0.7, -0.5, 1.0, 80, 40))
    return model_of([trees], nf=nf), X


def product_fixture():
    pts = np.array(list(itertools.product([-1.0, 1.0], repeat=3)))
    X = np.repeat(pts, 5, axis=0)
    prod = tree([0, 1, 1, LEAF, LEAF, LEAF, LEAF], [0, 0, 0, 0, 0, 0, 0], [1, 3, 5, 0, 0, 0, 0],
                [2, 4, 6, 0, 0, 0, 0], [0, 0, 0, 1, -1, -1, 1], [40, 20, 20, 10, 10, 10, 10])
    noise = stump(2, 0.0, -0.3, 0.3, 20, 20)
    return model_of([[prod, noise]], nf=3), X


def test_hstats_additive_model_is_zero():
    m, X = additive_fixture()
    rep = h_statistics(m, 0, X, max_order=3)
    assert rep.undefined == []
    assert rep.h2_total < 1e-10
    assert np.all(rep.h2_feature < 1e-10)
    assert max(rep.h2_pairwise.values()) < 1e-10
    assert len(rep.h2_threeway) == 4 and max(rep.h2_threeway.values()) < 1e-10


def test_hstats_product_fixture():
    m, X = product_fixture()
    rep = h_statistics(m, 0, X, max_order=2)
    assert rep.h2_pairwise[(0, 1)] > 0.99
    assert rep.h2_pairwise[(0, 2)] < 0.01 and rep.h2_pairwise[(1, 2)] < 0.01
    assert rep.h2_feature[2] < 0.01


def test_hstats_constant_model_flags_undefined():
    m = model_of([[]], nf=3, base=[1.0])
    rep = h_statistics(m, 0, np.random.default_rng(0).normal(size=(40, 3)), max_order=2)
    assert ("total",) in rep.undefined and math.isnan(rep.h2_total)
    assert (0, 1) in rep.undefined


def test_hstats_sample_cap_and_seed():
    m, X = fitted(nf=4)
    a = h_statistics(m, 1, X, max_order=2, sample_size=40, seed=3)
    b = h_statistics(m, 1, X, max_order=2, sample_size=40, seed=3)
    assert a.sample_size == 40
    assert a.h2_pairwise == b.h2_pairwise


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_hstats_are_nonnegative(seed):
    m, X = fitted(nf=4, seed=seed, trees=5, depth=3)
    rep = h_statistics(m, 0, X, max_order=3, sample_size=60, seed=seed)
    vals = [rep.h2_total, *rep.h2_feature, *rep.h2_pairwise.values(), *rep.h2_threeway.values()]
    assert all(v >= 0 for v in vals if not math.isnan(v))


def test_rows_use_feature_names():
    m, X = product_fixture()
    rows = list(h_statistics(m, 0, X, max_order=2).rows(m.feature_names))
    assert (0, 2, "f0:f1") == rows[4][:3]


# -- 2-D surfaces ------------------------------------------------------------------------------

def test_interaction_surface_gaps_are_nan():
    m, _ = fitted(nf=3)
    X = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
    surf = interaction_2d(m, 0, 0, 1, X, bins=4)
    assert surf.counts.sum() == 2
    assert np.isnan(surf.mean_proba[1, 1]) and not np.isnan(surf.mean_proba[0, 0])


def test_interaction_surface_constant_model():
    m = model_of([[], []], nf=2, base=[0.0, 0.0])
    X = np.random.default_rng(0).random((200, 2))
    surf = interaction_2d(m, 1, 0, 1, X, bins=5)
    vals = surf.mean_proba[~np.isnan(surf.mean_proba)]
    assert np.allclose(vals, 0.5)
    assert len(list(surf.records())) == 25
