import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memclass.core import Image, LabeledDataset, MemorySet
from memclass.features import FeatureVector, PrecomputedSimilarity
from memclass.features.extractors import IndexExtractor
from memclass.learners import (
    DecisionTree,
    LogisticModel,
    MajorityModel,
    best_split,
    logistic_loss_and_grad,
    model_from_dict,
    predict,
    train_logistic,
    train_majority,
    train_memory_classifier,
    train_model,
    train_tree,
)


def gini(y, C):
    if len(y) == 0:
        return 0.0
    p = np.bincount(y, minlength=C) / len(y)
    return 1.0 - float(np.sum(p * p))


# -- CART -------------------------------------------------------------------------


def test_single_class_is_one_leaf():
    t = train_tree(np.random.default_rng(0).random((10, 2)), [1] * 10, n_classes=3)
    assert t.n_leaves == 1 and t.predict(np.zeros((3, 2))).tolist() == [1, 1, 1]


def test_one_threshold_split():
    X = np.array([[0.1], [0.2], [0.8], [0.9]])
    y = np.array([0, 0, 1, 1])
    t = train_tree(X, y, max_depth=3)
    assert t.depth() == 1 and t.threshold[0] == pytest.approx(0.5)
    assert np.all(t.predict(X) == y)
    # the three candidate midpoints, enumerated directly
    imps = {m: (gini(y[X[:, 0] <= m], 2) * np.sum(X[:, 0] <= m) + gini(y[X[:, 0] > m], 2) * np.sum(X[:, 0] > m)) / 4
            for m in (0.15, 0.5, 0.85)}
    assert min(imps, key=imps.get) == pytest.approx(0.5)


def test_identical_features_give_majority_leaf():
    t = train_tree(np.ones((5, 2)), [2, 0, 2, 1, 2], n_classes=3)
    assert t.n_leaves == 1 and t.predict(np.ones((1, 2)))[0] == 2
    t = train_tree(np.ones((4, 1)), [1, 0, 1, 0], n_classes=2)
    assert t.predict(np.ones((1, 1)))[0] == 0  # tie goes to the smaller class


def enumerate_best(X, y, C):
    """Every (feature, midpoint) candidate by brute force: lowest impurity, then feature, then threshold."""
    best = None
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for a, b in zip(vals[:-1], vals[1:]):
            m = (a + b) / 2
            left = X[:, f] <= m
            imp = (gini(y[left], C) * left.sum() + gini(y[~left], C) * (~left).sum()) / len(y)
            if best is None or imp < best[2] - 1e-12:
                best = (f, m, imp)
    return best


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1))
def test_chosen_split_is_the_minimum(seed):
    rng = np.random.default_rng(seed)
    n, d, C = int(rng.integers(4, 30)), int(rng.integers(1, 4)), int(rng.integers(2, 4))
    X = rng.integers(0, 6, size=(n, d)) / 5.0
    y = rng.integers(0, C, n)
    got, expected = best_split(X, y, C), enumerate_best(X, y, C)
    if expected is None:
        assert got is None
        return
    assert got[0] == expected[0]
    assert got[1] == pytest.approx(expected[1])
    assert got[2] == pytest.approx(expected[2], abs=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_tree_structure_invariants(seed, depth):
    rng = np.random.default_rng(seed)
    X = rng.random((50, 3))
    y = rng.integers(0, 4, 50)
    t = train_tree(X, y, max_depth=depth, n_classes=4)
    assert t.depth() <= depth
    internal = t.feature != -1
    assert np.all(t.left[internal] > 0) and np.all(t.right[internal] > 0)
    assert np.all((t.value >= 0) & (t.value < 4))
    back = DecisionTree.from_dict(t.to_dict())
    np.testing.assert_array_equal(back.predict(X), t.predict(X))
    assert back.to_dict() == t.to_dict()


def test_tree_is_deterministic(rng):
    X, y = rng.random((40, 3)), rng.integers(0, 3, 40)
    assert train_tree(X, y).to_dict() == train_tree(X, y).to_dict()


def test_tree_errors():
    with pytest.raises(ValueError):
        train_tree(np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        train_tree(np.zeros((3, 2)), [0, 1, 0], max_depth=0)
    with pytest.raises(ValueError):
        train_tree(np.zeros((3, 2)), [0, 1, 0], schema=("a",))


# -- logistic -----------------------------------------------------------------------


def test_zero_epochs_uniform():
    m = train_logistic(np.random.default_rng(1).normal(size=(10, 3)), [0, 1, 2] * 3 + [0], epochs=0)
    np.testing.assert_allclose(m.predict_proba(np.ones((4, 3))), 1 / 3)
    assert m.predict(np.ones((4, 3))).tolist() == [0] * 4


def test_separable_data_is_learned():
    X = np.array([[-2.0], [-1.5], [-1.0], [-0.4], [0.3], [0.9], [1.4], [2.2]])
    y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    m = train_logistic(X, y, epochs=500, lr=0.5)
    assert np.all(m.predict(X) == y)


def finite_difference(W, X, y, sw=None, h=1e-6):
    g = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        g[idx] = (logistic_loss_and_grad(Wp, X, y, sw)[0] - logistic_loss_and_grad(Wm, X, y, sw)[0]) / (2 * h)
    return g


def test_gradient_matches_finite_differences(rng):
    for _ in range(10):
        n, d, C = 12, 3, 4
        X, y = rng.normal(size=(n, d)), rng.integers(0, C, n)
        W = rng.normal(size=(C, d + 1))
        sw = rng.uniform(0.5, 2.0, n)
        for weights in (None, sw):
            _, g = logistic_loss_and_grad(W, X, y, weights)
            np.testing.assert_allclose(g, finite_difference(W, X, y, weights), rtol=1e-5, atol=1e-8)


def test_loss_decreases_at_small_lr(rng):
    for _ in range(5):
        X, y = rng.normal(size=(30, 4)), rng.integers(0, 3, 30)
        hist = []
        train_logistic(X, y, epochs=100, lr=0.01, history=hist)
        assert all(b < a for a, b in zip(hist, hist[1:]))


def test_logistic_checks_and_round_trip(rng):
    with pytest.raises(ValueError):
        train_logistic([[np.nan]], [0])
    with pytest.raises(ValueError):
        train_logistic([[1.0]], [0], lr=0)
    X, y = rng.normal(size=(20, 2)), rng.integers(0, 2, 20)
    m = train_logistic(X, y, epochs=30, class_weight="balanced")
    back = LogisticModel.from_dict(m.to_dict())
    np.testing.assert_array_equal(back.weights, m.weights)
    a = train_logistic(X, y, epochs=30)
    b = train_logistic(X, y, epochs=30)
    np.testing.assert_array_equal(a.weights, b.weights)


# -- majority and dispatch ------------------------------------------------------------


def test_majority_and_predict():
    m = train_majority([0, 0, 1], 2, ("a", "b"))
    assert predict(m, FeatureVector((3.0, 4.0), ("a", "b"))) == 0
    leaf = DecisionTree.leaf(2, ("a", "b"), 3)
    assert predict(leaf, FeatureVector((9.0, -1.0), ("a", "b"))) == 2
    zero = LogisticModel(np.zeros((3, 3)), ("a", "b"))
    assert predict(zero, [1.0, 2.0]) == 0
    with pytest.raises(ValueError):
        predict(leaf, FeatureVector((1.0,), ("z",)))


def test_model_dict_dispatch(rng):
    X, y = rng.random((15, 2)), rng.integers(0, 3, 15)
    for kind in ("majority", "tree", "logistic"):
        m = train_model(kind, X, y, 3, ("a", "b"), {"epochs": 10, "max_depth": 2})
        back = model_from_dict(m.to_dict())
        np.testing.assert_array_equal(back.predict(X), m.predict(X))
    with pytest.raises(ValueError):
        train_model("svm", X, y, 3, ("a", "b"))
    with pytest.raises(ValueError):
        model_from_dict({"kind": "svm"})


# -- memory-classifier training ----------------------------------------------------------


def cluster_setup(rng, n=30):
    groups = rng.integers(0, 3, n)
    groups[:3] = [0, 1, 2]
    S = (groups[:, None] == groups[None, :]).astype(float)
    labels = rng.integers(0, 2, n)
    data = LabeledDataset([Image.blank(1, 1)] * n, labels, ("a", "b"))
    X = rng.random((n, 2))
    return data, PrecomputedSimilarity(S), X, groups


def test_members_are_exactly_the_routed_points(rng):
    data, sim, X, groups = cluster_setup(rng)
    mem = MemorySet.uniform([0, 1, 2], 0.5)
    mc = train_memory_classifier(data, sim, mem, "tree", clf_feats=X)
    for k, cluster in enumerate(mc.clusters):
        assert set(cluster.members) == set(np.flatnonzero(groups == groups[k]).tolist())
        assert cluster.train_accuracy == pytest.approx(
            np.mean(cluster.classifier.predict(X[list(cluster.members)]) == data.labels[list(cluster.members)]))


def test_empty_cluster_gets_global_majority(rng):
    data, sim, X, groups = cluster_setup(rng)
    S = sim.matrix.copy()
    S[5, :] = 0.0  # the memory at index 5 accepts nobody
    sim = PrecomputedSimilarity(S)
    mem = MemorySet.uniform([0, 5], 0.5)
    mc = train_memory_classifier(data, sim, mem, "logistic", {"epochs": 5}, clf_feats=X)
    assert mc.clusters[1].members == () and np.isnan(mc.clusters[1].train_accuracy)
    majority = int(np.argmax(np.bincount(data.labels, minlength=2)))
    assert isinstance(mc.cluster_classifiers[1], MajorityModel)
    assert mc.cluster_classifiers[1].label == majority


@pytest.mark.parametrize("kind", ["majority", "tree", "logistic"])
def test_one_memory_zero_threshold_equals_global(rng, kind):
    data, sim, X, _ = cluster_setup(rng)
    ext = IndexExtractor(["f0", "f1"])
    mc = train_memory_classifier(data, sim, MemorySet((4,), (0.0,)), kind, {"epochs": 50}, features=ext,
                                 clf_feats=X)
    glob = train_model(kind, X, data.labels, 2, ext.schema, {"epochs": 50})
    Z = rng.random((100, 2))
    np.testing.assert_array_equal(mc.cluster_classifiers[0].predict(Z), glob.predict(Z))
    labels, sel = mc.predict_embedded(np.full((len(data.labels), 1), 4.0), X)
    assert np.all(sel == 0)
    np.testing.assert_array_equal(labels, glob.predict(X))


def test_warm_start_option(rng):
    data, sim, X, _ = cluster_setup(rng)
    mem = MemorySet.uniform([0, 1, 2], 0.5)
    cold = train_memory_classifier(data, sim, mem, "logistic", {"epochs": 0}, clf_feats=X)
    warm = train_memory_classifier(data, sim, mem, "logistic", {"epochs": 0, "warm_start": True}, clf_feats=X)
    assert np.all(cold.cluster_classifiers[0].weights == 0)
    assert np.all(warm.cluster_classifiers[0].weights == 0)  # zero epochs all the way down
    warm = train_memory_classifier(data, sim, mem, "logistic", {"epochs": 20, "warm_start": True}, clf_feats=X)
    glob = train_logistic(X, data.labels, epochs=20, n_classes=2)
    assert not np.array_equal(warm.cluster_classifiers[0].weights, glob.weights)
