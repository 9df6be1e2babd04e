import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memclass.core import (
    ConfigurationError,
    Image,
    LabeledDataset,
    MemoryClassifier,
    MemorySet,
    SelectionResult,
    classify,
    select_from_scores,
    select_memory,
)
from memclass.features import ColorSimilarity, PixelGridExtractor, RbfSimilarity
from memclass.features.extractors import IndexExtractor
from memclass.learners import MajorityModel, train_logistic
from memclass.synth import render_color_image

RED, GREEN, BLUE = (255, 0, 0), (0, 255, 0), (0, 0, 255)


def patch(alpha, x=20.0, y=20.0, L=40, w=6):
    return render_color_image(alpha, x, y, L, w)


@pytest.fixture
def color_data():
    imgs = [patch(RED), patch(GREEN, 10, 12), patch(GREEN, 30, 25), patch(BLUE), patch(RED, 8, 30)]
    return LabeledDataset(imgs, [0, 1, 1, 2, 0], ("red", "green", "blue"))


# -- types ------------------------------------------------------------------


def test_image_rejects_bad_shape_and_range():
    with pytest.raises(ValueError):
        Image(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        Image(np.full((2, 2, 3), 256))
    img = Image(np.full((2, 3, 3), 7))
    assert (img.height, img.width) == (2, 3)
    assert img.pixels.dtype == np.uint8
    assert not img.pixels.flags.writeable


def test_dataset_label_checks():
    imgs = [Image.blank(2, 2)] * 3
    with pytest.raises(ValueError):
        LabeledDataset(imgs, [0, 1, 2], ("a", "b"))
    with pytest.raises(ValueError):
        LabeledDataset(imgs, [0, 1], ("a", "b"))
    d = LabeledDataset(imgs, [0, 1, 1], ("a", "b"))
    assert d.n == 3 and d.unknown_label == 2
    assert d.subset([2, 0]).labels.tolist() == [1, 0]


def test_memory_set_invariants():
    with pytest.raises(ValueError):
        MemorySet((1, 1), (0.5, 0.5))
    with pytest.raises(ValueError):
        MemorySet((1, 2), (0.5,))
    with pytest.raises(ValueError):
        MemorySet((1,), (1.5,))
    mem = MemorySet.uniform([3, 1], 0.25)
    assert mem.q == 2 and mem.thresholds == (0.25, 0.25)
    with pytest.raises(ConfigurationError):
        mem.check_against(3)
    with pytest.raises(ConfigurationError):
        MemorySet((), ()).check_against(5)


# -- selection ----------------------------------------------------------------


def test_select_identical_to_second_memory(color_data):
    sim = ColorSimilarity()
    mem = MemorySet.uniform([0, 1, 3], 0.5)
    res = select_memory(color_data.images[2], mem, color_data, sim)
    assert res == SelectionResult(1, 1.0, 3)


def test_select_all_zero_scores_is_out_of_boundary(color_data):
    sim = ColorSimilarity()
    mem = MemorySet.uniform([0, 1], 0.5)
    res = select_memory(color_data.images[3], mem, color_data, sim)
    assert res.selected == 2 and res.out_of_boundary and res.score == 0.0


def test_select_tie_goes_to_smaller_position(color_data):
    sim = ColorSimilarity()
    mem = MemorySet.uniform([4, 1, 0], 0.5)  # positions 0 and 2 are both red
    res = select_memory(patch(RED, 33, 33), mem, color_data, sim)
    assert res.selected == 0


def test_select_empty_memory_set(color_data):
    with pytest.raises(ConfigurationError):
        select_memory(color_data.images[0], MemorySet((), ()), color_data, ColorSimilarity())
    with pytest.raises(ConfigurationError):
        select_from_scores(np.zeros((0, 4)), [])


@given(st.integers(1, 6), st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_select_from_scores_matches_loop(q, m, seed):
    rng = np.random.default_rng(seed)
    scores = rng.integers(0, 4, size=(q, m)) / 3.0  # coarse values force ties
    thr = rng.integers(0, 4, size=q) / 3.0
    sel, best = select_from_scores(scores, thr)
    for j in range(m):
        k = 0
        for i in range(1, q):
            if scores[i, j] > scores[k, j]:
                k = i
        expected = k if scores[k, j] >= thr[k] else q
        assert sel[j] == expected
        assert best[j] == scores[k, j]


def test_select_is_pure(color_data):
    sim = ColorSimilarity()
    mem = MemorySet.uniform([0, 1, 3], 0.5)
    x = patch(GREEN, 15, 15)
    assert len({select_memory(x, mem, color_data, sim) for _ in range(5)}) == 1


# -- composed classifier ------------------------------------------------------


def rbf_classifier(mem_feats, thresholds, models, d, classes=("a", "b", "c")):
    ext = IndexExtractor([f"f{i}" for i in range(d)])
    return MemoryClassifier(MemorySet(range(len(thresholds)), thresholds), mem_feats, models,
                            RbfSimilarity(ext, 1.0), ext, classes)


def test_oob_routes_to_unknown():
    mc = rbf_classifier(np.zeros((1, 2)), [0.9], [MajorityModel(1)], 2)
    labels, sel = mc.predict_embedded([[5.0, 5.0]], [[5.0, 5.0]])
    assert sel.tolist() == [1] and labels.tolist() == [mc.unknown_label] == [3]
    assert mc.oob_classifier.predict(np.zeros((4, 2))).tolist() == [3] * 4


def test_single_memory_zero_threshold_is_h1(rng):
    X = rng.normal(size=(30, 2))
    y = (X[:, 0] > 0).astype(int)
    h = train_logistic(X, y, epochs=50, n_classes=2)
    mc = rbf_classifier(np.zeros((1, 2)), [0.0], [h], 2, ("a", "b"))
    pts = rng.normal(scale=10, size=(100, 2))
    labels, sel = mc.predict_embedded(pts, pts)
    assert np.all(sel == 0)
    np.testing.assert_array_equal(labels, h.predict(pts))


def test_composition_equals_one_hot_sum(rng):
    for _ in range(20):
        q, d = int(rng.integers(1, 5)), 3
        mem_feats = rng.normal(size=(q, d))
        thr = rng.uniform(0, 0.6, size=q)
        models = [MajorityModel(int(rng.integers(0, 3))) for _ in range(q)]
        mc = rbf_classifier(mem_feats, thr, models, d)
        X = rng.normal(size=(40, d))
        labels, sel = mc.predict_embedded(X, X)
        for x, lab in zip(X, labels):
            scores = np.exp(-((mem_feats - x) ** 2).sum(axis=1))
            s = np.zeros(q + 1)
            k = int(np.argmax(scores))
            s[k if scores[k] >= thr[k] else q] = 1
            outs = [int(m.predict(x[None])[0]) for m in mc.slot_classifiers]
            assert s.sum() == 1
            assert lab == int(sum(sk * ok for sk, ok in zip(s, outs)))


def test_unreachable_thresholds_send_everything_to_unknown(rng):
    mem_feats = rng.normal(size=(3, 2))
    mc = rbf_classifier(mem_feats, [1.0] * 3, [MajorityModel(0)] * 3, 2)
    X = rng.normal(size=(50, 2)) + 0.01
    labels, _ = mc.predict_embedded(X, X)
    assert np.all(labels == mc.unknown_label)


def test_classify_on_images(color_data):
    sim = ColorSimilarity()
    ext = PixelGridExtractor(2)
    mem = MemorySet.uniform([0, 1], 0.5)
    feats = sim.embed_many([color_data.images[i] for i in mem.memory_indices])
    mc = MemoryClassifier(mem, feats, [MajorityModel(0), MajorityModel(1)], sim, ext, color_data.classes)
    assert classify(patch(RED, 12, 12), mc, color_data) == 0
    assert classify(patch(GREEN, 12, 12), mc) == 1
    assert classify(patch(BLUE, 12, 12), mc) == 3


def test_model_json_round_trip(rng):
    X = rng.normal(size=(20, 2))
    h = train_logistic(X, (X[:, 1] > 0).astype(int), epochs=20, n_classes=3)
    mc = rbf_classifier(rng.normal(size=(2, 2)), [0.2, 0.3], [h, MajorityModel(2)], 2)
    doc = json.loads(mc.to_json())
    assert set(doc) == {"version", "similarity", "memories", "thresholds", "classifiers", "classes"}
    back = MemoryClassifier.from_json(mc.to_json())
    assert back.to_json() == mc.to_json()
    Y = rng.normal(size=(30, 2))
    np.testing.assert_array_equal(back.predict_embedded(Y, Y)[0], mc.predict_embedded(Y, Y)[0])


def test_model_version_checked():
    mc = rbf_classifier(np.zeros((1, 1)), [0.0], [MajorityModel(0)], 1)
    doc = mc.to_dict()
    doc["version"] = 99
    with pytest.raises(ConfigurationError):
        MemoryClassifier.from_dict(doc)


def test_classifier_count_must_match_q():
    with pytest.raises(ConfigurationError):
        rbf_classifier(np.zeros((2, 1)), [0.0, 0.0], [MajorityModel(0)], 1)
