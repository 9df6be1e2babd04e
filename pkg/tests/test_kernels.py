import os
import subprocess
import sys
import textwrap

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from memclass import kernels as K


def images(seed, h, w, levels):
    rng = np.random.default_rng(seed)
    return (rng.integers(0, levels, size=(h, w, 3)) * (255 // max(levels - 1, 1))).astype(np.uint8)


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1), st.integers(1, 25), st.integers(1, 25), st.integers(1, 4))
def test_labeling_backends_agree(seed, h, w, levels):
    codes = np.random.default_rng(seed).integers(0, levels, size=(h, w))
    a, b = K.label_components_numba(codes), K.label_components_numpy(codes)
    assert np.array_equal(a, b)
    # count per value matches an independent labeling
    expected = sum(ndimage.label(codes == v)[1] for v in np.unique(codes))
    assert a.max() + 1 == expected
    # first raster occurrences are 0, 1, 2, ...
    _, first = np.unique(a.ravel(), return_index=True)
    assert np.all(np.diff(first) > 0)


def test_labeling_spiral():
    codes = np.ones((7, 7), dtype=np.int64)
    codes[1:6, 1] = codes[1, 1:6] = codes[1:6, 5] = codes[5, 3:6] = codes[3, 3:5] = 0
    for lab in (K.label_components_numba(codes), K.label_components_numpy(codes)):
        assert len(np.unique(lab[codes == 0])) == 1


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 16, 64, 100, 255]))
def test_quantize_and_stats_backends_agree(seed, step):
    px = images(seed, 9, 11, 256)
    levels = -(-256 // step)
    a, b = K.quantize_codes_numba(px, step, levels), K.quantize_codes_numpy(px, step, levels)
    assert np.array_equal(a, b)
    lab = K.label_components_numpy(a)
    k = int(lab.max()) + 1
    sa, ta = K.region_stats_numba(lab, px, k)
    sb, tb = K.region_stats_numpy(lab, px, k)
    assert np.array_equal(sa, sb) and np.array_equal(ta, tb)
    assert sa.sum() == px.shape[0] * px.shape[1]
    assert np.array_equal(ta.sum(axis=0), px.reshape(-1, 3).astype(np.int64).sum(axis=0))


def test_hsv_backends_agree():
    # every combination of a coarse channel grid, plus random pixels
    v = np.arange(0, 256, 15, dtype=np.uint8)
    grid = np.stack(np.meshgrid(v, v, v, indexing="ij"), axis=-1).reshape(-1, 1, 3)
    rnd = images(1, 50, 50, 256)
    for px in (grid, rnd):
        np.testing.assert_array_equal(K.rgb_to_hsv_image_numba(px), K.rgb_to_hsv_image_numpy(px))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 20), st.integers(1, 3))
def test_local_search_backends_agree(seed, n, q):
    rng = np.random.default_rng(seed)
    S = rng.integers(0, 4, size=(n, n)) / 3.0
    q = min(q, n - 1)
    perm = rng.permutation(n)
    members, nonmembers = perm[:q], perm[q:]
    positions, picks = rng.integers(0, q, 60), rng.integers(0, n - q, 60)
    a = K.local_search_numba(S, members, nonmembers, positions, picks)
    b = K.local_search_numpy(lambda i: S[i], members, nonmembers, positions, picks)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1] and a[2] == b[2]
    assert np.array_equal(a[3], b[3])


def test_numpy_fallback_selected_by_environment():
    script = textwrap.dedent("""
        import numpy as np
        from memclass import _backend, kernels as K
        print(_backend.USE_NUMBA)
        codes = np.array([[0, 0, 1], [1, 0, 1]])
        print(K.label_components(codes).tolist())
    """)
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, MEMCLASS_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True)
        out[flag] = res.stdout.split("\n")
    assert out["0"][0] == "False" and out["1"][0] == "True"
    assert out["0"][1] == out["1"][1] == "[[0, 0, 1], [2, 0, 1]]"
