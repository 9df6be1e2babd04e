"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public names (``label_components``, ``rgb_to_hsv_image``,
``local_search``) dispatch on :data:`memclass._backend.USE_NUMBA`. Both paths
are kept importable under ``*_numba`` / ``*_numpy`` so tests and the
benchmark can compare them directly.
"""
import numpy as np
from scipy import ndimage

from ._backend import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# connected components over an integer code grid (4-connectivity)
# ---------------------------------------------------------------------------


@njit
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    # smaller root wins so that the surviving root is the earliest pixel
    if ra < rb:
        parent[rb] = ra
    else:
        parent[ra] = rb


@njit
def label_components_numba(codes):
    h, w = codes.shape
    n = h * w
    parent = np.empty(n, dtype=np.int64)
    for r in range(h):
        for c in range(w):
            i = r * w + c
            v = codes[r, c]
            left = c > 0 and codes[r, c - 1] == v
            up = r > 0 and codes[r - 1, c] == v
            if left:
                # i is still a singleton, so hang it under its left neighbor
                parent[i] = _find(parent, i - 1)
                if up:
                    _union(parent, i, i - w)
            elif up:
                parent[i] = _find(parent, i - w)
            else:
                parent[i] = i
    # parent[i] <= i always, so labels resolve in one raster pass
    flat = np.empty(n, dtype=np.int64)
    nxt = 0
    for i in range(n):
        p = parent[i]
        if p == i:
            flat[i] = nxt
            nxt += 1
        else:
            flat[i] = flat[p]
    return flat.reshape((h, w))


def label_components_numpy(codes):
    codes = np.asarray(codes)
    labels = np.zeros(codes.shape, dtype=np.int64)
    offset = 0
    structure = ndimage.generate_binary_structure(2, 1)
    for value in np.unique(codes):
        lab, count = ndimage.label(codes == value, structure=structure)
        mask = lab > 0
        labels[mask] = lab[mask] + offset
        offset += count
    # renumber by first raster occurrence, matching the numba kernel
    flat = labels.ravel()
    _, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse].reshape(codes.shape)


def label_components(codes):
    """Label 4-connected regions of equal value in a 2-D integer grid.

    Components are numbered ``0..K-1`` in order of their first pixel in
    row-major order, so both backends give identical output.
    """
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    if codes.size == 0:
        return np.zeros(codes.shape, dtype=np.int64)
    if USE_NUMBA:
        return label_components_numba(codes)
    return label_components_numpy(codes)


@njit
def quantize_codes_numba(pixels, step, levels):
    lut = np.empty(256, dtype=np.int64)
    for v in range(256):
        lut[v] = v // step
    h, w, _ = pixels.shape
    out = np.empty((h, w), dtype=np.int64)
    for i in range(h):
        for j in range(w):
            out[i, j] = (lut[pixels[i, j, 0]] * levels + lut[pixels[i, j, 1]]) * levels + lut[pixels[i, j, 2]]
    return out


def quantize_codes_numpy(pixels, step, levels):
    q = pixels.astype(np.int64) // step
    return (q[..., 0] * levels + q[..., 1]) * levels + q[..., 2]


def quantize_codes(pixels, step):
    """One integer code per pixel from channel values floor-divided by ``step``."""
    levels = -(-256 // step)
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    if USE_NUMBA:
        return quantize_codes_numba(pixels, step, levels)
    return quantize_codes_numpy(pixels, step, levels)


@njit
def region_stats_numba(labels, pixels, k):
    sizes = np.zeros(k, dtype=np.int64)
    sums = np.zeros((k, 3), dtype=np.int64)
    h, w = labels.shape
    for i in range(h):
        for j in range(w):
            lab = labels[i, j]
            sizes[lab] += 1
            for ch in range(3):
                sums[lab, ch] += pixels[i, j, ch]
    return sizes, sums


def region_stats_numpy(labels, pixels, k):
    flat = labels.ravel()
    px = pixels.reshape(-1, 3)
    sizes = np.bincount(flat, minlength=k)
    sums = np.stack([np.bincount(flat, weights=px[:, ch], minlength=k) for ch in range(3)], axis=1)
    return sizes, np.round(sums).astype(np.int64)


def region_stats(labels, pixels):
    """Pixel count and integer channel sums of every labeled region."""
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1 if labels.size else 0
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    if USE_NUMBA:
        return region_stats_numba(labels, pixels, k)
    return region_stats_numpy(labels, pixels, k)


# ---------------------------------------------------------------------------
# RGB -> HSV over a whole image
# ---------------------------------------------------------------------------


@njit
def rgb_to_hsv_image_numba(rgb):
    h, w, _ = rgb.shape
    out = np.empty((h, w, 3), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            r = rgb[i, j, 0] / 255.0
            g = rgb[i, j, 1] / 255.0
            b = rgb[i, j, 2] / 255.0
            mx = max(r, g, b)
            mn = min(r, g, b)
            c = mx - mn
            if c == 0.0:
                hue = 0.0
            elif mx == r:
                hue = 60.0 * (((g - b) / c) % 6.0)
            elif mx == g:
                hue = 60.0 * ((b - r) / c + 2.0)
            else:
                hue = 60.0 * ((r - g) / c + 4.0)
            if hue >= 360.0:
                hue -= 360.0
            out[i, j, 0] = hue
            out[i, j, 1] = c / mx if mx > 0.0 else 0.0
            out[i, j, 2] = mx
    return out


def rgb_to_hsv_image_numpy(rgb):
    x = np.asarray(rgb, dtype=np.float64) / 255.0
    r, g, b = x[..., 0], x[..., 1], x[..., 2]
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    c = mx - mn
    safe = np.where(c == 0.0, 1.0, c)
    hue = np.where(
        mx == r,
        60.0 * np.mod((g - b) / safe, 6.0),
        np.where(mx == g, 60.0 * ((b - r) / safe + 2.0), 60.0 * ((r - g) / safe + 4.0)),
    )
    hue = np.where(c == 0.0, 0.0, hue)
    hue = np.where(hue >= 360.0, hue - 360.0, hue)
    sat = np.where(mx > 0.0, c / np.where(mx > 0.0, mx, 1.0), 0.0)
    return np.stack([hue, sat, mx], axis=-1)


def rgb_to_hsv_image(rgb):
    """Vectorized hexagonal-cone HSV: hue in degrees [0, 360), s and v in [0, 1]."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    if USE_NUMBA:
        return rgb_to_hsv_image_numba(rgb)
    return rgb_to_hsv_image_numpy(rgb)


# ---------------------------------------------------------------------------
# single-swap local search over a dense similarity matrix
# ---------------------------------------------------------------------------


@njit
def _cover_score(sim, members):
    n = sim.shape[1]
    total = 0.0
    for i in range(n):
        best = sim[members[0], i]
        for k in range(1, members.shape[0]):
            v = sim[members[k], i]
            if v > best:
                best = v
        total += best
    return total


@njit
def local_search_numba(sim, members, nonmembers, positions, picks):
    members = members.copy()
    nonmembers = nonmembers.copy()
    scores = np.empty(positions.shape[0] + 1, dtype=np.float64)
    current = _cover_score(sim, members)
    scores[0] = current
    accepted = 0
    trial = members.copy()
    for step in range(positions.shape[0]):
        k = positions[step]
        r = picks[step]
        trial[:] = members
        trial[k] = nonmembers[r]
        score = _cover_score(sim, trial)
        if score > current:
            nonmembers[r] = members[k]
            members[k] = trial[k]
            current = score
            accepted += 1
        scores[step + 1] = current
    return members, current, accepted, scores


def cover_score_numpy(rows):
    """Sum over points of the max over memory rows, summed left to right."""
    best = np.max(rows, axis=0)
    return float(np.cumsum(best)[-1]) if best.size else 0.0


def local_search_numpy(row, members, nonmembers, positions, picks):
    """Numpy path; ``row(i)`` returns similarity row ``i`` (length n)."""
    members = np.array(members, dtype=np.int64)
    nonmembers = np.array(nonmembers, dtype=np.int64)
    current_rows = np.stack([row(m) for m in members])
    current = cover_score_numpy(current_rows)
    scores = np.empty(len(positions) + 1)
    scores[0] = current
    accepted = 0
    for step, (k, r) in enumerate(zip(positions, picks)):
        cand = nonmembers[r]
        trial_rows = current_rows.copy()
        trial_rows[k] = row(cand)
        score = cover_score_numpy(trial_rows)
        if score > current:
            nonmembers[r] = members[k]
            members[k] = cand
            current_rows = trial_rows
            current = score
            accepted += 1
        scores[step + 1] = current
    return members, current, accepted, scores


def local_search(sim_or_row, members, nonmembers, positions, picks):
    """Greedy single-swap search, accepting strict improvements only.

    ``positions[t]`` picks which member to drop and ``picks[t]`` which
    current non-member replaces it at step ``t``. Returns the final members,
    their score, the number of accepted swaps and the score after each step.
    """
    members = np.asarray(members, dtype=np.int64)
    nonmembers = np.asarray(nonmembers, dtype=np.int64)
    positions = np.asarray(positions, dtype=np.int64)
    picks = np.asarray(picks, dtype=np.int64)
    if isinstance(sim_or_row, np.ndarray):
        if USE_NUMBA:
            m, cur, acc, scores = local_search_numba(
                np.ascontiguousarray(sim_or_row, dtype=np.float64), members, nonmembers, positions, picks
            )
            return m, float(cur), int(acc), scores
        mat = sim_or_row
        return local_search_numpy(lambda i: mat[i], members, nonmembers, positions, picks)
    return local_search_numpy(sim_or_row, members, nonmembers, positions, picks)
