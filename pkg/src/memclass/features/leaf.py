"""Leaf damage features: discolored and brown area relative to green area."""
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..kernels import label_components
from .hsv import rgb_to_hsv_image
from .hull import convex_hull, points_in_hull


@dataclass(frozen=True)
class HsvRange:
    hue: tuple = (0.0, 360.0)  # degrees; lo > hi wraps through 0
    sat: tuple = (0.0, 1.0)
    val: tuple = (0.0, 1.0)

    def __post_init__(self):
        for name in ("sat", "val"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"{name} range must satisfy 0 <= min <= max <= 1, got {(lo, hi)}")
        lo, hi = self.hue
        if not (0.0 <= lo <= 360.0 and 0.0 <= hi <= 360.0):
            raise ValueError(f"hue bounds must lie in [0, 360], got {(lo, hi)}")

    def mask(self, hsv):
        h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
        lo, hi = self.hue
        hue_ok = (h >= lo) & (h <= hi) if lo <= hi else (h >= lo) | (h <= hi)
        return hue_ok & (s >= self.sat[0]) & (s <= self.sat[1]) & (v >= self.val[0]) & (v <= self.val[1])

    def to_dict(self):
        return {"hue": list(self.hue), "sat": list(self.sat), "val": list(self.val)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["hue"]), tuple(d["sat"]), tuple(d["val"]))


@dataclass(frozen=True)
class HsvThresholds:
    green: HsvRange = field(default_factory=lambda: HsvRange((70.0, 160.0), (0.25, 1.0), (0.15, 1.0)))
    brown: HsvRange = field(default_factory=lambda: HsvRange((10.0, 45.0), (0.25, 1.0), (0.15, 0.7)))
    # applied only to hull pixels that are neither green nor brown
    discolored: HsvRange = field(default_factory=lambda: HsvRange((0.0, 360.0), (0.0, 1.0), (0.15, 1.0)))

    def to_dict(self):
        return {k: getattr(self, k).to_dict() for k in ("green", "brown", "discolored")}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: HsvRange.from_dict(v) for k, v in d.items()})


@dataclass(frozen=True)
class LeafMasks:
    green: np.ndarray
    brown: np.ndarray
    discolored: np.ndarray
    hull: np.ndarray


_LAPLACE = np.array([[1.0, -2.0, 1.0], [-2.0, 4.0, -2.0], [1.0, -2.0, 1.0]])
MIN_NOISE_SIGMA = 0.01


def noise_sigma(x):
    """Per-channel Gaussian noise level of a float image in [0, 1].

    The median absolute response to a Laplacian-difference mask (which
    cancels locally planar intensity) scaled to a standard deviation. Using
    the median keeps edges from registering as noise, so clean piecewise
    constant images give 0.
    """
    out = []
    for c in range(x.shape[2]):
        r = ndimage.convolve(x[..., c], _LAPLACE)[1:-1, 1:-1]
        out.append(np.median(np.abs(r)) / (0.6745 * 6.0) if r.size else 0.0)
    return np.array(out)


def denoise(px, weight=0.75, sigma=None):
    """Total-variation denoising with weight ``weight * sigma`` (estimated if not given)."""
    from skimage.restoration import denoise_tv_chambolle

    x = px.astype(np.float64) / 255.0
    if sigma is None:
        sigma = float(noise_sigma(x).mean())
    x = denoise_tv_chambolle(x, weight=weight * sigma, channel_axis=-1)
    return np.clip(np.round(x * 255.0), 0, 255).astype(np.uint8)


def mode_filter(labels, n_labels, size):
    """Replace a label when another one strictly outnumbers it in the window."""
    counts = np.stack([ndimage.uniform_filter((labels == c).astype(np.float64), size=size, mode="nearest")
                       for c in range(n_labels)])
    own = np.take_along_axis(counts, labels[None], 0)[0]
    return np.where(counts.max(0) > own + 1e-9, counts.argmax(0), labels)


def _largest_component(mask):
    labels = label_components(mask.astype(np.int64))
    counts = np.bincount(labels[mask])
    if counts.size == 0:
        return mask
    return labels == np.argmax(counts)


def leaf_masks(img, th=None, median_size=1, hull_from="largest", tv_weight=0.75, mode_size=3):
    th = th or HsvThresholds()
    px = img.pixels
    sigma = float(noise_sigma(px / 255.0).mean()) if tv_weight > 0 else 0.0
    noisy = sigma > MIN_NOISE_SIGMA
    if noisy:
        px = denoise(px, tv_weight, sigma)
    if median_size > 1:
        px = ndimage.median_filter(px, size=(median_size, median_size, 1), mode="nearest")
    hsv = rgb_to_hsv_image(px)
    green = th.green.mask(hsv)
    brown = th.brown.mask(hsv) & ~green
    other = ~green & ~brown & th.discolored.mask(hsv)
    if noisy and mode_size > 1:
        lab = np.zeros(green.shape, dtype=np.int64)
        lab[green], lab[brown], lab[other] = 1, 2, 3
        lab = mode_filter(lab, 4, mode_size)
        green, brown, other = lab == 1, lab == 2, lab == 3
    inside = np.zeros(green.shape, dtype=bool)
    if green.any():
        support = _largest_component(green) if hull_from == "largest" else green
        rows, cols = np.nonzero(support)
        hull = convex_hull(np.stack([rows, cols], axis=1).tolist())
        r0, r1, c0, c1 = rows.min(), rows.max() + 1, cols.min(), cols.max() + 1
        rr, cc = np.indices((r1 - r0, c1 - c0))
        pts = np.stack([rr.ravel() + r0, cc.ravel() + c0], axis=1)
        inside[r0:r1, c0:c1] = points_in_hull(hull, pts).reshape(r1 - r0, c1 - c0)
    return LeafMasks(green & inside, brown & inside, other & inside, inside)


def leaf_features(img, th=None, median_size=1, hull_from="largest", tv_weight=0.75, mode_size=3):
    """``(F_d, F_b)``: discolored and brown hull pixels over green hull pixels.

    When the estimated noise level exceeds ``MIN_NOISE_SIGMA`` the image is
    TV-denoised (``tv_weight`` times the noise level; 0 disables this) and
    the pixel classes are cleaned by a ``mode_size`` majority filter. Clean
    images are classified pixel by pixel. ``median_size > 1`` adds a
    per-channel median filter in either case.

    The hull is built on the largest 4-connected green region
    (``hull_from="all"`` uses every green pixel). Ratios saturate at 1; an
    image with no green pixels gives ``(1, 1)``.
    """
    m = leaf_masks(img, th, median_size, hull_from, tv_weight, mode_size)
    green = int(m.green.sum())
    if green == 0:
        return 1.0, 1.0
    return min(m.discolored.sum() / green, 1.0), min(m.brown.sum() / green, 1.0)
