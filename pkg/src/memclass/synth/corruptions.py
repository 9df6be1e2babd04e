"""Seeded common corruptions at five severity levels.

Every corruption works on a float copy scaled to [0, 1], clips to [0, 1]
and re-quantizes to 8 bits.
"""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..core import Image
from ..features.hsv import hsv_to_rgb_image, rgb_to_hsv_image
from .rng import image_seed, key_of, stream

SEVERITY_PARAMS = {
    "gaussian_noise": (0.08, 0.12, 0.18, 0.26, 0.38),  # noise std
    "shot_noise": (60.0, 25.0, 12.0, 5.0, 3.0),  # Poisson rate
    "impulse_noise": (0.03, 0.06, 0.09, 0.17, 0.27),  # fraction of pixels hit
    "brightness": (0.1, 0.2, 0.3, 0.4, 0.5),  # added to HSV value
    "contrast": (0.4, 0.3, 0.2, 0.1, 0.05),  # scale about the channel mean
    "saturate": (0.3, 0.1, 2.0, 5.0, 20.0),  # HSV saturation factor
    "pixelate": (0.6, 0.5, 0.4, 0.3, 0.25),  # downscale factor
    "gaussian_blur": (1.0, 2.0, 3.0, 4.0, 6.0),  # kernel std in pixels
}
CORRUPTIONS = tuple(SEVERITY_PARAMS)
NOISE_KINDS = ("gaussian_noise", "shot_noise", "impulse_noise")
# parameter value that leaves an image unchanged
IDENTITY_PARAMS = {
    "gaussian_noise": 0.0,
    "shot_noise": np.inf,
    "impulse_noise": 0.0,
    "brightness": 0.0,
    "contrast": 1.0,
    "saturate": 1.0,
    "pixelate": 1.0,
    "gaussian_blur": 0.0,
}


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    severity: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SEVERITY_PARAMS:
            raise ValueError(f"unknown corruption {self.kind!r}; expected one of {CORRUPTIONS}")
        if not 1 <= self.severity <= 5:
            raise ValueError(f"severity must lie in [1, 5], got {self.severity}")


def _gaussian_noise(x, sigma, rng):
    return x + rng.normal(0.0, sigma, size=x.shape) if sigma > 0 else x


def _shot_noise(x, lam, rng):
    if not np.isfinite(lam):
        return x
    return rng.poisson(x * lam) / lam


def _impulse_noise(x, frac, rng):
    if frac <= 0:
        return x
    hit = rng.random(x.shape[:2]) < frac
    salt = rng.random(x.shape[:2]) < 0.5
    out = x.copy()
    out[hit & salt] = 1.0
    out[hit & ~salt] = 0.0
    return out


def _brightness(x, b, rng):
    hsv = rgb_to_hsv_image(np.round(x * 255).astype(np.uint8))
    hsv[..., 2] = np.clip(hsv[..., 2] + b, 0.0, 1.0)
    return hsv_to_rgb_image(hsv)


def _contrast(x, c, rng):
    mean = x.mean(axis=(0, 1), keepdims=True)
    return (x - mean) * c + mean


def _saturate(x, factor, rng):
    hsv = rgb_to_hsv_image(np.round(x * 255).astype(np.uint8))
    hsv[..., 1] = np.clip(hsv[..., 1] * factor, 0.0, 1.0)
    return hsv_to_rgb_image(hsv)


def _pixelate(x, scale, rng):
    h, w = x.shape[:2]
    sh, sw = max(1, int(round(h * scale))), max(1, int(round(w * scale)))
    rb, cb = (np.arange(sh) * h) // sh, (np.arange(sw) * w) // sw
    sums = np.add.reduceat(np.add.reduceat(x, rb, axis=0), cb, axis=1)
    counts = np.outer(np.diff(np.append(rb, h)), np.diff(np.append(cb, w)))
    small = sums / counts[..., None]
    # each source row/col maps back to the block that averaged it
    row_of = np.searchsorted(rb, np.arange(h), side="right") - 1
    col_of = np.searchsorted(cb, np.arange(w), side="right") - 1
    return small[row_of][:, col_of]


def gaussian_kernel(sigma):
    radius = int(np.ceil(3.0 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def _gaussian_blur(x, sigma, rng):
    if sigma <= 0:
        return x
    k = gaussian_kernel(sigma)
    out = ndimage.correlate1d(x, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


_OPS = {
    "gaussian_noise": _gaussian_noise,
    "shot_noise": _shot_noise,
    "impulse_noise": _impulse_noise,
    "brightness": _brightness,
    "contrast": _contrast,
    "saturate": _saturate,
    "pixelate": _pixelate,
    "gaussian_blur": _gaussian_blur,
}


def apply_corruption(img, kind, param, rng=None):
    """Apply ``kind`` with an explicit parameter value (see ``SEVERITY_PARAMS``)."""
    if kind not in _OPS:
        raise ValueError(f"unknown corruption {kind!r}; expected one of {CORRUPTIONS}")
    x = img.pixels.astype(np.float64) / 255.0
    y = _OPS[kind](x, param, rng)
    return Image(np.round(np.clip(y, 0.0, 1.0) * 255.0).astype(np.uint8))


def corrupt(img, spec: CorruptionSpec, params=None):
    """Corrupt ``img`` at ``spec.severity``; output depends only on (img, spec, params)."""
    table = dict(SEVERITY_PARAMS, **(params or {}))
    param = table[spec.kind][spec.severity - 1]
    rng = stream(spec.seed, key_of(spec.kind), spec.severity)
    return apply_corruption(img, spec.kind, param, rng)


def corrupt_dataset(data, kind, severity, seed=0, params=None, threads=None):
    """Corrupt every image of ``data``; image ``i`` uses ``image_seed(seed, i)``."""
    from ..core import LabeledDataset
    from ..features.extractors import map_images

    CorruptionSpec(kind, severity)  # validate once up front

    def one(i):
        return corrupt(data.images[i], CorruptionSpec(kind, severity, image_seed(seed, i)), params)

    return LabeledDataset(map_images(one, range(data.n), threads), data.labels, data.classes)
