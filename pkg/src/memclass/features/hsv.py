import colorsys

import numpy as np

from ..kernels import rgb_to_hsv_image


def rgb_to_hsv(pixel):
    """``(r, g, b)`` in [0, 255] -> ``(hue degrees in [0, 360), s, v)``."""
    r, g, b = (int(c) for c in pixel)
    if not all(0 <= c <= 255 for c in (r, g, b)):
        raise ValueError(f"channel values must lie in [0, 255], got {pixel}")
    h, s, v = colorsys.rgb_to_hsv(r / 255.0, g / 255.0, b / 255.0)
    return (h * 360.0) % 360.0, s, v


def hsv_to_rgb_image(hsv):
    """Inverse of :func:`rgb_to_hsv_image`; returns floats in [0, 1]."""
    hsv = np.asarray(hsv, dtype=np.float64)
    h = np.mod(hsv[..., 0], 360.0) / 60.0
    s, v = hsv[..., 1], hsv[..., 2]
    c = v * s
    x = c * (1.0 - np.abs(np.mod(h, 2.0) - 1.0))
    m = v - c
    sector = np.floor(h).astype(np.int64) % 6
    zeros = np.zeros_like(c)
    r = np.choose(sector, [c, x, zeros, zeros, x, c])
    g = np.choose(sector, [x, c, c, x, zeros, zeros])
    b = np.choose(sector, [zeros, zeros, x, c, c, x])
    return np.stack([r + m, g + m, b + m], axis=-1)


__all__ = ["rgb_to_hsv", "rgb_to_hsv_image", "hsv_to_rgb_image"]
