"""Color-quantized connected-component segmentation and the color feature."""
from dataclasses import dataclass

import numpy as np

from ..kernels import label_components, quantize_codes, region_stats

RED, GREEN, BLUE = 0, 1, 2
COLOR_NAMES = ("red", "green", "blue")
NO_COLOR = -1


@dataclass(frozen=True, eq=False)
class Segment:
    pixel_coords: np.ndarray  # (size, 2) rows of (row, col)
    mean_color: tuple
    size: int


@dataclass(frozen=True)
class SegmentStats:
    labels: np.ndarray  # per-pixel segment id, ids in first-occurrence order
    order: np.ndarray  # segment ids by descending size
    sizes: np.ndarray
    means: np.ndarray  # (k, 3) mean channel values


def quantize(pixels, step):
    if not 1 <= step <= 128:
        raise ValueError(f"quantization_step must lie in [1, 128], got {step}")
    return quantize_codes(pixels, step)


def segment_stats(img, quantization_step=64) -> SegmentStats:
    pixels = img.pixels
    labels = label_components(quantize(pixels, quantization_step))
    sizes, sums = region_stats(labels, pixels)
    means = sums / sizes[:, None]
    order = np.argsort(-sizes, kind="stable")
    return SegmentStats(labels, order, sizes, means)


def segment_image(img, quantization_step=64):
    """Partition ``img`` into 4-connected regions of equal quantized color.

    Segments come back sorted by descending size; equal sizes keep the order
    of their first pixel in row-major order.
    """
    st = segment_stats(img, quantization_step)
    flat = st.labels.ravel()
    by_label = np.argsort(flat, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(st.sizes)])
    w = img.width
    out = []
    for sid in st.order:
        idx = by_label[bounds[sid]:bounds[sid + 1]]
        coords = np.stack([idx // w, idx % w], axis=1)
        out.append(Segment(coords, tuple(float(v) for v in st.means[sid]), int(st.sizes[sid])))
    return out


def color_feature(img, T=20, quantization_step=64, darkness_floor=32.0):
    """Dominant channel of the brightest of the ``T`` largest segments.

    Segments whose brightest mean channel is below ``darkness_floor`` are
    skipped; if none remain the result is :data:`NO_COLOR`.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    st = segment_stats(img, quantization_step)
    top = st.order[:T]
    peak = st.means[top].max(axis=1)
    eligible = np.flatnonzero(peak >= darkness_floor)
    if eligible.size == 0:
        return NO_COLOR
    best = top[eligible[np.argmax(peak[eligible])]]
    return int(np.argmax(st.means[best]))
