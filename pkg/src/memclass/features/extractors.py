"""Image -> feature-vector extractors with a JSON round-trip."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .._backend import default_threads
from .leaf import HsvThresholds, leaf_features
from .segment import color_feature


@dataclass(frozen=True)
class FeatureVector:
    values: tuple
    schema: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "schema", tuple(self.schema))
        if len(self.values) != len(self.schema):
            raise ValueError("values and schema lengths differ")

    def as_array(self):
        return np.asarray(self.values, dtype=np.float64)

    def to_dict(self):
        return {"schema": list(self.schema), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["values"], d["schema"])


def map_images(fn, images, threads=None):
    """``[fn(img) for img in images]``, optionally on a thread pool (order kept)."""
    threads = threads or default_threads()
    if threads <= 1:
        return [fn(img) for img in images]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, images))


class Extractor:
    id = "base"
    schema: tuple = ()

    def transform(self, img) -> np.ndarray:
        raise NotImplementedError

    def transform_many(self, images, threads=None) -> np.ndarray:
        rows = map_images(self.transform, images, threads)
        return np.asarray(rows, dtype=np.float64).reshape(len(rows), len(self.schema))

    def vector(self, img) -> FeatureVector:
        return FeatureVector(self.transform(img), self.schema)

    def params(self) -> dict:
        return {}

    def to_dict(self):
        return {"id": self.id, "params": self.params()}


class ColorExtractor(Extractor):
    id = "color"
    schema = ("color",)

    def __init__(self, T=20, quantization_step=64, darkness_floor=32.0):
        self.T = int(T)
        self.quantization_step = int(quantization_step)
        self.darkness_floor = float(darkness_floor)

    def transform(self, img):
        return np.array([color_feature(img, self.T, self.quantization_step, self.darkness_floor)], dtype=np.float64)

    def params(self):
        return {"T": self.T, "quantization_step": self.quantization_step, "darkness_floor": self.darkness_floor}


class LeafExtractor(Extractor):
    id = "leaf"
    schema = ("F_d", "F_b")

    def __init__(self, thresholds=None, median_size=1, hull_from="largest", tv_weight=0.75, mode_size=3):
        self.thresholds = thresholds or HsvThresholds()
        self.median_size = int(median_size)
        self.hull_from = hull_from
        self.tv_weight = float(tv_weight)
        self.mode_size = int(mode_size)

    def transform(self, img):
        return np.array(leaf_features(img, self.thresholds, self.median_size, self.hull_from,
                                      self.tv_weight, self.mode_size))

    def params(self):
        return {"thresholds": self.thresholds.to_dict(), "median_size": self.median_size, "hull_from": self.hull_from,
                "tv_weight": self.tv_weight, "mode_size": self.mode_size}


def grid_bounds(length, cells):
    """Start offsets of ``cells`` near-equal blocks covering ``range(length)``."""
    return (np.arange(cells) * length) // cells


class PixelGridExtractor(Extractor):
    """Raw pixels box-averaged onto a ``grid`` x ``grid`` raster, scaled to [0, 1]."""

    id = "pixels"

    def __init__(self, grid=8):
        self.grid = int(grid)
        self.schema = tuple(f"px_{r}_{c}_{ch}" for r in range(self.grid) for c in range(self.grid) for ch in "rgb")

    def transform(self, img):
        px = img.pixels.astype(np.float64)
        h, w = px.shape[:2]
        g = self.grid
        if h < g or w < g:
            raise ValueError(f"image {h}x{w} is smaller than the {g}x{g} grid")
        rb, cb = grid_bounds(h, g), grid_bounds(w, g)
        sums = np.add.reduceat(np.add.reduceat(px, rb, axis=0), cb, axis=1)
        counts = np.outer(np.diff(np.append(rb, h)), np.diff(np.append(cb, w)))
        return (sums / counts[..., None] / 255.0).ravel()

    def params(self):
        return {"grid": self.grid}


class IndexExtractor(Extractor):
    """Features are supplied by the caller (e.g. precomputed vectors)."""

    id = "given"

    def __init__(self, schema):
        self.schema = tuple(schema)

    def transform(self, img):
        raise TypeError("IndexExtractor has no image transform; pass features explicitly")

    def params(self):
        return {"schema": list(self.schema)}


_EXTRACTORS = {
    "color": lambda p: ColorExtractor(**p),
    "leaf": lambda p: LeafExtractor(
        HsvThresholds.from_dict(p["thresholds"]) if "thresholds" in p else None,
        p.get("median_size", 1),
        p.get("hull_from", "largest"),
        p.get("tv_weight", 0.75),
        p.get("mode_size", 3),
    ),
    "pixels": lambda p: PixelGridExtractor(**p),
    "given": lambda p: IndexExtractor(p["schema"]),
}


def extractor_from_dict(d):
    try:
        factory = _EXTRACTORS[d["id"]]
    except KeyError:
        raise ValueError(f"unknown feature extractor {d.get('id')!r}") from None
    return factory(d.get("params", {}))
