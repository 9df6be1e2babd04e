"""The colored-patch dataset: one w x w patch of color alpha on black."""
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core import Image, LabeledDataset
from .rng import key_of, stream

DEFAULT_ALPHAS = ((255, 0, 0), (0, 255, 0), (0, 0, 255))
DEFAULT_CLASSES = ("red", "green", "blue")


@dataclass(frozen=True)
class ColorDatasetSpec:
    L: int = 500
    w: int = 50
    alphas: tuple = DEFAULT_ALPHAS
    n_train: int = 1000  # per class
    n_test: int = 100  # per class
    seed: int = 0
    classes: tuple = field(default=None)

    def __post_init__(self):
        if not 0 < self.w < self.L:
            raise ValueError(f"need 0 < w < L, got w={self.w}, L={self.L}")
        alphas = tuple(tuple(int(c) for c in a) for a in self.alphas)
        if not alphas or len(set(alphas)) != len(alphas):
            raise ValueError("alphas must be nonempty and distinct")
        if any(not 0 <= c <= 255 for a in alphas for c in a) or any(len(a) != 3 for a in alphas):
            raise ValueError("alphas must be (r, g, b) triples in [0, 255]")
        object.__setattr__(self, "alphas", alphas)
        classes = self.classes
        if classes is None:
            classes = DEFAULT_CLASSES if alphas == DEFAULT_ALPHAS else tuple(f"c{i}" for i in range(len(alphas)))
        object.__setattr__(self, "classes", tuple(classes))

    def to_dict(self):
        return {"L": self.L, "w": self.w, "alphas": [list(a) for a in self.alphas], "n_train": self.n_train,
                "n_test": self.n_test, "seed": self.seed, "classes": list(self.classes)}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "alphas" in d:
            d["alphas"] = tuple(tuple(a) for a in d["alphas"])
        if "classes" in d:
            d["classes"] = tuple(d["classes"])
        return cls(**d)


def sample_patch_center(L, w, rng):
    """``(x, y)`` iid uniform on ``[w/2, L - w/2]``."""
    if not 0 < w <= L:
        raise ValueError(f"need 0 < w <= L, got w={w}, L={L}")
    lo, hi = w / 2.0, L - w / 2.0
    return float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi))


def patch_origin(x, y, w):
    """Top-left pixel of the w x w block covering ``(x - w/2, x + w/2)``."""
    return int(np.ceil(x - w / 2.0)), int(np.ceil(y - w / 2.0))


def render_color_image(alpha, x, y, L, w):
    """Black L x L image with rows/cols ``[ceil(c - w/2), ceil(c - w/2) + w)`` set to ``alpha``."""
    r0, c0 = patch_origin(x, y, w)
    if r0 < 0 or c0 < 0 or r0 + w > L or c0 + w > L:
        raise ValueError(f"patch at ({x}, {y}) does not fit inside a {L}x{L} image")
    px = np.zeros((L, L, 3), dtype=np.uint8)
    px[r0:r0 + w, c0:c0 + w] = alpha
    return Image(px)


class ColorImages(Sequence):
    """Lazily rendered color images; only centers and colors are stored."""

    def __init__(self, L, w, alphas, centers):
        self.L, self.w = L, w
        self.alphas = [tuple(a) for a in alphas]
        self.centers = [tuple(c) for c in centers]

    def __len__(self):
        return len(self.centers)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        x, y = self.centers[i]
        return render_color_image(self.alphas[i], x, y, self.L, self.w)


SPLITS = {"train": key_of("train"), "test": key_of("test")}


def _split(spec, name, per_class):
    alphas, centers, labels = [], [], []
    index = 0
    for label, alpha in enumerate(spec.alphas):
        for _ in range(per_class):
            centers.append(sample_patch_center(spec.L, spec.w, stream(spec.seed, SPLITS[name], index)))
            alphas.append(alpha)
            labels.append(label)
            index += 1
    return LabeledDataset(ColorImages(spec.L, spec.w, alphas, centers), labels, spec.classes)


def generate_color_dataset(spec: ColorDatasetSpec):
    """``(train, test)``, class-major order, centers drawn from per-image streams."""
    return _split(spec, "train", spec.n_train), _split(spec, "test", spec.n_test)
