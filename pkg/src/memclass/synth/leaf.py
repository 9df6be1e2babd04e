"""Synthetic leaves with exactly known brown / discolored pixel counts."""
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from ..core import Image, LabeledDataset
from .rng import key_of, stream

LEAF_GREEN = (40, 160, 40)
LEAF_BROWN = (150, 75, 0)  # #964B00
LEAF_DISCOLORED = (225, 215, 150)
SOIL = (20, 20, 20)

SEVERITY_BANDS = ((0.0, 0.05), (0.05, 0.15), (0.15, 0.3), (0.3, 0.5), (0.5, 0.8))


class InfeasibleLeafError(ValueError):
    pass


def ellipse_mask(L, axes, center=None):
    a, b = axes
    cy, cx = center if center is not None else ((L - 1) / 2.0, (L - 1) / 2.0)
    rr, cc = np.indices((L, L))
    return ((rr - cy) / a) ** 2 + ((cc - cx) / b) ** 2 <= 1.0


def _paint_spots(mask_free, count, rng, radius_range):
    """Claim ``count`` pixels of ``mask_free`` as a union of random discs.

    The last disc is truncated to its pixels nearest the center so the
    total is exact. Returns the claimed mask.
    """
    claimed = np.zeros_like(mask_free)
    free = mask_free.copy()
    L = free.shape[0]
    remaining = count
    while remaining > 0:
        candidates = np.flatnonzero(free)
        if candidates.size == 0:
            raise InfeasibleLeafError("ran out of interior pixels while painting spots")
        r0, c0 = divmod(int(candidates[rng.integers(candidates.size)]), L)
        radius = rng.uniform(*radius_range)
        rad = int(np.ceil(radius))
        lo_r, hi_r = max(r0 - rad, 0), min(r0 + rad + 1, L)
        lo_c, hi_c = max(c0 - rad, 0), min(c0 + rad + 1, L)
        rr, cc = np.indices((hi_r - lo_r, hi_c - lo_c))
        d2 = (rr + lo_r - r0) ** 2 + (cc + lo_c - c0) ** 2
        window = free[lo_r:hi_r, lo_c:hi_c] & (d2 <= radius * radius)
        idx = np.flatnonzero(window)
        idx = idx[np.argsort(d2.ravel()[idx], kind="stable")][:remaining]
        wr, wc = np.unravel_index(idx, window.shape)
        claimed[wr + lo_r, wc + lo_c] = True
        free[wr + lo_r, wc + lo_c] = False
        remaining -= idx.size
    return claimed


def generate_synthetic_leaf(L=128, leaf_axes=None, brown_fraction=0.0, discolored_fraction=0.0, seed=0,
                            margin=3, spot_radius=(3.0, 8.0)):
    """Render a green ellipse on soil and recolor interior spots.

    ``brown_fraction`` and ``discolored_fraction`` are the requested ratios
    to the remaining green area. Returns the image and the exact achieved
    ``(F_d, F_b)`` computed from the painted pixel counts.
    """
    if brown_fraction < 0 or discolored_fraction < 0 or brown_fraction + discolored_fraction > 1:
        raise ValueError("fractions must be non-negative with brown + discolored <= 1")
    leaf_axes = leaf_axes or (0.4 * L, 0.28 * L)
    rng = stream(seed, key_of("leaf"))
    leaf = ellipse_mask(L, leaf_axes)
    total = int(leaf.sum())
    interior = ndimage.binary_erosion(leaf, iterations=margin) if margin > 0 else leaf.copy()
    green_target = int(round(total / (1.0 + brown_fraction + discolored_fraction)))
    n_brown = int(round(brown_fraction * green_target))
    n_disc = int(round(discolored_fraction * green_target))
    if total == 0 or n_brown + n_disc > int(interior.sum()) or total - n_brown - n_disc < 1:
        raise InfeasibleLeafError(
            f"cannot fit {n_brown} brown + {n_disc} discolored pixels in a leaf of {total} pixels"
        )
    brown = _paint_spots(interior, n_brown, rng, spot_radius)
    disc = _paint_spots(interior & ~brown, n_disc, rng, spot_radius)
    px = np.empty((L, L, 3), dtype=np.uint8)
    px[...] = SOIL
    px[leaf] = LEAF_GREEN
    px[brown] = LEAF_BROWN
    px[disc] = LEAF_DISCOLORED
    green = total - n_brown - n_disc
    truth = (min(n_disc / green, 1.0), min(n_brown / green, 1.0))
    return Image(px), truth


@dataclass(frozen=True)
class LeafDatasetSpec:
    L: int = 96
    n_train: int = 60  # per severity class
    n_test: int = 20
    seed: int = 0

    classes = tuple(f"severity_{i}" for i in range(len(SEVERITY_BANDS)))

    def to_dict(self):
        return {"L": self.L, "n_train": self.n_train, "n_test": self.n_test, "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class LeafImages(Sequence):
    """Lazily rendered leaves from stored ``(fb, fd, seed)`` recipes."""

    def __init__(self, L, recipes):
        self.L = L
        self.recipes = list(recipes)

    def __len__(self):
        return len(self.recipes)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        fb, fd, seed = self.recipes[i]
        return generate_synthetic_leaf(self.L, brown_fraction=fb, discolored_fraction=fd, seed=seed)[0]


def _leaf_split(spec, name, per_class):
    recipes, labels = [], []
    index = 0
    for label, (lo, hi) in enumerate(SEVERITY_BANDS):
        for _ in range(per_class):
            rng = stream(spec.seed, key_of("leaf-" + name), index)
            damage = rng.uniform(lo, hi)
            share = rng.uniform()
            recipes.append((damage * share, damage * (1 - share), int(rng.integers(2**63))))
            labels.append(label)
            index += 1
    return LabeledDataset(LeafImages(spec.L, recipes), labels, LeafDatasetSpec.classes)


def generate_leaf_dataset(spec: LeafDatasetSpec):
    """Leaves labeled by damage band (brown + discolored ratio), 5 classes."""
    return _leaf_split(spec, "train", spec.n_train), _leaf_split(spec, "test", spec.n_test)
