"""Domain types and two-stage inference for memory classifiers.

Memory indices are 0-based throughout. A selection result of ``q`` (one
past the last memory) means no memory accepted the input and the
out-of-boundary classifier answers with the reserved unknown label, which
is ``len(classes)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

MODEL_FORMAT_VERSION = 1


class ConfigurationError(ValueError):
    """Raised when a model or memory set is not usable as configured."""


@dataclass(frozen=True, eq=False)
class Image:
    """An H x W RGB image with 8-bit channels (row-major ``pixels[row, col]``)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected an H x W x 3 array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("channel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def blank(cls, height, width, color=(0, 0, 0)):
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[...] = color
        return cls(arr)

    def __eq__(self, other):
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


class LabeledDataset:
    """Ordered ``(Image, label)`` pairs plus the class vocabulary.

    ``images`` may be any sequence, including a lazy one that renders on
    access, so large synthetic datasets need not be held in memory.
    """

    def __init__(self, images: Sequence[Image], labels, classes: Sequence[str]):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1 or len(labels) != len(images):
            raise ValueError("labels must be 1-D with one entry per image")
        self.classes = tuple(classes)
        if len(labels) and (labels.min() < 0 or labels.max() >= len(self.classes)):
            raise ValueError("label index out of range for the class vocabulary")
        labels.setflags(write=False)
        self.images = images
        self.labels = labels

    @property
    def n(self) -> int:
        return len(self.labels)

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        return self.images[i], int(self.labels[i])

    @property
    def unknown_label(self) -> int:
        return len(self.classes)

    def subset(self, indices) -> "LabeledDataset":
        indices = [int(i) for i in indices]
        return LabeledDataset([self.images[i] for i in indices], self.labels[indices], self.classes)


@dataclass(frozen=True)
class MemorySet:
    memory_indices: tuple
    thresholds: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.memory_indices)
        thr = tuple(float(b) for b in self.thresholds)
        if len(idx) != len(thr):
            raise ValueError("one threshold per memory is required")
        if len(set(idx)) != len(idx):
            raise ValueError("memory indices must be distinct")
        if any(i < 0 for i in idx):
            raise ValueError("memory indices must be non-negative")
        if any(not 0.0 <= b <= 1.0 for b in thr):
            raise ValueError("thresholds must lie in [0, 1]")
        object.__setattr__(self, "memory_indices", idx)
        object.__setattr__(self, "thresholds", thr)

    @property
    def q(self) -> int:
        return len(self.memory_indices)

    @classmethod
    def uniform(cls, indices, threshold):
        indices = tuple(indices)
        return cls(indices, (threshold,) * len(indices))

    def check_against(self, n):
        if self.q < 1:
            raise ConfigurationError("memory set is empty")
        bad = [i for i in self.memory_indices if i >= n]
        if bad:
            raise ConfigurationError(f"memory indices {bad} out of range for {n} datapoints")


@dataclass(frozen=True)
class SelectionResult:
    """``selected`` is a memory position in ``[0, q]``; ``q`` means out-of-boundary."""

    selected: int
    score: float
    q: int

    @property
    def out_of_boundary(self) -> bool:
        return self.selected == self.q

    def one_hot(self) -> np.ndarray:
        s = np.zeros(self.q + 1, dtype=np.int64)
        s[self.selected] = 1
        return s


def select_from_scores(scores, thresholds):
    """Vectorized selector over a ``(q, m)`` score matrix.

    Returns ``(selected, best_score)`` arrays of length m. The argmax takes
    the smallest memory position among ties; inputs whose winning score is
    below that memory's threshold map to position ``q``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] < 1:
        raise ConfigurationError("memory set is empty")
    thresholds = np.asarray(thresholds, dtype=np.float64)
    winner = np.argmax(scores, axis=0)
    best = scores[winner, np.arange(scores.shape[1])]
    selected = np.where(best >= thresholds[winner], winner, scores.shape[0])
    return selected.astype(np.int64), best


def select_memory(x: Image, mem: MemorySet, data: LabeledDataset, sim) -> SelectionResult:
    """Route ``x`` to its most similar memory, or to the out-of-boundary slot."""
    mem.check_against(data.n)
    mem_feats = sim.embed_many([data.images[i] for i in mem.memory_indices])
    return _select_embedded(sim, mem_feats, mem.thresholds, sim.embed(x))


def _select_embedded(sim, mem_feats, thresholds, x_feat) -> SelectionResult:
    scores = sim.score_matrix(mem_feats, np.asarray(x_feat)[None, :])
    selected, best = select_from_scores(scores, thresholds)
    return SelectionResult(int(selected[0]), float(best[0]), len(thresholds))


class OutOfBoundaryClassifier:
    """Constant classifier answering the reserved unknown label."""

    kind = "unknown"

    def __init__(self, unknown_label: int):
        self.unknown_label = int(unknown_label)

    def predict(self, X):
        return np.full(len(X), self.unknown_label, dtype=np.int64)

    def to_dict(self):
        return {"kind": self.kind, "label": self.unknown_label}


@dataclass(frozen=True, eq=False)
class MemoryClassifier:
    """A trained memory set with one classifier per memory plus the OOB slot.

    ``memory_features`` holds the similarity embedding of every memory so the
    model can route inputs without the training data. ``features`` is the
    extractor feeding the per-cluster classifiers.
    """

    memory_set: MemorySet
    memory_features: np.ndarray
    cluster_classifiers: tuple
    similarity: Any
    features: Any
    classes: tuple
    clusters: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if len(self.cluster_classifiers) != self.memory_set.q:
            raise ConfigurationError("need exactly one classifier per memory")
        feats = np.asarray(self.memory_features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.memory_set.q:
            raise ConfigurationError("memory_features must have one row per memory")
        object.__setattr__(self, "memory_features", feats)
        object.__setattr__(self, "cluster_classifiers", tuple(self.cluster_classifiers))
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def unknown_label(self) -> int:
        return len(self.classes)

    @property
    def oob_classifier(self):
        return OutOfBoundaryClassifier(self.unknown_label)

    @property
    def slot_classifiers(self):
        """All ``q + 1`` classifiers, the OOB one last."""
        return self.cluster_classifiers + (self.oob_classifier,)

    def select_embedded(self, sim_feats):
        scores = self.similarity.score_matrix(self.memory_features, np.atleast_2d(sim_feats))
        return select_from_scores(scores, self.memory_set.thresholds)

    def predict_embedded(self, sim_feats, clf_feats):
        """Predict from precomputed similarity and classifier features."""
        sim_feats = np.atleast_2d(np.asarray(sim_feats, dtype=np.float64))
        clf_feats = np.atleast_2d(np.asarray(clf_feats, dtype=np.float64))
        selected, _ = self.select_embedded(sim_feats)
        out = np.empty(len(selected), dtype=np.int64)
        for k, clf in enumerate(self.slot_classifiers):
            rows = np.flatnonzero(selected == k)
            if rows.size:
                out[rows] = clf.predict(clf_feats[rows])
        return out, selected

    def predict_images(self, images):
        sim_feats = self.similarity.embed_many(images)
        clf_feats = self.features.transform_many(images)
        return self.predict_embedded(sim_feats, clf_feats)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "similarity": self.similarity.to_dict(),
            "memories": [
                {"index": int(i), "features": [float(v) for v in row]}
                for i, row in zip(self.memory_set.memory_indices, self.memory_features)
            ],
            "thresholds": list(self.memory_set.thresholds),
            "classifiers": {
                "features": self.features.to_dict(),
                "models": [clf.to_dict() for clf in self.cluster_classifiers],
            },
            "classes": list(self.classes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "MemoryClassifier":
        from .features.extractors import extractor_from_dict
        from .features.similarity import similarity_from_dict
        from .learners import model_from_dict

        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise ConfigurationError(f"unsupported model version {doc.get('version')!r}")
        memories = doc["memories"]
        mem = MemorySet([m["index"] for m in memories], doc["thresholds"])
        return cls(
            memory_set=mem,
            memory_features=np.array([m["features"] for m in memories], dtype=np.float64).reshape(mem.q, -1),
            cluster_classifiers=tuple(model_from_dict(m) for m in doc["classifiers"]["models"]),
            similarity=similarity_from_dict(doc["similarity"]),
            features=extractor_from_dict(doc["classifiers"]["features"]),
            classes=tuple(doc["classes"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "MemoryClassifier":
        return cls.from_dict(json.loads(text))


def classify(x: Image, mc: MemoryClassifier, data: LabeledDataset | None = None) -> int:
    """Label ``x`` with the classifier of its selected memory.

    ``data`` is accepted for symmetry with :func:`select_memory`; the model
    carries its memories' embeddings and does not need it.
    """
    if data is not None:
        mc.memory_set.check_against(data.n)
    labels, _ = mc.predict_images([x])
    return int(labels[0])
