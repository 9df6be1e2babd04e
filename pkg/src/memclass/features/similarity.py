"""Similarity functions ``s(x1, x2) in [0, 1]`` induced by expert features.

Every similarity embeds an image into a feature row once (``embed``) and
scores rows pairwise (``score_matrix``), so clustering and selection work
on cached embeddings.
"""
import numpy as np

from .extractors import ColorExtractor, FeatureVector, extractor_from_dict


class Similarity:
    id = "base"
    extractor = None

    def embed(self, img) -> np.ndarray:
        return self.extractor.transform(img)

    def embed_many(self, images, threads=None) -> np.ndarray:
        return self.extractor.transform_many(images, threads=threads)

    def embed_dataset(self, data, threads=None) -> np.ndarray:
        return self.embed_many(data.images, threads=threads)

    def score_matrix(self, A, B) -> np.ndarray:
        """``out[i, j] = s(A[i], B[j])`` for embedded rows."""
        raise NotImplementedError

    def score(self, x1, x2) -> float:
        return float(self.score_matrix(self.embed(x1)[None, :], self.embed(x2)[None, :])[0, 0])

    def params(self) -> dict:
        return {}

    def to_dict(self):
        return {"id": self.id, "params": self.params()}


class ColorSimilarity(Similarity):
    """1 when two images share a dominant patch color, else 0.

    Images without a detectable color match nothing, themselves included,
    so they always fall to the out-of-boundary classifier at a positive
    threshold.
    """

    id = "color"

    def __init__(self, extractor=None, **kwargs):
        self.extractor = extractor or ColorExtractor(**kwargs)

    def score_matrix(self, A, B):
        a = np.asarray(A, dtype=np.float64)[:, 0]
        b = np.asarray(B, dtype=np.float64)[:, 0]
        return ((a[:, None] == b[None, :]) & (a[:, None] >= 0)).astype(np.float64)

    def params(self):
        return {"extractor": self.extractor.to_dict()}


def tree_similarity(x1: FeatureVector, x2: FeatureVector, tree) -> int:
    """1 iff ``tree`` predicts the same class for both feature vectors."""
    for x in (x1, x2):
        if tuple(x.schema) != tuple(tree.schema):
            raise ValueError(f"feature schema {tuple(x.schema)} does not match tree schema {tuple(tree.schema)}")
    pred = tree.predict(np.stack([x1.as_array(), x2.as_array()]))
    return int(pred[0] == pred[1])


class TreeSimilarity(Similarity):
    """Equivalence-class similarity: same predicted class under a tree."""

    id = "tree"

    def __init__(self, tree, extractor=None):
        self.tree = tree
        self.extractor = extractor

    def embed(self, img):
        if self.extractor is None:
            raise TypeError("TreeSimilarity without an extractor scores feature rows only")
        return self.extractor.transform(img)

    def embed_many(self, images, threads=None):
        if self.extractor is None:
            raise TypeError("TreeSimilarity without an extractor scores feature rows only")
        return self.extractor.transform_many(images, threads=threads)

    def score_matrix(self, A, B):
        a = self.tree.predict(np.atleast_2d(A))
        b = self.tree.predict(np.atleast_2d(B))
        return (a[:, None] == b[None, :]).astype(np.float64)

    def params(self):
        return {
            "tree": self.tree.to_dict(),
            "extractor": self.extractor.to_dict() if self.extractor is not None else None,
        }


class RbfSimilarity(Similarity):
    """``exp(-gamma * ||a - b||^2)`` on extracted feature vectors."""

    id = "rbf"

    def __init__(self, extractor, gamma=1.0):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        self.extractor = extractor
        self.gamma = float(gamma)

    def score_matrix(self, A, B):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(B, dtype=np.float64))
        d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
        return np.exp(-self.gamma * d2)

    def params(self):
        return {"extractor": self.extractor.to_dict(), "gamma": self.gamma}


class PrecomputedSimilarity(Similarity):
    """Similarity given as an ``n x n`` matrix over dataset positions.

    The embedding of dataset item ``i`` is simply ``[i]``.
    """

    id = "precomputed"

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("similarity matrix must be square")
        if m.size and (m.min() < 0.0 or m.max() > 1.0):
            raise ValueError("similarity values must lie in [0, 1]")
        self.matrix = m

    def embed(self, img):
        raise TypeError("precomputed similarity has no image embedding")

    def embed_many(self, images, threads=None):
        raise TypeError("precomputed similarity has no image embedding")

    def embed_dataset(self, data, threads=None):
        if data.n != len(self.matrix):
            raise ValueError(f"matrix covers {len(self.matrix)} items, dataset has {data.n}")
        return np.arange(data.n, dtype=np.float64)[:, None]

    def score_matrix(self, A, B):
        a = np.asarray(A)[:, 0].astype(np.int64)
        b = np.asarray(B)[:, 0].astype(np.int64)
        return self.matrix[np.ix_(a, b)]

    def params(self):
        return {"matrix": self.matrix.tolist()}


def similarity_from_dict(d):
    from ..learners import DecisionTree

    sid, p = d.get("id"), d.get("params", {})
    if sid == "color":
        return ColorSimilarity(extractor_from_dict(p["extractor"]) if "extractor" in p else None)
    if sid == "tree":
        ext = extractor_from_dict(p["extractor"]) if p.get("extractor") else None
        return TreeSimilarity(DecisionTree.from_dict(p["tree"]), ext)
    if sid == "rbf":
        return RbfSimilarity(extractor_from_dict(p["extractor"]), p.get("gamma", 1.0))
    if sid == "precomputed":
        return PrecomputedSimilarity(p["matrix"])
    raise ValueError(f"unknown similarity {sid!r}")
