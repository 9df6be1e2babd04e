"""Within-cluster classifiers and the memory-classifier training driver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, MemoryClassifier, MemorySet, OutOfBoundaryClassifier, select_from_scores

LEAF = -1
TIE_EPS = 1e-12  # impurities closer than this count as equal


def _check_schema(expected, got):
    if got is not None and tuple(got) != tuple(expected):
        raise ValueError(f"feature schema mismatch: model expects {tuple(expected)}, got {tuple(got)}")


def _as_matrix(X, d=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if d is not None and X.shape[1] != d:
        raise ValueError(f"expected {d} features, got {X.shape[1]}")
    return X


def majority_label(labels, n_classes):
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=n_classes)
    return int(np.argmax(counts))


# ---------------------------------------------------------------------------
# CART
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Binary tree in flat arrays; ``feature[i] == -1`` marks a leaf.

    Samples with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: int
    schema: tuple
    n_classes: int

    kind = "tree"

    def apply(self, X):
        X = _as_matrix(X, len(self.schema))
        node = np.zeros(len(X), dtype=np.int64)
        for _ in range(self.max_depth + 1):
            f = self.feature[node]
            internal = f != LEAF
            if not internal.any():
                break
            idx = np.flatnonzero(internal)
            go_left = X[idx, f[idx]] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
        return node

    def predict(self, X):
        return self.value[self.apply(X)].astype(np.int64)

    def depth(self):
        def walk(i):
            if self.feature[i] == LEAF:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    @property
    def n_leaves(self):
        return int(np.sum(self.feature == LEAF))

    def to_dict(self):
        nodes = []
        for i in range(len(self.feature)):
            if self.feature[i] == LEAF:
                nodes.append({"class": int(self.value[i])})
            else:
                nodes.append(
                    {
                        "feature": int(self.feature[i]),
                        "threshold": float(self.threshold[i]),
                        "left": int(self.left[i]),
                        "right": int(self.right[i]),
                        "class": int(self.value[i]),
                    }
                )
        return {
            "kind": self.kind,
            "nodes": nodes,
            "max_depth": self.max_depth,
            "schema": list(self.schema),
            "n_classes": self.n_classes,
        }

    @classmethod
    def from_dict(cls, d):
        nodes = d["nodes"]
        return cls(
            feature=np.array([n.get("feature", LEAF) for n in nodes], dtype=np.int64),
            threshold=np.array([n.get("threshold", 0.0) for n in nodes], dtype=np.float64),
            left=np.array([n.get("left", -1) for n in nodes], dtype=np.int64),
            right=np.array([n.get("right", -1) for n in nodes], dtype=np.int64),
            value=np.array([n["class"] for n in nodes], dtype=np.int64),
            max_depth=int(d["max_depth"]),
            schema=tuple(d["schema"]),
            n_classes=int(d["n_classes"]),
        )

    @classmethod
    def leaf(cls, label, schema, n_classes, max_depth=1):
        return cls(
            np.array([LEAF]), np.zeros(1), np.array([-1]), np.array([-1]), np.array([int(label)]),
            max_depth, tuple(schema), n_classes,
        )


def gini_split_scores(x, y, n_classes):
    """All midpoint splits of one feature with their weighted Gini impurity.

    Returns ``(thresholds, impurities)`` ordered by ascending threshold; the
    impurity is the size-weighted mean Gini of the two children.
    """
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    m = len(xs)
    cuts = np.flatnonzero(xs[:-1] < xs[1:])
    if cuts.size == 0:
        return np.empty(0), np.empty(0)
    onehot = np.zeros((m, n_classes))
    onehot[np.arange(m), ys] = 1.0
    left = np.cumsum(onehot, axis=0)[cuts]
    right = onehot.sum(axis=0) - left
    nl = (cuts + 1).astype(np.float64)
    nr = m - nl
    gini_l = 1.0 - np.sum((left / nl[:, None]) ** 2, axis=1)
    gini_r = 1.0 - np.sum((right / nr[:, None]) ** 2, axis=1)
    impurity = (nl * gini_l + nr * gini_r) / m
    thr = (xs[cuts] + xs[cuts + 1]) / 2.0
    # a midpoint that rounds up onto the upper value would misroute it
    thr = np.where(thr >= xs[cuts + 1], xs[cuts], thr)
    return thr, impurity


def best_split(X, y, n_classes):
    """Lowest-impurity ``(feature, threshold, impurity)``, or ``None``.

    Ties go to the smaller feature index, then the smaller threshold.
    """
    best = None
    for f in range(X.shape[1]):
        thr, imp = gini_split_scores(X[:, f], y, n_classes)
        if imp.size == 0:
            continue
        j = int(np.flatnonzero(imp <= imp.min() + TIE_EPS)[0])
        if best is None or imp[j] < best[2] - TIE_EPS:
            best = (f, float(thr[j]), float(imp[j]))
    return best


def train_tree(features, labels, max_depth=3, n_classes=None, schema=None, min_samples_split=2):
    """Greedy CART with Gini impurity and midpoint thresholds."""
    X = _as_matrix(features)
    y = np.asarray(labels, dtype=np.int64)
    if len(X) == 0 or len(X) != len(y):
        raise ValueError("need a nonempty feature matrix with one label per row")
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    if schema is None:
        schema = tuple(f"f{i}" for i in range(X.shape[1]))
    elif len(schema) != X.shape[1]:
        raise ValueError(f"schema has {len(schema)} names but features have {X.shape[1]} columns")
    n_classes = int(n_classes if n_classes is not None else y.max() + 1)

    feature, threshold, left, right, value = [], [], [], [], []

    def grow(idx, depth):
        node = len(feature)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        ys = y[idx]
        value.append(majority_label(ys, n_classes))
        if depth >= max_depth or len(idx) < min_samples_split or np.all(ys == ys[0]):
            return node
        split = best_split(X[idx], ys, n_classes)
        if split is None:
            return node
        f, thr, _ = split
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(len(X)), 0)
    return DecisionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.int64),
        int(max_depth),
        tuple(schema),
        n_classes,
    )


# ---------------------------------------------------------------------------
# multinomial logistic regression
# ---------------------------------------------------------------------------


def _with_bias(X):
    return np.hstack([X, np.ones((len(X), 1))])


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logistic_loss_and_grad(W, X, y, sample_weight=None):
    """Weighted mean softmax cross-entropy and its gradient w.r.t. ``W``.

    ``W`` is ``C x (d + 1)`` with the bias in the last column.
    """
    Xb = _with_bias(X)
    n, C = len(X), W.shape[0]
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    w = w / w.sum()
    P = softmax(Xb @ W.T)
    logp = np.log(np.clip(P[np.arange(n), y], 1e-300, None))
    loss = -float(np.sum(w * logp))
    Y = np.zeros((n, C))
    Y[np.arange(n), y] = 1.0
    grad = ((P - Y) * w[:, None]).T @ Xb
    return loss, grad


@dataclass(frozen=True, eq=False)
class LogisticModel:
    weights: np.ndarray  # C x (d + 1)
    schema: tuple

    kind = "logistic"

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[1] != len(self.schema) + 1:
            raise ValueError("weights must be C x (d + 1)")
        if not np.all(np.isfinite(W)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", W)

    @property
    def n_classes(self):
        return self.weights.shape[0]

    def predict_proba(self, X):
        return softmax(_with_bias(_as_matrix(X, len(self.schema))) @ self.weights.T)

    def predict(self, X):
        logits = _with_bias(_as_matrix(X, len(self.schema))) @ self.weights.T
        return np.argmax(logits, axis=1).astype(np.int64)

    def to_dict(self):
        return {"kind": self.kind, "weights": self.weights.tolist(), "schema": list(self.schema)}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["weights"], dtype=np.float64), tuple(d["schema"]))


def balanced_weights(y, n_classes):
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    return len(y) / (n_classes * counts[y])


def train_logistic(features, labels, epochs=500, lr=0.5, n_classes=None, schema=None,
                   class_weight=None, init=None, history=None):
    """Full-batch gradient descent on softmax cross-entropy from zero weights.

    ``class_weight="balanced"`` applies inverse-frequency sample weights.
    ``init`` warm-starts from another model's weights. If ``history`` is a
    list, the loss before every update is appended to it.
    """
    X = _as_matrix(features)
    y = np.asarray(labels, dtype=np.int64)
    if len(X) == 0 or len(X) != len(y):
        raise ValueError("need a nonempty feature matrix with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    if lr <= 0:
        raise ValueError("lr must be positive")
    C = int(n_classes if n_classes is not None else y.max() + 1)
    schema = tuple(schema) if schema is not None else tuple(f"f{i}" for i in range(X.shape[1]))
    W = np.zeros((C, X.shape[1] + 1)) if init is None else np.array(init.weights, dtype=np.float64)
    sw = balanced_weights(y, C) if class_weight == "balanced" else None
    for _ in range(int(epochs)):
        loss, grad = logistic_loss_and_grad(W, X, y, sw)
        if history is not None:
            history.append(loss)
        W = W - lr * grad
    return LogisticModel(W, schema)


# ---------------------------------------------------------------------------
# majority
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MajorityModel:
    label: int
    schema: tuple = ()

    kind = "majority"

    def predict(self, X):
        return np.full(len(X), self.label, dtype=np.int64)

    def to_dict(self):
        return {"kind": self.kind, "class": self.label, "schema": list(self.schema)}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["class"]), tuple(d.get("schema", ())))


def train_majority(labels, n_classes, schema=()):
    return MajorityModel(majority_label(labels, n_classes), tuple(schema))


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

MODEL_KINDS = ("majority", "tree", "logistic")


def predict(model, x, schema=None):
    """Predict one label for a single feature vector (schema-checked)."""
    if hasattr(x, "schema"):
        schema, x = x.schema, x.as_array()
    if getattr(model, "schema", ()):
        _check_schema(model.schema, schema)
    return int(model.predict(np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])


def train_model(kind, X, y, n_classes, schema, hyperparams=None, init=None):
    hp = dict(hyperparams or {})
    if kind == "majority":
        return train_majority(y, n_classes, schema)
    if kind == "tree":
        return train_tree(X, y, max_depth=hp.get("max_depth", 3), n_classes=n_classes, schema=schema,
                          min_samples_split=hp.get("min_samples_split", 2))
    if kind == "logistic":
        return train_logistic(X, y, epochs=hp.get("epochs", 500), lr=hp.get("lr", 0.5), n_classes=n_classes,
                              schema=schema, class_weight=hp.get("class_weight"), init=init)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def model_from_dict(d):
    kind = d.get("kind")
    if kind == "tree":
        return DecisionTree.from_dict(d)
    if kind == "logistic":
        return LogisticModel.from_dict(d)
    if kind == "majority":
        return MajorityModel.from_dict(d)
    if kind == "unknown":
        return OutOfBoundaryClassifier(d["label"])
    raise ValueError(f"unknown model kind {kind!r}")


@dataclass(frozen=True)
class TrainedCluster:
    memory_index: int
    members: tuple
    classifier: object
    train_accuracy: float  # nan for an empty cluster


def train_memory_classifier(data, sim, mem: MemorySet, model_kind="majority", hyperparams=None,
                            features=None, sim_feats=None, clf_feats=None, threads=None):
    """Train one classifier per memory on the points routed to it.

    Points routed out-of-boundary train nothing. Empty clusters get the
    global majority class. ``sim_feats`` / ``clf_feats`` may carry
    precomputed embeddings of ``data`` to skip feature extraction.
    ``hyperparams["warm_start"]`` initializes per-cluster logistic models
    from a model fit on the whole training set.
    """
    mem.check_against(data.n)
    hp = dict(hyperparams or {})
    if features is None:
        if clf_feats is None:
            raise ConfigurationError("need a feature extractor or precomputed classifier features")
        from .features.extractors import IndexExtractor

        features = IndexExtractor([f"f{i}" for i in range(np.asarray(clf_feats).shape[1])])
    if sim_feats is None:
        sim_feats = sim.embed_dataset(data, threads=threads)
    if clf_feats is None:
        clf_feats = features.transform_many(data.images, threads=threads)
    sim_feats = np.asarray(sim_feats, dtype=np.float64)
    clf_feats = np.asarray(clf_feats, dtype=np.float64)
    mem_feats = sim_feats[list(mem.memory_indices)]
    selected, _ = select_from_scores(sim.score_matrix(mem_feats, sim_feats), mem.thresholds)

    n_classes = len(data.classes)
    y = np.asarray(data.labels)
    schema = tuple(features.schema)
    fallback = train_majority(y, n_classes, schema)
    init = None
    if hp.get("warm_start") and model_kind == "logistic":
        init = train_model("logistic", clf_feats, y, n_classes, schema, hp)

    classifiers, clusters = [], []
    for k, m in enumerate(mem.memory_indices):
        members = np.flatnonzero(selected == k)
        if members.size == 0:
            clf, acc = fallback, float("nan")
        else:
            clf = train_model(model_kind, clf_feats[members], y[members], n_classes, schema, hp, init)
            acc = float(np.mean(clf.predict(clf_feats[members]) == y[members]))
        classifiers.append(clf)
        clusters.append(TrainedCluster(int(m), tuple(int(i) for i in members), clf, acc))

    return MemoryClassifier(
        memory_set=mem,
        memory_features=mem_feats,
        cluster_classifiers=tuple(classifiers),
        similarity=sim,
        features=features,
        classes=data.classes,
        clusters=tuple(clusters),
    )
