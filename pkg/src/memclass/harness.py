"""Experiment configuration, the train/evaluate pipeline and report files.

A run generates or loads data, extracts features, learns memories, trains
the memory classifier next to a global baseline of the same model kind, and
evaluates both on the clean test set and every (corruption, severity) cell.
Both models see the same corrupted images: image ``i`` of every cell is
corrupted with ``image_seed(seed, i)``.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io as _io
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import io as dio
from ._backend import default_threads
from .core import LabeledDataset, MemoryClassifier
from .features.extractors import extractor_from_dict, map_images
from .features.similarity import ColorSimilarity, RbfSimilarity, TreeSimilarity
from .learners import MODEL_KINDS, model_from_dict, train_memory_classifier, train_model, train_tree
from .memsel import SearchParams, learn_memories
from .synth.color import ColorDatasetSpec, generate_color_dataset
from .synth.corruptions import CORRUPTIONS, SEVERITY_PARAMS, CorruptionSpec, corrupt
from .synth.leaf import LeafDatasetSpec, generate_leaf_dataset
from .synth.rng import image_seed

CSV_COLUMNS = ("corruption", "severity", "model", "accuracy", "oob_rate", "n")
MEMCLASS_ID = "memclass"
BASELINE_ID = "global"
DEFAULT_FEATURES = {"id": "pixels", "params": {"grid": 8}}


class ExperimentError(RuntimeError):
    """A pipeline failure tagged with the stage it happened in."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: dict = field(default_factory=lambda: {"kind": "color"})
    similarity: dict = field(default_factory=lambda: {"id": "color", "params": {}})
    search: SearchParams = field(default_factory=SearchParams)
    model_kind: str = "majority"
    hyperparams: dict = field(default_factory=dict)
    features: dict = field(default_factory=lambda: dict(DEFAULT_FEATURES))  # per-cluster and baseline inputs
    corruptions: tuple = ()
    severities: tuple = (1, 2, 3, 4, 5)
    corruption_params: dict = field(default_factory=dict)  # overrides of the severity tables
    output_dir: str | None = None
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "corruptions", tuple(self.corruptions))
        object.__setattr__(self, "severities", tuple(int(s) for s in self.severities))
        kind = self.dataset.get("kind")
        if kind not in ("color", "leaf", "path"):
            raise ValueError(f"dataset kind must be color, leaf or path, got {kind!r}")
        if kind == "path" and not {"train", "test"} <= set(self.dataset):
            raise ValueError("a path dataset needs 'train' and 'test' directories")
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        bad = [c for c in self.corruptions if c not in CORRUPTIONS]
        if bad:
            raise ValueError(f"unknown corruptions {bad}; expected names from {CORRUPTIONS}")
        if any(not 1 <= s <= 5 for s in self.severities):
            raise ValueError("severities must lie in [1, 5]")
        for k, v in self.corruption_params.items():
            if k not in CORRUPTIONS or len(v) != 5:
                raise ValueError(f"corruption_params[{k!r}] must name a corruption and give 5 values")
        if self.threads is not None and self.threads < 1:
            raise ValueError("threads must be at least 1")

    @property
    def cells(self):
        """``(corruption, severity)`` pairs in report order."""
        return [(c, s) for c in sorted(set(self.corruptions)) for s in sorted(set(self.severities))]

    def to_dict(self):
        return {
            "dataset": self.dataset,
            "similarity": self.similarity,
            "search": self.search.to_dict(),
            "model_kind": self.model_kind,
            "hyperparams": self.hyperparams,
            "features": self.features,
            "corruptions": list(self.corruptions),
            "severities": list(self.severities),
            "corruption_params": {k: list(v) for k, v in self.corruption_params.items()},
            "output_dir": self.output_dir,
            "seed": self.seed,
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        seed = int(d.get("seed", 0))
        search = dict(d.get("search", {}))
        search.setdefault("seed", seed)
        out = dict(d, seed=seed, search=SearchParams.from_dict(search))
        return cls(**out)

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except OSError as e:
            raise dio.DatasetIOError(f"{path}: {e.strerror or e}") from e

    def hash(self):
        """Digest of everything that affects results (not outputs or threads)."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("threads")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class EvalRow:
    corruption: str
    severity: int
    model: str
    accuracy: float
    oob_rate: float
    n: int

    def cells(self):
        return [self.corruption, str(self.severity), self.model, f"{self.accuracy:.4f}", f"{self.oob_rate:.4f}",
                str(self.n)]


@dataclass
class EvalReport:
    rows: list
    metadata: dict = field(default_factory=dict)
    trace: object = None

    @property
    def clean_accuracy(self):
        for r in self.rows:
            if r.corruption == "clean" and r.model == MEMCLASS_ID:
                return r.accuracy
        return None

    def lookup(self, corruption, severity, model):
        for r in self.rows:
            if (r.corruption, r.severity, r.model) == (corruption, severity, model):
                return r
        raise KeyError((corruption, severity, model))

    def to_csv(self):
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.cells())
        return buf.getvalue()

    def sidecar(self):
        return {
            "metadata": self.metadata,
            "clean_accuracy": self.clean_accuracy,
            "search_trace": self.trace.to_dict() if self.trace is not None else None,
        }


@dataclass
class FittedModels:
    memclass: MemoryClassifier
    baseline: object
    trace: object
    train: LabeledDataset
    test: LabeledDataset


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ExperimentError:
        raise
    except Exception as e:  # noqa: BLE001 - re-raised with the stage tag
        raise ExperimentError(name, f"{type(e).__name__}: {e}") from e


def align_classes(test, classes):
    """Relabel ``test`` against ``classes`` by name; unseen names get the unknown label."""
    if tuple(test.classes) == tuple(classes):
        return test
    index = {c: i for i, c in enumerate(classes)}
    labels = [index.get(test.classes[k], len(classes)) for k in test.labels]
    out = LabeledDataset.__new__(LabeledDataset)
    out.classes = tuple(classes)
    out.images = test.images
    out.labels = np.asarray(labels, dtype=np.int64)
    out.labels.setflags(write=False)
    return out


def load_data(cfg: ExperimentConfig):
    ds = dict(cfg.dataset)
    kind = ds.pop("kind")
    if kind == "path":
        train = dio.load_dataset(ds["train"])
        test = dio.load_dataset(ds["test"])
        return train, align_classes(test, train.classes)
    ds.setdefault("seed", cfg.seed)
    if kind == "color":
        return generate_color_dataset(ColorDatasetSpec.from_dict(ds))
    return generate_leaf_dataset(LeafDatasetSpec.from_dict(ds))


def build_similarity(cfg: ExperimentConfig, train, threads=None):
    """The similarity plus its embedding of ``train``."""
    sid, p = cfg.similarity.get("id"), dict(cfg.similarity.get("params", {}))
    if sid == "color":
        sim = ColorSimilarity(**p)
        return sim, sim.embed_dataset(train, threads=threads)
    if sid in ("tree", "rbf"):
        ext = extractor_from_dict(p.get("extractor", {"id": "leaf"}))
        feats = ext.transform_many(train.images, threads=threads)
        if sid == "rbf":
            return RbfSimilarity(ext, p.get("gamma", 1.0)), feats
        # the tree defining the equivalence classes is fit on the training labels first
        tree = train_tree(feats, train.labels, max_depth=p.get("max_depth", 3), n_classes=len(train.classes),
                          schema=ext.schema)
        return TreeSimilarity(tree, ext), feats
    raise ValueError(f"similarity id must be color, tree or rbf, got {sid!r}")


def fit(cfg: ExperimentConfig, train, test=None, threads=None) -> FittedModels:
    """Learn memories and train the memory classifier and the global baseline."""
    threads = threads or cfg.threads or default_threads()
    sim, sim_feats = _stage("features", build_similarity, cfg, train, threads)
    features = _stage("features", extractor_from_dict, cfg.features)
    clf_feats = _stage("features", features.transform_many, train.images, threads)
    mem, trace = _stage("memories", learn_memories, train, sim, cfg.search, None, sim_feats)

    def train_both():
        mc = train_memory_classifier(train, sim, mem, cfg.model_kind, cfg.hyperparams, features=features,
                                     sim_feats=sim_feats, clf_feats=clf_feats)
        base = train_model(cfg.model_kind, clf_feats, train.labels, len(train.classes), features.schema,
                           {k: v for k, v in cfg.hyperparams.items() if k != "warm_start"})
        return mc, base

    mc, base = _stage("train", train_both)
    return FittedModels(mc, base, trace, train, test)


def _score(pred, truth, unknown, selected=None, q=None):
    # predicting the unknown label is right only when the truth is unknown too
    acc = float(np.mean(pred == truth)) if len(truth) else 0.0
    if selected is not None:
        oob = float(np.mean(selected == q)) if len(truth) else 0.0
    else:
        oob = float(np.mean(pred == unknown)) if len(truth) else 0.0
    return acc, oob


def evaluate(mc: MemoryClassifier, baseline, test: LabeledDataset, cells, seed=0, threads=None,
             corruption_params=None):
    """Report rows for the clean test set and every ``(corruption, severity)`` cell."""
    schema = tuple(getattr(baseline, "schema", ()) or ())
    if schema and schema != tuple(mc.features.schema):
        raise ValueError(f"baseline schema {schema} does not match classifier features {tuple(mc.features.schema)}")
    if tuple(test.classes) != tuple(mc.classes):
        test = align_classes(test, mc.classes)
    params = {k: tuple(v) for k, v in (corruption_params or {}).items()}
    for kind, values in params.items():
        if kind not in SEVERITY_PARAMS or len(values) != 5:
            raise ValueError(f"corruption_params[{kind!r}] must name a corruption and give 5 values")
    truth = np.asarray(test.labels)
    unknown = len(mc.classes)
    rows = []
    for kind, sev in [("clean", 0)] + list(cells):
        if kind != "clean":
            CorruptionSpec(kind, sev)

        def embed(i, kind=kind, sev=sev):
            img = test.images[i]
            if kind != "clean":
                img = corrupt(img, CorruptionSpec(kind, sev, image_seed(seed, i)), params)
            return mc.similarity.embed(img), mc.features.transform(img)

        pairs = map_images(embed, range(test.n), threads)
        sim_feats = np.asarray([p[0] for p in pairs], dtype=np.float64).reshape(test.n, -1)
        clf_feats = np.asarray([p[1] for p in pairs], dtype=np.float64).reshape(test.n, len(mc.features.schema))
        pred, selected = mc.predict_embedded(sim_feats, clf_feats) if test.n else (np.zeros(0), np.zeros(0))
        acc, oob = _score(pred, truth, unknown, selected, mc.memory_set.q)
        rows.append(EvalRow(kind, sev, MEMCLASS_ID, acc, oob, test.n))
        bpred = baseline.predict(clf_feats) if test.n else np.zeros(0)
        acc, oob = _score(bpred, truth, unknown)
        rows.append(EvalRow(kind, sev, BASELINE_ID, acc, oob, test.n))
    return rows


def baseline_to_dict(baseline, features, classes):
    return {"model": baseline.to_dict(), "features": features.to_dict(), "classes": list(classes)}


def baseline_from_dict(d):
    return model_from_dict(d["model"]), extractor_from_dict(d["features"]), tuple(d["classes"])


def _write_text(path, text):
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise dio.DatasetIOError(f"{path}: {e.strerror or e}") from e


def emit_report(report: EvalReport, path, sidecar=True):
    """Write the CSV table and, next to it, a JSON sidecar (``.json``)."""
    _write_text(path, report.to_csv())
    if sidecar:
        _write_text(os.path.splitext(path)[0] + ".json", json.dumps(report.sidecar(), indent=2, sort_keys=True) + "\n")


def write_models(fitted: FittedModels, out_dir):
    _write_text(os.path.join(out_dir, "model.json"), fitted.memclass.to_json() + "\n")
    doc = baseline_to_dict(fitted.baseline, fitted.memclass.features, fitted.memclass.classes)
    _write_text(os.path.join(out_dir, "baseline.json"), json.dumps(doc, indent=2, sort_keys=True) + "\n")


def run_experiment(cfg: ExperimentConfig, threads=None) -> EvalReport:
    """Full pipeline; writes ``report.csv``, ``report.json``, ``model.json`` and
    ``baseline.json`` into ``cfg.output_dir`` when it is set."""
    threads = threads or cfg.threads or default_threads()
    train, test = _stage("data", load_data, cfg)
    fitted = fit(cfg, train, test, threads)
    rows = _stage("evaluate", evaluate, fitted.memclass, fitted.baseline, test, cfg.cells, cfg.seed, threads,
                  cfg.corruption_params)
    meta = {
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.to_dict(),
        "memories": list(fitted.memclass.memory_set.memory_indices),
        "n_train": train.n,
        "n_test": test.n,
    }
    report = EvalReport(rows, meta, fitted.trace)
    if cfg.output_dir:
        def write():
            os.makedirs(cfg.output_dir, exist_ok=True)
            emit_report(report, os.path.join(cfg.output_dir, "report.csv"))
            write_models(fitted, cfg.output_dir)

        _stage("report", write)
    return report


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
