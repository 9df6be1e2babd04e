"""Command line interface.

Every subcommand takes ``--config FILE``. For ``learn-memories``, ``train``,
``eval`` and ``run`` the file is an experiment config; for the others it is
a flat JSON object keyed by flag name (``n_train`` or ``n-train``). Flags
given on the command line win over the file.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import io as dio
from .bounds import BoundParams, bound_summary
from .core import MemoryClassifier
from .harness import (
    EvalReport,
    ExperimentConfig,
    ExperimentError,
    baseline_from_dict,
    emit_report,
    evaluate,
    fit,
    load_data,
    run_experiment,
    write_models,
)
from .memsel import SearchParams, learn_memories
from .synth.color import ColorDatasetSpec, generate_color_dataset
from .synth.corruptions import CORRUPTIONS, corrupt_dataset
from .synth.leaf import LeafDatasetSpec, generate_leaf_dataset


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise dio.DatasetIOError(f"{path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise dio.DatasetIOError(f"{path}: invalid JSON ({e})") from e


def _flat(args, defaults):
    """Flag values, falling back to the flat --config object, then ``defaults``."""
    conf = _read_json(args.config) if args.config else {}
    conf = {k.replace("-", "_"): v for k, v in conf.items()}
    unknown = set(conf) - set(defaults)
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    out = {}
    for key, default in defaults.items():
        val = getattr(args, key, None)
        out[key] = val if val is not None else conf.get(key, default)
    return out


def _experiment(args):
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        changes["threads"] = args.threads
    if getattr(args, "model_kind", None) is not None:
        changes["model_kind"] = args.model_kind
    if getattr(args, "similarity", None) is not None and args.similarity != cfg.similarity.get("id"):
        changes["similarity"] = {"id": args.similarity, "params": {}}
    search = cfg.search.to_dict()
    for flag, key in (("zg", "zg"), ("zl", "zl"), ("b_t", "b_t"), ("q", "q")):
        if getattr(args, flag, None) is not None:
            search[key] = getattr(args, flag)
    if getattr(args, "search_seed", None) is not None:
        search["seed"] = args.search_seed
    elif "seed" in changes and not (args.config and "seed" in _read_json(args.config).get("search", {})):
        search["seed"] = changes["seed"]
    changes["search"] = SearchParams.from_dict(search)
    d = cfg.to_dict()
    d.update({k: v for k, v in changes.items() if k != "search"})
    d["search"] = changes["search"].to_dict()
    return ExperimentConfig.from_dict(d)


def _train_split(args, cfg):
    if getattr(args, "data", None):
        return dio.load_dataset(args.data)
    return load_data(cfg)[0]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen_color(args):
    o = _flat(args, {"out": None, "L": 500, "w": 50, "n_train": 1000, "n_test": 100, "seed": 0})
    if not o["out"]:
        raise ValueError("--out is required")
    spec = ColorDatasetSpec(L=o["L"], w=o["w"], n_train=o["n_train"], n_test=o["n_test"], seed=o["seed"])
    train, test = generate_color_dataset(spec)
    dio.save_dataset(train, os.path.join(o["out"], "train"), "train", args.threads)
    dio.save_dataset(test, os.path.join(o["out"], "test"), "test", args.threads)
    print(f"wrote {train.n} train and {test.n} test images to {o['out']}")


def cmd_gen_leaf(args):
    o = _flat(args, {"out": None, "L": 96, "n_train": 60, "n_test": 20, "seed": 0})
    if not o["out"]:
        raise ValueError("--out is required")
    train, test = generate_leaf_dataset(LeafDatasetSpec(L=o["L"], n_train=o["n_train"], n_test=o["n_test"],
                                                        seed=o["seed"]))
    dio.save_dataset(train, os.path.join(o["out"], "train"), "train", args.threads)
    dio.save_dataset(test, os.path.join(o["out"], "test"), "test", args.threads)
    print(f"wrote {train.n} train and {test.n} test leaves to {o['out']}")


def cmd_corrupt(args):
    o = _flat(args, {"input": None, "out": None, "kind": None, "severity": None, "seed": 0})
    missing = [k for k in ("input", "out", "kind", "severity") if o[k] is None]
    if missing:
        raise ValueError(f"missing required options: {', '.join('--' + ('in' if k == 'input' else k) for k in missing)}")
    data = dio.load_dataset(o["input"])
    out = corrupt_dataset(data, o["kind"], int(o["severity"]), int(o["seed"]), threads=args.threads)
    dio.save_dataset(out, o["out"], o["kind"], args.threads)
    print(f"wrote {out.n} images to {o['out']}")


def cmd_learn_memories(args):
    cfg = _experiment(args)
    train = _train_split(args, cfg)
    from .harness import build_similarity

    sim, feats = build_similarity(cfg, train, cfg.threads)
    mem, trace = learn_memories(train, sim, cfg.search, feats=feats)
    doc = {"memories": list(mem.memory_indices), "thresholds": list(mem.thresholds), "trace": trace.to_dict()}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_train(args):
    cfg = _experiment(args)
    if not args.out:
        raise ValueError("--out is required")
    train = _train_split(args, cfg)
    fitted = fit(cfg, train, threads=cfg.threads)
    os.makedirs(args.out, exist_ok=True)
    write_models(fitted, args.out)
    with open(os.path.join(args.out, "trace.json"), "w") as fh:
        fh.write(fitted.trace.to_json() + "\n")
    print(f"memories {list(fitted.memclass.memory_set.memory_indices)}; models written to {args.out}")


def cmd_eval(args):
    cfg = _experiment(args)
    if not (args.model and args.baseline and args.out):
        raise ValueError("--model, --baseline and --out are required")
    mc = MemoryClassifier.from_dict(_read_json(args.model))
    base, _, _ = baseline_from_dict(_read_json(args.baseline))
    test = dio.load_dataset(args.data) if args.data else load_data(cfg)[1]
    corruptions = args.corruptions.split(",") if args.corruptions else list(cfg.corruptions)
    severities = [int(s) for s in args.severities.split(",")] if args.severities else list(cfg.severities)
    cfg = ExperimentConfig.from_dict(dict(cfg.to_dict(), corruptions=corruptions, severities=severities,
                                          search=cfg.search.to_dict()))
    rows = evaluate(mc, base, test, cfg.cells, cfg.seed, cfg.threads, cfg.corruption_params)
    meta = {"model": args.model, "baseline": args.baseline, "seed": cfg.seed, "config_hash": cfg.hash()}
    report = EvalReport(rows, meta)
    emit_report(report, args.out)
    sys.stdout.write(report.to_csv())


def cmd_bound(args):
    o = _flat(args, {"n": None, "q": None, "delta": 0.05, "rho": 1.0, "kappa": 1.0, "rademacher": None,
                     "risk": 0.0, "n_k_plus": None})
    if o["n"] is None or o["q"] is None:
        raise ValueError("--n and --q are required")
    q = int(o["q"])
    rh = o["rademacher"]
    if rh is None:
        rh = ()
    elif isinstance(rh, str):
        rh = [float(v) for v in rh.split(",")]
    elif isinstance(rh, (int, float)):
        rh = [float(rh)]
    if len(rh) == 1 and q > 1:
        rh = list(rh) * q
    nk = o["n_k_plus"]
    if isinstance(nk, str):
        nk = [int(v) for v in nk.split(",")]
    p = BoundParams(n=int(o["n"]), q=q, delta=float(o["delta"]), rho=float(o["rho"]), kappa=float(o["kappa"]),
                    rademacher_H=tuple(rh), empirical_risk=float(o["risk"]), n_k_plus=nk)
    print(json.dumps(bound_summary(p), indent=2))


def cmd_run(args):
    cfg = _experiment(args)
    if args.out:
        cfg = ExperimentConfig.from_dict(dict(cfg.to_dict(), output_dir=args.out, search=cfg.search.to_dict()))
    report = run_experiment(cfg)
    sys.stdout.write(report.to_csv())


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--config", metavar="FILE", help="JSON config (flags override it)")
    p.add_argument("--threads", type=int, help="worker threads (default: $MEMCLASS_THREADS or 1)")


def _search_flags(p):
    p.add_argument("--similarity", choices=("color", "tree", "rbf"), help="similarity id")
    p.add_argument("--zg", type=int, help="global restarts")
    p.add_argument("--zl", type=int, help="local swap proposals per restart")
    p.add_argument("--b-t", dest="b_t", type=float, help="learning threshold in (0, 1)")
    p.add_argument("--q", type=int, help="force this many memories")
    p.add_argument("--search-seed", type=int, help="search seed (default: --seed)")
    p.add_argument("--seed", type=int, help="global seed")


def build_parser():
    ap = argparse.ArgumentParser(prog="memclass", description="Memory classifiers: data, training, evaluation, bounds.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen-color", help="write the synthetic color dataset as PPM + manifest")
    _common(p)
    p.add_argument("--out", metavar="DIR", help="output directory (gets train/ and test/)")
    p.add_argument("--L", type=int, help="image side (default 500)")
    p.add_argument("--w", type=int, help="patch side (default 50)")
    p.add_argument("--n-train", type=int, help="training images per class (default 1000)")
    p.add_argument("--n-test", type=int, help="test images per class (default 100)")
    p.add_argument("--seed", type=int, help="dataset seed (default 0)")
    p.set_defaults(func=cmd_gen_color)

    p = sub.add_parser("gen-leaf", help="write synthetic leaves labeled by damage band")
    _common(p)
    p.add_argument("--out", metavar="DIR", help="output directory (gets train/ and test/)")
    p.add_argument("--L", type=int, help="image side (default 96)")
    p.add_argument("--n-train", type=int, help="training leaves per class (default 60)")
    p.add_argument("--n-test", type=int, help="test leaves per class (default 20)")
    p.add_argument("--seed", type=int, help="dataset seed (default 0)")
    p.set_defaults(func=cmd_gen_leaf)

    p = sub.add_parser("corrupt", help="corrupt every image of a dataset directory")
    _common(p)
    p.add_argument("--in", dest="input", metavar="DIR", help="dataset directory with manifest.json")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--kind", choices=CORRUPTIONS, help="corruption kind")
    p.add_argument("--severity", type=int, choices=range(1, 6), help="severity 1-5")
    p.add_argument("--seed", type=int, help="seed for the per-image streams (default 0)")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("learn-memories", help="run the memory search and print memories + trace as JSON")
    _common(p)
    p.add_argument("--data", metavar="DIR", help="training dataset directory (default: the config's dataset)")
    _search_flags(p)
    p.add_argument("--out", metavar="FILE", help="write the JSON here instead of stdout")
    p.set_defaults(func=cmd_learn_memories)

    p = sub.add_parser("train", help="train the memory classifier and the global baseline")
    _common(p)
    p.add_argument("--data", metavar="DIR", help="training dataset directory (default: the config's dataset)")
    _search_flags(p)
    p.add_argument("--model-kind", choices=("majority", "tree", "logistic"), help="per-cluster model kind")
    p.add_argument("--out", metavar="DIR", help="writes model.json, baseline.json, trace.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate saved models on clean and corrupted test data")
    _common(p)
    p.add_argument("--model", metavar="FILE", help="memory classifier JSON")
    p.add_argument("--baseline", metavar="FILE", help="baseline JSON")
    p.add_argument("--data", metavar="DIR", help="test dataset directory (default: the config's dataset)")
    p.add_argument("--corruptions", help="comma-separated corruption kinds")
    p.add_argument("--severities", help="comma-separated severities")
    p.add_argument("--seed", type=int, help="seed for per-image corruption streams")
    p.add_argument("--out", metavar="FILE", help="report CSV (a .json sidecar is written next to it)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bound", help="evaluate the generalization bound and print JSON")
    _common(p)
    p.add_argument("--n", type=int, help="training set size")
    p.add_argument("--q", type=int, help="number of memories")
    p.add_argument("--delta", type=float, help="confidence parameter in (0, 1/q] (default 0.05)")
    p.add_argument("--rho", type=float, help="constant rho (default 1)")
    p.add_argument("--kappa", type=float, help="constant kappa (default 1)")
    p.add_argument("--rademacher", help="per-memory Rademacher complexity, one value or q comma-separated")
    p.add_argument("--risk", type=float, help="empirical risk (default 0)")
    p.add_argument("--n-k-plus", help="q comma-separated cluster sizes; adds intermediate_rhs")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("run", help="full pipeline: data, memories, training, evaluation, report")
    _common(p)
    p.add_argument("--seed", type=int, help="global seed")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ExperimentError, ValueError, TypeError, KeyError, OSError) as e:
        print(f"memclass {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
