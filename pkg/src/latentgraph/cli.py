"""Command-line interface: generate / train / eval / export-embeddings /
inspect over JSON config files.

Progress goes to stderr; stdout carries only pipeable summary lines.
Exit codes: 0 success, 2 usage/config error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd

from .dataset_io import DatasetFormatError, fmt_float, load_dataset, save_dataset
from .generate import GenConfig, generate_dataset, normalize_dataset
from .graph import FINANCIAL_KINDS, make_splits
from .metrics import MetricError
from .models import GraphTensors, ModelSpec, forward_model
from .training import (CheckpointError, TrainConfig, TrainingDivergedError,
                       evaluate, inductive_eval, load_checkpoint,
                       save_checkpoint, train)

SCHEMA_VERSION = 1
ENV_OUTPUT_ROOT = "LATENTGRAPH_OUT"


class ConfigError(ValueError):
    """Invalid configuration file or override."""


def default_config(kind: str = "financial-1hop") -> dict:
    if kind in FINANCIAL_KINDS:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": kind,
            "generator": {
                "n_vertices_init": 50_000,
                "n_edges_target": 125_000,
                "fraud_ratio": 0.1,
                "seed": 0,
                "mutation_prob": 1.0 / 3.0,
            },
            "model": {"family": "lgcn_plus", "L": 4, "K": 20, "hidden": 20},
            "training": {
                "epochs": 2000,
                "learning_rate": 5e-4,
                "weight_decay": 5e-4,
                "seed": 1,
                "split_ratios": [0.05, 0.05, 0.90],
                "split_seed": 101,
                "class_weight_scheme": "inverse_frequency",
            },
        }
    if kind == "transport":
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": kind,
            "model": {"family": "lgcn_plus", "L": 3, "K": 20, "hidden": 6},
            "training": {
                "epochs": 2000,
                "learning_rate": 1.5e-4,
                "weight_decay": 5e-4,
                "seed": 1,
                "split_ratios": [0.60, 0.20, 0.20],
                "split_seed": 101,
                "class_weight_scheme": "inverse_frequency",
            },
        }
    raise ConfigError(f"unknown dataset kind {kind!r}")


def _merge_onto_defaults(user: dict) -> dict:
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    if user.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {user.get('schema_version')!r}")
    kind = user.get("kind", "financial-1hop")
    cfg = default_config(kind)
    for section, value in user.items():
        if section in ("schema_version", "kind"):
            continue
        if section not in cfg:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(value, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        for key, v in value.items():
            if key not in cfg[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            cfg[section][key] = v
    return cfg


def load_config(path: str | None, overrides=()) -> dict:
    if path is None:
        user = {}
    else:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} line {exc.lineno}: {exc.msg}")
    cfg = _merge_onto_defaults(user)
    for item in overrides or ():
        cfg = apply_override(cfg, item)
    return cfg


def _coerce(old, raw: str):
    if isinstance(old, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"cannot parse boolean from {raw!r}")
    if isinstance(old, int) and not isinstance(old, bool):
        return int(raw)
    if isinstance(old, float):
        return float(raw)
    if isinstance(old, list):
        return json.loads(raw)
    return raw


def apply_override(cfg: dict, item: str) -> dict:
    if "=" not in item:
        raise ConfigError(f"override must look like section.key=value, got {item!r}")
    dotted, raw = item.split("=", 1)
    parts = dotted.split(".")
    cfg = copy.deepcopy(cfg)
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"unknown override path {dotted!r}")
        node = node[p]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(f"unknown override path {dotted!r}")
    try:
        node[leaf] = _coerce(node[leaf], raw)
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"override {dotted}: {exc}")
    return cfg


def _progress(msg: str):
    print(msg, file=sys.stderr, flush=True)


def _out_dir(arg: str | None, default_name: str) -> str:
    if arg:
        return arg
    root = os.environ.get(ENV_OUTPUT_ROOT, ".")
    return os.path.join(root, default_name)


def _gen_config(cfg: dict) -> GenConfig:
    if cfg["kind"] not in FINANCIAL_KINDS:
        raise ConfigError(f"generation supports kinds {FINANCIAL_KINDS}, got {cfg['kind']!r}")
    g = cfg["generator"]
    return GenConfig(n_vertices_init=g["n_vertices_init"],
                     n_edges_target=g["n_edges_target"],
                     fraud_ratio=g["fraud_ratio"],
                     two_hop=cfg["kind"] == "financial-2hop",
                     seed=g["seed"], mutation_prob=g["mutation_prob"])


def _model_spec(cfg: dict, n_features: int) -> ModelSpec:
    m = cfg["model"]
    financial = cfg["kind"] in FINANCIAL_KINDS
    return ModelSpec(family=m["family"], n_features=n_features,
                     n_classes=2 if financial else 3,
                     hidden=m["hidden"], L=m.get("L"), K=m.get("K", 20),
                     graph_kind="financial" if financial else "transport")


def cmd_generate(args) -> int:
    cfg = load_config(args.config, args.override)
    gen = _gen_config(cfg)
    out = _out_dir(args.out, f"dataset-{cfg['kind']}-seed{gen.seed}")
    if os.path.isdir(out) and os.listdir(out) and not args.force:
        raise ConfigError(f"output directory {out} is not empty (use --force)")
    _progress(f"generating {cfg['kind']} dataset (seed {gen.seed}) ...")
    g = generate_dataset(gen)
    if gen.n_edges_target == 0:
        _progress("warning: n_edges_target=0 produced an empty dataset")
    save_dataset(g, out)
    remap = pd.DataFrame({"vertex_id": np.arange(g.n_vertices, dtype=np.int64),
                          "original_id": g.skeleton_orig_ids})
    remap.to_csv(os.path.join(out, "vertex_remap.csv"), index=False)
    counts = np.bincount(g.vertices.labels, minlength=2)
    mules = int(g.vertices.hidden_class.sum()) if g.vertices.hidden_class is not None else 0
    print(f"{cfg['kind']}  |V|={g.n_vertices}  |E|={g.n_edges}  "
          f"total_transactions={g.total_sequence_length()}  "
          f"normal={counts[0]}  fraud={counts[1]}  mules={mules}  seed={gen.seed}")
    _progress(f"dataset written to {out}")
    return 0


def _train_one(cfg: dict, data_dir: str, out_dir: str, seed: int) -> dict:
    raw = load_dataset(data_dir)
    if raw.kind != cfg["kind"]:
        raise ConfigError(f"config kind {cfg['kind']!r} does not match dataset kind {raw.kind!r}")
    g = normalize_dataset(raw) if not raw.normalized else raw
    spec = _model_spec(cfg, g.vertices.n_features)
    t = cfg["training"]
    splits = make_splits(g.n_vertices, tuple(t["split_ratios"]), t["split_seed"])
    tc = TrainConfig(epochs=t["epochs"], learning_rate=t["learning_rate"],
                     weight_decay=t["weight_decay"], seed=seed,
                     class_weight_scheme=t["class_weight_scheme"])
    _progress(f"training {spec.display_name} seed {seed} "
              f"({tc.epochs} epochs, lr {tc.learning_rate}) ...")
    params, adam, report = train(spec, g, splits, tc)
    os.makedirs(out_dir, exist_ok=True)
    extra = {"dataset_kind": cfg["kind"], "split_ratios": t["split_ratios"],
             "split_seed": t["split_seed"], "train_config": tc.to_dict()}
    save_checkpoint(os.path.join(out_dir, "checkpoint.json"), spec, params, adam, extra)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")
    curve = pd.DataFrame({"epoch": np.arange(1, len(report.train_loss) + 1),
                          "train_loss": report.train_loss,
                          "val_loss": report.val_loss})
    curve.to_csv(os.path.join(out_dir, "loss_curve.csv"), index=False,
                 float_format="%.17g")
    return report.metrics()


def _train_worker(payload):
    cfg, data_dir, out_dir, seed = payload
    return seed, _train_one(cfg, data_dir, out_dir, seed)


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.override)
    out = _out_dir(args.out, "train-run")
    seeds = ([int(s) for s in args.seeds.split(",")] if args.seeds
             else [cfg["training"]["seed"]])
    if len(seeds) == 1:
        metrics = _train_one(cfg, args.data, out, seeds[0])
        print(json.dumps({"seed": seeds[0], **metrics}, sort_keys=True))
        return 0
    jobs = [(cfg, args.data, os.path.join(out, f"seed_{s}"), s) for s in seeds]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_train_worker, jobs))
    else:
        results = [_train_worker(j) for j in jobs]
    for seed, metrics in results:
        print(json.dumps({"seed": seed, **metrics}, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    spec, params, _, extra = load_checkpoint(args.checkpoint)
    if args.inductive:
        cfg = load_config(args.inductive, args.override)
        if cfg["kind"] != extra.get("dataset_kind", cfg["kind"]):
            raise ConfigError(f"checkpoint was trained on {extra.get('dataset_kind')!r}, "
                              f"config requests {cfg['kind']!r}")
        gen = _gen_config(cfg)
        _progress(f"inductive evaluation on a fresh graph (seed {gen.seed}) ...")
        metrics = inductive_eval(params, spec, gen)
    else:
        if not args.data:
            raise ConfigError("eval needs --data DIR or --inductive CONFIG")
        raw = load_dataset(args.data)
        expected = extra.get("dataset_kind")
        if expected is not None and raw.kind != expected:
            raise ConfigError(f"checkpoint was trained on {expected!r}, "
                              f"dataset is {raw.kind!r}")
        g = normalize_dataset(raw) if not raw.normalized else raw
        ratios = extra.get("split_ratios")
        if ratios:
            splits = make_splits(g.n_vertices, tuple(ratios), extra["split_seed"])
            metrics = evaluate(spec, g, params, idx=splits.test)
        else:
            metrics = evaluate(spec, g, params)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(metrics, fh, sort_keys=True, indent=1)
            fh.write("\n")
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_export_embeddings(args) -> int:
    spec, params, _, _ = load_checkpoint(args.checkpoint)
    if spec.family == "gcn":
        raise ConfigError("a GCN checkpoint has no edge learning function to export")
    raw = load_dataset(args.data)
    g = normalize_dataset(raw) if not raw.normalized else raw
    gt = GraphTensors.build(g, spec)
    _, emb = forward_model(spec, gt, params, training=False, export_embeddings=True)
    rows = {"edge_id": np.arange(g.n_edges, dtype=np.int64),
            "src": [e.src for e in g.edges],
            "dst": [e.dst for e in g.edges],
            "trans_type": ["" if e.trans_type is None else str(int(e.trans_type))
                           for e in g.edges],
            "fraud_type": ["" if e.fraud_type is None else e.fraud_type for e in g.edges]}
    for j in range(emb.shape[1]):
        rows[f"w_{j + 1}"] = emb[:, j]
    pd.DataFrame(rows).to_csv(args.out, index=False, float_format="%.17g")
    print(f"wrote {g.n_edges} edge embeddings to {args.out}")
    return 0


def cmd_inspect(args) -> int:
    path = args.path
    if os.path.isdir(path):
        meta_path = os.path.join(path, "meta.json")
        if not os.path.exists(meta_path):
            raise ConfigError(f"{path} is not a dataset directory (no meta.json)")
        with open(meta_path) as fh:
            meta = json.load(fh)
        summary = {k: meta.get(k) for k in
                   ("kind", "n_vertices", "n_edges", "total_sequence_length",
                    "class_counts", "hidden_class_count", "seed", "normalized")}
        print(json.dumps(summary, sort_keys=True))
        return 0
    spec, params, adam, extra = load_checkpoint(path)
    summary = {"model": spec.display_name, "family": spec.family,
               "n_params": int(sum(p.data.size for p in params.values())),
               "optimizer_steps": adam.t if adam else None,
               "dataset_kind": extra.get("dataset_kind")}
    print(json.dumps(summary, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="latentgraph",
        description="Synthetic multigraph generation, training and evaluation.")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset directory")
    p.add_argument("--config", help="JSON config (defaults used when omitted)")
    p.add_argument("--out", help="output dataset directory")
    p.add_argument("--force", action="store_true", help="overwrite non-empty output")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train a model on a dataset directory")
    p.add_argument("--config", help="JSON config")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", help="output directory for checkpoint/report")
    p.add_argument("--seeds", help="comma-separated seeds for repeated runs")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="dataset directory (transductive mode)")
    p.add_argument("--inductive", metavar="CONFIG",
                   help="generator config for fresh-graph evaluation")
    p.add_argument("--out", help="metrics JSON output path")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("export-embeddings", help="write per-edge latent vectors to CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export_embeddings)

    p = sub.add_parser("inspect", help="summarize a dataset directory or checkpoint")
    p.add_argument("path")
    p.set_defaults(fn=cmd_inspect)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ConfigError as exc:
        _progress(f"config error: {exc}")
        return 2
    except (DatasetFormatError, CheckpointError, TrainingDivergedError,
            MetricError, FileNotFoundError, ValueError) as exc:
        _progress(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
