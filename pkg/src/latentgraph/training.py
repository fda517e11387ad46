"""Full-batch training loop, run reports, checkpoints, and the transductive /
inductive evaluation protocols."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tape, Tensor, adam_step, backward
from .dataset_io import fmt_float
from .generate import GenConfig, generate_dataset, normalize_dataset, substream
from .graph import Multigraph, SplitMask
from .metrics import MetricError, accuracy, auc, macro_f1, softmax_scores
from .models import (GraphTensors, ModelSpec, forward_model, init_params,
                     parameter_count)


class TrainingDivergedError(RuntimeError):
    """The training loss became non-finite."""


class CheckpointError(ValueError):
    """Checkpoint file malformed or incompatible with the requested use."""


_DROPOUT_STREAM = 200


@dataclass
class TrainConfig:
    epochs: int = 2000
    learning_rate: float = 5e-4
    weight_decay: float = 5e-4
    seed: int = 1
    class_weight_scheme: str = "inverse_frequency"   # or "none"
    log_every: int = 0                               # 0: silent
    strict_finite_checks: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("rates must be nonnegative")
        if self.class_weight_scheme not in ("inverse_frequency", "none"):
            raise ValueError(f"unknown class weight scheme {self.class_weight_scheme!r}")

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "learning_rate": self.learning_rate,
                "weight_decay": self.weight_decay, "seed": self.seed,
                "class_weight_scheme": self.class_weight_scheme}


@dataclass
class RunReport:
    """Per-run record: loss curves, final test metrics, and provenance."""

    model: str
    seed: int
    n_params: int
    class_weights: list
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    test_accuracy: float | None = None
    test_auc: float | None = None
    test_macro_f1: float | None = None
    wall_time_s: float = 0.0

    def metrics(self) -> dict:
        out = {"accuracy": self.test_accuracy}
        if self.test_auc is not None:
            out["auc"] = self.test_auc
        if self.test_macro_f1 is not None:
            out["macro_f1"] = self.test_macro_f1
        return out

    def to_dict(self) -> dict:
        return {
            "model": self.model, "seed": self.seed, "n_params": self.n_params,
            "class_weights": self.class_weights,
            "train_loss": self.train_loss, "val_loss": self.val_loss,
            "test_accuracy": self.test_accuracy, "test_auc": self.test_auc,
            "test_macro_f1": self.test_macro_f1, "wall_time_s": self.wall_time_s,
        }

    def deterministic_digest(self) -> str:
        """Serialized report minus wall time, for determinism comparisons."""
        d = self.to_dict()
        d.pop("wall_time_s")
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(**d)


def class_weights(labels, train_idx, n_classes: int, scheme: str = "inverse_frequency"):
    """Inverse-frequency weights w_c = n/(C * n_c), computed on the train mask."""
    if scheme == "none":
        return np.ones(n_classes)
    y = np.asarray(labels)[np.asarray(train_idx)]
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    if (counts == 0).any():
        missing = [c for c in range(n_classes) if counts[c] == 0]
        raise ValueError(f"classes {missing} absent from the training mask")
    return len(y) / (n_classes * counts)


def _final_metrics(report: RunReport, logits: np.ndarray, labels, idx, n_classes):
    report.test_accuracy = accuracy(logits, labels, idx)
    if n_classes == 2:
        try:
            report.test_auc = auc(softmax_scores(logits), labels, idx)
        except MetricError:
            report.test_auc = None        # degenerate single-class test mask
    else:
        report.test_macro_f1 = macro_f1(logits, labels, idx, n_classes)


def train(spec: ModelSpec, g: Multigraph, splits: SplitMask, cfg: TrainConfig,
          gt: GraphTensors | None = None):
    """Full-batch Adam training of ``spec`` on ``g``.

    Deterministic given cfg.seed. Uses the final-epoch parameters (no early
    stopping); per-epoch validation loss is logged from the same
    training-mode forward pass as the train loss. Returns
    (params, adam_state, RunReport).
    """
    t0 = time.perf_counter()
    if gt is None:
        gt = GraphTensors.build(g, spec)
    params = init_params(spec, cfg.seed)
    weights = class_weights(gt.labels, splits.train, spec.n_classes,
                            cfg.class_weight_scheme)
    adam = AdamState.for_params(params, lr=cfg.learning_rate,
                                weight_decay=cfg.weight_decay)
    report = RunReport(model=spec.display_name, seed=cfg.seed,
                       n_params=parameter_count(params),
                       class_weights=[float(w) for w in weights])
    prev_checks = ad.FINITE_CHECKS
    ad.FINITE_CHECKS = cfg.strict_finite_checks
    try:
        for epoch in range(cfg.epochs):
            rng = substream(cfg.seed, _DROPOUT_STREAM, epoch)
            with Tape() as tape:
                logits = forward_model(spec, gt, params, training=True, rng=rng)
                loss = ad.weighted_cross_entropy(logits, gt.labels, weights, splits.train)
            loss_val = float(loss.data)
            val_val = float(ad.weighted_cross_entropy(
                logits, gt.labels, weights, splits.val).data)
            if not np.isfinite(loss_val):
                raise TrainingDivergedError(f"non-finite training loss at epoch {epoch}")
            grads_obj = backward(tape, loss)
            grads = {name: grads_obj.get(p) for name, p in params.items()}
            gnorm = ad.l2_norm(grads.values())
            if not np.isfinite(gnorm):
                raise TrainingDivergedError(
                    f"non-finite gradients at epoch {epoch} (loss {loss_val:.6g})")
            adam_step(params, grads, adam)
            report.train_loss.append(loss_val)
            report.val_loss.append(val_val)
            if cfg.log_every and (epoch + 1) % cfg.log_every == 0:
                print(f"epoch {epoch + 1}/{cfg.epochs}  train {loss_val:.5f}  "
                      f"val {val_val:.5f}", flush=True)
    finally:
        ad.FINITE_CHECKS = prev_checks

    logits = forward_model(spec, gt, params, training=False).data
    _final_metrics(report, logits, gt.labels, splits.test, spec.n_classes)
    report.wall_time_s = time.perf_counter() - t0
    return params, adam, report


def evaluate(spec: ModelSpec, g: Multigraph, params: dict, idx=None,
             gt: GraphTensors | None = None) -> dict:
    """Inference-mode metrics on a vertex subset (default: all vertices)."""
    if gt is None:
        gt = GraphTensors.build(g, spec)
    logits = forward_model(spec, gt, params, training=False).data
    if idx is None:
        idx = np.arange(gt.n)
    out = {"accuracy": accuracy(logits, gt.labels, idx)}
    if spec.n_classes == 2:
        out["auc"] = auc(softmax_scores(logits), gt.labels, idx)
    else:
        out["macro_f1"] = macro_f1(logits, gt.labels, idx, spec.n_classes)
    return out


def inductive_eval(params: dict, spec: ModelSpec, gen_cfg: GenConfig) -> dict:
    """Score a freshly generated graph with already-trained parameters.

    The fresh graph is normalized by the same procedure (its own recorded
    constants) and scored over all of its vertices, no split.
    """
    if spec.graph_kind != "financial":
        raise CheckpointError("inductive evaluation regenerates financial datasets only")
    fresh = normalize_dataset(generate_dataset(gen_cfg))
    metrics = evaluate(spec, fresh, params)
    metrics["generator_seed"] = gen_cfg.seed
    return metrics


def mean_and_se(values) -> tuple[float, float]:
    """Mean and standard error (sample stddev / sqrt(n))."""
    vals = np.asarray(list(values), dtype=np.float64)
    se = vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else 0.0
    return float(vals.mean()), float(se)


def repeat_runs(spec: ModelSpec, g: Multigraph, splits: SplitMask,
                cfg: TrainConfig, seeds) -> tuple[list[RunReport], dict]:
    """Train once per seed with fixed splits; aggregate mean and standard
    error (sample stddev / sqrt(n)) per metric."""
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("repeat_runs needs at least 2 seeds")
    gt = GraphTensors.build(g, spec)
    reports = []
    for s in seeds:
        run_cfg = TrainConfig(**{**cfg.to_dict(), "seed": int(s)})
        run_cfg.strict_finite_checks = cfg.strict_finite_checks
        _, _, rep = train(spec, g, splits, run_cfg, gt=gt)
        reports.append(rep)
    agg = {}
    for key in ("accuracy", "auc", "macro_f1"):
        vals = [r.metrics().get(key) for r in reports]
        if any(v is None for v in vals):
            continue
        agg[key] = mean_and_se(vals)
    return reports, agg


def format_result_table(rows: list[dict]) -> str:
    """Aligned text table of aggregated results.

    Each row: {"model", "accuracy": (mean, se), "auc"/"macro_f1": (mean, se),
    "time_s", "n_params"}.
    """
    headers = ["Architecture", "Accuracy", "AUC/MacroF1", "Time", "N_params"]
    lines = []
    for r in rows:
        acc = r.get("accuracy")
        second = r.get("auc", r.get("macro_f1"))
        lines.append([
            r.get("model", "?"),
            f"{acc[0] * 100:.2f} +/- {acc[1] * 100:.2f}" if acc else "-",
            f"{second[0]:.3f} +/- {second[1]:.3f}" if second else "-",
            f"{r.get('time_s', 0):.0f}s",
            str(r.get("n_params", "-")),
        ])
    widths = [max(len(h), *(len(l[i]) for l in lines)) if lines else len(h)
              for i, h in enumerate(headers)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*headers), fmt.format(*("-" * w for w in widths))]
    out += [fmt.format(*l) for l in lines]
    return "\n".join(out)


# -- checkpoints ----------------------------------------------------------------

CHECKPOINT_VERSION = 1


def _floats_out(arr: np.ndarray) -> list[str]:
    return [fmt_float(x) for x in np.asarray(arr, dtype=np.float64).reshape(-1)]


def _floats_in(vals, shape) -> np.ndarray:
    return np.asarray([float(v) for v in vals], dtype=np.float64).reshape(shape)


def save_checkpoint(path: str, spec: ModelSpec, params: dict,
                    adam: AdamState | None = None, extra: dict | None = None):
    """Write parameters (and optimizer state) as JSON with 17-significant-digit
    floats; the round trip is bit exact."""
    blob = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "model": spec.to_dict(),
        "params": [{"name": k, "shape": list(p.data.shape), "values": _floats_out(p.data)}
                   for k, p in params.items()],
    }
    if adam is not None:
        blob["adam"] = {
            "lr": fmt_float(adam.lr), "weight_decay": fmt_float(adam.weight_decay),
            "beta1": fmt_float(adam.beta1), "beta2": fmt_float(adam.beta2),
            "eps": fmt_float(adam.eps), "t": adam.t,
            "m": {k: _floats_out(v) for k, v in adam.m.items()},
            "v": {k: _floats_out(v) for k, v in adam.v.items()},
        }
    if extra:
        blob["extra"] = extra
    with open(path, "w") as fh:
        json.dump(blob, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path: str):
    """Returns (spec, params, adam_state_or_None, extra)."""
    with open(path) as fh:
        try:
            blob = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"checkpoint line {exc.lineno}: {exc.msg}") from exc
    if blob.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {blob.get('checkpoint_version')!r} unsupported")
    spec = ModelSpec.from_dict(blob["model"])
    params = {}
    for entry in blob["params"]:
        params[entry["name"]] = Tensor(_floats_in(entry["values"], entry["shape"]),
                                       requires_grad=True)
    adam = None
    if "adam" in blob:
        a = blob["adam"]
        adam = AdamState(lr=float(a["lr"]), weight_decay=float(a["weight_decay"]),
                         beta1=float(a["beta1"]), beta2=float(a["beta2"]),
                         eps=float(a["eps"]), t=int(a["t"]))
        adam.m = {k: _floats_in(v, params[k].data.shape) for k, v in a["m"].items()}
        adam.v = {k: _floats_in(v, params[k].data.shape) for k, v in a["v"].items()}
    return spec, params, adam, blob.get("extra", {})
