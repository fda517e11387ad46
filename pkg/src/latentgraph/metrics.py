"""Classification metrics: accuracy, ROC AUC (rank form), macro-F1."""

from __future__ import annotations

import numpy as np


class MetricError(ValueError):
    """Metric undefined for the given inputs (empty or single-class mask)."""


def _mask_idx(mask, n):
    if mask is None:
        return np.arange(n)
    mask = np.asarray(mask)
    idx = np.flatnonzero(mask) if mask.dtype == bool else mask.astype(np.int64)
    if idx.size == 0:
        raise MetricError("empty evaluation mask")
    return idx


def accuracy(logits, labels, mask=None) -> float:
    """Argmax match rate over the mask; ties break toward the lower class id."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    idx = _mask_idx(mask, len(labels))
    pred = logits[idx].argmax(axis=1)
    return float((pred == labels[idx]).mean())


def _tied_ranks(x: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    ranks = np.empty(len(x))
    boundaries = np.flatnonzero(np.concatenate(([True], sx[1:] != sx[:-1], [True])))
    for a, b in zip(boundaries[:-1], boundaries[1:]):
        ranks[order[a:b]] = 0.5 * (a + 1 + b)
    return ranks


def auc(scores, labels, mask=None) -> float:
    """Probability that a random positive outranks a random negative, with
    half credit for ties (rank-sum form, O(n log n))."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    idx = _mask_idx(mask, len(labels))
    s, y = scores[idx], labels[idx]
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError(f"AUC needs both classes in the mask (got {n_pos} pos, {n_neg} neg)")
    ranks = _tied_ranks(s)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_f1(logits, labels, mask=None, n_classes: int | None = None) -> float:
    """Unweighted mean over classes of 2PR/(P+R); a class with no predicted
    and no actual positives contributes 0."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    idx = _mask_idx(mask, len(labels))
    pred = logits[idx].argmax(axis=1)
    true = labels[idx]
    C = n_classes if n_classes is not None else logits.shape[1]
    f1s = []
    for c in range(C):
        tp = int(((pred == c) & (true == c)).sum())
        fp = int(((pred == c) & (true != c)).sum())
        fn = int(((pred != c) & (true == c)).sum())
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * p * r / (p + r) if p + r else 0.0)
    return float(np.mean(f1s))


def softmax_scores(logits: np.ndarray, positive_class: int = 1) -> np.ndarray:
    """Positive-class softmax probabilities, the score fed to ROC AUC."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e[:, positive_class] / e.sum(axis=1)
