"""Shared test fixtures and numerical-check helpers."""

import numpy as np
import pytest

from latentgraph import autodiff as ad
from latentgraph.graph import Multigraph, MultiEdge, VertexTable


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def scalarize(t: ad.Tensor, proj: np.ndarray) -> ad.Tensor:
    """Project any tensor to a scalar through a fixed random matrix so a
    whole-output gradient is exercised."""
    if t.data.ndim == 0:
        return t
    if t.data.ndim == 1:
        t = ad.reshape(t, (1, t.data.size))
    return ad.sum_all(ad.matmul(t, ad.Tensor(proj.reshape(t.data.shape[1], 1))))


def finite_diff_check(build_loss, params, h=1e-5, floor=1e-6):
    """Central finite differences against reverse-mode gradients.

    ``build_loss()`` must rebuild the loss from the current parameter values
    (it is re-evaluated after every in-place parameter nudge). Returns the
    maximum relative error over every parameter element.
    """
    with ad.Tape() as tape:
        loss = build_loss()
    grads = ad.backward(tape, loss)
    worst = 0.0
    for p in params:
        g = grads.get(p)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = float(build_loss().data)
            flat[i] = orig - h
            lm = float(build_loss().data)
            flat[i] = orig
            fd = (lp - lm) / (2 * h)
            rel = abs(gflat[i] - fd) / max(abs(gflat[i]), abs(fd), floor)
            worst = max(worst, rel)
    return worst


def tiny_financial_graph(n=6, seed=0, normalized=True):
    """Hand-sized financial graph with random normalized sequences."""
    rng = rng_for(seed)
    feats = rng.random((n, 13))
    labels = (rng.random(n) < 0.4).astype(np.int64)
    edges = []
    pairs = set()
    for _ in range(2 * n):
        i, j = int(rng.integers(n)), int(rng.integers(n))
        if i == j or (i, j) in pairs:
            continue
        pairs.add((i, j))
        m = int(rng.integers(1, 9))
        edges.append(MultiEdge(i, j, rng.random((m, 2)), int(rng.integers(1, 4)), None))
    return Multigraph(vertices=VertexTable(features=feats, labels=labels),
                      edges=edges, kind="financial-1hop", normalized=normalized)


@pytest.fixture
def small_graph():
    return tiny_financial_graph(n=8, seed=3)
