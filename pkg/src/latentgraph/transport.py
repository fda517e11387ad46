"""Synthetic transport-style profile networks.

Real ride ingestion is out of scope; these builders produce small graphs in
the transport dataset format (per-edge binned activity/tip profiles) for
exercising the transport model pathway end to end.
"""

from __future__ import annotations

import numpy as np

from .graph import Multigraph, MultiEdge, VertexTable

TRANSPORT_CLASS_RATIOS = (5.0, 3.0, 1.0)   # residential : commercial : manufacturing


def _class_curve(label: int) -> np.ndarray:
    """Characteristic 12-bin daily activity curve for a zoning class."""
    peaks = {0: 9.0, 1: 6.0, 2: 3.0}
    b = np.arange(12, dtype=np.float64)
    return np.exp(-0.5 * ((b - peaks[label]) / 1.8) ** 2)


def toy_transport_graph(n_vertices: int = 300, n_edges: int = 1800,
                        correlated: bool = True, seed: int = 0,
                        noise: float = 0.08) -> Multigraph:
    """Random directed profile network with 3 vertex classes (ratios ~5:3:1).

    With ``correlated=True`` each edge's activity channel blends the endpoint
    classes' daily curves and the tip channel follows the destination class,
    so edge profiles carry the class signal. With ``correlated=False``
    profiles are class-independent noise around a random daily curve.
    """
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=(int(seed), 77))))
    ratios = np.asarray(TRANSPORT_CLASS_RATIOS)
    labels = rng.choice(3, size=n_vertices, p=ratios / ratios.sum()).astype(np.int64)
    features = rng.random((n_vertices, 6))

    pairs = set()
    edges_srcdst = []
    while len(edges_srcdst) < n_edges:
        i = int(rng.integers(n_vertices))
        j = int(rng.integers(n_vertices))
        if i == j or (i, j) in pairs:
            continue
        pairs.add((i, j))
        edges_srcdst.append((i, j))

    tip_levels = {0: 0.25, 1: 0.65, 2: 0.1}
    edges = []
    for (i, j) in edges_srcdst:
        if correlated:
            activity = 0.5 * _class_curve(int(labels[i])) + 0.5 * _class_curve(int(labels[j]))
            tips = tip_levels[int(labels[j])] * _class_curve(int(labels[i]))
        else:
            peak = float(rng.uniform(0, 12))
            b = np.arange(12, dtype=np.float64)
            activity = np.exp(-0.5 * ((b - peak) / 1.8) ** 2)
            tips = float(rng.uniform(0.1, 0.7)) * activity
        prof = np.stack([activity, tips], axis=1)          # (12, 2)
        prof = prof + noise * rng.standard_normal(prof.shape)
        prof = np.abs(prof)
        edges.append(MultiEdge(i, j, prof.reshape(1, 24)))

    g = Multigraph(vertices=VertexTable(features=features, labels=labels),
                   edges=edges, kind="transport")
    g.meta.update({"seed": int(seed), "correlated": bool(correlated)})
    return g
