"""Multigraph data model: vertex table, multi-edges with attribute sequences,
adjacency indices and dataset splits.

A built Multigraph is treated as immutable; operations that transform a graph
return a new one. All vertex ids are dense integers 0..n-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FINANCIAL_KINDS = ("financial-1hop", "financial-2hop")
TRANSPORT_KIND = "transport"
DATASET_KINDS = FINANCIAL_KINDS + (TRANSPORT_KIND,)

LABEL_NORMAL = 0
LABEL_FRAUD = 1


class GraphStructureError(ValueError):
    """A structural invariant of the multigraph is violated."""


@dataclass
class VertexTable:
    """Per-vertex features, class labels, and the optional hidden-class flag.

    ``hidden_class`` is generator diagnostics only (mule membership in 2-hop
    datasets); no model operation reads it.
    """

    features: np.ndarray          # (n, n_features) float64
    labels: np.ndarray            # (n,) int64
    hidden_class: np.ndarray | None = None   # (n,) bool

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise GraphStructureError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels.ndim != 1 or len(self.labels) != len(self.features):
            raise GraphStructureError(
                f"label count {self.labels.shape} does not match feature rows {self.features.shape}")
        if self.hidden_class is not None:
            self.hidden_class = np.asarray(self.hidden_class, dtype=bool)
            if self.hidden_class.shape != self.labels.shape:
                raise GraphStructureError("hidden_class length does not match vertex count")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass
class MultiEdge:
    """A directed multi-edge holding the ordered attribute-vector sequence.

    Financial edges carry one (time, amount) row per transaction; transport
    edges carry a single flattened 12x2 activity/tip profile row.
    ``trans_type`` / ``fraud_type`` are generator metadata, never model input.
    """

    src: int
    dst: int
    sequence: np.ndarray          # (length, width) float64
    trans_type: int | None = None
    fraud_type: str | None = None  # "A" | "B" | None

    def __post_init__(self):
        self.sequence = np.asarray(self.sequence, dtype=np.float64)
        if self.sequence.ndim != 2:
            raise GraphStructureError(
                f"edge {self.src}->{self.dst}: sequence must be 2-D, got {self.sequence.shape}")
        if self.src == self.dst:
            raise GraphStructureError(f"self-loop edge at vertex {self.src}")
        if self.fraud_type not in (None, "A", "B"):
            raise GraphStructureError(f"edge {self.src}->{self.dst}: bad fraud_type {self.fraud_type!r}")

    def __eq__(self, other):
        if not isinstance(other, MultiEdge):
            return NotImplemented
        return (self.src == other.src and self.dst == other.dst
                and self.trans_type == other.trans_type
                and self.fraud_type == other.fraud_type
                and self.sequence.shape == other.sequence.shape
                and np.array_equal(self.sequence, other.sequence))


def build_indices(edges: list[MultiEdge], n_vertices: int):
    """Bucket edge ids by endpoint.

    Returns (in_index, out_index): per-vertex lists of edge ids, iteration
    order equal to edge insertion order.
    """
    in_index = [[] for _ in range(n_vertices)]
    out_index = [[] for _ in range(n_vertices)]
    for k, e in enumerate(edges):
        if not (0 <= e.src < n_vertices) or not (0 <= e.dst < n_vertices):
            raise GraphStructureError(
                f"edge {k} ({e.src}->{e.dst}) references a vertex outside 0..{n_vertices - 1}")
        out_index[e.src].append(k)
        in_index[e.dst].append(k)
    return in_index, out_index


@dataclass
class Multigraph:
    """Directed multigraph: vertex table + multi-edges + adjacency indices."""

    vertices: VertexTable
    edges: list[MultiEdge]
    kind: str = "financial-1hop"
    meta: dict = field(default_factory=dict)
    normalized: bool = False
    in_index: list = field(default=None, repr=False)
    out_index: list = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise GraphStructureError(f"unknown dataset kind {self.kind!r}")
        if self.in_index is None or self.out_index is None:
            self.in_index, self.out_index = build_indices(self.edges, self.vertices.n)
        if not self.normalized:
            for k, e in enumerate(self.edges):
                if len(e.sequence) < 1:
                    raise GraphStructureError(f"edge {k} ({e.src}->{e.dst}) has an empty sequence")

    @property
    def n_vertices(self) -> int:
        return self.vertices.n

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def total_sequence_length(self) -> int:
        return int(sum(len(e.sequence) for e in self.edges))

    def endpoint_arrays(self):
        """(src, dst) int64 arrays in edge order."""
        src = np.fromiter((e.src for e in self.edges), dtype=np.int64, count=self.n_edges)
        dst = np.fromiter((e.dst for e in self.edges), dtype=np.int64, count=self.n_edges)
        return src, dst

    def __eq__(self, other):
        if not isinstance(other, Multigraph):
            return NotImplemented
        if (self.kind != other.kind or self.normalized != other.normalized
                or self.n_vertices != other.n_vertices or self.n_edges != other.n_edges):
            return False
        v, w = self.vertices, other.vertices
        if not np.array_equal(v.features, w.features) or not np.array_equal(v.labels, w.labels):
            return False
        hs = v.hidden_class if v.hidden_class is not None else np.zeros(v.n, dtype=bool)
        ho = w.hidden_class if w.hidden_class is not None else np.zeros(w.n, dtype=bool)
        if not np.array_equal(hs, ho):
            return False
        return all(a == b for a, b in zip(self.edges, other.edges))


def undirected_binary_adjacency(g: Multigraph) -> list[np.ndarray]:
    """Per-vertex sorted array of distinct neighbors, ignoring direction and
    multiplicity. Self entries never occur (the edge list has no self-loops).
    """
    neigh = [set() for _ in range(g.n_vertices)]
    for e in g.edges:
        neigh[e.src].add(e.dst)
        neigh[e.dst].add(e.src)
    return [np.array(sorted(s), dtype=np.int64) for s in neigh]


def undirected_pair_arrays(g: Multigraph):
    """Flattened (target, source) arrays of the binarized undirected adjacency,
    plus per-vertex neighbor counts. Each unordered neighbor pair appears twice,
    once per direction.
    """
    neighbors = undirected_binary_adjacency(g)
    counts = np.array([len(a) for a in neighbors], dtype=np.int64)
    targets = np.repeat(np.arange(g.n_vertices, dtype=np.int64), counts)
    sources = np.concatenate(neighbors) if len(neighbors) else np.zeros(0, dtype=np.int64)
    if sources.size == 0:
        sources = np.zeros(0, dtype=np.int64)
    return targets, sources, counts


@dataclass
class SplitMask:
    """Disjoint train/validation/test vertex id sets drawn with a fixed seed."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int

    def masks(self, n: int):
        out = []
        for idx in (self.train, self.val, self.test):
            m = np.zeros(n, dtype=bool)
            m[idx] = True
            out.append(m)
        return tuple(out)


_SPLIT_STREAM = 9


def make_splits(n_vertices: int, ratios, seed: int) -> SplitMask:
    """Partition vertices into train/val/test by a seeded uniform permutation.

    Unstratified: the permutation is split at sizes round(ratio * n).
    """
    r_train, r_val, r_test = ratios
    if min(r_train, r_val, r_test) <= 0:
        raise ValueError(f"ratios must be positive, got {ratios}")
    if abs(r_train + r_val + r_test - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    n_train = int(round(r_train * n_vertices))
    n_val = int(round(r_val * n_vertices))
    n_test = n_vertices - n_train - n_val
    if n_train < 1 or n_val < 1 or n_test < 1:
        raise ValueError(f"degenerate split: sizes ({n_train},{n_val},{n_test}) at n={n_vertices}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=(int(seed), _SPLIT_STREAM))))
    perm = rng.permutation(n_vertices)
    return SplitMask(
        train=np.sort(perm[:n_train]),
        val=np.sort(perm[n_train:n_train + n_val]),
        test=np.sort(perm[n_train + n_val:]),
        seed=int(seed),
    )
