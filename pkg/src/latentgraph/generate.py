"""Synthetic financial transaction network generator.

Pipeline: preferential-attachment skeleton -> class assignment -> (optional
2-hop mule relabeling) -> per-edge transaction sequences -> normalization.

Randomness protocol (counter-based Philox, fixed stream keys):

    (seed, 0)            skeleton endpoint sampling
    (seed, 1)            class assignment
    (seed, 2)            node features
    (seed, 3, edge_id)   per-edge transaction population

Every endpoint draw consumes exactly one ``integers(0, total_weight)`` call,
mapped to a vertex through cumulative weights, so an independent trace of the
sampling loop with the same stream reproduces the graph exactly. Per-edge
substreams make edge population order-independent and parallelizable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import (LABEL_FRAUD, LABEL_NORMAL, Multigraph, MultiEdge,
                    VertexTable)

DAY_MINUTES = 1440.0
YEAR_MINUTES = 365.0 * DAY_MINUTES
MIN_DT_MINUTES = 1.0

_S_SKELETON = 0
_S_CLASSES = 1
_S_FEATURES = 2
_S_EDGE = 3


def substream(seed: int, *key) -> np.random.Generator:
    """Philox generator for the (seed, *key) stream."""
    entropy = (int(seed),) + tuple(int(k) for k in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=entropy)))


@dataclass
class GenConfig:
    """Generator configuration; defaults are the full-scale reference values."""

    n_vertices_init: int = 50_000
    n_edges_target: int = 125_000
    fraud_ratio: float = 0.1
    two_hop: bool = False
    seed: int = 0
    mutation_prob: float = 1.0 / 3.0

    def __post_init__(self):
        if not (0.0 < self.fraud_ratio < 1.0):
            raise ValueError(f"fraud_ratio must be in (0,1), got {self.fraud_ratio}")
        if self.n_edges_target < 0:
            raise ValueError("n_edges_target must be >= 0")
        if not (0.0 <= self.mutation_prob <= 1.0):
            raise ValueError(f"mutation_prob must be in [0,1], got {self.mutation_prob}")
        if self.n_vertices_init < 1:
            raise ValueError("n_vertices_init must be positive")
        if self.n_edges_target > self.n_vertices_init ** 2:
            raise ValueError("n_edges_target exceeds the number of distinct ordered pairs")

    @property
    def kind(self) -> str:
        return "financial-2hop" if self.two_hop else "financial-1hop"

    def to_dict(self) -> dict:
        return {
            "n_vertices_init": self.n_vertices_init,
            "n_edges_target": self.n_edges_target,
            "fraud_ratio": self.fraud_ratio,
            "two_hop": self.two_hop,
            "seed": self.seed,
            "mutation_prob": self.mutation_prob,
        }


class _Fenwick:
    """Fenwick tree over integer weights; supports prefix-sum inversion."""

    def __init__(self, weights):
        self.n = len(weights)
        self.tree = np.zeros(self.n + 1, dtype=np.int64)
        self.tree[1:] = weights
        for i in range(1, self.n + 1):
            j = i + (i & -i)
            if j <= self.n:
                self.tree[j] += self.tree[i]
        self.total = int(np.sum(weights))
        self._log = 1
        while (1 << self._log) <= self.n:
            self._log += 1

    def add(self, i: int, delta: int):
        self.total += delta
        i += 1
        while i <= self.n:
            self.tree[i] += delta
            i += i & (-i)

    def find(self, r: int) -> int:
        """Smallest index v with prefix_sum(v+1) > r (0 <= r < total)."""
        pos = 0
        rem = r
        mask = 1 << (self._log - 1)
        tree = self.tree
        while mask:
            nxt = pos + mask
            if nxt <= self.n and tree[nxt] <= rem:
                rem -= tree[nxt]
                pos = nxt
            mask >>= 1
        return pos


class AttachmentState:
    """Preferential-attachment sampler: p(v) proportional to degree(v) + 1."""

    def __init__(self, n_vertices: int):
        self.degrees = np.zeros(n_vertices, dtype=np.int64)
        self._fen = _Fenwick(np.ones(n_vertices, dtype=np.int64))

    def sample(self, rng: np.random.Generator) -> int:
        r = int(rng.integers(0, self._fen.total))
        return self._fen.find(r)

    def accept(self, i: int, j: int):
        self.degrees[i] += 1
        self.degrees[j] += 1
        self._fen.add(i, 1)
        self._fen.add(j, 1)


@dataclass
class Skeleton:
    src: np.ndarray              # compacted endpoint arrays, edge acceptance order
    dst: np.ndarray
    orig_ids: np.ndarray         # surviving original vertex id per compact id
    n_vertices: int


def generate_skeleton(cfg: GenConfig) -> Skeleton:
    """Sample the multi-edge skeleton.

    Edges are distinct ordered pairs drawn one at a time, both endpoints
    independently from the degree+1 distribution, which is updated after each
    accepted pair; re-drawing an existing pair changes nothing. Afterwards
    self-pairs are dropped, then zero-degree vertices, and ids are compacted.
    """
    rng = substream(cfg.seed, _S_SKELETON)
    state = AttachmentState(cfg.n_vertices_init)
    seen: set[tuple[int, int]] = set()
    src_l: list[int] = []
    dst_l: list[int] = []
    while len(src_l) < cfg.n_edges_target:
        i = state.sample(rng)
        j = state.sample(rng)
        if (i, j) in seen:
            continue
        seen.add((i, j))
        src_l.append(i)
        dst_l.append(j)
        state.accept(i, j)
    src = np.array(src_l, dtype=np.int64)
    dst = np.array(dst_l, dtype=np.int64)

    keep = src != dst
    src, dst = src[keep], dst[keep]
    touched = np.zeros(cfg.n_vertices_init, dtype=bool)
    touched[src] = True
    touched[dst] = True
    orig_ids = np.flatnonzero(touched)
    remap = np.full(cfg.n_vertices_init, -1, dtype=np.int64)
    remap[orig_ids] = np.arange(len(orig_ids))
    return Skeleton(src=remap[src], dst=remap[dst], orig_ids=orig_ids,
                    n_vertices=len(orig_ids))


def assign_classes(n_vertices: int, fraud_ratio: float, seed: int) -> np.ndarray:
    """Independent Bernoulli(fraud_ratio) fraud labels for each vertex."""
    rng = substream(seed, _S_CLASSES)
    return np.where(rng.random(n_vertices) < fraud_ratio, LABEL_FRAUD, LABEL_NORMAL).astype(np.int64)


def _trunc_exp(u: np.ndarray, rate: float, lo: float, hi: float) -> np.ndarray:
    """Inverse-CDF sampling of Exp(rate) truncated to [lo, hi]."""
    if hi <= lo:
        return np.full_like(u, lo)
    elo, ehi = np.exp(-rate * lo), np.exp(-rate * hi)
    return -np.log(elo - u * (elo - ehi)) / rate


def _positive_normal(rng, mean, sd, n):
    """Normal(mean, sd^2) truncated to > 0 by redraw; draws n values."""
    x = rng.normal(mean, sd, n)
    while True:
        bad = x <= 0
        if not bad.any():
            return x
        x[bad] = rng.normal(mean, sd, int(bad.sum()))


def _accumulate_times(rng, block_fn, block: int):
    """Accumulate time deltas (minutes) until the one-year span is exceeded.

    Deltas are clamped below at one minute; returns (times, n_clamped).
    """
    t0 = 0.0
    chunks = []
    clamped = 0
    for _ in range(10_000):
        d = block_fn(rng, block)
        clamped += int((d < MIN_DT_MINUTES).sum())
        np.maximum(d, MIN_DT_MINUTES, out=d)
        cs = t0 + np.cumsum(d)
        if cs[-1] > YEAR_MINUTES:
            chunks.append(cs[cs <= YEAR_MINUTES])
            break
        chunks.append(cs)
        t0 = cs[-1]
    return np.concatenate(chunks), clamped


def _deltas_type1(rng, n):
    return 7.0 * DAY_MINUTES + rng.normal(0.0, 2.0, n)


def _deltas_type2(rng, n):
    return 30.0 * DAY_MINUTES + rng.normal(0.0, 2.0, n)


@dataclass
class SeqStats:
    dt_clamped: int = 0
    delete_guards: int = 0


def make_transactions(trans_type: int, fraud_type, rng: np.random.Generator,
                      mutation_prob: float = 1.0 / 3.0,
                      stats: SeqStats | None = None) -> np.ndarray:
    """Draw one edge's (time, amount) sequence; times in minutes over one year.

    Type 1: weekly payments of one fixed amount ~ N(30, 5^2) > 0, gap jitter
    N(0, 2^2) minutes. Type 2: monthly, per-payment amount ~ N(200, 15^2) > 0.
    Type 3: irregular; per-sequence integer base T ~ round(N(10, 10^2)) >= 1,
    gap = T days + N(0, (T/2)^2) days + U{1..24} hours + U{1..60} minutes,
    amounts ~ Exp(mean 3000) on [10, max], max ~ round(N(220, 100^2)) >= 10.

    Mutations, per transaction with probability ``mutation_prob``:
    fraud A deletes the payment (types 1/2) or divides the amount by 10
    (type 3); fraud B duplicates the payment one minute later (types 1/2)
    or multiplies the amount by 5 (type 3).
    """
    if stats is None:
        stats = SeqStats()
    if trans_type == 1:
        amount0 = float(_positive_normal(rng, 30.0, 5.0, 1)[0])
        times, cl = _accumulate_times(rng, _deltas_type1, 64)
        amounts = np.full(len(times), amount0)
    elif trans_type == 2:
        times, cl = _accumulate_times(rng, _deltas_type2, 16)
        amounts = _positive_normal(rng, 200.0, 15.0, len(times))
    elif trans_type == 3:
        T = max(1, int(round(rng.normal(10.0, 10.0))))
        max_amount = max(10.0, float(round(rng.normal(220.0, 100.0))))

        def deltas(r, n):
            return ((T + r.normal(0.0, T / 2.0, n)) * DAY_MINUTES
                    + r.integers(1, 25, n) * 60.0
                    + r.integers(1, 61, n) * 1.0)

        block = min(int(365.0 / T * 1.3) + 8, 512)
        times, cl = _accumulate_times(rng, deltas, block)
        amounts = _trunc_exp(rng.random(len(times)), 1.0 / 3000.0, 10.0, max_amount)
    else:
        raise ValueError(f"unknown transaction type {trans_type}")
    stats.dt_clamped += cl

    if fraud_type is not None and len(times):
        mask = rng.random(len(times)) < mutation_prob
        if fraud_type == "A":
            if trans_type in (1, 2):
                keep = ~mask
                if not keep.any():
                    keep[0] = True
                    stats.delete_guards += 1
                times, amounts = times[keep], amounts[keep]
            else:
                amounts = np.where(mask, amounts / 10.0, amounts)
        elif fraud_type == "B":
            if trans_type in (1, 2):
                reps = 1 + mask.astype(np.int64)
                times = np.repeat(times, reps)
                amounts = np.repeat(amounts, reps)
                dup_pos = np.cumsum(reps) - 1
                times[dup_pos[mask]] += 1.0
            else:
                amounts = np.where(mask, amounts * 5.0, amounts)
        else:
            raise ValueError(f"unknown fraud type {fraud_type!r}")

    return np.stack([times, amounts], axis=1)


def fraud_assignment(src_label, dst_label, mule_src=None, mule_dst=None,
                     two_hop: bool = False):
    """Mutation class for one directed edge.

    1-hop: A when src is fraud and dst normal, B for the reverse, else None.
    2-hop: the same rule applied to (mule, plain-normal) pairs; edges touching
    fraud vertices, or linking two mules, are untouched.
    """
    if two_hop:
        src_plain = (src_label == LABEL_NORMAL) and not mule_src
        dst_plain = (dst_label == LABEL_NORMAL) and not mule_dst
        if mule_src and dst_plain:
            return "A"
        if src_plain and mule_dst:
            return "B"
        return None
    if src_label == LABEL_FRAUD and dst_label == LABEL_NORMAL:
        return "A"
    if src_label == LABEL_NORMAL and dst_label == LABEL_FRAUD:
        return "B"
    return None


def apply_two_hop(src: np.ndarray, dst: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Mule flags: normal vertices directly adjacent (either direction) to any
    fraud vertex. Public labels are unchanged (mules stay in the normal class;
    the flag is diagnostic only)."""
    fraud = labels == LABEL_FRAUD
    mule = np.zeros(len(labels), dtype=bool)
    sel = fraud[src] & ~fraud[dst]
    mule[dst[sel]] = True
    sel = fraud[dst] & ~fraud[src]
    mule[src[sel]] = True
    return mule


def populate_edges(skel: Skeleton, labels: np.ndarray, cfg: GenConfig,
                   mule: np.ndarray | None = None):
    """Draw transaction type, fraud class and sequence for every edge."""
    edges = []
    stats = SeqStats()
    for k in range(len(skel.src)):
        s, d = int(skel.src[k]), int(skel.dst[k])
        rng = substream(cfg.seed, _S_EDGE, k)
        ttype = int(rng.integers(1, 4))
        ftype = fraud_assignment(
            labels[s], labels[d],
            mule_src=bool(mule[s]) if mule is not None else None,
            mule_dst=bool(mule[d]) if mule is not None else None,
            two_hop=cfg.two_hop,
        )
        seq = make_transactions(ttype, ftype, rng, cfg.mutation_prob, stats)
        edges.append(MultiEdge(s, d, seq, ttype, ftype))
    return edges, stats


def generate_node_features(n: int, seed: int) -> np.ndarray:
    """n x 13 raw feature matrix, identically distributed for every class.

    Columns: employees, turnover, profit, equity, sector one-hot (4),
    region one-hot (5).
    """
    rng = substream(seed, _S_FEATURES)
    out = np.zeros((n, 13), dtype=np.float64)
    out[:, 0] = _trunc_exp(rng.random(n), 0.005, 10.0, 1500.0)
    out[:, 1] = _trunc_exp(rng.random(n), 5e-5, 1e4, 1e7)
    out[:, 2] = out[:, 1] - rng.standard_normal(n) * (0.5 * out[:, 1])
    out[:, 3] = _trunc_exp(rng.random(n), 3e-5, 1e5, 1e7)
    sector_w = 2.0 + np.sin(np.arange(1, 5)) ** 2
    region_w = 3.0 + np.sin(np.arange(1, 6) + 1) ** 2
    sec = np.searchsorted(np.cumsum(sector_w / sector_w.sum()), rng.random(n), side="right")
    reg = np.searchsorted(np.cumsum(region_w / region_w.sum()), rng.random(n), side="right")
    out[np.arange(n), 4 + np.minimum(sec, 3)] = 1.0
    out[np.arange(n), 8 + np.minimum(reg, 4)] = 1.0
    return out


def sector_region_weights():
    """The categorical weights used for the one-hot feature draws."""
    return (2.0 + np.sin(np.arange(1, 5)) ** 2,
            3.0 + np.sin(np.arange(1, 6) + 1) ** 2)


def generate_dataset(cfg: GenConfig) -> Multigraph:
    """Full generation pipeline; deterministic given cfg (seed included)."""
    labels_init = assign_classes(cfg.n_vertices_init, cfg.fraud_ratio, cfg.seed)
    features_init = generate_node_features(cfg.n_vertices_init, cfg.seed)
    skel = generate_skeleton(cfg)
    labels = labels_init[skel.orig_ids]
    features = features_init[skel.orig_ids]

    mule = apply_two_hop(skel.src, skel.dst, labels) if cfg.two_hop else None
    edges, stats = populate_edges(skel, labels, cfg, mule)

    vertices = VertexTable(features=features, labels=labels,
                           hidden_class=mule if cfg.two_hop else None)
    g = Multigraph(vertices=vertices, edges=edges, kind=cfg.kind)
    g.meta.update({
        "seed": cfg.seed,
        "fraud_ratio": cfg.fraud_ratio,
        "generator": cfg.to_dict(),
        "dt_clamped": stats.dt_clamped,
        "delete_guards": stats.delete_guards,
        "original_vertex_ids_removed": int(cfg.n_vertices_init - skel.n_vertices),
    })
    g.meta["normalization"] = normalization_constants(g)
    # vertex id remap kept off the meta blob; the CLI emits it as its own file
    g.skeleton_orig_ids = skel.orig_ids
    return g


def normalization_constants(g: Multigraph) -> dict:
    """Dataset-wide constants recorded in meta and reused by normalization."""
    feats = g.vertices.features
    fmin = feats.min(axis=0) if len(feats) else np.zeros(feats.shape[1])
    fmax = feats.max(axis=0) if len(feats) else np.zeros(feats.shape[1])
    if g.kind == "transport":
        scale = 0.0
        for e in g.edges:
            m = float(np.abs(e.sequence).max()) if e.sequence.size else 0.0
            scale = max(scale, m)
        return {
            "feature_min": [float(x) for x in fmin],
            "feature_max": [float(x) for x in fmax],
            "profile_scale": max(scale, 1.0),
        }
    max_dt = 0.0
    max_amount = 0.0
    for e in g.edges:
        t = e.sequence[:, 0]
        if len(t) > 1:
            max_dt = max(max_dt, float(np.diff(t).max()))
        if len(t):
            max_amount = max(max_amount, float(e.sequence[:, 1].max()))
    return {
        "feature_min": [float(x) for x in fmin],
        "feature_max": [float(x) for x in fmax],
        "log_dt_divisor": max(np.log(max_dt), 1.0) if max_dt > 0 else 1.0,
        "log_amount_divisor": max(np.log(max_amount), 1.0) if max_amount > 0 else 1.0,
    }


def normalize_dataset(g: Multigraph) -> Multigraph:
    """Model-ready copy of ``g``.

    Node features are min-max scaled per column to [0,1]. Financial sequences
    become (log dt / c_dt, log amount / c_amt) rows relative to the previous
    transaction, with the first transaction of every sequence dropped; length-1
    sequences therefore become empty (padded downstream). Transport profiles
    are divided by the recorded dataset-wide scale.
    """
    if g.normalized:
        raise ValueError("dataset is already normalized")
    consts = g.meta.get("normalization") or normalization_constants(g)
    fmin = np.asarray(consts["feature_min"], dtype=np.float64)
    fmax = np.asarray(consts["feature_max"], dtype=np.float64)
    span = fmax - fmin
    span[span == 0] = 1.0
    features = (g.vertices.features - fmin) / span

    edges = []
    if g.kind == "transport":
        scale = float(consts["profile_scale"])
        for e in g.edges:
            edges.append(MultiEdge(e.src, e.dst, e.sequence / scale, e.trans_type, e.fraud_type))
    else:
        c_dt = float(consts["log_dt_divisor"])
        c_amt = float(consts["log_amount_divisor"])
        for e in g.edges:
            t, a = e.sequence[:, 0], e.sequence[:, 1]
            if len(t) <= 1:
                seq = np.zeros((0, 2), dtype=np.float64)
            else:
                dt = np.diff(t)
                seq = np.stack([np.log(dt) / c_dt, np.log(a[1:]) / c_amt], axis=1)
            edges.append(MultiEdge(e.src, e.dst, seq, e.trans_type, e.fraud_type))

    vertices = VertexTable(features=features, labels=g.vertices.labels.copy(),
                           hidden_class=None if g.vertices.hidden_class is None
                           else g.vertices.hidden_class.copy())
    meta = dict(g.meta)
    meta["normalization"] = consts
    return Multigraph(vertices=vertices, edges=edges, kind=g.kind, meta=meta, normalized=True)
