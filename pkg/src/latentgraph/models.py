"""Edge-sequence encoders, latent-relation graph layers, and the four model
families (GCN, DVE, L-GCN, L-GCN+), with length-bucketed edge batching.

Conventions fixed here:
  * bidirectional expansion: for edge u->v with latent vector w, the target v
    aggregates the message from u through the canonical block [w, 0]; the
    source u aggregates the message from v through the inverse block [0, w]
    (``swap_directions`` flips this, for comparison experiments);
  * one shared trainable self-weight vector w_s per model, of length 2L
    (this is the convention that reproduces the reference parameter counts);
  * layer 1 activation relu, layer 2 identity (logits); inter-layer dropout
    0.5 on graph models during training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import SegmentPlan, Tensor
from .graph import Multigraph, undirected_pair_arrays

FAMILIES = ("gcn", "dve", "lgcn", "lgcn_plus")
DEFAULT_BUCKET_BOUNDARIES = (8, 16, 32, 64, 128)


class ModelConfigError(ValueError):
    """Inconsistent model specification or dataset/model kind mismatch."""


@dataclass
class GammaConfig:
    """Configuration of the edge-sequence learning function."""

    kind: str = "transactions"    # "transactions" | "transport"
    K: int = 20                   # convolution kernels (transactions)
    Z: int = 2                    # sequence channels
    L: int = 4                    # latent vector size
    dropout_p: float = 0.2        # transactions only; transport uses none

    def __post_init__(self):
        if self.kind not in ("transactions", "transport"):
            raise ModelConfigError(f"unknown gamma kind {self.kind!r}")
        if self.L < 1 or self.K < 1:
            raise ModelConfigError("L and K must be >= 1")


@dataclass
class ModelSpec:
    """Architecture family plus every size needed to build its parameters."""

    family: str
    n_features: int
    n_classes: int
    hidden: int = 20
    L: int | None = 4
    K: int = 20
    graph_kind: str = "financial"   # "financial" | "transport"
    interlayer_dropout: float = 0.5
    gamma_dropout: float = 0.2
    swap_directions: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family != "gcn" and (self.L is None or self.L < 1):
            raise ModelConfigError(f"{self.family} requires L >= 1")
        if self.graph_kind not in ("financial", "transport"):
            raise ModelConfigError(f"unknown graph kind {self.graph_kind!r}")

    @property
    def gamma_kind(self) -> str:
        return "transactions" if self.graph_kind == "financial" else "transport"

    @property
    def display_name(self) -> str:
        if self.family == "gcn":
            return "GCN"
        if self.family == "dve":
            return f"DVE (L={self.L})"
        suffix = "+" if self.family == "lgcn_plus" else ""
        return f"L{self.L}-GCN{suffix}"

    def to_dict(self) -> dict:
        return {
            "family": self.family, "n_features": self.n_features,
            "n_classes": self.n_classes, "hidden": self.hidden, "L": self.L,
            "K": self.K, "graph_kind": self.graph_kind,
            "interlayer_dropout": self.interlayer_dropout,
            "gamma_dropout": self.gamma_dropout,
            "swap_directions": self.swap_directions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)


# -- parameters ---------------------------------------------------------------

def _glorot(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


def _param_layout(spec: ModelSpec):
    """Ordered (name, shape, init) template; init is 'glorot', 'zeros' or 'ones'."""
    F, C, H, L, K = spec.n_features, spec.n_classes, spec.hidden, spec.L, spec.K
    layout = []

    def gamma(prefix):
        if spec.gamma_kind == "transactions":
            layout.append((f"{prefix}.kernels", (K, 3, 2), "glorot"))
            layout.append((f"{prefix}.conv_b", (K,), "zeros"))
            layout.append((f"{prefix}.fc1_W", (K, 2 * L), "glorot"))
        else:
            layout.append((f"{prefix}.fc1_W", (24, 2 * L), "glorot"))
        layout.append((f"{prefix}.fc1_b", (2 * L,), "zeros"))
        layout.append((f"{prefix}.fc2_W", (2 * L, L), "glorot"))
        layout.append((f"{prefix}.fc2_b", (L,), "zeros"))

    if spec.family == "gcn":
        layout.append(("layer1.W", (F, H), "glorot"))
        layout.append(("layer1.b", (H,), "zeros"))
        layout.append(("layer2.W", (H, C), "glorot"))
        layout.append(("layer2.b", (C,), "zeros"))
    elif spec.family == "dve":
        gamma("gamma")
        layout.append(("head.W", (F + 2 * L, H), "glorot"))
        layout.append(("head.b", (H,), "zeros"))
        layout.append(("out.W", (H, C), "glorot"))
        layout.append(("out.b", (C,), "zeros"))
    elif spec.family == "lgcn":
        layout.append(("w_s", (2 * L,), "ones"))
        gamma("gamma1")
        layout.append(("layer1.W", (2 * L * F, H), "glorot"))
        layout.append(("layer1.b", (H,), "zeros"))
        gamma("gamma2")
        layout.append(("layer2.W", (2 * L * H, C), "glorot"))
        layout.append(("layer2.b", (C,), "zeros"))
    else:  # lgcn_plus
        layout.append(("w_s", (2 * L,), "ones"))
        gamma("gamma1")
        layout.append(("layer1.W1", (2 * L * F, 2 * H), "glorot"))
        layout.append(("layer1.b1", (2 * H,), "zeros"))
        layout.append(("layer1.W2", (2 * H, H), "glorot"))
        layout.append(("layer1.b2", (H,), "zeros"))
        gamma("gamma2")
        layout.append(("layer2.W1", (2 * L * H, 2 * C), "glorot"))
        layout.append(("layer2.b1", (2 * C,), "zeros"))
        layout.append(("layer2.W2", (2 * C, C), "glorot"))
        layout.append(("layer2.b2", (C,), "zeros"))
    return layout


_INIT_STREAM = 100


def init_params(spec: ModelSpec, seed: int) -> dict[str, Tensor]:
    """Fresh trainable parameters: Glorot-uniform weights, zero biases,
    ones for the self-weight vector. Deterministic in ``seed``."""
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=(int(seed), _INIT_STREAM))))
    params: dict[str, Tensor] = {}
    for name, shape, how in _param_layout(spec):
        if how == "glorot":
            if len(shape) == 3:          # conv kernels: fan over window x channels
                fan_in, fan_out = shape[1] * shape[2], shape[0]
            else:
                fan_in, fan_out = shape[0], shape[1]
            data = _glorot(rng, fan_in, fan_out, shape)
        elif how == "ones":
            data = np.ones(shape)
        else:
            data = np.zeros(shape)
        params[name] = Tensor(data, requires_grad=True)
    return params


def parameter_count(params: dict[str, Tensor]) -> int:
    return int(sum(p.data.size for p in params.values()))


# -- batching -----------------------------------------------------------------

@dataclass
class Bucket:
    """Assignment of edges to one padded-capacity group."""

    capacity: int
    edge_ids: np.ndarray
    lengths: np.ndarray

    @property
    def padded_elements(self) -> int:
        return int((self.capacity - self.lengths).sum())


def bucketize_edges(lengths, boundaries) -> list[Bucket]:
    """Assign each sequence to the smallest bucket whose capacity covers its
    length; lengths beyond the last boundary go to an overflow bucket sized to
    the maximum observed length."""
    lengths = np.asarray(lengths, dtype=np.int64)
    bounds = [int(b) for b in boundaries]
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])) or not bounds:
        raise ValueError(f"bucket boundaries must be strictly increasing, got {boundaries}")
    caps = np.asarray(bounds, dtype=np.int64)
    idx = np.searchsorted(caps, lengths, side="left")
    buckets = []
    for b, cap in enumerate(caps):
        ids = np.flatnonzero(idx == b)
        if len(ids):
            buckets.append(Bucket(capacity=int(cap), edge_ids=ids, lengths=lengths[ids]))
    overflow = np.flatnonzero(idx == len(caps))
    if len(overflow):
        buckets.append(Bucket(capacity=int(lengths[overflow].max()),
                              edge_ids=overflow, lengths=lengths[overflow]))
    return buckets


def padded_elements(buckets: list[Bucket]) -> int:
    return sum(b.padded_elements for b in buckets)


def prepare_sequence_batches(sequences, boundaries=None) -> "ad.SequenceBatchSet":
    """Build the window tensors the fused conv+pool op consumes.

    ``boundaries=None`` groups by exact length (zero padded positions); an
    empty normalized sequence is treated as one all-zero row. Capacities are
    floored at 3 so every edge yields at least one convolution window.
    """
    Z = 2
    lengths = np.array([max(len(s), 1) for s in sequences], dtype=np.int64)
    if boundaries is None:
        bounds = np.unique(lengths)
        buckets = bucketize_edges(lengths, bounds)
    else:
        buckets = bucketize_edges(lengths, boundaries)

    E = len(sequences)
    pieces = []
    starts = np.zeros(E, dtype=np.int64)
    stored = np.zeros(E, dtype=np.int64)
    valid = np.zeros(E, dtype=np.int64)
    n_padded = 0
    offset = 0
    for bucket in buckets:
        cap = max(bucket.capacity, 3)
        P = cap - 2
        perm = np.argsort(bucket.edge_ids)
        ids = bucket.edge_ids[perm]
        lens = bucket.lengths[perm]
        nb = len(ids)
        padded = np.zeros((nb, cap, Z))
        for row, eid in enumerate(ids):
            seq = sequences[eid]
            if len(seq):
                padded[row, :len(seq), :] = seq
        # window rows per position: [x[t], x[t+1], x[t+2]] flattened
        win = np.lib.stride_tricks.sliding_window_view(padded, 3, axis=1)
        pieces.append(win.transpose(0, 1, 3, 2).reshape(nb * P, 3 * Z))
        starts[ids] = offset + np.arange(nb) * P
        stored[ids] = P
        valid[ids] = np.maximum(lens - 2, 1)
        n_padded += bucket.padded_elements
        offset += nb * P
    windows = (np.concatenate(pieces, axis=0) if pieces
               else np.zeros((0, 3 * Z)))
    return ad.SequenceBatchSet(windows=np.ascontiguousarray(windows), starts=starts,
                               stored=stored, valid=valid, n_edges=E,
                               padded_elements=n_padded)


def aggregate_week_profile(profile: np.ndarray) -> np.ndarray:
    """Collapse a (168, 2) week-hour profile into the mean 24-hour cycle with
    two-hour bins: a flat 24-vector ordered bin-major ((bin, channel) pairs)."""
    profile = np.asarray(profile, dtype=np.float64)
    if profile.shape != (168, 2):
        raise ValueError(f"expected a (168, 2) profile, got {profile.shape}")
    # row d*24+h is day d, hour h; each bin averages its 7x2 (day, hour) cells
    bins = profile.reshape(7, 12, 2, 2).mean(axis=(0, 2))
    return bins.reshape(24)


def expand_bidirectional(w, direction: str):
    """Place an L-vector (or (E, L) batch) in the canonical [w, 0] or inverse
    [0, w] half of the 2L-wide bidirectional embedding."""
    w = ad.as_tensor(w)
    wd = w.data
    batched = wd.ndim == 2
    if not batched:
        w2 = ad.reshape(w, (1, wd.shape[0]))
        zeros = Tensor(np.zeros_like(w2.data))
        parts = [w2, zeros] if direction == "canonical" else [zeros, w2]
        if direction not in ("canonical", "inverse"):
            raise ValueError(f"direction must be 'canonical' or 'inverse', got {direction!r}")
        return ad.reshape(ad.concat_cols(parts), (2 * wd.shape[0],))
    zeros = Tensor(np.zeros_like(wd))
    if direction == "canonical":
        parts = [w, zeros]
    elif direction == "inverse":
        parts = [zeros, w]
    else:
        raise ValueError(f"direction must be 'canonical' or 'inverse', got {direction!r}")
    return ad.concat_cols(parts)


# -- graph preprocessing ------------------------------------------------------

@dataclass
class GraphTensors:
    """Everything a forward pass needs, precomputed once per (graph, spec)."""

    n: int
    E: int
    X: Tensor
    labels: np.ndarray
    src: np.ndarray = None
    dst: np.ndarray = None
    plan_dst: SegmentPlan = None
    plan_src: SegmentPlan = None
    batches: list = None                 # transactions gamma input
    profiles: Tensor = None              # transport gamma input
    in_counts: np.ndarray = None
    out_counts: np.ndarray = None
    und_targets: np.ndarray = None       # GCN: binarized undirected pairs
    und_sources: np.ndarray = None
    und_counts: np.ndarray = None
    und_plan_t: SegmentPlan = None
    und_plan_s: SegmentPlan = None

    @classmethod
    def build(cls, g: Multigraph, spec: ModelSpec,
              bucket_boundaries=None) -> "GraphTensors":
        expected = "financial" if g.kind.startswith("financial") else "transport"
        if spec.graph_kind != expected:
            raise ModelConfigError(
                f"model expects {spec.graph_kind} data but dataset kind is {g.kind!r}")
        if spec.n_features != g.vertices.n_features:
            raise ModelConfigError(
                f"model expects {spec.n_features} features, dataset has {g.vertices.n_features}")
        if not g.normalized:
            raise ModelConfigError("graph must be normalized before model use")
        n = g.n_vertices
        gt = cls(n=n, E=g.n_edges, X=Tensor(g.vertices.features),
                 labels=g.vertices.labels)
        if spec.family == "gcn":
            t, s, c = undirected_pair_arrays(g)
            gt.und_targets, gt.und_sources, gt.und_counts = t, s, c
            gt.und_plan_t = SegmentPlan.build(t, n)
            gt.und_plan_s = SegmentPlan.build(s, n)
            return gt
        src, dst = g.endpoint_arrays()
        gt.src, gt.dst = src, dst
        gt.plan_dst = SegmentPlan.build(dst, n)
        gt.plan_src = SegmentPlan.build(src, n)
        gt.in_counts = np.bincount(dst, minlength=n).astype(np.float64)
        gt.out_counts = np.bincount(src, minlength=n).astype(np.float64)
        if spec.gamma_kind == "transactions":
            gt.batches = prepare_sequence_batches([e.sequence for e in g.edges],
                                                  boundaries=bucket_boundaries)
        else:
            rows = np.vstack([e.sequence.reshape(-1) for e in g.edges]) \
                if g.n_edges else np.zeros((0, 24))
            gt.profiles = Tensor(rows)
        return gt


# -- learning mechanisms ------------------------------------------------------

_GAMMA_EVALS = {"count": 0}   # instrumentation for the one-eval-per-layer invariant


def gamma_transactions(batch_set, params: dict, prefix: str,
                       training: bool = False, rng=None,
                       dropout_p: float = 0.2) -> Tensor:
    """Transaction-sequence encoder: shared conv + masked max pool + relu,
    then K->2L and 2L->L fully connected relu stages (dropout on the 2L
    stage while training). Output is (E, L), nonnegative."""
    _GAMMA_EVALS["count"] += 1
    pooled = ad.conv_maxpool(batch_set, params[f"{prefix}.kernels"],
                             params[f"{prefix}.conv_b"])
    x = ad.relu(pooled)
    x = ad.relu(ad.add_bias(ad.matmul(x, params[f"{prefix}.fc1_W"]),
                            params[f"{prefix}.fc1_b"]))
    x = ad.dropout(x, dropout_p, training, rng)
    return ad.relu(ad.add_bias(ad.matmul(x, params[f"{prefix}.fc2_W"]),
                               params[f"{prefix}.fc2_b"]))


def gamma_transport(profiles, params: dict, prefix: str) -> Tensor:
    """Transport-profile encoder: 24 -> 2L -> L sigmoid MLP on the binned
    profile; outputs lie in (0, 1)."""
    _GAMMA_EVALS["count"] += 1
    x = ad.sigmoid(ad.add_bias(ad.matmul(profiles, params[f"{prefix}.fc1_W"]),
                               params[f"{prefix}.fc1_b"]))
    return ad.sigmoid(ad.add_bias(ad.matmul(x, params[f"{prefix}.fc2_W"]),
                                  params[f"{prefix}.fc2_b"]))


def _eval_gamma(spec: ModelSpec, gt: GraphTensors, params, prefix,
                training, rng) -> Tensor:
    if spec.gamma_kind == "transactions":
        return gamma_transactions(gt.batches, params, prefix,
                                  training=training, rng=rng,
                                  dropout_p=spec.gamma_dropout)
    return gamma_transport(gt.profiles, params, prefix)


# -- layers -------------------------------------------------------------------

def _apply_act(x: Tensor, activation):
    if activation == "relu":
        return ad.relu(x)
    if activation == "sigmoid":
        return ad.sigmoid(x)
    if activation is None:
        return x
    raise ModelConfigError(f"unknown activation {activation!r}")


def gcn_layer(H, targets, sources, counts, W, b, activation="relu",
              plan_t: SegmentPlan | None = None,
              plan_s: SegmentPlan | None = None) -> Tensor:
    """Mean-aggregation graph convolution over binarized undirected neighbor
    sets: act((1/c_i)(h_i + sum_j h_j) W + b) with c_i = deg_i + 1."""
    n = H.data.shape[0] if isinstance(H, Tensor) else len(H)
    H = ad.as_tensor(H)
    gathered = ad.take_rows(H, sources, scatter_plan=plan_s)
    agg = ad.segment_sum(gathered, targets, n, plan=plan_t)
    tot = ad.add(agg, H)
    pre = ad.rowwise_div(tot, np.asarray(counts, dtype=np.float64) + 1.0)
    return _apply_act(ad.add_bias(ad.matmul(pre, W), b), activation)


def _latent_norm(gamma: Tensor, w_s: Tensor, src, dst, n,
                 plan_dst=None, plan_src=None) -> Tensor:
    """Normalization constants c_i = sum(w_s) + sum over incoming messages of
    their latent-weight sums, clamped below at a tiny epsilon."""
    sums = ad.sum_rows(gamma)
    c = ad.add(ad.segment_sum(sums, dst, n, plan=plan_dst),
               ad.segment_sum(sums, src, n, plan=plan_src))
    c = ad.add_scalar(c, ad.sum_all(w_s))
    return ad.clamp_min(c, ad.EPS_CLAMP)


def _direction_slices(W: Tensor, L: int, F: int, swap: bool):
    top = ad.row_slice(W, 0, L * F)
    bottom = ad.row_slice(W, L * F, 2 * L * F)
    return (bottom, top) if swap else (top, bottom)


def lgcn_layer(H, gamma, src, dst, w_s, W, b, activation="relu",
               plans=None, swap_directions=False) -> Tensor:
    """Latent-relation graph convolution, single shared weight matrix:

        h_i' = act( (1/c_i) [ w_s (x) h_i + sum over messages
                              w'_e (x) h_source ] W + b )

    where each directed multi-edge contributes its canonical expansion to its
    target and its inverse expansion to its source, and (x) is the flattened
    outer product.
    """
    H, gamma = ad.as_tensor(H), ad.as_tensor(gamma)
    n = H.data.shape[0]
    F = H.data.shape[1]
    L = gamma.data.shape[1]
    plan_dst, plan_src = (plans or (None, None))[:2]
    W_can, W_inv = _direction_slices(W, L, F, swap_directions)

    h_src = ad.take_rows(H, src, scatter_plan=plan_src)
    h_dst = ad.take_rows(H, dst, scatter_plan=plan_dst)
    msg_can = ad.matmul(ad.kron_flatten(gamma, h_src), W_can)   # aggregates at dst
    msg_inv = ad.matmul(ad.kron_flatten(gamma, h_dst), W_inv)   # aggregates at src
    agg = ad.add(ad.segment_sum(msg_can, dst, n, plan=plan_dst),
                 ad.segment_sum(msg_inv, src, n, plan=plan_src))
    self_term = ad.matmul(ad.kron_flatten(w_s, H), W)
    c = _latent_norm(gamma, w_s, src, dst, n, plan_dst, plan_src)
    pre = ad.rowwise_div(ad.add(agg, self_term), c)
    return _apply_act(ad.add_bias(pre, b), activation)


def lgcn_plus_layer(H, gamma, src, dst, w_s, W1, b1, W2, b2,
                    activation="relu", plans=None,
                    swap_directions=False) -> Tensor:
    """Latent-relation layer with a per-message two-layer map applied before
    aggregation:

        h_i' = act( f((1/c_i) w_s (x) h_i)
                    + sum over messages f((1/c_i) w'_e (x) h_source) ),
        f(x) = relu(x W1 + b1) W2 + b2.

    The 1/c_i factor uses the aggregating vertex's constant and is applied
    inside f, per message.
    """
    H, gamma = ad.as_tensor(H), ad.as_tensor(gamma)
    n = H.data.shape[0]
    F = H.data.shape[1]
    L = gamma.data.shape[1]
    plan_dst, plan_src = (plans or (None, None))[:2]
    W1_can, W1_inv = _direction_slices(W1, L, F, swap_directions)
    c = _latent_norm(gamma, w_s, src, dst, n, plan_dst, plan_src)

    def f(x, W1_part):
        return ad.add_bias(ad.matmul(ad.relu(ad.add_bias(ad.matmul(x, W1_part), b1)), W2), b2)

    h_src = ad.take_rows(H, src, scatter_plan=plan_src)
    h_dst = ad.take_rows(H, dst, scatter_plan=plan_dst)
    # 1/c commutes into the outer product; scaling the L-vector is cheaper
    gamma_can = ad.rowwise_div(gamma, ad.take_rows(c, dst, scatter_plan=plan_dst))
    gamma_inv = ad.rowwise_div(gamma, ad.take_rows(c, src, scatter_plan=plan_src))
    msg_can = f(ad.kron_flatten(gamma_can, h_src), W1_can)
    msg_inv = f(ad.kron_flatten(gamma_inv, h_dst), W1_inv)
    self_term = f(ad.kron_flatten(w_s, ad.rowwise_div(H, c)), W1)
    agg = ad.add(ad.segment_sum(msg_can, dst, n, plan=plan_dst),
                 ad.segment_sum(msg_inv, src, n, plan=plan_src))
    return _apply_act(ad.add(agg, self_term), activation)


def dve_embed(X, gamma, src, dst, n, in_counts, out_counts,
              plans=None) -> Tensor:
    """Append the per-vertex means of incoming- and outgoing-edge latent
    vectors to the raw features (zero blocks where a vertex has no edges)."""
    X, gamma = ad.as_tensor(X), ad.as_tensor(gamma)
    plan_dst, plan_src = (plans or (None, None))[:2]
    in_mean = ad.rowwise_div(ad.segment_sum(gamma, dst, n, plan=plan_dst),
                             np.maximum(in_counts, 1.0))
    out_mean = ad.rowwise_div(ad.segment_sum(gamma, src, n, plan=plan_src),
                              np.maximum(out_counts, 1.0))
    return ad.concat_cols([X, in_mean, out_mean])


# -- full models ----------------------------------------------------------------

def forward_model(spec: ModelSpec, gt: GraphTensors, params: dict,
                  training: bool = False, rng=None,
                  export_embeddings: bool = False):
    """Logits for every vertex; optionally also the layer-1 latent edge
    vectors (the embedding-export payload). Deterministic when not training."""
    act1 = "relu"
    embeddings = None
    if spec.family == "gcn":
        h = gcn_layer(gt.X, gt.und_targets, gt.und_sources, gt.und_counts,
                      params["layer1.W"], params["layer1.b"], act1,
                      plan_t=gt.und_plan_t, plan_s=gt.und_plan_s)
        h = ad.dropout(h, spec.interlayer_dropout, training, rng)
        logits = gcn_layer(h, gt.und_targets, gt.und_sources, gt.und_counts,
                           params["layer2.W"], params["layer2.b"], None,
                           plan_t=gt.und_plan_t, plan_s=gt.und_plan_s)
    elif spec.family == "dve":
        gamma = _eval_gamma(spec, gt, params, "gamma", training, rng)
        embeddings = gamma.data
        expanded = dve_embed(gt.X, gamma, gt.src, gt.dst, gt.n,
                             gt.in_counts, gt.out_counts,
                             plans=(gt.plan_dst, gt.plan_src))
        h = ad.relu(ad.add_bias(ad.matmul(expanded, params["head.W"]), params["head.b"]))
        logits = ad.add_bias(ad.matmul(h, params["out.W"]), params["out.b"])
    elif spec.family == "lgcn":
        gamma1 = _eval_gamma(spec, gt, params, "gamma1", training, rng)
        embeddings = gamma1.data
        h = lgcn_layer(gt.X, gamma1, gt.src, gt.dst, params["w_s"],
                       params["layer1.W"], params["layer1.b"], act1,
                       plans=(gt.plan_dst, gt.plan_src),
                       swap_directions=spec.swap_directions)
        h = ad.dropout(h, spec.interlayer_dropout, training, rng)
        gamma2 = _eval_gamma(spec, gt, params, "gamma2", training, rng)
        logits = lgcn_layer(h, gamma2, gt.src, gt.dst, params["w_s"],
                            params["layer2.W"], params["layer2.b"], None,
                            plans=(gt.plan_dst, gt.plan_src),
                            swap_directions=spec.swap_directions)
    else:
        gamma1 = _eval_gamma(spec, gt, params, "gamma1", training, rng)
        embeddings = gamma1.data
        h = lgcn_plus_layer(gt.X, gamma1, gt.src, gt.dst, params["w_s"],
                            params["layer1.W1"], params["layer1.b1"],
                            params["layer1.W2"], params["layer1.b2"], act1,
                            plans=(gt.plan_dst, gt.plan_src),
                            swap_directions=spec.swap_directions)
        h = ad.dropout(h, spec.interlayer_dropout, training, rng)
        gamma2 = _eval_gamma(spec, gt, params, "gamma2", training, rng)
        logits = lgcn_plus_layer(h, gamma2, gt.src, gt.dst, params["w_s"],
                                 params["layer2.W1"], params["layer2.b1"],
                                 params["layer2.W2"], params["layer2.b2"], None,
                                 plans=(gt.plan_dst, gt.plan_src),
                                 swap_directions=spec.swap_directions)
    if export_embeddings:
        return logits, embeddings
    return logits
