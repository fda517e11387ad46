"""Reverse-mode automatic differentiation over the fixed operation set used by
the models, plus the Adam optimizer.

A ``Tape`` records one forward pass; ``backward(tape, loss)`` replays it in
exact reverse order. Everything is float64. Matrix products route through
helpers that pad singleton operands to two rows/columns: on this BLAS that
makes per-row results bit-identical regardless of batch size, which the
batched-versus-unbatched encoder contract relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FINITE_CHECKS = True
EPS_CLAMP = 1e-12


class ShapeError(ValueError):
    """Operands have incompatible shapes for the requested operation."""


class AutodiffError(RuntimeError):
    """Tape misuse or a numerical invariant violation (NaN/Inf)."""


class Tensor:
    """A float64 array with a gradient-participation flag."""

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    __slots__ = ("out_id", "inputs", "backward_fn", "name")

    def __init__(self, out_id, inputs, backward_fn, name):
        self.out_id = out_id
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.name = name


_ACTIVE: list["Tape"] = []


class Tape:
    """Ordered record of one forward pass; single use."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self._outputs: dict[int, Tensor] = {}

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.pop()
        return False

    def records(self, t: Tensor) -> bool:
        return id(t) in self._outputs


def _check_finite(name: str, arr: np.ndarray):
    if FINITE_CHECKS and not np.all(np.isfinite(arr)):
        raise AutodiffError(f"{name}: produced non-finite values")


def _emit(name: str, out_data: np.ndarray, inputs, backward_fn) -> Tensor:
    """Wrap an op result, recording it when a tape is active and needed."""
    _check_finite(name, out_data)
    needs = any(isinstance(x, Tensor) and x.requires_grad for x in inputs)
    out = Tensor(out_data, requires_grad=needs)
    if needs and _ACTIVE:
        tape = _ACTIVE[-1]
        tensors = tuple(x for x in inputs if isinstance(x, Tensor))
        node = _Node(id(out), tensors, backward_fn, name)
        tape.nodes.append(node)
        tape._outputs[id(out)] = out
    return out


class Gradients:
    """Gradient lookup for one backward pass; absent parameters read as zero."""

    def __init__(self, table: dict[int, np.ndarray]):
        self._table = table

    def get(self, t: Tensor) -> np.ndarray:
        g = self._table.get(id(t))
        return np.zeros(t.data.shape) if g is None else g


def backward(tape: Tape, loss: Tensor) -> Gradients:
    """Exact reverse-mode accumulation from a scalar loss on the tape."""
    if loss.data.size != 1:
        raise AutodiffError(f"loss must be scalar, got shape {loss.data.shape}")
    if not tape.records(loss):
        raise AutodiffError("loss is not an output of this tape")
    table: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = table.pop(node.out_id, None)
        if g is None:
            continue
        contribs = node.backward_fn(g)
        for inp, contrib in zip(node.inputs, contribs):
            if contrib is None or not inp.requires_grad:
                continue
            prev = table.get(id(inp))
            if prev is None:
                table[id(inp)] = contrib
            else:
                prev += contrib
    return Gradients(table)


# -- bit-stable matmul helpers ------------------------------------------------

def _mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(m,k)@(k,n); pads m==1 to keep per-row results batch-size independent."""
    if a.shape[0] == 1:
        return (np.vstack([a, np.zeros_like(a)]) @ b)[:1]
    return a @ b


def _mm_cols(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(k,c)@(c,m); pads m==1 to keep per-column results batch independent."""
    if b.shape[1] == 1:
        return (a @ np.hstack([b, np.zeros_like(b)]))[:, :1]
    return a @ b


# -- core ops -----------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: {a.data.shape} @ {b.data.shape}")
    ad, bd = a.data, b.data

    def back(g):
        return _mm(g, bd.T), _mm(ad.T, g)

    return _emit("matmul", _mm(ad, bd), (a, b), back)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add: {a.data.shape} vs {b.data.shape}")
    return _emit("add", a.data + b.data, (a, b), lambda g: (g, g))


def add_bias(x, b) -> Tensor:
    x, b = as_tensor(x), as_tensor(b)
    if x.data.ndim != 2 or b.data.ndim != 1 or x.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"add_bias: {x.data.shape} + {b.data.shape}")
    return _emit("add_bias", x.data + b.data[None, :], (x, b),
                 lambda g: (g, g.sum(axis=0)))


def add_scalar(x, s) -> Tensor:
    """Broadcast-add a scalar tensor to every element of x."""
    x, s = as_tensor(x), as_tensor(s)
    if s.data.size != 1:
        raise ShapeError(f"add_scalar: scalar operand has shape {s.data.shape}")
    return _emit("add_scalar", x.data + s.data.reshape(()), (x, s),
                 lambda g: (g, np.array(g.sum())))


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)
    return _emit("scale", x.data * c, (x,), lambda g: (g * c,))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return _emit("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = 1.0 / (1.0 + np.exp(-x.data))
    return _emit("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def concat_cols(parts) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    widths = [p.data.shape[1] for p in parts]
    rows = {p.data.shape[0] for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: mismatched row counts {sorted(rows)}")
    out = np.concatenate([p.data for p in parts], axis=1)
    offs = np.concatenate([[0], np.cumsum(widths)])

    def back(g):
        return tuple(g[:, offs[i]:offs[i + 1]] for i in range(len(parts)))

    return _emit("concat_cols", out, tuple(parts), back)


def concat_rows(parts) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    heights = [p.data.shape[0] for p in parts]
    out = np.concatenate([p.data for p in parts], axis=0)
    offs = np.concatenate([[0], np.cumsum(heights)])

    def back(g):
        return tuple(g[offs[i]:offs[i + 1]] for i in range(len(parts)))

    return _emit("concat_rows", out, tuple(parts), back)


def row_slice(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    n = x.data.shape[0]

    def back(g):
        full = np.zeros_like(x.data)
        full[start:stop] = g
        return (full,)

    if not (0 <= start <= stop <= n):
        raise ShapeError(f"row_slice: [{start}:{stop}] out of range for {x.data.shape}")
    return _emit("row_slice", x.data[start:stop].copy(), (x,), back)


def clamp_min(x, floor: float) -> Tensor:
    x = as_tensor(x)
    mask = x.data > floor
    return _emit("clamp_min", np.where(mask, x.data, floor), (x,), lambda g: (g * mask,))


def rowwise_div(x, c) -> Tensor:
    """Divide each row of x by the matching entry of the length-m vector c.

    Differentiable in both operands (c may be a plain array for constants).
    """
    x, c = as_tensor(x), as_tensor(c)
    if c.data.ndim != 1 or x.data.shape[0] != c.data.shape[0]:
        raise ShapeError(f"rowwise_div: {x.data.shape} / {c.data.shape}")
    cd = c.data if x.data.ndim == 1 else c.data[:, None]
    out = x.data / cd

    def back(g):
        dx = g / cd
        dc = -(g * out) / cd
        if x.data.ndim > 1:
            dc = dc.sum(axis=1)
        return dx, dc

    return _emit("rowwise_div", out, (x, c), back)


def kron_flatten(w, h) -> Tensor:
    """Flattened outer product, w-major: out[.., r*F + f] = w[.., r] * h[.., f].

    Accepts (R,)x(F,) -> (R*F,), (E,R)x(E,F) -> (E,R*F), and a 1-D w broadcast
    against a 2-D h.
    """
    w, h = as_tensor(w), as_tensor(h)
    wd, hd = w.data, h.data
    if wd.ndim == 1 and hd.ndim == 1:
        out = (wd[:, None] * hd[None, :]).reshape(-1)
        R, F = wd.shape[0], hd.shape[0]

        def back(g):
            g3 = g.reshape(R, F)
            return g3 @ hd, wd @ g3

        return _emit("kron_flatten", out, (w, h), back)
    if wd.ndim == 1 and hd.ndim == 2:
        E, F = hd.shape
        R = wd.shape[0]
        out = (wd[None, :, None] * hd[:, None, :]).reshape(E, R * F)

        def back(g):
            g3 = g.reshape(E, R, F)
            dw = (g3 * hd[:, None, :]).sum(axis=(0, 2))
            dh = (g3 * wd[None, :, None]).sum(axis=1)
            return dw, dh

        return _emit("kron_flatten", out, (w, h), back)
    if wd.ndim == 2 and hd.ndim == 2:
        if wd.shape[0] != hd.shape[0]:
            raise ShapeError(f"kron_flatten: row counts {wd.shape} vs {hd.shape}")
        E, R = wd.shape
        F = hd.shape[1]
        out = (wd[:, :, None] * hd[:, None, :]).reshape(E, R * F)

        def back(g):
            g3 = g.reshape(E, R, F)
            dw = (g3 * hd[:, None, :]).sum(axis=2)
            dh = (g3 * wd[:, :, None]).sum(axis=1)
            return dw, dh

        return _emit("kron_flatten", out, (w, h), back)
    raise ShapeError(f"kron_flatten: unsupported shapes {wd.shape} x {hd.shape}")


@dataclass
class SegmentPlan:
    """Precomputed stable ordering of messages by target for fast segment sums."""

    n: int
    order: np.ndarray          # argsort of targets, stable
    starts: np.ndarray         # reduceat start offsets per occupied target
    occupied: np.ndarray       # occupied target ids, ascending

    @classmethod
    def build(cls, targets: np.ndarray, n: int) -> "SegmentPlan":
        targets = np.asarray(targets, dtype=np.int64)
        if len(targets) and (targets.min() < 0 or targets.max() >= n):
            bad = int(np.argmax((targets < 0) | (targets >= n)))
            raise ShapeError(f"segment_sum: target {targets[bad]} out of range 0..{n - 1}")
        order = np.argsort(targets, kind="stable")
        sorted_t = targets[order]
        occupied, starts = np.unique(sorted_t, return_index=True)
        return cls(n=n, order=order, starts=starts, occupied=occupied)


def segment_sum(messages, targets, n: int, plan: SegmentPlan | None = None) -> Tensor:
    """out[v] = sum of message rows with target v; fixed summation order
    (message index order within each target)."""
    messages = as_tensor(messages)
    targets = np.asarray(targets, dtype=np.int64)
    md = messages.data
    if md.shape[0] != targets.shape[0]:
        raise ShapeError(f"segment_sum: {md.shape[0]} messages vs {targets.shape[0]} targets")
    if plan is None:
        plan = SegmentPlan.build(targets, n)
    out_shape = (n,) if md.ndim == 1 else (n, md.shape[1])
    out = np.zeros(out_shape)
    if len(targets):
        sorted_md = md[plan.order]
        sums = np.add.reduceat(sorted_md, plan.starts, axis=0)
        out[plan.occupied] = sums

    def back(g):
        return (g[targets],)

    return _emit("segment_sum", out, (messages,), back)


def take_rows(x, idx, scatter_plan: SegmentPlan | None = None) -> Tensor:
    """Row gather x[idx]; the adjoint is a segment sum over idx."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    n = x.data.shape[0]
    if len(idx) and (idx.min() < 0 or idx.max() >= n):
        raise ShapeError(f"take_rows: index out of range for {x.data.shape}")
    plan = scatter_plan or SegmentPlan.build(idx, n)

    def back(g):
        out = np.zeros_like(x.data)
        if len(idx):
            sorted_g = g[plan.order]
            out[plan.occupied] = np.add.reduceat(sorted_g, plan.starts, axis=0)
        return (out,)

    return _emit("take_rows", x.data[idx], (x,), back)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    old = x.data.shape
    return _emit("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def sum_rows(x) -> Tensor:
    """Row sums of a 2-D tensor -> 1-D."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"sum_rows: need 2-D, got {x.data.shape}")
    w = x.data.shape[1]
    return _emit("sum_rows", x.data.sum(axis=1), (x,),
                 lambda g: (np.repeat(g[:, None], w, axis=1),))


def sum_all(x) -> Tensor:
    x = as_tensor(x)
    return _emit("sum_all", np.array(x.data.sum()), (x,),
                 lambda g: (np.full_like(x.data, float(g)),))


def dropout(x, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with probability p, survivors scaled by 1/(1-p).
    Identity when not training or p == 0."""
    x = as_tensor(x)
    if not (0.0 <= p < 1.0):
        raise ShapeError(f"dropout: p must be in [0,1), got {p}")
    if not training or p == 0.0:
        return _emit("dropout", x.data.copy(), (x,), lambda g: (g,))
    if rng is None:
        raise ValueError("dropout: rng required when training with p > 0")
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
    return _emit("dropout", x.data * mask, (x,), lambda g: (g * mask,))


def weighted_cross_entropy(logits, labels, class_weights, mask_idx) -> Tensor:
    """Mean over masked nodes of class_weights[y] * (-log softmax(logits)[y]),
    max-shift stabilized."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    class_weights = np.asarray(class_weights, dtype=np.float64)
    mask_idx = np.asarray(mask_idx, dtype=np.int64)
    if mask_idx.size == 0:
        raise ShapeError("weighted_cross_entropy: empty mask")
    sub = logits.data[mask_idx]
    y = labels[mask_idx]
    w = class_weights[y]
    shifted = sub - sub.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    m = len(mask_idx)
    loss = float((w * -logp[np.arange(m), y]).mean())

    def back(g):
        gs = float(g)
        p = np.exp(logp)
        d_sub = p * w[:, None]
        d_sub[np.arange(m), y] -= w
        d_sub *= gs / m
        full = np.zeros_like(logits.data)
        full[mask_idx] = d_sub
        return (full,)

    return _emit("weighted_cross_entropy", np.array(loss), (logits,), back)


# -- sequence encoder ops -----------------------------------------------------

def _im2col_T(seq: np.ndarray) -> np.ndarray:
    """(T, Z) sequence -> (3Z, T-2) window matrix, window-major columns."""
    T, Z = seq.shape
    P = T - 2
    cols = np.empty((3 * Z, P))
    for d in range(3):
        cols[d * Z:(d + 1) * Z, :] = seq[d:d + P, :].T
    return cols


def conv1d(seq, kernels, bias) -> Tensor:
    """Valid 1-D cross-correlation of a (T, Z) sequence with K size-3 kernels:
    out[k, t] = sum_{d<3, z<Z} kernels[k, d, z] * seq[t+d, z] + bias[k]."""
    seq, kernels, bias = as_tensor(seq), as_tensor(kernels), as_tensor(bias)
    sd, kd, bd = seq.data, kernels.data, bias.data
    if sd.ndim != 2:
        raise ShapeError(f"conv1d: sequence must be 2-D, got {sd.shape}")
    T, Z = sd.shape
    if T < 3:
        raise ShapeError(f"conv1d: sequence length {T} < kernel size 3 (pad upstream)")
    if kd.ndim != 3 or kd.shape[1] != 3 or kd.shape[2] != Z:
        raise ShapeError(f"conv1d: kernels {kd.shape} incompatible with Z={Z}")
    K = kd.shape[0]
    if bd.shape != (K,):
        raise ShapeError(f"conv1d: bias {bd.shape} != ({K},)")
    colsT = _im2col_T(sd)                       # (3Z, P)
    out = _mm_cols(kd.reshape(K, 3 * Z), colsT) + bd[:, None]

    def back(g):
        dk = _mm(g, colsT.T).reshape(K, 3, Z)
        db = g.sum(axis=1)
        dcols = _mm(kd.reshape(K, 3 * Z).T, g)  # (3Z, P)
        dseq = np.zeros_like(sd)
        P = T - 2
        for d in range(3):
            dseq[d:d + P, :] += dcols[d * Z:(d + 1) * Z, :].T
        return dseq, dk, db

    return _emit("conv1d", out, (seq, kernels, bias), back)


def global_maxpool(feature_map) -> Tensor:
    """Per-kernel maximum of a (K, M) map; gradient routes to the first
    maximal position of each row."""
    fm = as_tensor(feature_map)
    d = fm.data
    if d.ndim != 2 or d.shape[1] < 1:
        raise ShapeError(f"global_maxpool: need (K, M>=1), got {d.shape}")
    arg = d.argmax(axis=1)
    out = d[np.arange(d.shape[0]), arg]

    def back(g):
        full = np.zeros_like(d)
        full[np.arange(d.shape[0]), arg] = g
        return (full,)

    return _emit("global_maxpool", out, (fm,), back)


@dataclass
class SequenceBatchSet:
    """All sequences of a dataset prepared for the fused conv+pool op.

    ``windows`` stacks every edge's stored convolution windows as rows of
    3Z values (window-position major); edge e owns rows
    [starts[e], starts[e] + stored[e]), of which the first valid[e] are
    scanned by the pooling (the rest exist only under capacity padding).
    """

    windows: np.ndarray          # (total_windows, 3Z)
    starts: np.ndarray           # (E,) first window row per edge
    stored: np.ndarray           # (E,) stored windows per edge
    valid: np.ndarray            # (E,) windows the pool may scan (>= 1)
    n_edges: int
    padded_elements: int


try:  # pragma: no cover - exercised implicitly
    import numba as _numba
    _numba.config.THREADING_LAYER = "workqueue"

    @_numba.njit(parallel=True, cache=True)
    def _conv_pool_kernel(windows, k2dT, bias, starts, valid, out, argpos):
        # k2dT is (6, K): z-leading layout vectorizes the kernel loop
        E, K = out.shape
        for e in _numba.prange(E):
            s0 = starts[e]
            for k in range(K):
                out[e, k] = -1e300
            for j in range(valid[e]):
                row = s0 + j
                w0 = windows[row, 0]
                w1 = windows[row, 1]
                w2 = windows[row, 2]
                w3 = windows[row, 3]
                w4 = windows[row, 4]
                w5 = windows[row, 5]
                for k in range(K):
                    acc = (bias[k] + k2dT[0, k] * w0 + k2dT[1, k] * w1
                           + k2dT[2, k] * w2 + k2dT[3, k] * w3
                           + k2dT[4, k] * w4 + k2dT[5, k] * w5)
                    if acc > out[e, k]:
                        out[e, k] = acc
                        argpos[e, k] = j

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def _conv_pool_numpy(windows, k2d, bias, starts, valid):
    """Vectorized fallback: matmul + per-edge masked reduceat pooling."""
    E = len(starts)
    K = k2d.shape[0]
    conv = _mm(windows, k2d.T) + bias[None, :]          # (M, K)
    M = conv.shape[0]
    row_edge_pos = np.arange(M) - np.repeat(starts, np.diff(np.append(starts, M)))
    invalid = row_edge_pos >= np.repeat(valid, np.diff(np.append(starts, M)))
    if invalid.any():
        conv = np.where(invalid[:, None], -np.inf, conv)
    mv = np.maximum.reduceat(conv, starts, axis=0)       # (E, K)
    # first matching position per (edge, kernel)
    eq = conv == np.repeat(mv, np.diff(np.append(starts, M)), axis=0)
    pos = np.where(eq, row_edge_pos[:, None], M)
    argpos = np.minimum.reduceat(pos, starts, axis=0)
    return mv, argpos.astype(np.int64)


def conv_maxpool(batch_set: SequenceBatchSet, kernels, bias) -> Tensor:
    """Fused convolution + per-edge masked max pooling.

    Returns an (E, K) tensor in original edge order: row e holds the
    per-kernel maximum of the convolution of edge e's sequence over its first
    max(length-2, 1) positions. Each edge is processed independently, so
    batched and per-edge evaluation are bit-identical by construction; the
    gradient flows to the first maximal position of each (edge, kernel) pair.
    """
    kernels, bias = as_tensor(kernels), as_tensor(bias)
    kd, bd = kernels.data, bias.data
    K = kd.shape[0]
    Z = kd.shape[2]
    k2d = np.ascontiguousarray(kd.reshape(K, 3 * Z))
    E = batch_set.n_edges
    if E == 0:
        return _emit("conv_maxpool", np.zeros((0, K)), (kernels, bias),
                     lambda g: (np.zeros_like(kd), np.zeros_like(bd)))
    if _HAVE_NUMBA and 3 * Z == 6:
        out = np.empty((E, K))
        argpos = np.empty((E, K), dtype=np.int64)
        _conv_pool_kernel(batch_set.windows, np.ascontiguousarray(k2d.T), bd,
                          batch_set.starts, batch_set.valid, out, argpos)
    else:
        out, argpos = _conv_pool_numpy(batch_set.windows, k2d, bd,
                                       batch_set.starts, batch_set.valid)

    def back(g):
        rows = batch_set.starts[:, None] + argpos            # (E, K)
        picked = batch_set.windows[rows.reshape(-1)]         # (E*K, 3Z)
        weighted = picked * g.reshape(-1, 1)
        dk2d = weighted.reshape(E, K, 3 * Z).sum(axis=0)
        return dk2d.reshape(kd.shape), g.sum(axis=0)

    return _emit("conv_maxpool", out, (kernels, bias), back)


# -- optimizer ----------------------------------------------------------------

@dataclass
class AdamState:
    """Classic Adam with bias correction; weight decay is coupled L2 (added to
    the gradient before the moment updates)."""

    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, lr: float, weight_decay: float = 0.0) -> "AdamState":
        state = cls(lr=lr, weight_decay=weight_decay)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state


def adam_step(params: dict, grads: dict, state: AdamState) -> dict:
    """One Adam update; mutates params in place and returns them."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise ShapeError(f"adam_step: grad {g.shape} vs param {p.data.shape} for {name}")
        if state.weight_decay:
            g = g + state.weight_decay * p.data
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        _check_finite(f"adam_step[{name}]", p.data)
    return params


def l2_norm(arrs) -> float:
    return math.sqrt(sum(float((a * a).sum()) for a in arrs))
