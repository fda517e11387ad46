"""On-disk dataset format.

A dataset is a directory:

    meta.json           counts, kind, seed, class ratio, normalization constants
    nodes.csv           id, feature columns, label, hidden_class
    edges.csv           edge_id, src, dst, trans_type, fraud_type
    transactions.csv    edge_id, seq_pos, attr1, attr2        (financial kinds)
    profiles.csv        edge_id, p00..p23                     (transport kind)

Raw, un-normalized values are stored; all floats are serialized with 17
significant digits so a parse/serialize round trip is byte identical.
"""

from __future__ import annotations

import json
import os

import numpy as np
import pandas as pd

from .graph import (FINANCIAL_KINDS, TRANSPORT_KIND, Multigraph, MultiEdge,
                    VertexTable)

FORMAT_VERSION = 1
FLOAT_FMT = "%.17g"


class DatasetFormatError(ValueError):
    """The on-disk dataset is malformed or from an incompatible version."""


def fmt_float(x: float) -> str:
    return FLOAT_FMT % float(x)


def _feature_columns(n: int):
    return [f"f{i:02d}" for i in range(n)]


def _profile_columns():
    return [f"p{i:02d}" for i in range(24)]


def dataset_meta(g: Multigraph) -> dict:
    labels = g.vertices.labels
    classes, counts = np.unique(labels, return_counts=True)
    hidden = g.vertices.hidden_class
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": g.kind,
        "normalized": bool(g.normalized),
        "n_vertices": int(g.n_vertices),
        "n_edges": int(g.n_edges),
        "total_sequence_length": g.total_sequence_length(),
        "class_counts": {str(int(c)): int(k) for c, k in zip(classes, counts)},
        "hidden_class_count": int(hidden.sum()) if hidden is not None else 0,
    }
    meta.update(g.meta)
    return meta


def save_dataset(g: Multigraph, path: str) -> None:
    """Write ``g`` to a dataset directory (created if needed)."""
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump(dataset_meta(g), fh, indent=1, sort_keys=True)
        fh.write("\n")

    v = g.vertices
    nodes = pd.DataFrame(v.features, columns=_feature_columns(v.n_features))
    nodes.insert(0, "id", np.arange(v.n, dtype=np.int64))
    nodes["label"] = v.labels
    hidden = v.hidden_class if v.hidden_class is not None else np.zeros(v.n, dtype=bool)
    nodes["hidden_class"] = hidden.astype(np.int64)
    nodes.to_csv(os.path.join(path, "nodes.csv"), index=False, float_format=FLOAT_FMT)

    edges = pd.DataFrame({
        "edge_id": np.arange(g.n_edges, dtype=np.int64),
        "src": [e.src for e in g.edges],
        "dst": [e.dst for e in g.edges],
        "trans_type": ["" if e.trans_type is None else str(int(e.trans_type)) for e in g.edges],
        "fraud_type": ["" if e.fraud_type is None else e.fraud_type for e in g.edges],
    })
    edges.to_csv(os.path.join(path, "edges.csv"), index=False)

    if g.kind == TRANSPORT_KIND:
        rows = np.vstack([e.sequence.reshape(-1) for e in g.edges]) if g.n_edges else np.zeros((0, 24))
        if rows.shape[1] != 24:
            raise DatasetFormatError(f"transport profiles must have 24 values, got {rows.shape[1]}")
        prof = pd.DataFrame(rows, columns=_profile_columns())
        prof.insert(0, "edge_id", np.arange(g.n_edges, dtype=np.int64))
        prof.to_csv(os.path.join(path, "profiles.csv"), index=False, float_format=FLOAT_FMT)
    else:
        n_rows = g.total_sequence_length()
        eid = np.empty(n_rows, dtype=np.int64)
        pos = np.empty(n_rows, dtype=np.int64)
        att = np.empty((n_rows, 2), dtype=np.float64)
        at = 0
        for k, e in enumerate(g.edges):
            m = len(e.sequence)
            eid[at:at + m] = k
            pos[at:at + m] = np.arange(m)
            att[at:at + m] = e.sequence
            at += m
        tx = pd.DataFrame({"edge_id": eid, "seq_pos": pos, "attr1": att[:, 0], "attr2": att[:, 1]})
        tx.to_csv(os.path.join(path, "transactions.csv"), index=False, float_format=FLOAT_FMT)


def _numeric(df: pd.DataFrame, cols, name: str, dtype) -> np.ndarray:
    try:
        return df[list(cols)].to_numpy(dtype=dtype)
    except (ValueError, TypeError) as exc:
        for col in cols:
            vals = pd.to_numeric(df[col], errors="coerce")
            bad = np.flatnonzero(vals.isna().to_numpy() & df[col].notna().to_numpy())
            if len(bad):
                raise DatasetFormatError(
                    f"{name} record {bad[0] + 1}: non-numeric value "
                    f"{df[col].iloc[bad[0]]!r} in column {col!r}") from exc
        raise DatasetFormatError(f"{name}: {exc}") from exc


def _read_csv(path: str, name: str) -> pd.DataFrame:
    full = os.path.join(path, name)
    if not os.path.exists(full):
        raise DatasetFormatError(f"{name}: file missing from dataset directory {path}")
    try:
        return pd.read_csv(full, float_precision="round_trip")
    except Exception as exc:  # pandas reports offending line numbers in its message
        raise DatasetFormatError(f"{name}: {exc}") from exc


def load_dataset(path: str) -> Multigraph:
    """Read a dataset directory back into a Multigraph.

    load(save(g)) reproduces g field for field, including metadata and edge
    order.
    """
    meta_path = os.path.join(path, "meta.json")
    if not os.path.exists(meta_path):
        raise DatasetFormatError(f"meta.json missing from dataset directory {path}")
    with open(meta_path) as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"meta.json line {exc.lineno}: {exc.msg}") from exc
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise DatasetFormatError(
            f"dataset format version {version!r} not supported (expected {FORMAT_VERSION})")
    kind = meta.get("kind")
    if kind not in FINANCIAL_KINDS + (TRANSPORT_KIND,):
        raise DatasetFormatError(f"meta.json: unknown dataset kind {kind!r}")

    nodes = _read_csv(path, "nodes.csv")
    feat_cols = [c for c in nodes.columns if c.startswith("f") and c[1:].isdigit()]
    for col in ("id", "label", "hidden_class"):
        if col not in nodes.columns:
            raise DatasetFormatError(f"nodes.csv: missing column {col!r}")
    if not np.array_equal(nodes["id"].to_numpy(), np.arange(len(nodes))):
        raise DatasetFormatError("nodes.csv: ids must be dense 0..n-1 in order")
    hidden = nodes["hidden_class"].to_numpy(dtype=np.int64)
    vertices = VertexTable(
        features=_numeric(nodes, feat_cols, "nodes.csv", np.float64),
        labels=nodes["label"].to_numpy(dtype=np.int64),
        hidden_class=hidden.astype(bool) if hidden.any() else None,
    )

    edf = _read_csv(path, "edges.csv")
    for col in ("edge_id", "src", "dst", "trans_type", "fraud_type"):
        if col not in edf.columns:
            raise DatasetFormatError(f"edges.csv: missing column {col!r}")
    if not np.array_equal(edf["edge_id"].to_numpy(), np.arange(len(edf))):
        raise DatasetFormatError("edges.csv: edge ids must be dense 0..m-1 in order")
    n_edges = len(edf)
    src = edf["src"].to_numpy(dtype=np.int64)
    dst = edf["dst"].to_numpy(dtype=np.int64)
    ttyp = edf["trans_type"].to_numpy()
    ftyp = edf["fraud_type"].astype("string").to_numpy()

    if kind == TRANSPORT_KIND:
        pdf = _read_csv(path, "profiles.csv")
        cols = _profile_columns()
        missing = [c for c in cols if c not in pdf.columns]
        if missing:
            raise DatasetFormatError(f"profiles.csv: missing columns {missing}")
        if not np.array_equal(pdf["edge_id"].to_numpy(), np.arange(n_edges)):
            raise DatasetFormatError("profiles.csv: need exactly one row per edge id, in order")
        mats = _numeric(pdf, cols, "profiles.csv", np.float64)
        sequences = [mats[k].reshape(1, 24) for k in range(n_edges)]
    else:
        tdf = _read_csv(path, "transactions.csv")
        for col in ("edge_id", "seq_pos", "attr1", "attr2"):
            if col not in tdf.columns:
                raise DatasetFormatError(f"transactions.csv: missing column {col!r}")
        teid = tdf["edge_id"].to_numpy(dtype=np.int64)
        tpos = tdf["seq_pos"].to_numpy(dtype=np.int64)
        if len(teid) and (teid.min() < 0 or teid.max() >= n_edges):
            bad = int(np.argmax((teid < 0) | (teid >= n_edges)))
            raise DatasetFormatError(
                f"transactions.csv record {bad + 1}: unknown edge id {teid[bad]}")
        order = np.lexsort((tpos, teid))
        teid, tpos = teid[order], tpos[order]
        vals = _numeric(tdf, ["attr1", "attr2"], "transactions.csv", np.float64)[order]
        starts = np.searchsorted(teid, np.arange(n_edges))
        ends = np.searchsorted(teid, np.arange(n_edges), side="right")
        sequences = []
        for k in range(n_edges):
            seg = vals[starts[k]:ends[k]]
            expect = np.arange(ends[k] - starts[k])
            if not np.array_equal(tpos[starts[k]:ends[k]], expect):
                raise DatasetFormatError(
                    f"transactions.csv: edge {k} sequence positions are not dense 0..len-1")
            sequences.append(seg)

    normalized = bool(meta.get("normalized", False))
    edges = []
    for k in range(n_edges):
        t = ttyp[k]
        trans = None if (pd.isna(t) or str(t) == "") else int(t)
        f = ftyp[k]
        fraud = None if (f is pd.NA or f == "") else str(f)
        edges.append(MultiEdge(int(src[k]), int(dst[k]), sequences[k], trans, fraud))

    extra = {k: v for k, v in meta.items() if k not in (
        "format_version", "kind", "normalized", "n_vertices", "n_edges",
        "total_sequence_length", "class_counts", "hidden_class_count")}
    g = Multigraph(vertices=vertices, edges=edges, kind=kind, meta=extra, normalized=normalized)
    if g.n_vertices != meta["n_vertices"] or g.n_edges != meta["n_edges"]:
        raise DatasetFormatError("meta.json counts do not match file contents")
    return g
