"""Dataset directory round trips and format errors."""

import json
import os

import numpy as np
import pytest

from latentgraph.dataset_io import (DatasetFormatError, load_dataset,
                                    save_dataset)
from latentgraph.generate import GenConfig, generate_dataset
from latentgraph.graph import Multigraph, MultiEdge, VertexTable
from latentgraph.transport import toy_transport_graph

from conftest import tiny_financial_graph


def _tiny_graph():
    v = VertexTable(features=np.array([[0.5, 1.0], [2.0, 3.0], [4.0, 0.1]]),
                    labels=np.array([0, 1, 0]))
    edges = [MultiEdge(0, 1, np.array([[1.0, 2.0], [3.0, 4.5]]), 1, "A"),
             MultiEdge(2, 0, np.array([[0.25, 9.0]]), 3, None)]
    return Multigraph(vertices=v, edges=edges, kind="financial-1hop",
                      meta={"seed": 5})


def _dir_bytes(path):
    out = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as fh:
            out[name] = fh.read()
    return out


class TestRoundTrip:
    def test_field_for_field(self, tmp_path):
        g = _tiny_graph()
        save_dataset(g, str(tmp_path / "d"))
        g2 = load_dataset(str(tmp_path / "d"))
        assert g2 == g
        assert g2.meta["seed"] == 5

    def test_byte_identical_reserialization(self, tmp_path):
        g = _tiny_graph()
        save_dataset(g, str(tmp_path / "a"))
        g2 = load_dataset(str(tmp_path / "a"))
        save_dataset(g2, str(tmp_path / "b"))
        assert _dir_bytes(tmp_path / "a") == _dir_bytes(tmp_path / "b")

    def test_generated_dataset_preserves_transaction_count(self, tmp_path):
        g = generate_dataset(GenConfig(n_vertices_init=50, n_edges_target=90, seed=2))
        total = g.total_sequence_length()
        save_dataset(g, str(tmp_path / "d"))
        g2 = load_dataset(str(tmp_path / "d"))
        assert g2.total_sequence_length() == total
        assert g2 == g

    def test_two_hop_metadata_round_trip(self, tmp_path):
        g = generate_dataset(GenConfig(n_vertices_init=60, n_edges_target=110,
                                       seed=4, two_hop=True))
        save_dataset(g, str(tmp_path / "d"))
        g2 = load_dataset(str(tmp_path / "d"))
        assert g2 == g
        assert g2.vertices.hidden_class is not None

    def test_transport_round_trip(self, tmp_path):
        g = toy_transport_graph(n_vertices=20, n_edges=40, seed=1)
        save_dataset(g, str(tmp_path / "t"))
        g2 = load_dataset(str(tmp_path / "t"))
        assert g2 == g

    def test_random_graph_corpus(self, tmp_path):
        for seed in range(8):
            g = tiny_financial_graph(n=5 + seed, seed=seed, normalized=False)
            p = str(tmp_path / f"g{seed}")
            save_dataset(g, p)
            assert load_dataset(p) == g


class TestFormatErrors:
    def test_version_mismatch(self, tmp_path):
        g = _tiny_graph()
        save_dataset(g, str(tmp_path / "d"))
        meta_path = tmp_path / "d" / "meta.json"
        meta = json.loads(meta_path.read_text())
        meta["format_version"] = 99
        meta_path.write_text(json.dumps(meta))
        with pytest.raises(DatasetFormatError, match="version"):
            load_dataset(str(tmp_path / "d"))

    def test_unknown_edge_id_in_transactions(self, tmp_path):
        g = _tiny_graph()
        save_dataset(g, str(tmp_path / "d"))
        tx = tmp_path / "d" / "transactions.csv"
        tx.write_text(tx.read_text() + "7,0,1.0,2.0\n")
        with pytest.raises(DatasetFormatError, match="unknown edge id 7"):
            load_dataset(str(tmp_path / "d"))

    def test_malformed_csv_reports_location(self, tmp_path):
        g = _tiny_graph()
        save_dataset(g, str(tmp_path / "d"))
        tx = tmp_path / "d" / "transactions.csv"
        tx.write_text(tx.read_text() + "1,1,oops\n")
        with pytest.raises(DatasetFormatError):
            load_dataset(str(tmp_path / "d"))

    def test_missing_file(self, tmp_path):
        g = _tiny_graph()
        save_dataset(g, str(tmp_path / "d"))
        os.remove(tmp_path / "d" / "edges.csv")
        with pytest.raises(DatasetFormatError, match="edges.csv"):
            load_dataset(str(tmp_path / "d"))

    def test_nondense_positions(self, tmp_path):
        g = _tiny_graph()
        save_dataset(g, str(tmp_path / "d"))
        tx = tmp_path / "d" / "transactions.csv"
        lines = tx.read_text().splitlines()
        lines[1] = lines[1].replace("0,0", "0,5", 1)
        tx.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError, match="positions"):
            load_dataset(str(tmp_path / "d"))
