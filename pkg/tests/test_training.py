"""Training loop, reports, checkpoints, repeated runs, inductive protocol."""

import numpy as np
import pytest

from latentgraph.generate import GenConfig, generate_dataset, normalize_dataset
from latentgraph.graph import Multigraph, MultiEdge, SplitMask, VertexTable, make_splits
from latentgraph.models import GraphTensors, ModelSpec, init_params
from latentgraph.training import (CheckpointError, TrainConfig, class_weights,
                                  evaluate, inductive_eval, load_checkpoint,
                                  mean_and_se, repeat_runs, save_checkpoint,
                                  train)

from conftest import tiny_financial_graph


def _desk_graph(seed=21, n=150, e=300, two_hop=False):
    cfg = GenConfig(n_vertices_init=n, n_edges_target=e, seed=seed, two_hop=two_hop)
    return normalize_dataset(generate_dataset(cfg))


class TestClassWeights:
    def test_inverse_frequency(self):
        labels = np.array([0, 0, 0, 1])
        w = class_weights(labels, np.arange(4), 2)
        assert np.allclose(w, [4 / (2 * 3), 4 / (2 * 1)])

    def test_none_scheme(self):
        assert np.array_equal(class_weights(np.array([0, 1]), np.arange(2), 2, "none"),
                              np.ones(2))

    def test_missing_class_rejected(self):
        with pytest.raises(ValueError, match="absent"):
            class_weights(np.zeros(5, dtype=int), np.arange(5), 2)


class TestTrain:
    def test_zero_learning_rate_keeps_params(self):
        g = _desk_graph()
        splits = make_splits(g.n_vertices, (0.3, 0.2, 0.5), 5)
        spec = ModelSpec(family="gcn", n_features=13, n_classes=2, hidden=4, L=None)
        cfg = TrainConfig(epochs=1, learning_rate=0.0, weight_decay=0.0, seed=1)
        params, _, _ = train(spec, g, splits, cfg)
        fresh = init_params(spec, 1)
        for name in params:
            assert np.array_equal(params[name].data, fresh[name].data)

    def test_deterministic_reports(self):
        g = _desk_graph()
        splits = make_splits(g.n_vertices, (0.3, 0.2, 0.5), 5)
        spec = ModelSpec(family="lgcn", n_features=13, n_classes=2, hidden=4, L=2)
        cfg = TrainConfig(epochs=3, seed=7)
        _, _, r1 = train(spec, g, splits, cfg)
        _, _, r2 = train(spec, g, splits, cfg)
        assert r1.deterministic_digest() == r2.deterministic_digest()

    def test_separable_toy_reaches_low_loss(self):
        # two training nodes with opposite labels, distinct features, no edges
        feats = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.1], [0.1, 1.0]])
        v = VertexTable(features=feats, labels=np.array([0, 1, 0, 1]))
        g = Multigraph(vertices=v, edges=[], kind="financial-1hop", normalized=True)
        splits = SplitMask(train=np.array([0, 1]), val=np.array([2]),
                           test=np.array([3]), seed=0)
        spec = ModelSpec(family="gcn", n_features=2, n_classes=2, hidden=4, L=None,
                         interlayer_dropout=0.0)
        cfg = TrainConfig(epochs=2000, learning_rate=0.01, weight_decay=0.0, seed=1)
        _, _, rep = train(spec, g, splits, cfg)
        assert rep.train_loss[-1] < 1e-2

    def test_loss_decreases_on_generated_data(self):
        g = _desk_graph(seed=30, n=200, e=420)
        splits = make_splits(g.n_vertices, (0.3, 0.2, 0.5), 9)
        spec = ModelSpec(family="lgcn_plus", n_features=13, n_classes=2, hidden=8, L=2)
        _, _, rep = train(spec, g, splits, TrainConfig(epochs=150, seed=2))
        assert rep.train_loss[-1] < rep.train_loss[0]
        assert rep.test_auc is not None and 0.0 <= rep.test_auc <= 1.0


class TestRepeatRuns:
    def test_se_closed_form(self):
        mean, se = mean_and_se([0.9, 1.1])
        assert np.isclose(mean, 1.0) and np.isclose(se, 0.1)

    def test_aggregate_over_seeds(self):
        g = _desk_graph()
        splits = make_splits(g.n_vertices, (0.3, 0.2, 0.5), 5)
        spec = ModelSpec(family="gcn", n_features=13, n_classes=2, hidden=4, L=None)
        reports, agg = repeat_runs(spec, g, splits, TrainConfig(epochs=2, seed=0),
                                   seeds=[1, 2, 3])
        assert len(reports) == 3
        assert "accuracy" in agg and "auc" in agg
        assert all(len(v) == 2 for v in agg.values())

    def test_needs_two_seeds(self):
        g = _desk_graph()
        splits = make_splits(g.n_vertices, (0.3, 0.2, 0.5), 5)
        spec = ModelSpec(family="gcn", n_features=13, n_classes=2, hidden=4, L=None)
        with pytest.raises(ValueError, match="at least 2"):
            repeat_runs(spec, g, splits, TrainConfig(epochs=1), seeds=[1])


class TestCheckpoints:
    def test_bit_exact_round_trip(self, tmp_path):
        g = _desk_graph()
        splits = make_splits(g.n_vertices, (0.3, 0.2, 0.5), 5)
        spec = ModelSpec(family="lgcn", n_features=13, n_classes=2, hidden=4, L=2)
        params, adam, _ = train(spec, g, splits, TrainConfig(epochs=2, seed=4))
        path = str(tmp_path / "ck.json")
        save_checkpoint(path, spec, params, adam, extra={"note": 1})
        spec2, params2, adam2, extra = load_checkpoint(path)
        assert spec2.to_dict() == spec.to_dict()
        assert extra == {"note": 1}
        for name in params:
            assert np.array_equal(params[name].data, params2[name].data)
            assert np.array_equal(adam.m[name], adam2.m[name])
            assert np.array_equal(adam.v[name], adam2.v[name])
        assert adam2.t == adam.t

    def test_version_check(self, tmp_path):
        path = str(tmp_path / "bad.json")
        with open(path, "w") as fh:
            fh.write('{"checkpoint_version": 42}')
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)


class TestEvaluateAndInductive:
    def test_transductive_matches_training_metrics(self):
        g = _desk_graph()
        splits = make_splits(g.n_vertices, (0.3, 0.2, 0.5), 5)
        spec = ModelSpec(family="lgcn", n_features=13, n_classes=2, hidden=4, L=2)
        params, _, rep = train(spec, g, splits, TrainConfig(epochs=3, seed=6))
        metrics = evaluate(spec, g, params, idx=splits.test)
        assert metrics["accuracy"] == rep.test_accuracy
        assert metrics["auc"] == rep.test_auc

    def test_inductive_fresh_graph(self):
        g = _desk_graph(seed=40)
        splits = make_splits(g.n_vertices, (0.3, 0.2, 0.5), 5)
        spec = ModelSpec(family="gcn", n_features=13, n_classes=2, hidden=4, L=None)
        params, _, _ = train(spec, g, splits, TrainConfig(epochs=2, seed=1))
        metrics = inductive_eval(params, spec,
                                 GenConfig(n_vertices_init=150, n_edges_target=300, seed=41))
        assert 0.0 <= metrics["auc"] <= 1.0
        assert metrics["generator_seed"] == 41

    def test_untrained_model_near_chance(self):
        g = _desk_graph(seed=50, n=2000, e=4500)
        spec = ModelSpec(family="gcn", n_features=13, n_classes=2, hidden=8, L=None)
        params = init_params(spec, 3)
        metrics = evaluate(spec, g, params)
        assert abs(metrics["auc"] - 0.5) < 0.1

    def test_kind_mismatch_rejected(self):
        spec = ModelSpec(family="lgcn", n_features=6, n_classes=3, hidden=4, L=2,
                         graph_kind="transport")
        with pytest.raises(CheckpointError, match="financial"):
            inductive_eval({}, spec, GenConfig(n_vertices_init=10, n_edges_target=5, seed=0))


class TestDivergenceGuard:
    def test_nonfinite_abort_has_diagnostics(self):
        g = tiny_financial_graph(n=8, seed=2)
        splits = make_splits(8, (0.4, 0.3, 0.3), 1)
        spec = ModelSpec(family="gcn", n_features=13, n_classes=2, hidden=4, L=None)
        cfg = TrainConfig(epochs=5, learning_rate=1e154, seed=1,
                          strict_finite_checks=False)
        from latentgraph.training import TrainingDivergedError
        from latentgraph import autodiff as ad
        with pytest.raises((TrainingDivergedError, ad.AutodiffError)):
            train(spec, g, splits, cfg)
