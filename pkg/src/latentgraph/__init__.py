"""latentgraph: node classification on directed multigraphs whose edges carry
attribute sequences, via learned latent edge relations."""

from .graph import (GraphStructureError, Multigraph, MultiEdge, SplitMask,
                    VertexTable, build_indices, make_splits,
                    undirected_binary_adjacency)
from .dataset_io import DatasetFormatError, load_dataset, save_dataset
from .generate import (GenConfig, apply_two_hop, assign_classes,
                       generate_dataset, generate_node_features,
                       generate_skeleton, make_transactions, normalize_dataset,
                       populate_edges)
from .models import (GammaConfig, GraphTensors, ModelSpec, bucketize_edges,
                     forward_model, init_params, parameter_count)
from .metrics import MetricError, accuracy, auc, macro_f1, softmax_scores
from .training import (RunReport, TrainConfig, TrainingDivergedError, evaluate,
                       inductive_eval, load_checkpoint, repeat_runs,
                       save_checkpoint, train)
from .transport import toy_transport_graph

__version__ = "0.1.0"

__all__ = [
    "GraphStructureError", "Multigraph", "MultiEdge", "SplitMask", "VertexTable",
    "build_indices", "make_splits", "undirected_binary_adjacency",
    "DatasetFormatError", "load_dataset", "save_dataset",
    "GenConfig", "apply_two_hop", "assign_classes", "generate_dataset",
    "generate_node_features", "generate_skeleton", "make_transactions",
    "normalize_dataset", "populate_edges",
    "GammaConfig", "GraphTensors", "ModelSpec", "bucketize_edges",
    "forward_model", "init_params", "parameter_count",
    "MetricError", "accuracy", "auc", "macro_f1", "softmax_scores",
    "RunReport", "TrainConfig", "TrainingDivergedError", "evaluate",
    "inductive_eval", "load_checkpoint", "repeat_runs", "save_checkpoint",
    "train", "toy_transport_graph",
    "__version__",
]
