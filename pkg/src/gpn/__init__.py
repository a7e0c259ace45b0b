"""Joint graph-structure and node-classifier learning via bilevel optimization."""

from .errors import ConfigError, ContractError, DimensionError
from .graphcore import (
    Graph,
    SplitMasks,
    WeightedAdjacency,
    drop_edges,
    generate_sbm,
    graph_from_edges,
    load_dataset,
    make_splits,
    normalize_adjacency,
    subsample_nodes,
)
from .bilevel import (
    RunReport,
    TrainConfig,
    hypergradient,
    lower_loss_f,
    pretrain_nonbilevel,
    train_gcn_baseline,
    train_gpn,
    upper_loss_F,
)
from .models import (
    GcnParams,
    GeneratorParams,
    PredictorParams,
    ResidualAdjacency,
    generate_structure,
    kernel_gram,
    multi_head_generate,
    predict,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DimensionError",
    "Graph",
    "SplitMasks",
    "WeightedAdjacency",
    "drop_edges",
    "generate_sbm",
    "graph_from_edges",
    "load_dataset",
    "make_splits",
    "normalize_adjacency",
    "subsample_nodes",
    "GcnParams",
    "GeneratorParams",
    "PredictorParams",
    "ResidualAdjacency",
    "generate_structure",
    "kernel_gram",
    "multi_head_generate",
    "predict",
    "RunReport",
    "TrainConfig",
    "hypergradient",
    "lower_loss_f",
    "pretrain_nonbilevel",
    "train_gcn_baseline",
    "train_gpn",
    "upper_loss_F",
]
