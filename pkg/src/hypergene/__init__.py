"""Self-supervised hypergraph pre-training toolkit.

Ships a hypergraph container with spectral helpers, graph expansions,
ego-network conversion of citation graphs, seed/context and negative
sampling, a multilevel balanced partitioner for cluster pseudo-labels,
GNN encoders on a small autodiff substrate, four training strategies
(serial, adaptation-aware, joint, ablations), and a seeded experiment
harness with CSV/JSON/figure reports behind the `hypergene` CLI.
"""

__version__ = "0.1.0"

from .datasets import (DatasetError, citation_to_hypergraph,
                       load_hypergraph_json, save_hypergraph_json)
from .gnn import GnnConfig
from .harness import (ConfigError, ExperimentConfig, load_config,
                      run_experiment, sweep_adaptation_steps, sweep_clusters,
                      time_pretraining)
from .hypergraph import Hypergraph, ego_network_hypergraphs, split_hyperedges
from .metrics import accuracy, pr_auc
from .sampling import SamplingConfig
from .tensor import Tensor, backward, gradient_check, no_grad
from .training import TrainConfig, run_strategy

__all__ = [
    "ConfigError",
    "DatasetError",
    "ExperimentConfig",
    "GnnConfig",
    "Hypergraph",
    "SamplingConfig",
    "Tensor",
    "TrainConfig",
    "accuracy",
    "backward",
    "citation_to_hypergraph",
    "ego_network_hypergraphs",
    "gradient_check",
    "load_config",
    "load_hypergraph_json",
    "no_grad",
    "pr_auc",
    "run_experiment",
    "run_strategy",
    "save_hypergraph_json",
    "split_hyperedges",
    "sweep_adaptation_steps",
    "sweep_clusters",
    "time_pretraining",
    "__version__",
]
