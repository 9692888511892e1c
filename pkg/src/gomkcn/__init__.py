"""Graph optimal matching kernel and the convolutional network built on it.

The kernel compares two standardized graphs by greedily matching their
nodes' multi-level subtree embeddings and summing per-level RBF
similarities; trainable graph filters scored through the kernel yield
interpretable node representations. See README.md for the full tour.
"""

from .errors import (ConfigError, DataError, GomkcnError, InvariantViolation,
                     ParseError, ShapeError, TrainingError)
from .graph import (Graph, NodeCentricSubgraph, extract_subgraph,
                    induced_edges, load_bundle, pad_graph, save_bundle)
from .tse import (AdjacencyReconstruction, SubgraphEmbedding, SubtreeEmbedding,
                  encode, reconstruct_adjacency)
from .omk import (ElementGram, FeatureMapVectors, HierarchicalTree, Matching,
                  element_gram, feature_map_oracle, gomk, greedy_match,
                  hierarchical_tree, optimal_match, similarity_matrix,
                  solid_similarity)
from .gradients import GradientTape, finite_difference_check, grad_kappa
from .model import (GomkcnClassifier, GomkcnLayer, GraphFilter, MlpHead,
                    ProjectedAdam, TrainConfig, adam_step,
                    forward_representation, loss_classification, loss_frq,
                    loss_iso)

__all__ = [
    "ConfigError", "DataError", "GomkcnError", "InvariantViolation",
    "ParseError", "ShapeError", "TrainingError",
    "Graph", "NodeCentricSubgraph", "extract_subgraph", "induced_edges",
    "load_bundle", "pad_graph", "save_bundle",
    "AdjacencyReconstruction", "SubgraphEmbedding", "SubtreeEmbedding",
    "encode", "reconstruct_adjacency",
    "ElementGram", "FeatureMapVectors", "HierarchicalTree", "Matching",
    "element_gram", "feature_map_oracle", "gomk", "greedy_match",
    "hierarchical_tree", "optimal_match", "similarity_matrix",
    "solid_similarity",
    "GradientTape", "finite_difference_check", "grad_kappa",
    "GomkcnClassifier", "GomkcnLayer", "GraphFilter", "MlpHead",
    "ProjectedAdam", "TrainConfig", "adam_step", "forward_representation",
    "loss_classification", "loss_frq", "loss_iso",
]
