"""Multi-level subtree encoding of graphs.

Each node v of a graph is represented by the stack of vectors (A^i F)[v] for
i = 0..t: level 0 is the raw feature row, level i aggregates features of
nodes i steps away, weighted by edge products along the walks. The stack
encodes the depth-i subtrees rooted at v without extracting them explicitly;
the whole graph is then the set of its per-node stacks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backends
from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class SubtreeEmbedding:
    """Level stack of one node: row i is the i-th aggregation level."""

    levels: np.ndarray  # (t+1, d)

    @property
    def t(self):
        return self.levels.shape[0] - 1

    @property
    def d(self):
        return self.levels.shape[1]


@dataclass(frozen=True)
class SubgraphEmbedding:
    """Level stacks of all nodes of one graph, index-aligned with its nodes."""

    levels: np.ndarray  # (t+1, m, d)

    @property
    def t(self):
        return self.levels.shape[0] - 1

    @property
    def size(self):
        return self.levels.shape[1]

    @property
    def d(self):
        return self.levels.shape[2]

    @property
    def per_node(self):
        return tuple(SubtreeEmbedding(self.levels[:, v, :])
                     for v in range(self.size))

    def node(self, v):
        return SubtreeEmbedding(self.levels[:, v, :])


def encode(g, t):
    """Encode a graph (subgraph or filter) into its per-node level stacks."""
    if t < 0:
        raise ConfigError(f"level count must be >= 0, got {t}")
    levels = backends.subtree_levels(np.ascontiguousarray(g.adjacency),
                                     np.ascontiguousarray(g.features), t)
    return SubgraphEmbedding(levels)


@dataclass(frozen=True)
class AdjacencyReconstruction:
    """Outcome of solving for the adjacency that generated a level stack."""

    full_rank: bool
    adjacency: np.ndarray | None
    rank: int
    residual: float

    def __bool__(self):
        return self.full_rank


def reconstruct_adjacency(emb, tol=1e-8):
    """Solve A @ level[i] = level[i+1] for a symmetric A, if determined.

    The level stacks pin down the adjacency exactly when the matrix of
    stacked levels 0..t-1 has full row rank; otherwise the system is
    underdetermined and a rank-deficiency report is returned instead of a
    spurious solution. The least-squares solution is symmetrized by averaging
    with its transpose and accepted only if the residual stays below ``tol``.
    """
    levels = emb.levels
    t1, n, _ = levels.shape
    if t1 < 2:
        if n == 1:
            return AdjacencyReconstruction(True, np.zeros((1, 1)), 1, 0.0)
        return AdjacencyReconstruction(False, None, 0, np.inf)
    lhs = np.concatenate(list(levels[:-1]), axis=1)   # (n, t*d)
    rhs = np.concatenate(list(levels[1:]), axis=1)    # (n, t*d)
    rank = int(np.linalg.matrix_rank(lhs))
    if rank < n:
        return AdjacencyReconstruction(False, None, rank, np.inf)
    sol, *_ = np.linalg.lstsq(lhs.T, rhs.T, rcond=None)
    adj = sol.T
    adj = 0.5 * (adj + adj.T)
    residual = float(np.max(np.abs(adj @ lhs - rhs))) if lhs.size else 0.0
    if not np.isfinite(residual) or residual > tol:
        return AdjacencyReconstruction(False, None, rank, residual)
    return AdjacencyReconstruction(True, adj, rank, residual)


def check_same_shape(x, y):
    """Raise unless two embeddings share level count and feature dimension."""
    if x.levels.shape[0] != y.levels.shape[0] or x.levels.shape[-1] != y.levels.shape[-1]:
        raise ShapeError(
            f"embeddings disagree in (t+1, d): {x.levels.shape} vs {y.levels.shape}")
