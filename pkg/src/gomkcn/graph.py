"""Dense graph values, node-centric subgraph extraction, and bundle files.

Graphs are small and dense by design: subgraphs are size-standardized to at
most a few dozen nodes, so adjacency lives in a plain (n, n) float matrix.
Data graphs carry {0, 1} edges; trainable filters reuse the same type with
weights anywhere in [0, 1].
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvariantViolation, ParseError, ShapeError

#: Truncation policies for oversized k-hop balls.
TRUNCATE_DETERMINISTIC = "deterministic"
TRUNCATE_SEEDED_RANDOM = "seeded-random"


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph with per-node features.

    ``adjacency`` is (n, n), exactly symmetric, zero on the diagonal, with
    entries in [0, 1]. ``features`` is (n, d). ``node_ids`` optionally maps
    each node back to an index in a parent graph (-1 marks padding nodes).
    Instances are immutable; the backing arrays are marked read-only.
    """

    adjacency: np.ndarray
    features: np.ndarray
    node_ids: np.ndarray | None = None

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=np.float64, copy=True)
        feats = np.array(self.features, dtype=np.float64, copy=True)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ShapeError(f"adjacency must be square, got {adj.shape}")
        if feats.ndim != 2 or feats.shape[0] != adj.shape[0]:
            raise ShapeError(
                f"features must be (n, d) with n={adj.shape[0]}, got {feats.shape}")
        if not np.array_equal(adj, adj.T):
            raise InvariantViolation("adjacency must be exactly symmetric")
        if np.any(np.diagonal(adj) != 0.0):
            raise InvariantViolation("adjacency diagonal must be zero (no self-loops)")
        if adj.size and (adj.min() < 0.0 or adj.max() > 1.0):
            raise InvariantViolation("adjacency entries must lie in [0, 1]")
        ids = self.node_ids
        if ids is not None:
            ids = np.array(ids, dtype=np.int64, copy=True)
            if ids.shape != (adj.shape[0],):
                raise ShapeError("node_ids must have one entry per node")
            ids.setflags(write=False)
        adj.setflags(write=False)
        feats.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "node_ids", ids)

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def edges(self):
        """Edge list [(i, j), ...] with i < j, sorted."""
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(rows.tolist(), cols.tolist()))

    def neighbors(self, v):
        """Neighbor indices of v in ascending order."""
        return np.nonzero(self.adjacency[v])[0]

    def with_features(self, features):
        """Same topology with replaced node features."""
        return Graph(self.adjacency, features, self.node_ids)

    @classmethod
    def from_edges(cls, n, edges, features=None, node_ids=None):
        """Build a binary-adjacency graph from an undirected edge list."""
        adj = np.zeros((n, n), dtype=np.float64)
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise IndexError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise InvariantViolation(f"self-loop ({i}, {i}) not allowed")
            adj[i, j] = 1.0
            adj[j, i] = 1.0
        if features is None:
            features = np.ones((n, 1), dtype=np.float64)
        return cls(adj, features, node_ids)


@dataclass(frozen=True)
class NodeCentricSubgraph:
    """A k-hop neighborhood standardized to a fixed node count.

    ``graph`` has exactly m nodes; node 0 is the center and real nodes keep
    BFS discovery order. Padding nodes (index >= real_node_count) have zero
    features and no edges, so every standardized subgraph shares the same
    self-similarity under the matching kernel.
    """

    center: int
    graph: Graph
    hop_radius: int
    real_node_count: int

    def __post_init__(self):
        m = self.graph.n
        if not (0 < self.real_node_count <= m):
            raise InvariantViolation("real_node_count must be in 1..m")
        pad = slice(self.real_node_count, m)
        if np.any(self.graph.adjacency[pad, :]) or np.any(self.graph.features[pad, :]):
            raise InvariantViolation("padding nodes must have zero rows")

    @property
    def m(self):
        return self.graph.n


def induced_edges(g, nodes):
    """Edges of g with both endpoints in ``nodes``, as sorted (i, j) pairs.

    Indices must be valid and distinct; pairs use original graph indices.
    """
    nodes = list(nodes)
    if len(set(nodes)) != len(nodes):
        raise IndexError("node list contains duplicate indices")
    for v in nodes:
        if not (0 <= v < g.n):
            raise IndexError(f"node index {v} out of range for n={g.n}")
    out = []
    for a_pos, i in enumerate(nodes):
        for j in nodes[a_pos + 1:]:
            if g.adjacency[i, j] > 0.0:
                out.append((min(i, j), max(i, j)))
    out.sort()
    return out


def bfs_ball(g, u, k):
    """Nodes within k hops of u, in BFS discovery order, with their hop counts.

    Neighbors are visited in ascending index order, so the ordering (and
    therefore deterministic truncation) is reproducible.
    """
    hop = {u: 0}
    order = [u]
    queue = deque([u])
    while queue:
        v = queue.popleft()
        if hop[v] == k:
            continue
        for w in g.neighbors(v):
            w = int(w)
            if w not in hop:
                hop[w] = hop[v] + 1
                order.append(w)
                queue.append(w)
    return order, hop


def extract_subgraph(g, u, k, m, policy=TRUNCATE_DETERMINISTIC, rng=None):
    """Extract the k-hop subgraph centered on u, standardized to m nodes.

    The BFS ball around u is induced from g; if it exceeds m nodes it is
    truncated (keeping the center and preferring nearer hops), if it falls
    short it is padded with isolated zero-feature nodes. Under the default
    deterministic policy the first m nodes in BFS discovery order are kept;
    under the seeded-random policy the outermost kept hop is sampled
    uniformly with ``rng``.
    """
    if not (0 <= u < g.n):
        raise IndexError(f"center {u} out of range for n={g.n}")
    if k < 1:
        raise ConfigError(f"hop radius must be >= 1, got {k}")
    if m < 1:
        raise ConfigError(f"standard size must be >= 1, got {m}")
    if policy not in (TRUNCATE_DETERMINISTIC, TRUNCATE_SEEDED_RANDOM):
        raise ConfigError(f"unknown truncation policy {policy!r}")

    order, hop = bfs_ball(g, u, k)
    if len(order) > m:
        if policy == TRUNCATE_DETERMINISTIC:
            kept = order[:m]
        else:
            if rng is None:
                raise ConfigError("seeded-random truncation requires an rng")
            boundary = hop[order[m - 1]]
            inner = [v for v in order if hop[v] < boundary]
            outer = [v for v in order if hop[v] == boundary]
            picked = set(rng.choice(len(outer), size=m - len(inner),
                                    replace=False).tolist())
            kept = inner + [v for i, v in enumerate(outer) if i in picked]
    else:
        kept = order

    real = len(kept)
    idx = np.asarray(kept, dtype=np.int64)
    sub_adj = np.zeros((m, m), dtype=np.float64)
    sub_adj[:real, :real] = g.adjacency[np.ix_(idx, idx)]
    sub_feat = np.zeros((m, g.d), dtype=np.float64)
    sub_feat[:real] = g.features[idx]
    node_ids = np.full(m, -1, dtype=np.int64)
    node_ids[:real] = idx
    sub = Graph(sub_adj, sub_feat, node_ids)
    return NodeCentricSubgraph(center=u, graph=sub, hop_radius=k,
                               real_node_count=real)


def pad_graph(g, m):
    """Pad g with isolated zero-feature nodes up to m nodes."""
    if g.n > m:
        raise ShapeError(f"cannot pad a {g.n}-node graph down to {m}")
    if g.n == m:
        return g
    adj = np.zeros((m, m), dtype=np.float64)
    adj[:g.n, :g.n] = g.adjacency
    feats = np.zeros((m, g.d), dtype=np.float64)
    feats[:g.n] = g.features
    ids = np.full(m, -1, dtype=np.int64)
    ids[:g.n] = g.node_ids if g.node_ids is not None else np.arange(g.n)
    return Graph(adj, feats, ids)


def load_bundle(path):
    """Read a graph-bundle JSON file -> (Graph, labels or None).

    Schema: {"n": int, "edges": [[i, j], ...], "features": [[...], ...],
    "labels": [...]?}. The edge list implies a symmetric binary adjacency.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}", line=exc.lineno)
    for key in ("n", "edges", "features"):
        if key not in raw:
            raise ParseError(f"{path}: bundle missing required key {key!r}")
    n = int(raw["n"])
    features = np.asarray(raw["features"], dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    if features.shape[0] != n:
        raise ParseError(
            f"{path}: features have {features.shape[0]} rows, expected n={n}")
    g = Graph.from_edges(n, [tuple(e) for e in raw["edges"]], features)
    labels = raw.get("labels")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
    return g, labels


def save_bundle(path, g, labels=None):
    """Write a graph as a bundle JSON file (binary adjacency only)."""
    if np.any((g.adjacency != 0.0) & (g.adjacency != 1.0)):
        raise InvariantViolation("bundle files store binary adjacency only")
    payload = {
        "n": g.n,
        "edges": [[int(i), int(j)] for i, j in g.edges()],
        "features": g.features.tolist(),
    }
    if labels is not None:
        payload["labels"] = np.asarray(labels).tolist()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    return path
