"""Synthetic graph generation: preferential-attachment base graphs, a small
motif library, motif attachment, and the labeled motif-classification corpus.

The eight motif topologies are project-canonical ground truth (pinned in
``MOTIFS`` and mirrored by a golden file under tests): recovery experiments
compare learned filters against exactly these edge lists.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph import Graph


@dataclass(frozen=True)
class MotifSpec:
    """A named small pattern graph given by its edge list."""

    name: str
    n: int
    edges: tuple

    def __post_init__(self):
        if self.n > 8:
            raise ConfigError(f"motif {self.name!r} exceeds 8 nodes")
        seen = set()
        for i, j in self.edges:
            if not (0 <= i < self.n and 0 <= j < self.n) or i == j:
                raise ConfigError(f"motif {self.name!r} has invalid edge ({i},{j})")
            seen.add((min(i, j), max(i, j)))
        if len(seen) != len(self.edges):
            raise ConfigError(f"motif {self.name!r} has duplicate edges")
        if not _edges_connected(self.n, self.edges):
            raise ConfigError(f"motif {self.name!r} must be connected")

    def adjacency(self):
        adj = np.zeros((self.n, self.n))
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = 1.0
        return adj

    def graph(self, d, rng):
        """Instantiate with fresh uniform [0, 1] node features."""
        return Graph(self.adjacency(), rng.uniform(0.0, 1.0, (self.n, d)))


def _edges_connected(n, edges):
    seen = {0}
    frontier = [0]
    nbrs = {v: [] for v in range(n)}
    for i, j in edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    while frontier:
        v = frontier.pop()
        for w in nbrs[v]:
            if w not in seen:
                seen.add(w)
                frontier.append(w)
    return len(seen) == n


#: Canonical motif definitions, each a compact reading of its pictogram. All
#: eight are 6-node graphs: the four mining motifs must have six nodes so ten
#: copies of each on a 760-node base give exactly 1000 nodes, and each motif
#: is drawn dense (triangle-rich, no pendant strokes) because tree-like
#: variants are not separable from a preferential-attachment background under
#: the matching kernel (its per-level aggregation sees pendants as generic
#: branches). "house": walls-and-floor square braced by the roof triangle,
#: with a door triangle in one corner; "cup": a braced square bowl over a
#: bottom point plus a handle triangle on the rim; "wheel": a hub joined to
#: every node of a 5-cycle; "crown": a triangular band carrying three
#: triangular points; "book": four triangular pages sharing a spine edge;
#: "diamond": the faceted gem outline (two apexes over a square girdle);
#: "circle": the 6-cycle; "email": an envelope with both diagonals of the
#: body and a flap point over the top edge.
MOTIFS = {
    "house": MotifSpec("house", 6,
                       ((0, 1), (0, 2), (1, 3), (2, 3), (2, 4), (3, 4),
                        (0, 5), (2, 5))),
    "cup": MotifSpec("cup", 6,
                     ((0, 1), (1, 2), (2, 3), (0, 3), (1, 3),
                      (1, 4), (2, 4), (3, 4), (0, 5), (1, 5))),
    "wheel": MotifSpec("wheel", 6,
                       ((0, 1), (0, 2), (0, 3), (0, 4), (0, 5),
                        (1, 2), (2, 3), (3, 4), (4, 5), (1, 5))),
    "crown": MotifSpec("crown", 6,
                       ((0, 1), (1, 2), (0, 2), (0, 3), (1, 3),
                        (1, 4), (2, 4), (2, 5), (0, 5))),
    "book": MotifSpec("book", 6,
                      ((0, 1), (0, 2), (1, 2), (0, 3), (1, 3),
                       (0, 4), (1, 4), (0, 5), (1, 5))),
    "diamond": MotifSpec("diamond", 6,
                         ((0, 1), (1, 2), (2, 3), (0, 3),
                          (0, 4), (1, 4), (2, 4), (3, 4),
                          (0, 5), (1, 5), (2, 5), (3, 5))),
    "circle": MotifSpec("circle", 6,
                        ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5))),
    "email": MotifSpec("email", 6,
                       ((0, 1), (1, 3), (2, 3), (0, 2),
                        (0, 4), (1, 4), (2, 4), (3, 4),
                        (0, 5), (1, 5), (4, 5))),
}

MINING_MOTIFS = ("house", "cup", "wheel", "crown")
CLASSIFICATION_MOTIFS = ("book", "diamond", "circle", "email")


def barabasi_albert(n, attach_m, seed, feature_dim=3):
    """Preferential-attachment random graph with uniform [0, 1] features.

    Starts from ``attach_m`` isolated seed nodes; every new node draws
    ``attach_m`` distinct targets with probability proportional to degree
    (the first arrival links to all seed nodes, keeping the graph connected).
    """
    if attach_m < 1 or n <= attach_m:
        raise ConfigError(f"need n > attach_m >= 1, got n={n}, attach_m={attach_m}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    adj = np.zeros((n, n))
    repeated = list(range(attach_m))  # endpoint multiset; degree-proportional draws
    for v in range(attach_m, n):
        targets = set()
        while len(targets) < attach_m:
            pick = repeated[rng.integers(len(repeated))]
            targets.add(int(pick))
        for u in targets:
            adj[v, u] = adj[u, v] = 1.0
            repeated.append(u)
            repeated.append(v)
    feats = rng.uniform(0.0, 1.0, (n, feature_dim))
    return Graph(adj, feats)


def attach_motif(base, motif, rng):
    """Append a motif and bridge it to the base with one random edge.

    Motif nodes take indices base.n .. base.n + motif.n - 1 and fresh uniform
    [0, 1] features; the bridge joins a uniformly chosen base node to a
    uniformly chosen motif node.
    """
    n = base.n + motif.n
    adj = np.zeros((n, n))
    adj[:base.n, :base.n] = base.adjacency
    adj[base.n:, base.n:] = motif.adjacency()
    anchor = int(rng.integers(base.n))
    port = base.n + int(rng.integers(motif.n))
    adj[anchor, port] = adj[port, anchor] = 1.0
    feats = np.vstack([base.features, rng.uniform(0.0, 1.0, (motif.n, base.d))])
    return Graph(adj, feats)


@dataclass(frozen=True)
class MiningGround:
    """The pattern-mining graph with its planted-motif bookkeeping."""

    graph: Graph
    motif_nodes: tuple   # ((kind, (node indices...)), ...) per planted copy
    ba_nodes: int


def build_mining_graph(ba_n=760, copies=10, motif_names=MINING_MOTIFS,
                       d=3, attach_m=1, seed=0):
    """Base graph plus ``copies`` planted instances of each named motif."""
    rng = np.random.default_rng(seed)
    g = barabasi_albert(ba_n, attach_m, rng, feature_dim=d)
    planted = []
    for name in motif_names:
        for _ in range(copies):
            spec = MOTIFS[name]
            start = g.n
            g = attach_motif(g, spec, rng)
            planted.append((name, tuple(range(start, start + spec.n))))
    return MiningGround(graph=g, motif_nodes=tuple(planted), ba_nodes=ba_n)


@dataclass(frozen=True)
class MotifDataset:
    """Labeled graphs with a stratified train/val/test split."""

    graphs: tuple
    labels: np.ndarray
    class_names: tuple
    splits: dict   # {"train": indices, "val": ..., "test": ...}
    seed: int


def build_motif_classification_dataset(count=8000, ba_n=25,
                                       motif_names=CLASSIFICATION_MOTIFS,
                                       d=3, split=(0.8, 0.1, 0.1), seed=0,
                                       attach_m=1):
    """Graphs labeled by which motif was attached to their random base.

    Classes are exactly balanced; splits are stratified per class and
    disjoint. ``count`` must be divisible by the number of motif kinds.
    """
    kinds = len(motif_names)
    if count % kinds != 0:
        raise ConfigError(f"count {count} not divisible by {kinds} classes")
    if abs(sum(split) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {split}")
    rng = np.random.default_rng(seed)
    per_class = count // kinds
    graphs, labels = [], []
    for label, name in enumerate(motif_names):
        spec = MOTIFS[name]
        for _ in range(per_class):
            base = barabasi_albert(ba_n, attach_m, rng, feature_dim=d)
            graphs.append(attach_motif(base, spec, rng))
            labels.append(label)
    labels = np.asarray(labels, dtype=np.int64)
    train_idx, val_idx, test_idx = [], [], []
    for label in range(kinds):
        members = np.nonzero(labels == label)[0]
        members = members[rng.permutation(len(members))]
        n_train = int(round(split[0] * len(members)))
        n_val = int(round(split[1] * len(members)))
        train_idx.extend(members[:n_train].tolist())
        val_idx.extend(members[n_train:n_train + n_val].tolist())
        test_idx.extend(members[n_train + n_val:].tolist())
    splits = {"train": np.asarray(sorted(train_idx), dtype=np.int64),
              "val": np.asarray(sorted(val_idx), dtype=np.int64),
              "test": np.asarray(sorted(test_idx), dtype=np.int64)}
    return MotifDataset(graphs=tuple(graphs), labels=labels,
                        class_names=tuple(motif_names), splits=splits, seed=seed)


def write_dataset(directory, dataset):
    """Emit a labeled dataset as graph-bundle files plus a manifest.

    The manifest records the file list, labels, split assignment, class
    names, and the generating seed; graphs land in ``graphs/`` one bundle
    per file.
    """
    import json
    from pathlib import Path

    from .graph import save_bundle

    directory = Path(directory)
    (directory / "graphs").mkdir(parents=True, exist_ok=True)
    files = []
    for i, g in enumerate(dataset.graphs):
        rel = f"graphs/{i:05d}.json"
        save_bundle(directory / rel, g)
        files.append(rel)
    manifest = {
        "task": "graph",
        "files": files,
        "labels": dataset.labels.tolist(),
        "class_names": list(dataset.class_names),
        "splits": {k: v.tolist() for k, v in dataset.splits.items()},
        "seed": dataset.seed,
    }
    path = directory / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh)
    return path


def are_isomorphic(adj_a, adj_b):
    """Exact isomorphism of two small binary graphs (brute force, n <= 8)."""
    adj_a = np.asarray(adj_a)
    adj_b = np.asarray(adj_b)
    n = adj_a.shape[0]
    if adj_b.shape[0] != n:
        return False
    if n > 8:
        raise ConfigError("brute-force isomorphism is limited to 8 nodes")
    deg_a = sorted(adj_a.sum(axis=0).tolist())
    deg_b = sorted(adj_b.sum(axis=0).tolist())
    if deg_a != deg_b:
        return False
    for perm in itertools.permutations(range(n)):
        p = np.asarray(perm)
        if np.array_equal(adj_a, adj_b[np.ix_(p, p)]):
            return True
    return False


def padded_motif_adjacency(name, m):
    """Canonical motif adjacency padded with isolated nodes up to m."""
    spec = MOTIFS[name]
    if spec.n > m:
        raise ConfigError(f"motif {name!r} has {spec.n} nodes > m={m}")
    adj = np.zeros((m, m))
    adj[:spec.n, :spec.n] = spec.adjacency()
    return adj


def identify_motif(adjacency, motif_names, threshold=0.5):
    """Name of the canonical motif the thresholded graph is isomorphic to.

    Pads each candidate motif with isolated nodes up to the filter size
    before the exact check; returns None when nothing matches.
    """
    binary = (np.asarray(adjacency) > threshold).astype(float)
    m = binary.shape[0]
    for name in motif_names:
        if MOTIFS[name].n <= m and are_isomorphic(binary, padded_motif_adjacency(name, m)):
            return name
    return None
