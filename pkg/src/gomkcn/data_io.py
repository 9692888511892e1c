"""Dataset loaders and on-disk formats.

Two canonical layouts are supported: the community multi-file text layout for
graph-classification corpora (edge list + per-node graph indicator + labels,
optionally node labels/attributes), and a JSON manifest + graph-bundle pair
for single-graph node-classification datasets. Downloads are out of scope;
everything reads local files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ParseError
from .graph import Graph, load_bundle


@dataclass(frozen=True)
class GraphDataset:
    """Graph-classification corpus: one label per graph."""

    name: str
    graphs: tuple
    labels: np.ndarray

    @property
    def n_classes(self):
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class NodeDataset:
    """Node-classification dataset: one graph, one label per node."""

    name: str
    graph: Graph
    labels: np.ndarray
    splits: dict

    @property
    def n_classes(self):
        return int(self.labels.max()) + 1


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def _remap_dense(values):
    """Map arbitrary label values onto 0..C-1 (sorted order)."""
    uniq = sorted(set(values))
    lookup = {v: i for i, v in enumerate(uniq)}
    return np.asarray([lookup[v] for v in values], dtype=np.int64), len(uniq)


def load_tudataset(directory):
    """Load a graph-classification corpus in the multi-file text layout.

    Expects ``<DS>_A.txt`` (1-based comma-separated edge pairs),
    ``<DS>_graph_indicator.txt``, ``<DS>_graph_labels.txt`` and optionally
    ``<DS>_node_labels.txt`` / ``<DS>_node_attributes.txt``. Node features
    concatenate one-hot node labels with the attribute columns when both are
    present; corpora with neither get a constant scalar 1.0 per node. Graph
    labels are remapped to 0..C-1.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"dataset directory {directory} does not exist")
    name = directory.name
    base = directory / name

    def required(suffix):
        p = Path(f"{base}_{suffix}")
        if not p.exists():
            raise DataError(f"missing required dataset file {p}")
        return p

    indicator_lines = _read_lines(required("graph_indicator.txt"))
    n_nodes = len(indicator_lines)
    graph_of = np.empty(n_nodes, dtype=np.int64)
    for i, line in enumerate(indicator_lines):
        try:
            graph_of[i] = int(line.strip())
        except ValueError:
            raise ParseError(f"{name}_graph_indicator.txt: not an integer", line=i + 1)
    n_graphs = int(graph_of.max())
    if graph_of.min() != 1 or set(np.unique(graph_of)) != set(range(1, n_graphs + 1)):
        raise ParseError(f"{name}_graph_indicator.txt: graph ids must be "
                         "contiguous starting at 1")
    prev = 0
    for i, gid in enumerate(graph_of):
        if gid < prev:
            raise ParseError(f"{name}_graph_indicator.txt: graph ids must be "
                             "non-decreasing", line=i + 1)
        prev = gid

    label_lines = _read_lines(required("graph_labels.txt"))
    if len(label_lines) != n_graphs:
        raise DataError(f"{name}_graph_labels.txt has {len(label_lines)} rows, "
                        f"expected {n_graphs}")
    raw_labels = []
    for i, line in enumerate(label_lines):
        try:
            raw_labels.append(int(float(line.strip())))
        except ValueError:
            raise ParseError(f"{name}_graph_labels.txt: not a number", line=i + 1)
    labels, _ = _remap_dense(raw_labels)

    node_label_path = Path(f"{base}_node_labels.txt")
    node_attr_path = Path(f"{base}_node_attributes.txt")
    one_hot = None
    if node_label_path.exists():
        lines = _read_lines(node_label_path)
        if len(lines) != n_nodes:
            raise DataError(f"{name}_node_labels.txt has {len(lines)} rows, "
                            f"expected {n_nodes}")
        raw = []
        for i, line in enumerate(lines):
            try:
                raw.append(int(float(line.strip())))
            except ValueError:
                raise ParseError(f"{name}_node_labels.txt: not a number", line=i + 1)
        dense, n_kinds = _remap_dense(raw)
        one_hot = np.zeros((n_nodes, n_kinds))
        one_hot[np.arange(n_nodes), dense] = 1.0
    attrs = None
    if node_attr_path.exists():
        lines = _read_lines(node_attr_path)
        if len(lines) != n_nodes:
            raise DataError(f"{name}_node_attributes.txt has {len(lines)} rows, "
                            f"expected {n_nodes}")
        rows = []
        for i, line in enumerate(lines):
            try:
                rows.append([float(x) for x in line.replace(" ", "").split(",") if x])
            except ValueError:
                raise ParseError(f"{name}_node_attributes.txt: bad float row",
                                 line=i + 1)
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ParseError(f"{name}_node_attributes.txt: ragged rows {widths}")
        attrs = np.asarray(rows)
    if one_hot is not None and attrs is not None:
        features = np.hstack([one_hot, attrs])
    elif one_hot is not None:
        features = one_hot
    elif attrs is not None:
        features = attrs
    else:
        features = np.ones((n_nodes, 1))

    # per-graph local index ranges (indicator is non-decreasing)
    starts = np.zeros(n_graphs + 1, dtype=np.int64)
    for gid in range(1, n_graphs + 1):
        starts[gid] = starts[gid - 1] + int((graph_of == gid).sum())

    edges_per_graph = [set() for _ in range(n_graphs)]
    for i, line in enumerate(_read_lines(required("A.txt"))):
        if not line.strip():
            continue
        parts = line.replace(" ", "").split(",")
        if len(parts) != 2:
            raise ParseError(f"{name}_A.txt: expected 'i, j'", line=i + 1)
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"{name}_A.txt: not integer endpoints", line=i + 1)
        if not (1 <= a <= n_nodes and 1 <= b <= n_nodes):
            raise ParseError(f"{name}_A.txt: node index out of range", line=i + 1)
        ga, gb = graph_of[a - 1], graph_of[b - 1]
        if ga != gb:
            raise ParseError(f"{name}_A.txt: edge crosses graphs {ga} and {gb}",
                             line=i + 1)
        if a == b:
            continue  # stray self-loops are dropped
        off = starts[ga - 1]
        i_loc, j_loc = a - 1 - off, b - 1 - off
        edges_per_graph[ga - 1].add((min(i_loc, j_loc), max(i_loc, j_loc)))

    graphs = []
    for gid in range(n_graphs):
        lo, hi = starts[gid], starts[gid + 1]
        graphs.append(Graph.from_edges(int(hi - lo), sorted(edges_per_graph[gid]),
                                       features[lo:hi]))
    return GraphDataset(name=name, graphs=tuple(graphs), labels=labels)


def split_indices(n_items, ratios, seed):
    """Disjoint shuffled index sets covering 0..n_items-1 per ratio."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_items)
    n_train = int(round(ratios[0] * n_items))
    n_val = int(round(ratios[1] * n_items))
    return {"train": np.sort(perm[:n_train]),
            "val": np.sort(perm[n_train:n_train + n_val]),
            "test": np.sort(perm[n_train + n_val:])}


def load_split_file(path):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    for key in ("train", "val", "test"):
        if key not in raw:
            raise ParseError(f"{path}: split file missing {key!r}")
    return {k: np.asarray(raw[k], dtype=np.int64) for k in ("train", "val", "test")}


def save_split_file(path, splits):
    payload = {k: np.asarray(v).tolist() for k, v in splits.items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_node_dataset(manifest_path):
    """Load a node-classification dataset described by a JSON manifest.

    Manifest schema: {"name": str, "task": "node", "bundle": path,
    "split": path?, "split_ratio": [r, r, r]?, "split_seed": int?}. Paths are
    relative to the manifest. Labels live in the bundle; when no explicit
    split file is given a seeded 6:2:2 split is drawn.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("task", "node") != "node":
        raise DataError(f"{manifest_path}: expected a node-classification manifest")
    if "bundle" not in manifest:
        raise ParseError(f"{manifest_path}: manifest missing 'bundle'")
    base = manifest_path.parent
    graph, labels = load_bundle(base / manifest["bundle"])
    if labels is None:
        raise DataError(f"{manifest_path}: bundle has no node labels")
    if labels.shape[0] != graph.n:
        raise DataError(f"{manifest_path}: {labels.shape[0]} labels for "
                        f"{graph.n} nodes")
    labels, _ = _remap_dense(labels.tolist())
    if "split" in manifest and manifest["split"]:
        splits = load_split_file(base / manifest["split"])
        seen = np.concatenate(list(splits.values()))
        if len(np.unique(seen)) != len(seen) or seen.max() >= graph.n:
            raise DataError(f"{manifest_path}: split indices overlap or exceed n")
    else:
        ratios = tuple(manifest.get("split_ratio", (0.6, 0.2, 0.2)))
        splits = split_indices(graph.n, ratios, int(manifest.get("split_seed", 0)))
    return NodeDataset(name=manifest.get("name", manifest_path.stem),
                       graph=graph, labels=labels, splits=splits)


def kfold_splits(n_items, k=10, seed=0, val_fraction=0.1):
    """Cross-validation folds with an inner train/validation holdout.

    Items are shuffled once; fold sizes differ by at most one. Each entry is
    (train_idx, val_idx, test_idx): the fold is the test set and the
    remaining items are split 1 - val_fraction : val_fraction.
    """
    if n_items < k:
        raise ConfigError(f"need at least {k} items for {k} folds, got {n_items}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_items)
    folds = np.array_split(perm, k)
    out = []
    for i, fold in enumerate(folds):
        rest = np.concatenate([f for j, f in enumerate(folds) if j != i])
        rest = rest[rng.permutation(len(rest))]
        n_val = int(round(val_fraction * len(rest)))
        out.append((np.sort(rest[n_val:]), np.sort(rest[:n_val]), np.sort(fold)))
    return out
