"""Artifact writers: DOT renderings of learned filters, training checkpoints,
metric streams, and run summaries."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .model import GraphFilter


def write_dot(path, adjacency, features=None, threshold=0.5, name="filter"):
    """Render a weighted graph as DOT, keeping edges above the threshold.

    Node features are attached as a ``feat`` attribute for downstream
    renderers; edge weights are kept to three decimals.
    """
    adjacency = np.asarray(adjacency)
    n = adjacency.shape[0]
    lines = [f"graph {name} {{"]
    for v in range(n):
        attrs = [f'label="{v}"']
        if features is not None:
            feat = ",".join(f"{x:.3f}" for x in np.asarray(features)[v])
            attrs.append(f'feat="{feat}"')
        lines.append(f"  {v} [{' '.join(attrs)}];")
    for i in range(n):
        for j in range(i + 1, n):
            w = adjacency[i, j]
            if w > threshold:
                lines.append(f'  {i} -- {j} [weight="{w:.3f}"];')
    lines.append("}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def export_filters(directory, filters, threshold=0.5):
    """One DOT file per filter under ``directory``."""
    directory = Path(directory)
    paths = []
    for i, f in enumerate(filters):
        paths.append(write_dot(directory / f"filter_{i}.dot", f.adjacency,
                               f.features, threshold=threshold, name=f"filter_{i}"))
    return paths


def write_metrics_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_summary(path, summary):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_jsonify)
    return path


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def save_checkpoint(path, filters, mlps=None, config=None, epoch=None, seed=None):
    """Persist trainable state as JSON: filters, MLP heads, config, position."""
    payload = {
        "filters": [{"adjacency": f.adjacency.tolist(),
                     "features": f.features.tolist(),
                     "bounded_features": f.bounded_features}
                    for f in filters],
        "mlps": {},
        "config": config or {},
        "epoch": epoch,
        "seed": seed,
    }
    for name, head in (mlps or {}).items():
        payload["mlps"][name] = {
            "sizes": head.sizes,
            "dropout": head.dropout,
            "weights": [w.tolist() for w in head.weights],
            "biases": [b.tolist() for b in head.biases],
        }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    return path


def load_checkpoint(path):
    """Restore filters and MLP heads from a checkpoint file.

    Returns (filters, mlps, meta) where meta carries config/epoch/seed.
    """
    from .model import MlpHead

    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    filters = [GraphFilter(np.asarray(f["adjacency"]), np.asarray(f["features"]),
                           f.get("bounded_features", True))
               for f in payload["filters"]]
    mlps = {}
    for name, blob in payload.get("mlps", {}).items():
        head = MlpHead(blob["sizes"], np.random.default_rng(0),
                       dropout=blob.get("dropout", 0.0))
        head.weights = [np.asarray(w) for w in blob["weights"]]
        head.biases = [np.asarray(b) for b in blob["biases"]]
        mlps[name] = head
    meta = {"config": payload.get("config", {}), "epoch": payload.get("epoch"),
            "seed": payload.get("seed")}
    return filters, mlps, meta
