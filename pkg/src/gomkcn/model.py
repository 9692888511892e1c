"""Trainable graph filters, kernel layers, MLP heads, losses, and the
box-constrained Adam optimizer.

A model is a stack: optional front MLP (feature denoising / dimensionality
reduction) -> one or more kernel layers (each node's standardized subgraph is
scored against every trainable filter) -> optional pooling -> classifier MLP.
Filters are small graphs whose adjacency weights and features are the
learnable parameters, kept inside [0, 1] by projection after every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backends, tse
from .errors import ConfigError, DataError, ShapeError, TrainingError
from .gradients import GradientTape, fold_adjacency_gradient
from .graph import Graph


@dataclass
class TrainConfig:
    """Shared optimizer/loop settings."""

    epochs: int
    lr: float
    batch_size: int = 0  # 0 = full batch
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    pooling: str = "max"
    loss: str = "cross_entropy"

    def __post_init__(self):
        if self.epochs <= 0:
            raise ConfigError(f"epochs must be positive, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.batch_size < 0:
            raise ConfigError(f"batch size must be >= 0, got {self.batch_size}")
        if self.pooling not in ("max", "add", "mean"):
            raise ConfigError(f"pooling must be max|add|mean, got {self.pooling!r}")


class GraphFilter:
    """A small graph whose adjacency and features are trainable.

    The adjacency is one parameter per unordered node pair, materialized as a
    symmetric zero-diagonal matrix; all parameters live in [0, 1] (features
    too unless ``bounded_features`` is off). ``project_`` restores the box
    and structural constraints after a raw optimizer step.
    """

    def __init__(self, adjacency, features, bounded_features=True):
        adjacency = np.array(adjacency, dtype=np.float64)
        features = np.array(features, dtype=np.float64)
        if adjacency.shape[0] != adjacency.shape[1]:
            raise ShapeError("filter adjacency must be square")
        if features.shape[0] != adjacency.shape[0]:
            raise ShapeError("filter features must have one row per node")
        self.adjacency = adjacency
        self.features = features
        self.bounded_features = bounded_features
        self.project_()

    @classmethod
    def random(cls, n, d, rng, adj_low=0.3, adj_high=0.7, bounded_features=True):
        """Mid-range random init: keeps RBF terms responsive and the box
        projection inactive at the start."""
        upper = rng.uniform(adj_low, adj_high, size=(n, n))
        adj = np.triu(upper, k=1)
        adj = adj + adj.T
        feats = rng.uniform(0.0, 1.0, size=(n, d))
        return cls(adj, feats, bounded_features)

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def upper_triangle(self):
        return self.adjacency[np.triu_indices(self.n, k=1)]

    def project_(self):
        np.clip(self.adjacency, 0.0, 1.0, out=self.adjacency)
        self.adjacency[:] = 0.5 * (self.adjacency + self.adjacency.T)
        np.fill_diagonal(self.adjacency, 0.0)
        if self.bounded_features:
            np.clip(self.features, 0.0, 1.0, out=self.features)
        return self

    def as_graph(self):
        return Graph(self.adjacency, self.features)

    def padded_arrays(self, m):
        """(adjacency, features) padded with isolated zero nodes up to m."""
        if m < self.n:
            raise ShapeError(f"cannot pad {self.n}-node filter down to {m}")
        if m == self.n:
            return self.adjacency.copy(), self.features.copy()
        adj = np.zeros((m, m), dtype=np.float64)
        adj[:self.n, :self.n] = self.adjacency
        feats = np.zeros((m, self.d), dtype=np.float64)
        feats[:self.n] = self.features
        return adj, feats


class GomkcnLayer:
    """One kernel-convolution layer: T filters scored against every subgraph."""

    def __init__(self, filters, t, tau, k=1, m=None):
        if not filters:
            raise ConfigError("a layer needs at least one filter")
        n0, d0 = filters[0].n, filters[0].d
        for f in filters:
            if f.n != n0 or f.d != d0:
                raise ConfigError("all filters in a layer must share node count "
                                  "and feature dimension")
        if tau <= 0:
            raise ConfigError(f"width parameter must be > 0, got {tau}")
        if t < 0:
            raise ConfigError(f"level count must be >= 0, got {t}")
        self.filters = list(filters)
        self.t = t
        self.tau = tau
        self.k = k
        self.m = n0 if m is None else m
        if self.m < n0:
            raise ConfigError(f"standard size m={self.m} below filter size {n0}")

    @property
    def size(self):
        return len(self.filters)

    @property
    def d_in(self):
        return self.filters[0].d

    @property
    def inv_dtau(self):
        return 1.0 / (self.d_in * self.tau)

    def filter_levels(self):
        """(level stacks, padded adjacencies) of all filters at size m."""
        levels = np.empty((self.size, self.t + 1, self.m, self.d_in))
        padded = np.empty((self.size, self.m, self.m))
        for j, f in enumerate(self.filters):
            adj, feats = f.padded_arrays(self.m)
            padded[j] = adj
            levels[j] = backends.subtree_levels(adj, feats, self.t)
        return levels, padded

    def forward_representation(self, sub):
        """Kernel responses of one standardized subgraph -> vector of length T."""
        if sub.graph.d != self.d_in:
            raise ShapeError(f"subgraph features have d={sub.graph.d}, "
                             f"filters expect {self.d_in}")
        if sub.graph.n != self.m:
            raise ShapeError(f"subgraph has {sub.graph.n} nodes, layer expects "
                             f"m={self.m}; standardize first")
        levels = backends.subtree_levels(sub.graph.adjacency, sub.graph.features,
                                         self.t)
        filt_levels, _ = self.filter_levels()
        kappa, _ = backends.batch_kappa_greedy(levels[None], filt_levels,
                                               self.inv_dtau)
        return kappa[0]


def forward_representation(layer, sub):
    """Disentangled representation of a node: its subgraph's kernel responses."""
    return layer.forward_representation(sub)


class MlpHead:
    """Dense ReLU network with inverted dropout on hidden activations."""

    def __init__(self, sizes, rng, dropout=0.0):
        if len(sizes) < 2:
            raise ConfigError("MLP needs at least input and output sizes")
        if not (0.0 <= dropout < 1.0):
            raise ConfigError(f"dropout must be in [0, 1), got {dropout}")
        self.sizes = list(sizes)
        self.dropout = dropout
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self):
        return len(self.weights)

    def forward(self, x, train=False, rng=None):
        x = np.asarray(x, dtype=np.float64)
        caches = []
        h = x
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if i < last:
                a = np.maximum(z, 0.0)
                mask = None
                if train and self.dropout > 0.0:
                    if rng is None:
                        raise ConfigError("dropout during training requires an rng")
                    mask = (rng.random(a.shape) >= self.dropout) / (1.0 - self.dropout)
                    a = a * mask
                caches.append((h, z, mask))
                h = a
            else:
                caches.append((h, z, None))
                h = z
        return h, caches

    def backward(self, caches, dout):
        grads = [None] * self.n_layers
        dh = dout
        for i in range(self.n_layers - 1, -1, -1):
            h_in, z, mask = caches[i]
            if i < self.n_layers - 1:
                if mask is not None:
                    dh = dh * mask
                dh = dh * (z > 0.0)
            grads[i] = (h_in.T @ dh, dh.sum(axis=0))
            dh = dh @ self.weights[i].T
        return dh, grads

    def zero_grads(self):
        return [(np.zeros_like(w), np.zeros_like(b))
                for w, b in zip(self.weights, self.biases)]


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.shape
    if labels.min() < 0 or labels.max() >= c:
        raise DataError(f"labels must lie in 0..{c - 1}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    logp = shifted - np.log(exp.sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(n), labels].mean())
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, dlogits


def pool_forward(z, kind):
    """Aggregate node representations (n, T) into one graph vector."""
    if kind == "max":
        arg = np.argmax(z, axis=0)
        return z[arg, np.arange(z.shape[1])], arg
    if kind == "add":
        return z.sum(axis=0), None
    if kind == "mean":
        return z.mean(axis=0), None
    raise ConfigError(f"pooling must be max|add|mean, got {kind!r}")


def pool_backward(dvec, kind, cache, n_rows):
    dz = np.zeros((n_rows, dvec.shape[0]))
    if kind == "max":
        dz[cache, np.arange(dvec.shape[0])] = dvec
    elif kind == "add":
        dz[:] = dvec
    else:
        dz[:] = dvec / n_rows
    return dz


class ProjectedAdam:
    """Adam with per-parameter projection hooks applied after each update."""

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {}
        self._v = {}

    def begin_step(self):
        self.step_count += 1

    def reset_slot(self, prefix):
        """Zero the moments of every parameter whose key starts with prefix
        (used when a parameter block is re-initialized mid-run)."""
        for key in self._m:
            if key.startswith(prefix):
                self._m[key][:] = 0.0
                self._v[key][:] = 0.0

    def update(self, key, param, grad, context=""):
        """One in-place Adam update of ``param``; raises on non-finite grads."""
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"non-finite gradient for {key!r}"
                                + (f" at {context}" if context else ""))
        if key not in self._m:
            self._m[key] = np.zeros_like(param)
            self._v[key] = np.zeros_like(param)
        m = self._m[key]
        v = self._v[key]
        m *= self.beta1
        m += (1.0 - self.beta1) * grad
        v *= self.beta2
        v += (1.0 - self.beta2) * grad * grad
        m_hat = m / (1.0 - self.beta1 ** self.step_count)
        v_hat = v / (1.0 - self.beta2 ** self.step_count)
        param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(optimizer, filters, tape, mlps=None, context=""):
    """Apply one optimizer step from a tape, then re-project all filters."""
    optimizer.begin_step()
    for i, f in enumerate(filters):
        optimizer.update(f"filter{i}.adjacency", f.adjacency,
                         tape.d_adjacency[i], context)
        optimizer.update(f"filter{i}.features", f.features,
                         tape.d_features[i], context)
        f.project_()
    for name, head in (mlps or {}).items():
        for li, (dw, db) in enumerate(tape.d_mlp[name]):
            optimizer.update(f"{name}.weight{li}", head.weights[li], dw, context)
            optimizer.update(f"{name}.bias{li}", head.biases[li], db, context)


# ---------------------------------------------------------------------------
# Batched subgraph plumbing shared by the losses and classifiers.

@dataclass
class SubgraphBatch:
    """Standardized subgraphs of one or more graphs, stacked for batch kernels.

    ``node_ids`` index into the concatenated node-feature table of all input
    graphs (-1 marks padding); ``graph_slices`` delimit each input graph's
    rows in the batch.
    """

    sub_adjs: np.ndarray     # (B, m, m)
    node_ids: np.ndarray     # (B, m), global indices, -1 = padding
    real_counts: np.ndarray  # (B,)
    graph_slices: list       # [(start, stop)] per input graph
    n_nodes_total: int

    @property
    def size(self):
        return self.sub_adjs.shape[0]

    @property
    def m(self):
        return self.sub_adjs.shape[1]


def prepare_subgraph_batch(graphs, k, m):
    """Extract and stack every node's k-hop subgraph from a list of graphs."""
    pieces_adj, pieces_ids, pieces_cnt, slices = [], [], [], []
    offset = 0
    start = 0
    for g in graphs:
        sub_adj, node_ids, counts = backends.extract_all_subgraphs(
            np.ascontiguousarray(g.adjacency), k, m)
        ids = node_ids.copy()
        ids[ids >= 0] += offset
        pieces_adj.append(sub_adj)
        pieces_ids.append(ids)
        pieces_cnt.append(counts)
        slices.append((start, start + g.n))
        start += g.n
        offset += g.n
    return SubgraphBatch(
        sub_adjs=np.concatenate(pieces_adj, axis=0),
        node_ids=np.concatenate(pieces_ids, axis=0),
        real_counts=np.concatenate(pieces_cnt, axis=0),
        graph_slices=slices,
        n_nodes_total=offset,
    )


def gather_padded(features, node_ids):
    """Rows of the global feature table per subgraph slot; -1 -> zero row."""
    table = np.vstack([features, np.zeros((1, features.shape[1]))])
    idx = np.where(node_ids >= 0, node_ids, features.shape[0])
    return table[idx]


def scatter_add_rows(dest, node_ids, rows):
    mask = node_ids >= 0
    np.add.at(dest, node_ids[mask], rows[mask])


@dataclass
class LayerCache:
    sub_levels: np.ndarray
    filt_levels: np.ndarray
    padded_adjs: np.ndarray
    match: np.ndarray
    kappa: np.ndarray


def layer_forward(layer, batch, features):
    """Kernel responses of every subgraph in a batch against every filter."""
    if features.shape[1] != layer.d_in:
        raise ShapeError(f"node features have d={features.shape[1]}, filters "
                         f"expect {layer.d_in}")
    if batch.m != layer.m:
        raise ShapeError(f"batch standardized to m={batch.m}, layer expects "
                         f"{layer.m}")
    feats = gather_padded(features, batch.node_ids)
    sub_levels = backends.batch_subtree_levels(
        np.ascontiguousarray(batch.sub_adjs), np.ascontiguousarray(feats),
        layer.t)
    filt_levels, padded_adjs = layer.filter_levels()
    kappa, match = backends.batch_kappa_greedy(sub_levels, filt_levels,
                                               layer.inv_dtau)
    return kappa, LayerCache(sub_levels, filt_levels, padded_adjs, match, kappa)


def layer_backward(layer, batch, cache, d_kappa, want_input_grads=False):
    """Filter gradients (and optionally node-feature gradients) of a batch.

    ``d_kappa[b, j]`` weights the gradient of kappa(subgraph b, filter j).
    Returns (d_adjacency list, d_features list, d_node_features or None).
    """
    d_filt_levels, d_sub_levels = backends.accumulate_matched_grads(
        cache.sub_levels, cache.filt_levels, cache.match,
        np.ascontiguousarray(d_kappa, dtype=np.float64), layer.inv_dtau,
        want_input_grads)
    n_f = layer.filters[0].n
    d_adjs, d_feats = [], []
    for j in range(layer.size):
        raw_adj, dfe = backends.levels_backward(
            cache.padded_adjs[j], cache.filt_levels[j], d_filt_levels[j])
        d_adjs.append(fold_adjacency_gradient(raw_adj)[:n_f, :n_f].copy())
        d_feats.append(dfe[:n_f].copy())
    d_nodes = None
    if want_input_grads:
        rows = backends.batch_levels_backward_features(
            np.ascontiguousarray(batch.sub_adjs), d_sub_levels)
        d_nodes = np.zeros((batch.n_nodes_total, layer.d_in))
        scatter_add_rows(d_nodes, batch.node_ids, rows)
    return d_adjs, d_feats, d_nodes


# ---------------------------------------------------------------------------
# Losses.

def loss_iso(g, filt, t, tau):
    """Negated kernel response of a filter against one target graph.

    Maximizing the kernel (minimizing this loss) drives the filter to
    reproduce the target's topology and features; at filter == target the
    loss sits at its global minimum -n*(t+1) with a zero tape.
    """
    from . import omk
    from .gradients import grad_kappa

    fg = filt.as_graph()
    kappa, matching = omk.gomk(g, fg, t, tau, matcher="greedy")
    sub_emb = tse.encode(g, t)
    tape = grad_kappa(sub_emb, fg, t, tau, matching)
    tape.scaled_(-1.0)
    return -kappa, tape


def _as_standardized_graph(item):
    g = item.graph if hasattr(item, "graph") else item
    return g


def loss_frq(subgraphs, filters, t, tau, return_details=False):
    """Negated sum of each subgraph's best filter response.

    Every subgraph contributes gradient only through its winning filter
    (ties toward the lowest filter index), so filters specialize like
    cluster centers on frequent patterns.
    """
    if not filters:
        raise ConfigError("loss_frq requires at least one filter")
    if not subgraphs:
        raise ConfigError("loss_frq requires at least one subgraph")
    graphs = [_as_standardized_graph(s) for s in subgraphs]
    m = graphs[0].n
    layer = GomkcnLayer(filters, t, tau, m=m)
    adjs = np.stack([g.adjacency for g in graphs])
    feats = np.stack([g.features for g in graphs])
    sub_levels = backends.batch_subtree_levels(adjs, feats, t)
    filt_levels, padded_adjs = layer.filter_levels()
    kappa, match = backends.batch_kappa_greedy(sub_levels, filt_levels,
                                               layer.inv_dtau)
    winners = np.argmax(kappa, axis=1)
    loss = -float(kappa[np.arange(len(graphs)), winners].sum())
    weights = np.zeros_like(kappa)
    weights[np.arange(len(graphs)), winners] = -1.0
    cache = LayerCache(sub_levels, filt_levels, padded_adjs, match, kappa)
    batch = SubgraphBatch(adjs, np.full((len(graphs), m), -1, dtype=np.int64),
                          np.array([g.n for g in graphs]), [], 0)
    d_adjs, d_feats, _ = layer_backward(layer, batch, cache, weights)
    tape = GradientTape(d_adjacency=d_adjs, d_features=d_feats)
    if return_details:
        return loss, tape, kappa, winners
    return loss, tape


# ---------------------------------------------------------------------------
# Full classifier: front MLP -> kernel layers -> pooling -> classifier MLP.

class GomkcnClassifier:
    """Classification model with kernel layers as the pattern detectors.

    With ``pooling`` set, the classifier head sees one pooled vector per
    input graph (graph classification); with ``pooling=None`` it scores each
    node's representation directly (node classification). When a front MLP
    is present, node features are transformed before subgraph encoding and
    gradients flow back through the subgraph side of the kernel into it.

    Kernel responses are scaled by the self-similarity constant m*(t+1)
    before leaving each layer, i.e. downstream consumers see the cosine
    similarity of subgraph and filter on their common sphere, a value in
    (0, 1]. Raw responses grow with m and t and would otherwise saturate the
    classifier head at initialization.
    """

    def __init__(self, layers, classifier, front=None, pooling="max"):
        if not layers:
            raise ConfigError("classifier needs at least one kernel layer")
        self.layers = list(layers)
        self.classifier = classifier
        self.front = front
        self.pooling = pooling
        for prev, nxt in zip(self.layers[:-1], self.layers[1:]):
            if nxt.d_in != prev.size:
                raise ConfigError(
                    f"layer expects d={nxt.d_in} but previous layer outputs "
                    f"{prev.size} responses")

    @property
    def k(self):
        return self.layers[0].k

    @property
    def m(self):
        return self.layers[0].m

    def all_filters(self):
        return [f for layer in self.layers for f in layer.filters]

    def mlp_heads(self):
        heads = {"classifier": self.classifier}
        if self.front is not None:
            heads["front"] = self.front
        return heads

    def forward(self, batch, features, train=False, rng=None):
        front_cache = None
        h = np.asarray(features, dtype=np.float64)
        if self.front is not None:
            h, front_cache = self.front.forward(h, train=train, rng=rng)
        layer_caches = []
        for layer in self.layers:
            kappa, lc = layer_forward(layer, batch, h)
            layer_caches.append(lc)
            h = kappa / (layer.m * (layer.t + 1))
        pool_caches = None
        if self.pooling is not None:
            pooled = np.empty((len(batch.graph_slices), h.shape[1]))
            pool_caches = []
            for gi, (start, stop) in enumerate(batch.graph_slices):
                pooled[gi], pc = pool_forward(h[start:stop], self.pooling)
                pool_caches.append(pc)
            head_in = pooled
        else:
            head_in = h
        logits, head_cache = self.classifier.forward(head_in, train=train, rng=rng)
        cache = (batch, front_cache, layer_caches, h.shape, pool_caches,
                 head_cache)
        return logits, cache

    def backward(self, cache, dlogits):
        batch, front_cache, layer_caches, z_shape, pool_caches, head_cache = cache
        dhead_in, head_grads = self.classifier.backward(head_cache, dlogits)
        if self.pooling is not None:
            dz = np.zeros(z_shape)
            for gi, (start, stop) in enumerate(batch.graph_slices):
                dz[start:stop] = pool_backward(dhead_in[gi], self.pooling,
                                               pool_caches[gi], stop - start)
        else:
            dz = dhead_in
        d_adj_all, d_feat_all = [], []
        for li in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[li]
            want_input = li > 0 or self.front is not None
            dz = dz / (layer.m * (layer.t + 1))  # undo the cosine scaling
            d_adjs, d_feats, d_nodes = layer_backward(
                layer, batch, layer_caches[li], dz, want_input_grads=want_input)
            d_adj_all = d_adjs + d_adj_all
            d_feat_all = d_feats + d_feat_all
            dz = d_nodes
        d_mlp = {"classifier": head_grads}
        if self.front is not None:
            _, front_grads = self.front.backward(front_cache, dz)
            d_mlp["front"] = front_grads
        return GradientTape(d_adjacency=d_adj_all, d_features=d_feat_all,
                            d_mlp=d_mlp)


def loss_classification(model, graphs, labels, train=False, rng=None,
                        batch=None, features=None, mask=None):
    """Mean softmax cross-entropy of a classifier over graphs (or nodes).

    ``batch``/``features`` may be passed precomputed to avoid re-extracting
    subgraphs every epoch. For node tasks (``model.pooling is None``) an
    optional boolean/index ``mask`` restricts the loss to a node subset.
    Returns (loss, tape, logits).
    """
    if batch is None:
        batch = prepare_subgraph_batch(graphs, model.k, model.m)
    if features is None:
        features = np.vstack([g.features for g in graphs])
    logits, cache = model.forward(batch, features, train=train, rng=rng)
    if mask is None:
        loss, dlogits = softmax_cross_entropy(logits, labels)
    else:
        mask = np.asarray(mask)
        loss, dmask = softmax_cross_entropy(logits[mask], np.asarray(labels)[mask])
        dlogits = np.zeros_like(logits)
        dlogits[mask] = dmask
    tape = model.backward(cache, dlogits)
    return loss, tape, logits
