"""Pure-numpy implementations of the hot numeric kernels.

This module is the reference path: every function here has a numba twin in
``numba_impl`` that must produce the same values up to floating-point
associativity. Shapes follow one convention throughout:

* ``levels``      -- (t+1, m, d): stacked neighbor-aggregation levels of one
                     graph; row ``levels[i, v]`` is the i-th level embedding of
                     node v.
* ``sub_levels``  -- (B, t+1, m, d): a batch of subgraph level stacks.
* ``filt_levels`` -- (T, t+1, m, d): level stacks of the T graph filters.
* ``inv_dtau``    -- the RBF exponent scale 1 / (d * tau).
"""

from __future__ import annotations

import numpy as np


def subtree_levels(adj, feats, t):
    """Stack the neighbor-aggregation levels A^i @ F for i = 0..t."""
    m, d = feats.shape
    levels = np.empty((t + 1, m, d), dtype=np.float64)
    levels[0] = feats
    for i in range(1, t + 1):
        levels[i] = adj @ levels[i - 1]
    return levels


def batch_subtree_levels(adjs, feats, t):
    """Levels for a batch: adjs (B,m,m), feats (B,m,d) -> (B,t+1,m,d)."""
    b, m, d = feats.shape
    levels = np.empty((b, t + 1, m, d), dtype=np.float64)
    levels[:, 0] = feats
    for i in range(1, t + 1):
        levels[:, i] = np.matmul(adjs, levels[:, i - 1])
    return levels


def pairwise_similarity(lx, ly, inv_dtau):
    """Per-node similarity matrix between two level stacks.

    Entry (a, b) sums exp(-inv_dtau * ||lx[i,a] - ly[i,b]||^2) over levels i.
    """
    diff = lx[:, :, None, :] - ly[:, None, :, :]
    sq = np.einsum("ipqd,ipqd->ipq", diff, diff)
    return np.exp(-inv_dtau * sq).sum(axis=0)


def greedy_from_sim(sim):
    """Greedy row-major matching on a similarity matrix.

    Rows are visited in index order; each takes the still-unmatched column of
    maximal similarity, ties resolved toward the lowest column index. Returns
    (col_of_row, total); unmatched rows (when rows > cols) get -1.
    """
    p, q = sim.shape
    col_of_row = np.full(p, -1, dtype=np.int64)
    available = np.ones(q, dtype=bool)
    total = 0.0
    for x in range(min(p, q)):
        row = np.where(available, sim[x], -np.inf)
        y = int(np.argmax(row))
        col_of_row[x] = y
        available[y] = False
        total += sim[x, y]
    return col_of_row, total


def batch_kappa_greedy(sub_levels, filt_levels, inv_dtau):
    """Kernel responses of every subgraph against every filter.

    Returns (kappa (B,T), match (B,T,m)) where match[b,j] maps each subgraph
    node to its greedily matched filter node.
    """
    b_n = sub_levels.shape[0]
    t_n = filt_levels.shape[0]
    m = sub_levels.shape[2]
    kappa = np.empty((b_n, t_n), dtype=np.float64)
    match = np.empty((b_n, t_n, m), dtype=np.int64)
    for b in range(b_n):
        for j in range(t_n):
            sim = pairwise_similarity(sub_levels[b], filt_levels[j], inv_dtau)
            col_of_row, total = greedy_from_sim(sim)
            kappa[b, j] = total
            match[b, j] = col_of_row
    return kappa, match


def matched_level_grads(lx, ly, col_of_row, inv_dtau):
    """Gradients of the matched-similarity sum w.r.t. both level stacks.

    For each matched pair (x, y) and level i the per-level term is
    exp(-inv_dtau * ||lx[i,x] - ly[i,y]||^2); its gradient w.r.t. ly[i,y] is
    2*inv_dtau*term*(lx[i,x] - ly[i,y]) and the negation w.r.t. lx[i,x].
    """
    dlx = np.zeros_like(lx)
    dly = np.zeros_like(ly)
    for x in range(lx.shape[1]):
        y = col_of_row[x]
        if y < 0:
            continue
        diff = lx[:, x, :] - ly[:, y, :]
        term = np.exp(-inv_dtau * np.sum(diff * diff, axis=1))
        g = (2.0 * inv_dtau) * term[:, None] * diff
        dly[:, y, :] += g
        dlx[:, x, :] -= g
    return dlx, dly


def levels_backward(adj, levels, dlevels):
    """Backpropagate level-stack gradients to the graph's adjacency and features.

    ``levels`` must be the forward stack A^i @ F for the given adj. Returns
    (d_adj, d_feats) where d_adj treats every adjacency entry as independent
    (callers fold in the symmetry of the parametrization).
    """
    t1 = levels.shape[0]
    d_adj = np.zeros_like(adj)
    dc = dlevels[t1 - 1].copy()
    for i in range(t1 - 1, 0, -1):
        d_adj += dc @ levels[i - 1].T
        dc = adj.T @ dc
        dc += dlevels[i - 1]
    return d_adj, dc


def batch_levels_backward_features(adjs, dlevels):
    """Feature-only backward pass for a batch of level stacks.

    Propagates each dlevels[b] down to level 0 through the fixed adjacency
    adjs[b] (adjacency gradients are skipped: data-graph topology is not
    trainable). Returns d_feats (B, m, d).
    """
    b_n, t1 = dlevels.shape[0], dlevels.shape[1]
    d_feats = dlevels[:, t1 - 1].copy()
    adjs_t = np.swapaxes(adjs, 1, 2)
    for i in range(t1 - 1, 0, -1):
        d_feats = np.matmul(adjs_t, d_feats)
        d_feats += dlevels[:, i - 1]
    return d_feats


def accumulate_matched_grads(sub_levels, filt_levels, match, weights, inv_dtau,
                             want_subgraph_grads):
    """Weighted gradient accumulation across a batch of matched kernel calls.

    ``weights[b, j]`` scales the gradient of kappa(subgraph b, filter j);
    zero weights are skipped. Returns (d_filt_levels (T,t+1,m,d),
    d_sub_levels (B,t+1,m,d), the latter empty unless requested).
    """
    b_n, t_n = weights.shape
    d_filt = np.zeros_like(filt_levels)
    if want_subgraph_grads:
        d_sub = np.zeros_like(sub_levels)
    else:
        d_sub = np.zeros((0, 0, 0, 0), dtype=np.float64)
    for b in range(b_n):
        for j in range(t_n):
            w = weights[b, j]
            if w == 0.0:
                continue
            dlx, dly = matched_level_grads(
                sub_levels[b], filt_levels[j], match[b, j], inv_dtau)
            d_filt[j] += w * dly
            if want_subgraph_grads:
                d_sub[b] += w * dlx
    return d_filt, d_sub


def extract_all_subgraphs(adj, k, m):
    """Breadth-first k-hop subgraph around every node, size-standardized to m.

    Deterministic truncation: the first m nodes in BFS discovery order are
    kept (center first, neighbors visited in index order). Returns
    (sub_adj (n,m,m), node_ids (n,m) with -1 marking padding, real_counts (n,)).
    """
    n = adj.shape[0]
    sub_adj = np.zeros((n, m, m), dtype=np.float64)
    node_ids = np.full((n, m), -1, dtype=np.int64)
    real_counts = np.empty(n, dtype=np.int64)
    for u in range(n):
        hop = np.full(n, -1, dtype=np.int64)
        order = np.empty(n, dtype=np.int64)
        order[0] = u
        hop[u] = 0
        head, tail = 0, 1
        while head < tail:
            v = order[head]
            head += 1
            if hop[v] == k:
                continue
            for w in range(n):
                if adj[v, w] > 0.0 and hop[w] < 0:
                    hop[w] = hop[v] + 1
                    order[tail] = w
                    tail += 1
        cnt = min(tail, m)
        kept = order[:cnt]
        node_ids[u, :cnt] = kept
        real_counts[u] = cnt
        sub_adj[u, :cnt, :cnt] = adj[np.ix_(kept, kept)]
    return sub_adj, node_ids, real_counts
