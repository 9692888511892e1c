"""Numba-compiled twins of the kernels in ``numpy_impl``.

Loop nests are written to accumulate in the same order as the numpy path so
the two backends agree up to floating-point associativity. Batch loops use
``prange`` only where iterations write disjoint slices; gradient reductions
into shared filter buffers stay serial so results do not depend on the
thread schedule.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True)
def subtree_levels(adj, feats, t):
    m, d = feats.shape
    levels = np.empty((t + 1, m, d), dtype=np.float64)
    levels[0] = feats
    for i in range(1, t + 1):
        levels[i] = adj @ levels[i - 1]
    return levels


@njit(cache=True, parallel=True)
def batch_subtree_levels(adjs, feats, t):
    b_n, m, d = feats.shape
    levels = np.empty((b_n, t + 1, m, d), dtype=np.float64)
    for b in prange(b_n):
        levels[b, 0] = feats[b]
        for i in range(1, t + 1):
            levels[b, i] = adjs[b] @ levels[b, i - 1]
    return levels


@njit(cache=True)
def _sim_into(lx, ly, inv_dtau, out):
    t1, p, d = lx.shape
    q = ly.shape[1]
    for a in range(p):
        for b in range(q):
            s = 0.0
            for i in range(t1):
                sq = 0.0
                for c in range(d):
                    diff = lx[i, a, c] - ly[i, b, c]
                    sq += diff * diff
                s += np.exp(-inv_dtau * sq)
            out[a, b] = s


@njit(cache=True)
def pairwise_similarity(lx, ly, inv_dtau):
    out = np.empty((lx.shape[1], ly.shape[1]), dtype=np.float64)
    _sim_into(lx, ly, inv_dtau, out)
    return out


@njit(cache=True)
def _greedy_into(sim, col_of_row):
    p, q = sim.shape
    available = np.ones(q, dtype=np.bool_)
    total = 0.0
    for x in range(p):
        col_of_row[x] = -1
    for x in range(min(p, q)):
        best = -1
        best_s = -np.inf
        for y in range(q):
            if available[y] and sim[x, y] > best_s:
                best_s = sim[x, y]
                best = y
        col_of_row[x] = best
        available[best] = False
        total += best_s
    return total


@njit(cache=True)
def greedy_from_sim(sim):
    col_of_row = np.empty(sim.shape[0], dtype=np.int64)
    total = _greedy_into(sim, col_of_row)
    return col_of_row, total


@njit(cache=True, parallel=True)
def batch_kappa_greedy(sub_levels, filt_levels, inv_dtau):
    b_n = sub_levels.shape[0]
    t_n = filt_levels.shape[0]
    m = sub_levels.shape[2]
    kappa = np.empty((b_n, t_n), dtype=np.float64)
    match = np.empty((b_n, t_n, m), dtype=np.int64)
    for b in prange(b_n):
        sim = np.empty((m, filt_levels.shape[2]), dtype=np.float64)
        for j in range(t_n):
            _sim_into(sub_levels[b], filt_levels[j], inv_dtau, sim)
            kappa[b, j] = _greedy_into(sim, match[b, j])
    return kappa, match


@njit(cache=True)
def matched_level_grads(lx, ly, col_of_row, inv_dtau):
    t1, p, d = lx.shape
    dlx = np.zeros_like(lx)
    dly = np.zeros_like(ly)
    for x in range(p):
        y = col_of_row[x]
        if y < 0:
            continue
        for i in range(t1):
            sq = 0.0
            for c in range(d):
                diff = lx[i, x, c] - ly[i, y, c]
                sq += diff * diff
            coef = 2.0 * inv_dtau * np.exp(-inv_dtau * sq)
            for c in range(d):
                g = coef * (lx[i, x, c] - ly[i, y, c])
                dly[i, y, c] += g
                dlx[i, x, c] -= g
    return dlx, dly


@njit(cache=True)
def levels_backward(adj, levels, dlevels):
    t1 = levels.shape[0]
    d_adj = np.zeros_like(adj)
    dc = dlevels[t1 - 1].copy()
    for i in range(t1 - 1, 0, -1):
        d_adj += dc @ levels[i - 1].T
        dc = adj.T @ dc
        dc = dc + dlevels[i - 1]
    return d_adj, dc


@njit(cache=True, parallel=True)
def batch_levels_backward_features(adjs, dlevels):
    b_n, t1, m, d = dlevels.shape
    d_feats = np.empty((b_n, m, d), dtype=np.float64)
    for b in prange(b_n):
        dc = dlevels[b, t1 - 1].copy()
        for i in range(t1 - 1, 0, -1):
            dc = adjs[b].T @ dc
            dc = dc + dlevels[b, i - 1]
        d_feats[b] = dc
    return d_feats


@njit(cache=True)
def accumulate_matched_grads(sub_levels, filt_levels, match, weights, inv_dtau,
                             want_subgraph_grads):
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


@njit(cache=True, parallel=True)
def extract_all_subgraphs(adj, k, m):
    n = adj.shape[0]
    sub_adj = np.zeros((n, m, m), dtype=np.float64)
    node_ids = np.full((n, m), -1, dtype=np.int64)
    real_counts = np.empty(n, dtype=np.int64)
    for u in prange(n):
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
        node_ids[u, :cnt] = order[:cnt]
        real_counts[u] = cnt
        for i in range(cnt):
            for jj in range(cnt):
                sub_adj[u, i, jj] = adj[order[i], order[jj]]
    return sub_adj, node_ids, real_counts
