"""Analytic reverse-mode gradients of the matching kernel.

The kernel is piecewise smooth in the filter parameters: within a region
where the matching stays constant it is a plain composition of RBF terms and
matrix powers, so the matching is treated as a constant during the backward
pass (the standard subgradient choice for max-based objectives). Gradients
flow only into filter parameters by default; the subgraph side can be
requested explicitly when its features come from trainable layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backends, tse
from .errors import ShapeError


def fold_adjacency_gradient(raw):
    """Fold an unconstrained adjacency gradient onto the symmetric,
    zero-diagonal parametrization: entry (u, v) of the result is the
    derivative w.r.t. the single parameter that feeds both A[u,v] and A[v,u].
    """
    sym = raw + raw.T
    np.fill_diagonal(sym, 0.0)
    return sym


@dataclass
class GradientTape:
    """Accumulated derivatives of one scalar loss.

    ``d_adjacency[i]`` / ``d_features[i]`` hold the gradients for filter i;
    adjacency gradients are symmetric with a zero diagonal, mirroring the
    parameter structure. ``d_mlp`` maps a head name to per-layer
    (d_weight, d_bias) pairs. ``scale`` records the batch normalizer already
    applied.
    """

    d_adjacency: list = field(default_factory=list)
    d_features: list = field(default_factory=list)
    d_mlp: dict = field(default_factory=dict)
    scale: float = 1.0

    def validate(self):
        for da in self.d_adjacency:
            if not np.allclose(da, da.T):
                raise ShapeError("adjacency gradient must be symmetric")
            if np.any(np.diagonal(da) != 0.0):
                raise ShapeError("adjacency gradient diagonal must be zero")
        return self

    def all_finite(self):
        arrays = list(self.d_adjacency) + list(self.d_features)
        for grads in self.d_mlp.values():
            for dw, db in grads:
                arrays.extend((dw, db))
        return all(np.all(np.isfinite(a)) for a in arrays)

    def add_(self, other):
        """In-place accumulation of a tape with the same structure."""
        for mine, theirs in zip(self.d_adjacency, other.d_adjacency):
            mine += theirs
        for mine, theirs in zip(self.d_features, other.d_features):
            mine += theirs
        for name, grads in other.d_mlp.items():
            acc = self.d_mlp[name]
            for (dw, db), (ow, ob) in zip(acc, grads):
                dw += ow
                db += ob
        return self

    def scaled_(self, factor):
        """In-place multiplication of every stored gradient."""
        for arr in self.d_adjacency:
            arr *= factor
        for arr in self.d_features:
            arr *= factor
        for grads in self.d_mlp.values():
            for dw, db in grads:
                dw *= factor
                db *= factor
        self.scale *= factor
        return self


def kappa_backward(sub_levels, filt_adj, filt_levels, col_of_row, tau,
                   sub_adj=None):
    """Gradient of the matched-similarity total for one (subgraph, filter) pair.

    ``col_of_row`` is the frozen matching (subgraph node -> filter node).
    Returns (d_filt_adj, d_filt_feats) and, when ``sub_adj`` is given,
    additionally d_sub_feats for chaining into upstream feature producers.
    """
    d = sub_levels.shape[-1]
    inv_dtau = 1.0 / (d * tau)
    dlx, dly = backends.matched_level_grads(
        np.ascontiguousarray(sub_levels), np.ascontiguousarray(filt_levels),
        np.ascontiguousarray(col_of_row, dtype=np.int64), inv_dtau)
    raw_adj, d_feats = backends.levels_backward(
        np.ascontiguousarray(filt_adj), np.ascontiguousarray(filt_levels), dly)
    d_adj = fold_adjacency_gradient(raw_adj)
    if sub_adj is None:
        return d_adj, d_feats
    d_sub_levels = dlx[None]
    d_sub_feats = backends.batch_levels_backward_features(
        np.ascontiguousarray(sub_adj)[None], d_sub_levels)[0]
    return d_adj, d_feats, d_sub_feats


def grad_kappa(sub_emb, filt, t, tau, matching):
    """Tape of d kappa / d (filter adjacency, filter features).

    ``matching`` must come from a forward pass on the same inputs and is held
    fixed. The subgraph side is treated as constant data.
    """
    filt_emb = tse.encode(filt, t)
    if sub_emb.levels.shape != filt_emb.levels.shape:
        raise ShapeError(
            f"stale matching: embedding shapes {sub_emb.levels.shape} vs "
            f"{filt_emb.levels.shape}")
    col_of_row = matching.target_of(sub_emb.size)
    d_adj, d_feats = kappa_backward(sub_emb.levels, filt.adjacency,
                                    filt_emb.levels, col_of_row, tau)
    return GradientTape(d_adjacency=[d_adj], d_features=[d_feats]).validate()


def finite_difference_check(loss_fn, params, grads, h=1e-5):
    """Worst relative error between analytic gradients and central differences.

    ``loss_fn(*params)`` must be deterministic with any matchings frozen;
    ``grads[i]`` is the analytic gradient w.r.t. ``params[i]``. Entries where
    both gradients are below 1e-7 in magnitude count as exact.
    """
    params = [np.array(p, dtype=np.float64) for p in params]
    worst = 0.0
    for p_idx, p in enumerate(params):
        flat = p.reshape(-1)
        g_flat = np.asarray(grads[p_idx], dtype=np.float64).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn(*params)
            flat[i] = orig - h
            down = loss_fn(*params)
            flat[i] = orig
            fd = (up - down) / (2.0 * h)
            an = g_flat[i]
            denom = max(abs(fd), abs(an))
            if denom < 1e-7:
                continue
            worst = max(worst, abs(fd - an) / denom)
    return worst
