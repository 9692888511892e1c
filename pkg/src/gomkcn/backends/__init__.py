"""Backend selection for the hot numeric kernels.

Two interchangeable implementations exist: a numba-compiled fast path and a
pure-numpy fallback. Selection happens once at import time from the
``GOMKCN_BACKEND`` environment variable:

* ``auto`` (default) -- use numba when it imports cleanly, numpy otherwise.
* ``numba``          -- require numba; raise if it is unavailable.
* ``numpy``          -- force the pure-numpy path.

``benchmarks/bench_backends.py`` compares the two paths on representative
workloads.
"""

from __future__ import annotations

import os

from ..errors import ConfigError
from . import numpy_impl

_KERNELS = (
    "subtree_levels",
    "batch_subtree_levels",
    "pairwise_similarity",
    "greedy_from_sim",
    "batch_kappa_greedy",
    "matched_level_grads",
    "levels_backward",
    "batch_levels_backward_features",
    "accumulate_matched_grads",
    "extract_all_subgraphs",
)


def _select():
    requested = os.environ.get("GOMKCN_BACKEND", "auto").strip().lower()
    if requested not in ("auto", "numba", "numpy"):
        raise ConfigError(
            f"GOMKCN_BACKEND must be 'auto', 'numba' or 'numpy', got {requested!r}")
    if requested == "numpy":
        return "numpy", numpy_impl
    try:
        from . import numba_impl
    except ImportError:
        if requested == "numba":
            raise ConfigError("GOMKCN_BACKEND=numba but numba is not importable")
        return "numpy", numpy_impl
    return "numba", numba_impl


BACKEND, _impl = _select()

subtree_levels = _impl.subtree_levels
batch_subtree_levels = _impl.batch_subtree_levels
pairwise_similarity = _impl.pairwise_similarity
greedy_from_sim = _impl.greedy_from_sim
batch_kappa_greedy = _impl.batch_kappa_greedy
matched_level_grads = _impl.matched_level_grads
levels_backward = _impl.levels_backward
batch_levels_backward_features = _impl.batch_levels_backward_features
accumulate_matched_grads = _impl.accumulate_matched_grads
extract_all_subgraphs = _impl.extract_all_subgraphs

__all__ = ["BACKEND", *_KERNELS]


def set_num_threads(n):
    """Bound the worker-thread count of the active backend (numba only)."""
    if BACKEND != "numba":
        return
    import numba

    numba.set_num_threads(max(1, int(n)))
