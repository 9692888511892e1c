import os
import subprocess
import sys

import numpy as np
import pytest

from gomkcn.backends import numpy_impl

try:
    from gomkcn.backends import numba_impl
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba unavailable")


def make_case(rng, b=7, t=2, m=5, d=3, n_filters=3):
    adjs = rng.uniform(0, 1, (b, m, m))
    adjs = np.triu(adjs, 1)
    adjs = adjs + np.swapaxes(adjs, 1, 2)
    feats = rng.uniform(0, 1, (b, m, d))
    sub_levels = numpy_impl.batch_subtree_levels(adjs, feats, t)
    f_adjs = rng.uniform(0, 1, (n_filters, m, m))
    f_adjs = np.triu(f_adjs, 1)
    f_adjs = f_adjs + np.swapaxes(f_adjs, 1, 2)
    f_feats = rng.uniform(0, 1, (n_filters, m, d))
    filt_levels = numpy_impl.batch_subtree_levels(f_adjs, f_feats, t)
    return adjs, feats, sub_levels, filt_levels


@needs_numba
class TestBackendEquivalence:
    def test_subtree_levels(self, rng):
        adj = np.triu(rng.uniform(0, 1, (6, 6)), 1)
        adj = adj + adj.T
        feats = rng.uniform(0, 1, (6, 3))
        a = numpy_impl.subtree_levels(adj, feats, 3)
        b = numba_impl.subtree_levels(adj, feats, 3)
        assert np.allclose(a, b, atol=1e-12)

    def test_batch_levels(self, rng):
        adjs, feats, _, _ = make_case(rng)
        a = numpy_impl.batch_subtree_levels(adjs, feats, 3)
        b = numba_impl.batch_subtree_levels(adjs, feats, 3)
        assert np.allclose(a, b, atol=1e-12)

    def test_pairwise_similarity(self, rng):
        _, _, sub_levels, filt_levels = make_case(rng)
        a = numpy_impl.pairwise_similarity(sub_levels[0], filt_levels[0], 0.4)
        b = numba_impl.pairwise_similarity(sub_levels[0], filt_levels[0], 0.4)
        assert np.allclose(a, b, atol=1e-12)

    def test_greedy(self, rng):
        sim = rng.uniform(0, 1, (6, 9))
        cols_a, tot_a = numpy_impl.greedy_from_sim(sim)
        cols_b, tot_b = numba_impl.greedy_from_sim(sim)
        assert np.array_equal(cols_a, cols_b)
        assert tot_a == pytest.approx(tot_b, abs=1e-12)

    def test_greedy_tie_break(self):
        sim = np.array([[0.5, 0.5, 0.1]])
        cols_a, _ = numpy_impl.greedy_from_sim(sim)
        cols_b, _ = numba_impl.greedy_from_sim(sim)
        assert cols_a[0] == cols_b[0] == 0

    def test_greedy_more_rows_than_cols(self, rng):
        sim = rng.uniform(0, 1, (5, 3))
        cols_a, tot_a = numpy_impl.greedy_from_sim(sim)
        cols_b, tot_b = numba_impl.greedy_from_sim(sim)
        assert np.array_equal(cols_a, cols_b)
        assert (cols_a >= 0).sum() == 3
        assert tot_a == pytest.approx(tot_b)

    def test_batch_kappa(self, rng):
        _, _, sub_levels, filt_levels = make_case(rng)
        ka, ma = numpy_impl.batch_kappa_greedy(sub_levels, filt_levels, 0.4)
        kb, mb = numba_impl.batch_kappa_greedy(sub_levels, filt_levels, 0.4)
        assert np.allclose(ka, kb, atol=1e-12)
        assert np.array_equal(ma, mb)

    def test_matched_level_grads(self, rng):
        _, _, sub_levels, filt_levels = make_case(rng)
        cols, _ = numpy_impl.greedy_from_sim(
            numpy_impl.pairwise_similarity(sub_levels[0], filt_levels[0], 0.4))
        a = numpy_impl.matched_level_grads(sub_levels[0], filt_levels[0], cols, 0.4)
        b = numba_impl.matched_level_grads(sub_levels[0], filt_levels[0], cols, 0.4)
        assert np.allclose(a[0], b[0], atol=1e-12)
        assert np.allclose(a[1], b[1], atol=1e-12)

    def test_levels_backward(self, rng):
        adjs, feats, sub_levels, _ = make_case(rng)
        dlevels = rng.normal(0, 1, sub_levels[0].shape)
        a = numpy_impl.levels_backward(adjs[0], sub_levels[0], dlevels)
        b = numba_impl.levels_backward(adjs[0], sub_levels[0], dlevels)
        assert np.allclose(a[0], b[0], atol=1e-12)
        assert np.allclose(a[1], b[1], atol=1e-12)

    def test_batch_levels_backward_features(self, rng):
        adjs, _, sub_levels, _ = make_case(rng)
        dlevels = rng.normal(0, 1, sub_levels.shape)
        a = numpy_impl.batch_levels_backward_features(adjs, dlevels)
        b = numba_impl.batch_levels_backward_features(adjs, dlevels)
        assert np.allclose(a, b, atol=1e-12)

    def test_accumulate_matched_grads(self, rng):
        adjs, _, sub_levels, filt_levels = make_case(rng)
        _, match = numpy_impl.batch_kappa_greedy(sub_levels, filt_levels, 0.4)
        weights = rng.normal(0, 1, (sub_levels.shape[0], filt_levels.shape[0]))
        weights[rng.uniform(size=weights.shape) < 0.3] = 0.0
        for want in (False, True):
            fa, sa = numpy_impl.accumulate_matched_grads(
                sub_levels, filt_levels, match, weights, 0.4, want)
            fb, sb = numba_impl.accumulate_matched_grads(
                sub_levels, filt_levels, match, weights, 0.4, want)
            assert np.allclose(fa, fb, atol=1e-10)
            assert sa.shape == sb.shape
            if want:
                assert np.allclose(sa, sb, atol=1e-10)

    def test_extract_all_subgraphs(self, rng):
        adj = (rng.uniform(0, 1, (20, 20)) < 0.15).astype(float)
        adj = np.triu(adj, 1)
        adj = adj + adj.T
        for k, m in ((1, 4), (2, 6), (3, 25)):
            a = numpy_impl.extract_all_subgraphs(adj, k, m)
            b = numba_impl.extract_all_subgraphs(adj, k, m)
            for x, y in zip(a, b):
                assert np.array_equal(x, y)


class TestDispatch:
    def test_env_var_selects_numpy(self):
        code = ("import gomkcn.backends as b; print(b.BACKEND)")
        out = subprocess.run(
            [sys.executable, "-c", code],
            env={**os.environ, "GOMKCN_BACKEND": "numpy"},
            capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "numpy"

    def test_bad_env_var_rejected(self):
        code = "import gomkcn.backends"
        out = subprocess.run(
            [sys.executable, "-c", code],
            env={**os.environ, "GOMKCN_BACKEND": "fortran"},
            capture_output=True, text=True)
        assert out.returncode != 0
        assert "GOMKCN_BACKEND" in out.stderr

    def test_active_backend_exposes_all_kernels(self):
        from gomkcn import backends

        for name in ("subtree_levels", "batch_kappa_greedy",
                     "extract_all_subgraphs", "accumulate_matched_grads"):
            assert callable(getattr(backends, name))
