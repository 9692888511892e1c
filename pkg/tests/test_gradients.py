import numpy as np
import pytest

from gomkcn import omk, tse
from gomkcn.errors import ShapeError
from gomkcn.gradients import (GradientTape, finite_difference_check, grad_kappa,
                              kappa_backward)
from gomkcn.graph import Graph
from gomkcn.model import GraphFilter, loss_frq, loss_iso

from conftest import random_weighted_graph


def frozen_kappa_fn(sub_emb, matching, n, t, tau):
    """kappa with the matching held fixed, parametrized by (upper tri, feats)."""
    iu = np.triu_indices(n, 1)
    cols = matching.target_of(sub_emb.size)

    def fn(upper, feats):
        adj = np.zeros((n, n))
        adj[iu] = upper
        adj = adj + adj.T
        emb = tse.encode(Graph(adj, feats), t)
        sim = omk.similarity_matrix(sub_emb, emb, tau)
        return float(sum(sim[x, y] for x, y in enumerate(cols) if y >= 0))

    return fn, iu


class TestGradKappa:
    def test_level_zero_has_no_adjacency_gradient(self, rng):
        g = random_weighted_graph(5, 3, rng)
        filt = random_weighted_graph(5, 3, rng)
        _, matching = omk.gomk(g, filt, 0, 1.0)
        tape = grad_kappa(tse.encode(g, 0), filt, 0, 1.0, matching)
        assert np.all(tape.d_adjacency[0] == 0.0)
        matched_rows = {y for _, y in matching.pairs}
        for v in range(5):
            row_nonzero = np.any(tape.d_features[0][v] != 0.0)
            assert row_nonzero == (v in matched_rows)

    def test_self_match_is_stationary(self, rng):
        g = random_weighted_graph(6, 3, rng)
        _, matching = omk.gomk(g, g, 3, 1.0)
        tape = grad_kappa(tse.encode(g, 3), g, 3, 1.0, matching)
        assert np.all(tape.d_adjacency[0] == 0.0)
        assert np.all(tape.d_features[0] == 0.0)

    def test_matches_finite_differences(self, rng):
        worst = 0.0
        for _ in range(15):
            n, t, tau = 6, 3, 1.0
            g = random_weighted_graph(n, 3, rng)
            filt = random_weighted_graph(n, 3, rng)
            _, matching = omk.gomk(g, filt, t, tau)
            sub_emb = tse.encode(g, t)
            tape = grad_kappa(sub_emb, filt, t, tau, matching)
            fn, iu = frozen_kappa_fn(sub_emb, matching, n, t, tau)
            err = finite_difference_check(
                fn, [filt.adjacency[iu].copy(), filt.features.copy()],
                [tape.d_adjacency[0][iu], tape.d_features[0]])
            worst = max(worst, err)
        assert worst < 1e-4

    def test_adjacency_gradient_symmetric_zero_diagonal(self, rng):
        g = random_weighted_graph(5, 2, rng)
        filt = random_weighted_graph(5, 2, rng)
        _, matching = omk.gomk(g, filt, 2, 1.0)
        tape = grad_kappa(tse.encode(g, 2), filt, 2, 1.0, matching)
        da = tape.d_adjacency[0]
        assert np.array_equal(da, da.T)
        assert np.all(np.diagonal(da) == 0.0)

    def test_stale_matching_shape_error(self, rng):
        g = random_weighted_graph(5, 2, rng)
        filt = random_weighted_graph(5, 2, rng)
        _, matching = omk.gomk(g, filt, 2, 1.0)
        with pytest.raises(ShapeError):
            grad_kappa(tse.encode(g, 3), filt, 2, 1.0, matching)

    def test_subgraph_side_gradients(self, rng):
        # chain through the data side (used when features come from a front MLP)
        n, t, tau = 5, 2, 1.0
        g = random_weighted_graph(n, 2, rng)
        filt = random_weighted_graph(n, 2, rng)
        _, matching = omk.gomk(g, filt, t, tau)
        cols = matching.target_of(n)
        sub_levels = tse.encode(g, t).levels
        filt_levels = tse.encode(filt, t).levels
        _, _, d_sub = kappa_backward(sub_levels, filt.adjacency, filt_levels,
                                     cols, tau, sub_adj=g.adjacency)

        def fn(feats):
            emb = tse.encode(Graph(g.adjacency, feats), t)
            sim = omk.similarity_matrix(emb, tse.encode(filt, t), tau)
            return float(sum(sim[x, y] for x, y in enumerate(cols) if y >= 0))

        err = finite_difference_check(fn, [g.features.copy()], [d_sub])
        assert err < 1e-4

    def test_ascent_step_does_not_decrease_kappa(self, rng):
        # small projected ascent step with the matching unchanged
        for _ in range(10):
            g = random_weighted_graph(6, 3, rng)
            filt = GraphFilter.random(6, 3, rng)
            fg = filt.as_graph()
            kappa, matching = omk.gomk(g, fg, 3, 1.0)
            tape = grad_kappa(tse.encode(g, 3), fg, 3, 1.0, matching)
            step = 1e-4
            filt.adjacency += step * tape.d_adjacency[0]
            filt.features += step * tape.d_features[0]
            filt.project_()
            emb = tse.encode(filt.as_graph(), 3)
            sim = omk.similarity_matrix(tse.encode(g, 3), emb, 1.0)
            cols = matching.target_of(6)
            after = float(sum(sim[x, y] for x, y in enumerate(cols) if y >= 0))
            assert after >= kappa - 1e-12


class TestFiniteDifferenceCheck:
    def test_exact_for_quadratics(self):
        a = np.array([1.0, -2.0, 3.0])

        def quad(x):
            return float(np.sum(a * x * x))

        x0 = np.array([0.3, 0.7, -1.1])
        err = finite_difference_check(quad, [x0], [2 * a * x0])
        assert err < 1e-8

    def test_detects_wrong_gradient(self):
        def f(x):
            return float(np.sum(x ** 2))

        x0 = np.ones(3)
        err = finite_difference_check(f, [x0], [3.0 * x0])  # wrong scale
        assert err > 0.1


class TestLossGradients:
    def test_loss_iso_fd(self, rng):
        worst = 0.0
        for _ in range(10):
            n, t, tau = 6, 3, 1.0
            g = random_weighted_graph(n, 3, rng)
            filt = GraphFilter.random(n, 3, rng)
            loss, tape = loss_iso(g, filt, t, tau)
            _, matching = omk.gomk(g, filt.as_graph(), t, tau)
            sub_emb = tse.encode(g, t)
            fn, iu = frozen_kappa_fn(sub_emb, matching, n, t, tau)

            def neg(upper, feats):
                return -fn(upper, feats)

            err = finite_difference_check(
                neg, [filt.adjacency[iu].copy(), filt.features.copy()],
                [tape.d_adjacency[0][iu], tape.d_features[0]])
            worst = max(worst, err)
        assert worst < 1e-4

    def test_loss_frq_fd(self, rng):
        n, t, tau = 5, 2, 1.0
        subs = [random_weighted_graph(n, 2, rng) for _ in range(8)]
        filters = [GraphFilter.random(n, 2, rng) for _ in range(2)]
        loss, tape, kappa, winners = loss_frq(subs, filters, t, tau,
                                              return_details=True)
        assert loss == pytest.approx(-float(
            kappa[np.arange(len(subs)), winners].sum()))
        # FD with matchings and winners frozen
        matchings = []
        for i, s in enumerate(subs):
            _, m = omk.gomk(s, filters[winners[i]].as_graph(), t, tau)
            matchings.append(m.target_of(n))
        iu = np.triu_indices(n, 1)

        def frozen(*params):
            total = 0.0
            for j, f in enumerate(filters):
                adj = np.zeros((n, n))
                adj[iu] = params[2 * j]
                adj = adj + adj.T
                emb = tse.encode(Graph(adj, params[2 * j + 1]), t)
                for i, s in enumerate(subs):
                    if winners[i] != j:
                        continue
                    sim = omk.similarity_matrix(tse.encode(s, t), emb, tau)
                    total += sum(sim[x, y]
                                 for x, y in enumerate(matchings[i]) if y >= 0)
            return -total

        params, grads = [], []
        for j, f in enumerate(filters):
            params.extend([f.adjacency[iu].copy(), f.features.copy()])
            grads.extend([tape.d_adjacency[j][iu], tape.d_features[j]])
        assert finite_difference_check(frozen, params, grads) < 1e-4

    def test_loss_frq_gradient_only_to_winners(self, rng):
        subs = [random_weighted_graph(4, 2, rng)]
        filters = [GraphFilter.random(4, 2, rng) for _ in range(3)]
        _, tape, kappa, winners = loss_frq(subs, filters, 2, 1.0,
                                           return_details=True)
        for j in range(3):
            has_grad = np.any(tape.d_features[j] != 0)
            assert has_grad == (j == winners[0])


class TestGradientTape:
    def test_add_and_scale(self, rng):
        t1 = GradientTape(d_adjacency=[np.ones((2, 2)) - np.eye(2)],
                          d_features=[np.ones((2, 1))])
        t2 = GradientTape(d_adjacency=[np.ones((2, 2)) - np.eye(2)],
                          d_features=[np.full((2, 1), 3.0)])
        t1.add_(t2)
        assert np.all(t1.d_features[0] == 4.0)
        t1.scaled_(0.5)
        assert np.all(t1.d_features[0] == 2.0)

    def test_validate_rejects_asymmetric(self):
        bad = GradientTape(d_adjacency=[np.array([[0.0, 1.0], [0.0, 0.0]])],
                           d_features=[np.zeros((2, 1))])
        with pytest.raises(ShapeError):
            bad.validate()

    def test_all_finite(self):
        tape = GradientTape(d_adjacency=[np.zeros((2, 2))],
                            d_features=[np.array([[np.inf]])])
        assert not tape.all_finite()
