import json
from pathlib import Path

import numpy as np
import pytest

from gomkcn import synth
from gomkcn.errors import ConfigError
from gomkcn.graph import induced_edges

GOLDEN = Path(__file__).parent / "data" / "motifs_golden.json"


class TestMotifLibrary:
    def test_matches_golden_file(self):
        golden = json.loads(GOLDEN.read_text())
        assert set(golden) == set(synth.MOTIFS)
        for name, entry in golden.items():
            spec = synth.MOTIFS[name]
            assert spec.n == entry["n"]
            assert sorted(map(tuple, entry["edges"])) == \
                sorted((min(i, j), max(i, j)) for i, j in spec.edges)

    def test_all_connected_and_small(self):
        for spec in synth.MOTIFS.values():
            assert spec.n <= 8
            adj = spec.adjacency()
            assert np.array_equal(adj, adj.T)

    def test_mining_motifs_have_six_nodes(self):
        # ten copies of each on a 760-node base must give exactly 1000 nodes
        for name in synth.MINING_MOTIFS:
            assert synth.MOTIFS[name].n == 6

    def test_experiment_groups_pairwise_nonisomorphic(self):
        for group in (synth.MINING_MOTIFS, synth.CLASSIFICATION_MOTIFS):
            for i, a in enumerate(group):
                for b in group[i + 1:]:
                    sa, sb = synth.MOTIFS[a], synth.MOTIFS[b]
                    if sa.n != sb.n:
                        continue
                    assert not synth.are_isomorphic(sa.adjacency(), sb.adjacency())

    def test_invalid_motifs_rejected(self):
        with pytest.raises(ConfigError):
            synth.MotifSpec("bad", 3, ((0, 1),))  # disconnected
        with pytest.raises(ConfigError):
            synth.MotifSpec("bad", 2, ((0, 0),))  # self loop
        with pytest.raises(ConfigError):
            synth.MotifSpec("big", 9, tuple((i, i + 1) for i in range(8)))


class TestIsomorphism:
    def test_permuted_copies_match(self, rng):
        spec = synth.MOTIFS["wheel"]
        adj = spec.adjacency()
        perm = rng.permutation(spec.n)
        assert synth.are_isomorphic(adj, adj[np.ix_(perm, perm)])

    def test_different_graphs_do_not(self):
        a = synth.MOTIFS["circle"].adjacency()
        b = synth.MOTIFS["book"].adjacency()
        assert not synth.are_isomorphic(a, b)

    def test_identify_motif_with_padding(self):
        spec = synth.MOTIFS["house"]
        padded = synth.padded_motif_adjacency("house", 6)
        assert synth.identify_motif(padded, synth.MINING_MOTIFS) == "house"
        assert synth.identify_motif(np.zeros((6, 6)), synth.MINING_MOTIFS) is None


class TestBarabasiAlbert:
    def test_minimal_tree(self):
        g = synth.barabasi_albert(3, 1, seed=0)
        assert g.n == 3
        assert len(g.edges()) == 2

    def test_edge_count_formula(self):
        for n, attach in ((50, 1), (80, 2), (120, 3)):
            g = synth.barabasi_albert(n, attach, seed=1)
            assert len(g.edges()) == attach * (n - attach)

    def test_connected(self):
        g = synth.barabasi_albert(200, 2, seed=2)
        from gomkcn.graph import bfs_ball

        order, _ = bfs_ball(g, 0, 200)
        assert len(order) == g.n

    def test_heavy_tailed_degrees(self):
        g = synth.barabasi_albert(760, 1, seed=3)
        deg = g.adjacency.sum(axis=0)
        # preferential attachment: a few hubs dominate while the median stays tiny
        assert deg.max() >= 8 * np.median(deg)
        assert np.median(deg) <= 2

    def test_features_in_unit_box(self):
        g = synth.barabasi_albert(50, 1, seed=4, feature_dim=3)
        assert g.features.shape == (50, 3)
        assert g.features.min() >= 0.0 and g.features.max() <= 1.0

    def test_invalid_sizes(self):
        with pytest.raises(ConfigError):
            synth.barabasi_albert(3, 3, seed=0)
        with pytest.raises(ConfigError):
            synth.barabasi_albert(5, 0, seed=0)

    def test_seed_determinism(self):
        a = synth.barabasi_albert(60, 2, seed=9)
        b = synth.barabasi_albert(60, 2, seed=9)
        assert np.array_equal(a.adjacency, b.adjacency)
        assert np.array_equal(a.features, b.features)


class TestAttachMotif:
    def test_counts(self, rng):
        base = synth.barabasi_albert(760, 1, seed=0)
        spec = synth.MOTIFS["wheel"]
        g = synth.attach_motif(base, spec, rng)
        assert g.n == base.n + spec.n
        assert len(g.edges()) == len(base.edges()) + len(spec.edges) + 1

    def test_motif_block_is_induced_copy(self, rng):
        base = synth.barabasi_albert(40, 1, seed=1)
        spec = synth.MOTIFS["crown"]
        g = synth.attach_motif(base, spec, rng)
        motif_nodes = list(range(base.n, base.n + spec.n))
        got = induced_edges(g, motif_nodes)
        expected = sorted((base.n + min(i, j), base.n + max(i, j))
                          for i, j in spec.edges)
        assert got == expected

    def test_mining_graph_has_1000_nodes(self):
        ground = synth.build_mining_graph(seed=0)
        assert ground.graph.n == 1000
        assert len(ground.motif_nodes) == 40
        kinds = [k for k, _ in ground.motif_nodes]
        for name in synth.MINING_MOTIFS:
            assert kinds.count(name) == 10

    def test_mining_graph_deterministic(self):
        a = synth.build_mining_graph(seed=5)
        b = synth.build_mining_graph(seed=5)
        assert np.array_equal(a.graph.adjacency, b.graph.adjacency)
        assert np.array_equal(a.graph.features, b.graph.features)


@pytest.fixture(scope="module")
def dataset():
    return synth.build_motif_classification_dataset(count=200, ba_n=25,
                                                    d=3, seed=0)


class TestClassificationDataset:

    def test_split_sizes(self, dataset):
        assert len(dataset.splits["train"]) == 160
        assert len(dataset.splits["val"]) == 20
        assert len(dataset.splits["test"]) == 20

    def test_full_scale_split_sizes(self):
        # ratios only: 8000 graphs split 8:1:1 must give 6400/800/800
        n = 8000
        per = n // 4
        train = 4 * int(round(0.8 * per))
        val = 4 * int(round(0.1 * per))
        assert (train, val, n - train - val) == (6400, 800, 800)

    def test_node_counts(self, dataset):
        for g, label in zip(dataset.graphs, dataset.labels):
            spec = synth.MOTIFS[dataset.class_names[label]]
            assert g.n == 25 + spec.n

    def test_class_balance(self, dataset):
        counts = np.bincount(dataset.labels)
        assert np.all(counts == 50)

    def test_splits_disjoint_and_stratified(self, dataset):
        allidx = np.concatenate([dataset.splits[k] for k in ("train", "val", "test")])
        assert len(np.unique(allidx)) == len(dataset.graphs)
        for part in ("train", "val", "test"):
            labels = dataset.labels[dataset.splits[part]]
            counts = np.bincount(labels, minlength=4)
            assert counts.max() - counts.min() == 0

    def test_features_unit_box(self, dataset):
        for g in dataset.graphs[:20]:
            assert g.features.min() >= 0.0 and g.features.max() <= 1.0

    def test_determinism(self):
        a = synth.build_motif_classification_dataset(count=40, ba_n=10, seed=3)
        b = synth.build_motif_classification_dataset(count=40, ba_n=10, seed=3)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.graphs[7].adjacency, b.graphs[7].adjacency)

    def test_count_divisibility_enforced(self):
        with pytest.raises(ConfigError):
            synth.build_motif_classification_dataset(count=10, ba_n=10)


class TestDatasetEmission:
    def test_bundles_and_manifest_round_trip(self, tmp_path):
        import json

        from gomkcn.graph import load_bundle

        ds = synth.build_motif_classification_dataset(count=8, ba_n=6, seed=2)
        manifest_path = synth.write_dataset(tmp_path, ds)
        manifest = json.loads(manifest_path.read_text())
        assert manifest["labels"] == ds.labels.tolist()
        assert manifest["seed"] == 2
        assert sorted(manifest["splits"]) == ["test", "train", "val"]
        assert len(manifest["files"]) == 8
        g0, _ = load_bundle(tmp_path / manifest["files"][0])
        assert np.array_equal(g0.adjacency, ds.graphs[0].adjacency)
        assert np.allclose(g0.features, ds.graphs[0].features)
