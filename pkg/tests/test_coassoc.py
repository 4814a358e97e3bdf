import pytest

from mlconsensus import (CommunityStructure, Ensemble, InputError,
                         MultilayerGraph, build_coassociation,
                         build_coassociation_graph, build_ensemble)
from mlconsensus.coassoc import CoassociationMatrix, save_coassociation

from conftest import PATHOLOGY_WEIGHTS, random_multilayer, union_find_components


def triangle_graph() -> MultilayerGraph:
    return MultilayerGraph({"A": [("1", "2"), ("2", "3"), ("1", "3")]})


class TestBuildCoassociation:
    def test_single_layer_triangle_one_community(self):
        g = triangle_graph()
        e = Ensemble([CommunityStructure({"1": 0, "2": 0, "3": 0})])
        m = build_coassociation(g, e)
        assert m.num_entries == 3
        assert all(m.value(u, v) == 1.0 for (u, v) in m.layer_sets)

    def test_co_clustered_but_unlinked_pair_contributes_nothing(self):
        # 1-3 share a community but only 1-2 and 2-3 are edges.
        g = MultilayerGraph({"A": [("1", "2"), ("2", "3")]})
        e = Ensemble([CommunityStructure({"1": 0, "2": 0, "3": 0})])
        m = build_coassociation(g, e)
        assert ("1", "3") not in m.layer_sets
        assert m.num_entries == 2

    def test_pathology_weights(self, pathology_graph):
        e = build_ensemble(pathology_graph, seed=0)
        m = build_coassociation(pathology_graph, e)
        observed = {pair: len(layers) for pair, layers in m.layer_sets.items()}
        assert observed == PATHOLOGY_WEIGHTS
        assert set(observed.values()) == {1, 2, 3}

    def test_misaligned_ensemble_is_error(self, pathology_graph):
        e = Ensemble([CommunityStructure({"1": 0})])
        with pytest.raises(InputError):
            build_coassociation(pathology_graph, e)

    def test_layer_sets_record_provenance(self, pathology_graph):
        e = build_ensemble(pathology_graph, seed=0)
        m = build_coassociation(pathology_graph, e)
        assert m.layer_sets[("01", "02")] == frozenset({"A", "B", "C"})
        assert m.layer_sets[("09", "10")] == frozenset({"A"})


class TestBuildCoassociationGraph:
    def test_empty_matrix(self):
        m = CoassociationMatrix(("1", "2"), 2, {})
        gm = build_coassociation_graph(m)
        assert gm.graph.num_edges == 0
        assert set(gm.graph.nodes) == {"1", "2"}

    def test_single_two_layer_entry(self):
        m = CoassociationMatrix(("1", "2"), 3, {("1", "2"): frozenset({"A", "B"})})
        gm = build_coassociation_graph(m)
        assert gm.graph.weights == {("1", "2"): 2}

    def test_pathology_components(self, pathology_graph):
        e = build_ensemble(pathology_graph, seed=0)
        gm = build_coassociation_graph(build_coassociation(pathology_graph, e))
        comps = union_find_components(gm.graph.nodes, gm.graph.weights)
        assert comps == [{"01", "02", "03", "04", "05", "06", "07", "08"},
                         {"09", "10", "11"}]


class TestInvariants:
    @pytest.mark.parametrize("seed", range(8))
    def test_every_entry_backed_by_an_original_edge(self, seed):
        g = random_multilayer(seed)
        e = build_ensemble(g, seed=0)
        m = build_coassociation(g, e)
        for pair, layers in m.layer_sets.items():
            assert layers
            for layer in layers:
                assert pair in g.edges[layer]

    @pytest.mark.parametrize("seed", range(8))
    def test_weights_bounded_by_layer_count(self, seed):
        g = random_multilayer(seed)
        m = build_coassociation(g, build_ensemble(g, seed=0))
        assert all(1 <= len(ls) <= g.num_layers for ls in m.layer_sets.values())

    def test_identical_layers_reach_full_weight(self):
        edges = [("1", "2"), ("2", "3"), ("1", "3")]
        g = MultilayerGraph({"A": edges, "B": edges, "C": edges})
        m = build_coassociation(g, build_ensemble(g, seed=0))
        assert all(len(ls) == 3 for ls in m.layer_sets.values())


def test_tsv_dump(pathology_graph, tmp_path):
    e = build_ensemble(pathology_graph, seed=0)
    m = build_coassociation(pathology_graph, e)
    path = tmp_path / "coassoc.tsv"
    save_coassociation(m, str(path), layer_order=pathology_graph.layers)
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    assert len(lines) == m.num_entries
    row = dict(zip(("src", "dst", "weight", "layers"),
                   lines[0].split("\t")))
    assert int(row["weight"]) == len(row["layers"].split(","))
