import math

import pytest

from mlconsensus import (CommunityStructure, ConsensusState, Ensemble,
                         MismatchError, MultilayerGraph, build_ensemble,
                         ensemble_avg_nmi, metric_report,
                         multilayer_modularity, multilayer_silhouette, nmi,
                         optimize_consensus)

from conftest import random_multilayer


def two_triangle_state():
    g = MultilayerGraph({"A": [("1", "2"), ("2", "3"), ("1", "3"),
                               ("4", "5"), ("5", "6"), ("4", "6")]})
    membership = {"1": 0, "2": 0, "3": 0, "4": 1, "5": 1, "6": 1}
    state = ConsensusState(g, membership, {"A": set(g.edges["A"])})
    return g, state


def two_clique_multilayer(swap: bool = False):
    """Two 4-cliques repeated on two layers; optionally swap two members."""
    from itertools import combinations
    left = ["a1", "a2", "a3", "a4"]
    right = ["b1", "b2", "b3", "b4"]
    edges = list(combinations(left, 2)) + list(combinations(right, 2))
    edges.append(("a1", "b1"))  # keep the graph connected
    g = MultilayerGraph({"L1": edges, "L2": edges})
    groups = {n: 0 for n in left} | {n: 1 for n in right}
    if swap:
        groups["a2"], groups["b2"] = 1, 0
    membership = dict(groups)
    retained = {layer: {(u, v) for u, v in g.edges[layer]
                        if membership[u] == membership[v]}
                for layer in g.layers}
    return g, ConsensusState(g, membership, retained)


class TestMultilayerModularity:
    def test_two_disjoint_triangles(self):
        g, state = two_triangle_state()
        assert multilayer_modularity(g, state) == pytest.approx(0.5, abs=1e-12)

    def test_all_singletons_no_retained_is_zero(self):
        g = MultilayerGraph({"A": [("1", "2"), ("2", "3")]})
        state = ConsensusState(g, {"1": 0, "2": 1, "3": 2}, {"A": set()})
        assert multilayer_modularity(g, state) == 0.0

    def test_identical_layers_average_to_layer_value(self):
        edges = [("1", "2"), ("2", "3"), ("1", "3"),
                 ("4", "5"), ("5", "6"), ("4", "6")]
        g1 = MultilayerGraph({"A": edges})
        g3 = MultilayerGraph({"A": edges, "B": edges, "C": edges})
        membership = {"1": 0, "2": 0, "3": 0, "4": 1, "5": 1, "6": 1}
        s1 = ConsensusState(g1, membership, {"A": set(edges)})
        s3 = ConsensusState(g3, membership,
                            {layer: set(edges) for layer in "ABC"})
        assert multilayer_modularity(g3, s3) == pytest.approx(
            multilayer_modularity(g1, s1), abs=1e-15)

    def test_empty_layer_contributes_zero(self):
        g = MultilayerGraph({"A": [("1", "2")], "B": []})
        state = ConsensusState(g, {"1": 0, "2": 0}, {"A": {("1", "2")}})
        # single layer would give 1 - 1 = 0; averaging over two layers too
        assert multilayer_modularity(g, state) == pytest.approx(0.0)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_incremental_state(self, seed):
        g = random_multilayer(seed + 70)
        e = build_ensemble(g, seed=0)
        state = optimize_consensus(g, e, model="mlf")
        assert multilayer_modularity(g, state) == state.q


def silhouette_oracle(g, membership):
    """Straightforward reimplementation used to pin the metric's value."""
    def bfs(layer, src):
        dist = {src: 0}
        frontier = [src]
        while frontier:
            new = []
            for node in frontier:
                for nb in g.neighbors(layer, node):
                    if nb not in dist:
                        dist[nb] = dist[node] + 1
                        new.append(nb)
            frontier = new
        return dist

    all_dist = {}
    diam = {}
    for layer in g.layers:
        all_dist[layer] = {v: bfs(layer, v) for v in g.presence[layer]}
        comps = []
        seen = set()
        for v in sorted(g.presence[layer]):
            if v in seen:
                continue
            comp = set(all_dist[layer][v])
            seen |= comp
            comps.append(comp)
        best = max(comps, key=len) if comps else set()
        diam[layer] = max((all_dist[layer][u][v] for u in best for v in best),
                          default=0)

    def d(u, v):
        vals = []
        for layer in g.layers:
            if u in g.presence[layer] and v in g.presence[layer]:
                if v in all_dist[layer][u] and diam[layer] > 0:
                    vals.append(all_dist[layer][u][v] / diam[layer])
                else:
                    vals.append(1.0)
        return sum(vals) / len(vals) if vals else 1.0

    groups = {}
    for node, cid in membership.items():
        groups.setdefault(cid, set()).add(node)
    if len(groups) < 2:
        return 0.0
    scores = []
    for v in membership:
        own = groups[membership[v]]
        if len(own) == 1:
            scores.append(0.0)
            continue
        a = sum(d(v, u) for u in own if u != v) / (len(own) - 1)
        b = min(sum(d(v, u) for u in others) / len(others)
                for cid, others in groups.items() if cid != membership[v])
        m = max(a, b)
        scores.append(0.0 if m == 0 else (b - a) / m)
    return sum(scores) / len(scores)


class TestMultilayerSilhouette:
    def test_separated_cliques_positive(self):
        g, state = two_clique_multilayer()
        assert multilayer_silhouette(g, state) > 0.0

    def test_single_community_is_zero(self):
        g, _ = two_clique_multilayer()
        state = ConsensusState(g, {n: 0 for n in g.entities},
                               {layer: set() for layer in g.layers})
        assert multilayer_silhouette(g, state) == 0.0

    def test_swapped_members_score_lower(self):
        g, aligned = two_clique_multilayer(swap=False)
        _, swapped = two_clique_multilayer(swap=True)
        assert (multilayer_silhouette(g, swapped)
                < multilayer_silhouette(g, aligned))

    def test_any_single_misassignment_scores_lower(self):
        g, aligned = two_clique_multilayer(swap=False)
        baseline = multilayer_silhouette(g, aligned)
        for node in g.entities:
            membership = dict(aligned.membership)
            membership[node] = 1 - membership[node]
            retained = {layer: {(u, v) for u, v in g.edges[layer]
                                if membership[u] == membership[v]}
                        for layer in g.layers}
            moved = ConsensusState(g, membership, retained)
            assert multilayer_silhouette(g, moved) < baseline

    def test_matches_independent_oracle(self):
        g, state = two_clique_multilayer(swap=True)
        assert multilayer_silhouette(g, state) == pytest.approx(
            silhouette_oracle(g, state.membership), abs=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_bounded(self, seed):
        g = random_multilayer(seed + 30)
        e = build_ensemble(g, seed=0)
        state = optimize_consensus(g, e, model="gloss")
        assert -1.0 <= multilayer_silhouette(g, state) <= 1.0


class TestNmi:
    def test_identical_partitions(self):
        a = CommunityStructure({"1": 0, "2": 0, "3": 1, "4": 1})
        assert nmi(a, a) == 1.0

    def test_label_permutation_invariance(self):
        a = CommunityStructure({"1": 0, "2": 0, "3": 1, "4": 1})
        b = CommunityStructure({"1": 1, "2": 1, "3": 0, "4": 0})
        assert nmi(a, b) == 1.0

    def test_independent_partitions(self):
        a = CommunityStructure({"1": 0, "2": 0, "3": 1, "4": 1})
        b = CommunityStructure({"1": 0, "2": 1, "3": 0, "4": 1})
        assert nmi(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self):
        import random
        rng = random.Random(5)
        nodes = [f"n{i}" for i in range(12)]
        a = CommunityStructure.from_labels({n: rng.randrange(3) for n in nodes})
        b = CommunityStructure.from_labels({n: rng.randrange(4) for n in nodes})
        assert nmi(a, b) == pytest.approx(nmi(b, a), abs=1e-12)

    def test_node_set_mismatch(self):
        a = CommunityStructure({"1": 0})
        b = CommunityStructure({"2": 0})
        with pytest.raises(MismatchError):
            nmi(a, b)

    def test_both_degenerate(self):
        a = CommunityStructure({"1": 0, "2": 0})
        b = CommunityStructure({"1": 0, "2": 0})
        assert nmi(a, b) == 1.0

    def test_one_degenerate(self):
        a = CommunityStructure({"1": 0, "2": 0})
        b = CommunityStructure({"1": 0, "2": 1})
        assert nmi(a, b) == 0.0


class TestEnsembleAvgNmi:
    def test_perfect_agreement(self):
        s = CommunityStructure({"1": 0, "2": 0, "3": 1, "4": 1})
        e = Ensemble([s, s, s])
        assert ensemble_avg_nmi(e, s) == 1.0

    def test_single_layer_equals_plain_nmi(self):
        a = CommunityStructure({"1": 0, "2": 0, "3": 1, "4": 1})
        c = CommunityStructure({"1": 0, "2": 1, "3": 1, "4": 0})
        assert ensemble_avg_nmi(Ensemble([a]), c) == pytest.approx(nmi(a, c))

    def test_two_layer_mean(self):
        agree = CommunityStructure({"1": 0, "2": 0, "3": 1, "4": 1})
        ortho = CommunityStructure({"1": 0, "2": 1, "3": 0, "4": 1})
        c = CommunityStructure({"1": 0, "2": 0, "3": 1, "4": 1})
        expected = (nmi(agree, c) + nmi(ortho, c)) / 2.0
        assert ensemble_avg_nmi(Ensemble([agree, ortho]), c) == \
            pytest.approx(expected, abs=1e-12)

    def test_restricts_to_layer_nodes(self):
        layer = CommunityStructure({"1": 0, "2": 0})
        c = CommunityStructure({"1": 0, "2": 0, "3": 1, "4": 1})
        assert ensemble_avg_nmi(Ensemble([layer]), c) == 1.0


class TestMetricReport:
    def test_no_nans_and_sorted_sizes(self, pathology_graph):
        e = build_ensemble(pathology_graph, seed=0)
        state = optimize_consensus(pathology_graph, e, model="gloss")
        report = metric_report(pathology_graph, state)
        assert not math.isnan(report.modularity)
        assert not math.isnan(report.silhouette)
        assert report.community_sizes == sorted(report.community_sizes,
                                                reverse=True)
        assert report.n_communities == len(report.community_sizes)
