"""Shared fixtures and independent oracles for the test suite.

The "pathology" fixture is a 3-layer, 11-node network whose co-association
weights take the values {1, 2, 3} in a pattern that no global threshold
can cut into the natural communities {1..4}, {5..8}, {9,10,11}: the
bridge and the small triangle both sit at weight 1, while splitting the
big component needs the weight-1 level removed.
"""

from itertools import combinations

import pytest

from mlconsensus import MultilayerGraph, WeightedGraph

QUAD1 = ("01", "02", "03", "04")
QUAD2 = ("05", "06", "07", "08")
TRIANGLE = ("09", "10", "11")


def make_pathology_graph() -> MultilayerGraph:
    """Two 4-cliques plus a triangle; a merged layer; a sparse agreement layer."""
    layer_a = (list(combinations(QUAD1, 2)) + list(combinations(QUAD2, 2))
               + list(combinations(TRIANGLE, 2)))
    layer_b = list(combinations(QUAD1 + QUAD2, 2))
    layer_c = [("01", "02"), ("01", "03"), ("02", "03"), ("05", "07")]
    return MultilayerGraph({"A": layer_a, "B": layer_b, "C": layer_c})


# Per-layer partitions the base detector is expected to find on the fixture.
PATHOLOGY_PARTITIONS = {
    "A": [set(QUAD1), set(QUAD2), set(TRIANGLE)],
    "B": [set(QUAD1 + QUAD2)],
    "C": [{"01", "02", "03"}, {"05", "07"}],
}

# Expected co-association weights of the fixture.
PATHOLOGY_WEIGHTS = {}
for _pair in [("01", "02"), ("01", "03"), ("02", "03"), ("05", "07")]:
    PATHOLOGY_WEIGHTS[_pair] = 3
for _pair in [("01", "04"), ("02", "04"), ("03", "04"),
              ("05", "06"), ("05", "08"), ("06", "07"), ("06", "08"), ("07", "08")]:
    PATHOLOGY_WEIGHTS[_pair] = 2
for _u in QUAD1:
    for _v in QUAD2:
        PATHOLOGY_WEIGHTS[(_u, _v)] = 1
for _pair in combinations(TRIANGLE, 2):
    PATHOLOGY_WEIGHTS[_pair] = 1


@pytest.fixture(scope="session")
def pathology_graph() -> MultilayerGraph:
    return make_pathology_graph()


# -- independent oracles ------------------------------------------------------


def set_partitions(items):
    """All partitions of a list of items (restricted-growth enumeration)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in set_partitions(rest):
        for i in range(len(partition)):
            yield partition[:i] + [partition[i] + [first]] + partition[i + 1:]
        yield partition + [[first]]


def brute_force_best_modularity(g: WeightedGraph) -> float:
    """Maximum weighted modularity over all partitions, component by component.

    Merging communities from different connected components only adds a
    negative cross term to Q, so the global optimum is the union of
    per-component optima; this keeps the enumeration tractable.
    """
    from mlconsensus.graphs import connected_components

    if g.total_weight == 0:
        return 0.0
    comps = connected_components(g.nodes, {n: g.neighbors(n) for n in g.nodes})
    best_total = 0.0
    for comp in comps:
        best = None
        for partition in set_partitions(sorted(comp)):
            membership = {n: i for i, block in enumerate(partition) for n in block}
            # score only this component's share of Q
            q = _component_q(g, membership, comp)
            best = q if best is None else max(best, q)
        best_total += best
    return best_total


def _component_q(g: WeightedGraph, membership, comp) -> float:
    total = g.total_weight
    intra = {}
    strength = {}
    for node in comp:
        cid = membership[node]
        strength[cid] = strength.get(cid, 0.0) + g.strength(node)
    for (u, v), w in g.weights.items():
        if u in membership and v in membership and membership[u] == membership[v]:
            intra[membership[u]] = intra.get(membership[u], 0.0) + w
    return sum(intra.get(c, 0.0) / total - (s / (2.0 * total)) ** 2
               for c, s in strength.items())


def union_find_components(nodes, pairs):
    """Connected components via union-find (independent of the BFS path)."""
    parent = {n: n for n in nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in pairs:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    groups = {}
    for n in nodes:
        groups.setdefault(find(n), set()).add(n)
    return sorted(groups.values(), key=lambda s: sorted(s))


def binomial_tail(w: int, t: int, p: float) -> float:
    """Brute-force P(X >= w) for X ~ Binomial(t, p); exact summation."""
    from math import comb
    return sum(comb(t, k) * p ** k * (1.0 - p) ** (t - k) for k in range(w, t + 1))


def as_community_sets(membership) -> list[set]:
    groups = {}
    for node, cid in membership.items():
        groups.setdefault(cid, set()).add(node)
    return sorted(groups.values(), key=lambda s: sorted(s))


# -- random generators (seeded) ----------------------------------------------


def random_multilayer(seed: int, min_nodes: int = 12,
                      max_nodes: int = 30) -> MultilayerGraph:
    """Seeded multilayer graph with planted, layer-correlated communities.

    Layers draw from a shared base partition with 10% per-layer membership
    noise. This is the method's intended regime, and the strong agreement
    keeps the co-association graphs inside the feasible region of the
    degree+strength maximum-entropy null (very sparse uncorrelated layers
    can produce weight patterns that no parameter assignment reproduces,
    which the ECM fit then reports as a solver failure).
    """
    import random
    rng = random.Random(seed)
    n = rng.randint(min_nodes, max_nodes)
    nodes = [f"n{i:02d}" for i in range(n)]
    k = rng.randint(2, 4)
    base = {v: rng.randrange(k) for v in nodes}
    layers = {}
    for li in range(rng.randint(2, 5)):
        gid = dict(base)
        for v in nodes:
            if rng.random() < 0.1:
                gid[v] = rng.randrange(k)
        p_in = rng.uniform(0.65, 0.85)
        p_out = rng.uniform(0.02, 0.06)
        edges = [(u, v) for i, u in enumerate(nodes) for v in nodes[i + 1:]
                 if rng.random() < (p_in if gid[u] == gid[v] else p_out)]
        if edges:
            layers[f"L{li}"] = edges
    if not layers:
        layers["L0"] = [(nodes[0], nodes[1])]
    return MultilayerGraph(layers)


def random_weighted_graph(seed: int, max_nodes: int = 10,
                          max_total: int | None = None,
                          max_weight: int = 5,
                          density: float = 0.35,
                          min_nodes: int = 3) -> WeightedGraph:
    import random
    rng = random.Random(seed)
    n = rng.randint(min_nodes, max_nodes)
    nodes = [f"v{i:02d}" for i in range(n)]
    weights = {}
    total = 0
    for i, u in enumerate(nodes):
        for v in nodes[i + 1:]:
            if rng.random() < density:
                if max_total is not None and total >= max_total:
                    break
                cap = max_weight if max_total is None else min(max_weight,
                                                               max_total - total)
                w = rng.randint(1, max(1, cap))
                weights[(u, v)] = w
                total += w
    if not weights:
        weights[(nodes[0], nodes[1])] = 1
    return WeightedGraph(nodes, weights)


def random_dense_weighted_graph(seed: int, max_nodes: int = 12) -> WeightedGraph:
    """Dense variant whose degree+strength sequences the max-entropy null
    can always reproduce (sparse skewed instances can be infeasible)."""
    return random_weighted_graph(seed, max_nodes=max_nodes, max_weight=4,
                                 density=0.7, min_nodes=6)
