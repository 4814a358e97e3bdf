"""Quality measures for consensus solutions: modularity, silhouette, NMI.

Multilayer modularity averages a Newman-style term over layers, with the
retained consensus edges in the numerators and the *original* layer edge
counts in the denominators, so values stay comparable across pruning
levels:

    Q = (1/L) * sum_i sum_C [ e_i(C)/|E_i| - (dhat_i(C) / (2|E_i|))^2 ]

where e_i(C) counts retained intra-community edges of layer i and
dhat_i(C) sums the members' retained layer-i degrees. Layers without
edges contribute 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .ensemble import CommunityStructure, Ensemble
from .errors import MismatchError
from .graphs import MultilayerGraph, connected_components

if TYPE_CHECKING:  # pragma: no cover
    from .consensus import ConsensusState

__all__ = [
    "MetricReport",
    "multilayer_modularity",
    "multilayer_silhouette",
    "nmi",
    "ensemble_avg_nmi",
    "metric_report",
]


def modularity_term(e: int, dhat: int, m: int) -> float:
    """Single (layer, community) contribution to multilayer modularity."""
    return e / m - (dhat / (2.0 * m)) ** 2


def modularity_from_counts(intra: dict[tuple[str, int], int],
                           dhat: dict[tuple[str, int], int],
                           layer_sizes: dict[str, int],
                           n_layers: int) -> float:
    """Exactly-rounded sum of per-(layer, community) terms, layer-averaged.

    math.fsum makes the result independent of iteration order, so the
    incrementally maintained value and a from-scratch recomputation agree
    to the last bit whenever their integer counts agree.
    """
    terms = []
    for key in set(intra) | set(dhat):
        m = layer_sizes[key[0]]
        if m == 0:
            continue
        terms.append(modularity_term(intra.get(key, 0), dhat.get(key, 0), m))
    return math.fsum(terms) / n_layers


def _retained_counts(g: MultilayerGraph, membership: dict[str, int],
                     retained: dict[str, set[tuple[str, str]]]) -> tuple[dict, dict]:
    intra: dict[tuple[str, int], int] = {}
    dhat: dict[tuple[str, int], int] = {}
    for layer in g.layers:
        for u, v in retained.get(layer, ()):
            cu, cv = membership[u], membership[v]
            dhat[(layer, cu)] = dhat.get((layer, cu), 0) + 1
            dhat[(layer, cv)] = dhat.get((layer, cv), 0) + 1
            if cu == cv:
                intra[(layer, cu)] = intra.get((layer, cu), 0) + 1
    return intra, dhat


def multilayer_modularity(g: MultilayerGraph, state: "ConsensusState") -> float:
    """Recompute the consensus modularity from scratch (oracle path)."""
    intra, dhat = _retained_counts(g, state.membership, state.retained_edge_sets())
    sizes = {layer: g.layer_edge_count(layer) for layer in g.layers}
    return modularity_from_counts(intra, dhat, sizes, g.num_layers)


def _layer_distances(g: MultilayerGraph, layer: str) -> tuple[dict[str, dict[str, int]], int]:
    """All-pairs BFS distances within one layer, plus the layer's diameter.

    The diameter is taken over the largest connected component so the
    normalization stays bounded on disconnected layers.
    """
    nodes = sorted(g.presence[layer])
    dist: dict[str, dict[str, int]] = {}
    for source in nodes:
        seen = {source: 0}
        frontier = [source]
        depth = 0
        while frontier:
            depth += 1
            nxt = []
            for node in frontier:
                for nb in g.neighbors(layer, node):
                    if nb not in seen:
                        seen[nb] = depth
                        nxt.append(nb)
            frontier = nxt
        dist[source] = seen
    components = connected_components(nodes, {n: g.neighbors(layer, n) for n in nodes})
    diameter = 0
    if components:
        largest = max(components, key=len)
        for node in largest:
            ecc = max(dist[node][other] for other in largest)
            diameter = max(diameter, ecc)
    return dist, diameter


def multilayer_silhouette(g: MultilayerGraph, state: "ConsensusState") -> float:
    """Mean silhouette of nodes under a layer-averaged path distance.

    The pairwise distance averages shortest-path lengths normalized by the
    layer diameter, over the layers where both entities are present;
    unreachable pairs count as 1 there, and pairs never co-present score 1
    outright. Nodes in singleton communities score 0, and fewer than two
    communities yield 0 overall.
    """
    communities = {}
    for node, cid in state.membership.items():
        communities.setdefault(cid, set()).add(node)
    if len(communities) < 2:
        return 0.0

    per_layer = {layer: _layer_distances(g, layer) for layer in g.layers}

    def distance(u: str, v: str) -> float:
        vals = []
        for layer in g.layers:
            present = g.presence[layer]
            if u not in present or v not in present:
                continue
            dist, diameter = per_layer[layer]
            if v in dist[u] and diameter > 0:
                vals.append(dist[u][v] / diameter)
            else:
                vals.append(1.0)
        return sum(vals) / len(vals) if vals else 1.0

    scores = []
    for node in g.entities:
        own = communities[state.membership[node]]
        if len(own) < 2:
            scores.append(0.0)
            continue
        a = sum(distance(node, other) for other in own if other != node) / (len(own) - 1)
        b = math.inf
        for cid, members in communities.items():
            if cid == state.membership[node]:
                continue
            b = min(b, sum(distance(node, other) for other in members) / len(members))
        denom = max(a, b)
        scores.append(0.0 if denom == 0.0 else (b - a) / denom)
    return sum(scores) / len(scores) if scores else 0.0


def nmi(a: CommunityStructure, b: CommunityStructure) -> float:
    """Normalized mutual information with sqrt(H(a) * H(b)) normalization.

    Defined as 1 when both partitions carry zero entropy (then both are the
    trivial one-community partition of the same nodes) and 0 when exactly
    one of them does.
    """
    nodes_a, nodes_b = a.nodes(), b.nodes()
    if nodes_a != nodes_b:
        raise MismatchError("partitions cover different node sets")
    n = len(nodes_a)
    if n == 0:
        return 1.0
    joint: dict[tuple[int, int], int] = {}
    size_a: dict[int, int] = {}
    size_b: dict[int, int] = {}
    for node in nodes_a:
        ca, cb = a.membership[node], b.membership[node]
        joint[(ca, cb)] = joint.get((ca, cb), 0) + 1
        size_a[ca] = size_a.get(ca, 0) + 1
        size_b[cb] = size_b.get(cb, 0) + 1
    h_a = -sum((c / n) * math.log(c / n) for c in size_a.values() if c)
    h_b = -sum((c / n) * math.log(c / n) for c in size_b.values() if c)
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    if h_a == 0.0 or h_b == 0.0:
        return 0.0
    info = 0.0
    for (ca, cb), c in joint.items():
        info += (c / n) * math.log(c * n / (size_a[ca] * size_b[cb]))
    value = info / math.sqrt(h_a * h_b)
    return min(1.0, max(0.0, value))


def ensemble_avg_nmi(e: Ensemble, c: CommunityStructure) -> float:
    """Mean NMI between the consensus and each layer structure.

    The consensus is restricted to each layer's node set before comparing;
    empty layers are skipped.
    """
    values = []
    for structure in e.structures:
        layer_nodes = structure.nodes()
        if not layer_nodes:
            continue
        values.append(nmi(structure, c.restricted_to(layer_nodes)))
    return sum(values) / len(values) if values else 0.0


@dataclass
class MetricReport:
    """Evaluation summary for one consensus solution."""

    modularity: float
    silhouette: float
    n_communities: int
    community_sizes: list[int]
    nmi_reference: float | None = None
    ensemble_nmi: float | None = None


def metric_report(g: MultilayerGraph, state: "ConsensusState") -> MetricReport:
    sizes = sorted((len(m) for m in state.communities.values()), reverse=True)
    return MetricReport(
        modularity=multilayer_modularity(g, state),
        silhouette=multilayer_silhouette(g, state),
        n_communities=len(sizes),
        community_sizes=sizes,
    )
