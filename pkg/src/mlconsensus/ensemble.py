"""Per-layer community structures and the base single-layer partitioner.

The base detector is a deterministic greedy modularity optimizer in the
Louvain style (local moving + graph aggregation). Determinism is pinned
down by sweeping nodes in ascending id order and breaking gain ties toward
the lowest community id, so repeated runs are byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InputError
from .graphs import MultilayerGraph, WeightedGraph, layer_as_weighted_graph

__all__ = [
    "CommunityStructure",
    "Ensemble",
    "partition_weighted_graph",
    "weighted_modularity",
    "build_ensemble",
    "load_ensemble",
    "save_ensemble",
]


@dataclass
class CommunityStructure:
    """Non-overlapping node partition as a node -> community-id map.

    Community ids are dense integers starting at 0.
    """

    membership: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        ids = set(self.membership.values())
        if ids and ids != set(range(len(ids))):
            raise InputError("community ids must be dense integers from 0")

    @classmethod
    def from_labels(cls, labels: dict[str, object]) -> "CommunityStructure":
        """Relabel arbitrary community labels densely, by first appearance."""
        remap: dict[object, int] = {}
        membership = {}
        for node, label in labels.items():
            if label not in remap:
                remap[label] = len(remap)
            membership[node] = remap[label]
        return cls(membership)

    def communities(self) -> dict[int, set[str]]:
        out: dict[int, set[str]] = {}
        for node, cid in self.membership.items():
            out.setdefault(cid, set()).add(node)
        return out

    @property
    def num_communities(self) -> int:
        return len(set(self.membership.values()))

    def nodes(self) -> set[str]:
        return set(self.membership)

    def restricted_to(self, nodes: set[str]) -> "CommunityStructure":
        """Sub-partition over the given nodes, relabeled densely."""
        kept = {n: self.membership[n] for n in sorted(nodes & set(self.membership))}
        return CommunityStructure.from_labels(kept)


@dataclass
class Ensemble:
    """One community structure per layer, index-aligned with the layer list."""

    structures: list[CommunityStructure]

    def __len__(self) -> int:
        return len(self.structures)

    def validate_against(self, g: MultilayerGraph) -> None:
        if len(self.structures) != g.num_layers:
            raise InputError(f"ensemble has {len(self.structures)} structures "
                             f"for {g.num_layers} layers")
        for layer, structure in zip(g.layers, self.structures):
            if structure.nodes() != set(g.presence[layer]):
                raise InputError(f"structure for layer {layer!r} does not "
                                 "cover exactly the layer's nodes")


def weighted_modularity(g: WeightedGraph, membership: dict[str, int]) -> float:
    """Newman modularity Q = sum_c [e_c/W - (S_c/2W)^2] with edge weights."""
    total = g.total_weight
    if total == 0:
        return 0.0
    intra: dict[int, float] = {}
    strength: dict[int, float] = {}
    for node in g.nodes:
        cid = membership[node]
        strength[cid] = strength.get(cid, 0.0) + g.strength(node)
    for (u, v), w in g.weights.items():
        if membership[u] == membership[v]:
            cid = membership[u]
            intra[cid] = intra.get(cid, 0.0) + w
    q = 0.0
    for cid, s in strength.items():
        q += intra.get(cid, 0.0) / total - (s / (2.0 * total)) ** 2
    return q


def _local_moving(adj: list[dict[int, float]], self_w: list[float],
                  total: float, start: list[int] | None = None) -> list[int]:
    """One level of greedy node moves; returns the final node -> label map.

    `start` seeds the communities (labels must lie in range(n)); the
    default is the all-singletons assignment.
    """
    n = len(adj)
    strength = [sum(adj[v].values()) + 2.0 * self_w[v] for v in range(n)]
    community = list(start) if start is not None else list(range(n))
    comm_strength = [0.0] * n
    for v in range(n):
        comm_strength[community[v]] += strength[v]
    moved = True
    while moved:
        moved = False
        for v in range(n):
            c_old = community[v]
            comm_strength[c_old] -= strength[v]
            link: dict[int, float] = {}
            for u, w in adj[v].items():
                cu = community[u]
                link[cu] = link.get(cu, 0.0) + w
            best_c = c_old
            best_gain = (link.get(c_old, 0.0) / total
                         - comm_strength[c_old] * strength[v] / (2.0 * total * total))
            for c in sorted(link):
                if c == c_old:
                    continue
                gain = (link[c] / total
                        - comm_strength[c] * strength[v] / (2.0 * total * total))
                if gain > best_gain:
                    best_c, best_gain = c, gain
            community[v] = best_c
            comm_strength[best_c] += strength[v]
            if best_c != c_old:
                moved = True
    return community


def _aggregate(adj: list[dict[int, float]], self_w: list[float],
               community: list[int]) -> tuple[list[dict[int, float]], list[float], dict[int, int]]:
    """Contract communities to supernodes, labels renumbered by ascending id."""
    labels = sorted(set(community))
    remap = {label: i for i, label in enumerate(labels)}
    k = len(labels)
    new_adj: list[dict[int, float]] = [{} for _ in range(k)]
    new_self = [0.0] * k
    for v, loops in enumerate(self_w):
        new_self[remap[community[v]]] += loops
    for v in range(len(adj)):
        cv = remap[community[v]]
        for u, w in adj[v].items():
            if u <= v:
                continue
            cu = remap[community[u]]
            if cu == cv:
                new_self[cv] += w
            else:
                new_adj[cv][cu] = new_adj[cv].get(cu, 0.0) + w
                new_adj[cu][cv] = new_adj[cu].get(cv, 0.0) + w
    return new_adj, new_self, remap


def partition_weighted_graph(g: WeightedGraph, seed: int = 0) -> CommunityStructure:
    """Greedy modularity partition of a weighted graph.

    Runs local moving + aggregation levels, then restarts the level loop
    from the composed partition until no single-node move improves
    modularity anymore (plain multi-level passes can leave such moves
    behind after communities merge). Deterministic for a given graph;
    `seed` is accepted for interface stability but the optimizer has no
    stochastic choices. The result never has lower modularity than the
    all-singletons partition.
    """
    del seed
    nodes = sorted(g.nodes)
    if not nodes:
        return CommunityStructure({})
    total = float(g.total_weight)
    if total == 0.0:
        return CommunityStructure({node: i for i, node in enumerate(nodes)})
    rank = {node: i for i, node in enumerate(nodes)}
    adj0: list[dict[int, float]] = [{} for _ in nodes]
    for (u, v), w in g.weights.items():
        adj0[rank[u]][rank[v]] = float(w)
        adj0[rank[v]][rank[u]] = float(w)
    self0 = [0.0] * len(nodes)

    membership = list(range(len(nodes)))
    for _ in range(64):  # each round strictly improves Q; cap is a safety net
        community = _local_moving(adj0, self0, total, start=membership)
        adj, self_w, remap = _aggregate(adj0, self0, community)
        node_to_comm = [remap[community[v]] for v in range(len(nodes))]
        while len(adj) > 1:
            level = _local_moving(adj, self_w, total)
            if all(level[v] == v for v in range(len(adj))):
                break
            adj, self_w, remap = _aggregate(adj, self_w, level)
            node_to_comm = [remap[level[c]] for c in node_to_comm]
        if node_to_comm == membership:
            break
        membership = node_to_comm
    return CommunityStructure.from_labels(
        {node: membership[rank[node]] for node in nodes})


def build_ensemble(g: MultilayerGraph, seed: int = 0) -> Ensemble:
    """Partition every layer independently with the base detector."""
    structures = []
    for layer in g.layers:
        if not g.presence[layer]:
            structures.append(CommunityStructure({}))
            continue
        structures.append(partition_weighted_graph(
            layer_as_weighted_graph(g, layer), seed=seed))
    return Ensemble(structures)


def load_ensemble(path: str, g: MultilayerGraph) -> Ensemble:
    """Load per-layer partitions from "layerId nodeId communityId" lines.

    Raises InputError on unknown layers/nodes, on a node assigned two
    different communities within a layer, and on incomplete layer coverage.
    """
    raw: dict[str, dict[str, str]] = {layer: {} for layer in g.layers}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split()
            if len(fields) != 3:
                raise InputError(f"{path}:{lineno}: expected "
                                 f"'layerId nodeId communityId': {text!r}")
            layer, node, label = fields
            if layer not in raw:
                raise InputError(f"{path}:{lineno}: unknown layer {layer!r}")
            if node not in g.presence[layer]:
                raise InputError(f"{path}:{lineno}: node {node!r} is not "
                                 f"present in layer {layer!r}")
            if node in raw[layer] and raw[layer][node] != label:
                raise InputError(f"{path}:{lineno}: node {node!r} assigned to "
                                 f"both {raw[layer][node]!r} and {label!r} "
                                 f"in layer {layer!r}")
            raw[layer][node] = label
    structures = []
    for layer in g.layers:
        missing = set(g.presence[layer]) - set(raw[layer])
        if missing:
            raise InputError(f"{path}: layer {layer!r} misses assignments "
                             f"for {len(missing)} nodes (e.g. {sorted(missing)[0]!r})")
        ordered = {node: raw[layer][node] for node in sorted(raw[layer])}
        structures.append(CommunityStructure.from_labels(ordered))
    return Ensemble(structures)


def save_ensemble(e: Ensemble, g: MultilayerGraph, path: str) -> None:
    """Write "layerId nodeId communityId" lines, nodes sorted within layers."""
    e.validate_against(g)
    with open(path, "w", encoding="utf-8") as fh:
        for layer, structure in zip(g.layers, e.structures):
            for node in sorted(structure.membership):
                fh.write(f"{layer}\t{node}\t{structure.membership[node]}\n")
