"""Data model and I/O for multilayer networks and weighted monoplex graphs.

A multilayer network keeps one undirected edge set per layer over a shared
entity universe; inter-layer coupling is implicit (an entity is its own
counterpart on every layer), so no cross-layer edges are ever stored.
Entity and layer ids are opaque strings; ordering follows first appearance.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping

from .errors import InputError

Pair = tuple[str, str]


def edge_key(u: str, v: str) -> Pair:
    """Canonical undirected pair: endpoints sorted by id."""
    return (u, v) if u <= v else (v, u)


class MultilayerGraph:
    """Immutable multilayer network: per-layer edge sets over shared entities.

    Attributes
    ----------
    entities : tuple[str, ...]
        All entity ids, in first-appearance order.
    layers : tuple[str, ...]
        Layer ids, in first-appearance order.
    edges : dict[str, frozenset[Pair]]
        Canonical undirected entity pairs per layer.
    presence : dict[str, frozenset[str]]
        Entities present in each layer (endpoints of its edges).
    """

    def __init__(self, layer_edges: Mapping[str, Iterable[Pair]],
                 entities: Iterable[str] | None = None):
        if not layer_edges:
            raise InputError("a multilayer graph needs at least one layer")
        self.layers: tuple[str, ...] = tuple(layer_edges)
        seen: dict[str, None] = dict.fromkeys(entities) if entities else {}
        edges: dict[str, frozenset[Pair]] = {}
        presence: dict[str, frozenset[str]] = {}
        adjacency: dict[str, dict[str, set[str]]] = {}
        for layer in self.layers:
            canon: set[Pair] = set()
            adj: dict[str, set[str]] = {}
            for u, v in layer_edges[layer]:
                if u == v:
                    raise InputError(f"self-loop {u!r} in layer {layer!r}")
                canon.add(edge_key(u, v))
            for u, v in sorted(canon):
                seen.setdefault(u)
                seen.setdefault(v)
                adj.setdefault(u, set()).add(v)
                adj.setdefault(v, set()).add(u)
            edges[layer] = frozenset(canon)
            presence[layer] = frozenset(adj)
            adjacency[layer] = adj
        self.entities: tuple[str, ...] = tuple(seen)
        self.edges = edges
        self.presence = presence
        self._adjacency = adjacency

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def layer_edge_count(self, layer: str) -> int:
        return len(self.edges[layer])

    def neighbors(self, layer: str, entity: str) -> set[str]:
        """Layer-local neighbor set; empty if the entity is absent."""
        if layer not in self._adjacency:
            raise InputError(f"unknown layer {layer!r}")
        return self._adjacency[layer].get(entity, set())

    def layer_degree(self, layer: str, entity: str) -> int:
        """Number of layer edges incident to the entity (0 if absent)."""
        return len(self.neighbors(layer, entity))

    def has_edge(self, layer: str, u: str, v: str) -> bool:
        return edge_key(u, v) in self.edges[layer]

    def __repr__(self) -> str:
        m = sum(len(e) for e in self.edges.values())
        return (f"MultilayerGraph({len(self.entities)} entities, "
                f"{len(self.layers)} layers, {m} edges)")


class WeightedGraph:
    """Undirected weighted monoplex graph with positive integer weights."""

    def __init__(self, nodes: Iterable[str], weights: Mapping[Pair, int]):
        self.nodes: tuple[str, ...] = tuple(dict.fromkeys(nodes))
        node_set = set(self.nodes)
        canon: dict[Pair, int] = {}
        adj: dict[str, dict[str, int]] = {n: {} for n in self.nodes}
        for (u, v), w in weights.items():
            if u == v:
                raise InputError(f"self-loop on {u!r}")
            if u not in node_set or v not in node_set:
                raise InputError(f"edge ({u!r}, {v!r}) uses unknown node")
            if w < 1 or w != int(w):
                raise InputError(f"edge ({u!r}, {v!r}) has weight {w}; "
                                 "positive integers required")
            key = edge_key(u, v)
            if key in canon and canon[key] != w:
                raise InputError(f"conflicting weights for edge {key}")
            canon[key] = int(w)
            adj[u][v] = int(w)
            adj[v][u] = int(w)
        self.weights: dict[Pair, int] = canon
        self._adjacency = adj

    @property
    def num_edges(self) -> int:
        return len(self.weights)

    @property
    def total_weight(self) -> int:
        return sum(self.weights.values())

    def neighbors(self, node: str) -> dict[str, int]:
        return self._adjacency[node]

    def degree(self, node: str) -> int:
        return len(self._adjacency[node])

    def strength(self, node: str) -> int:
        return sum(self._adjacency[node].values())

    def __repr__(self) -> str:
        return f"WeightedGraph({len(self.nodes)} nodes, {self.num_edges} edges)"


def _parse_line(line: str, lineno: int, n_fields: int, path: str) -> list[str] | None:
    text = line.strip()
    if not text or text.startswith("#"):
        return None
    fields = text.split()
    if len(fields) != n_fields:
        raise InputError(f"{path}:{lineno}: expected {n_fields} fields, "
                         f"got {len(fields)}: {text!r}")
    return fields


def load_multilayer(path: str) -> MultilayerGraph:
    """Load a multilayer edge list: one "layerId srcId dstId" per line.

    Lines starting with '#' are ignored; duplicate edges are deduplicated.
    Self-loops are rejected with the offending line number.
    """
    layer_edges: dict[str, list[Pair]] = {}
    entities: dict[str, None] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = _parse_line(line, lineno, 3, path)
            if fields is None:
                continue
            layer, u, v = fields
            if u == v:
                raise InputError(f"{path}:{lineno}: self-loop on {u!r}")
            entities.setdefault(u)
            entities.setdefault(v)
            layer_edges.setdefault(layer, []).append((u, v))
    if not layer_edges:
        raise InputError(f"{path}: no edges found")
    return MultilayerGraph(layer_edges, entities=entities)


def save_multilayer(g: MultilayerGraph, path: str) -> None:
    """Write the graph back in the input edge-list format."""
    with open(path, "w", encoding="utf-8") as fh:
        for layer in g.layers:
            for u, v in sorted(g.edges[layer]):
                fh.write(f"{layer}\t{u}\t{v}\n")


def layer_as_weighted_graph(g: MultilayerGraph, layer: str) -> WeightedGraph:
    """View one layer as a unit-weight monoplex graph over its present nodes."""
    if layer not in g.edges:
        raise InputError(f"unknown layer {layer!r}")
    return WeightedGraph(sorted(g.presence[layer]),
                         {pair: 1 for pair in g.edges[layer]})


def connected_components(nodes: Iterable[str],
                         adjacency: Mapping[str, Iterable[str]]) -> list[set[str]]:
    """Connected components by BFS, in first-appearance order of their seeds."""
    seen: set[str] = set()
    components: list[set[str]] = []
    for start in nodes:
        if start in seen:
            continue
        comp = {start}
        frontier = [start]
        seen.add(start)
        while frontier:
            node = frontier.pop()
            for nb in adjacency.get(node, ()):
                if nb not in seen:
                    seen.add(nb)
                    comp.add(nb)
                    frontier.append(nb)
        components.append(comp)
    return components
