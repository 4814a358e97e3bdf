"""Co-association matrix and graph built from a multilayer graph + ensemble.

A pair of entities co-associates on a layer when they are direct neighbors
there *and* the layer's community structure puts them in one community.
The matrix stores, per pair, the set of layers where that happens; the
normalized entry is |layers| / total layer count. Layer sets (not just
counts) are kept because the consensus stage needs per-layer edge
provenance when it materializes retained multilayer edges.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ensemble import Ensemble
from .errors import InputError
from .graphs import MultilayerGraph, Pair, WeightedGraph

__all__ = [
    "CoassociationMatrix",
    "CoassociationGraph",
    "build_coassociation",
    "build_coassociation_graph",
    "save_coassociation",
]


@dataclass
class CoassociationMatrix:
    """Sparse symmetric map: canonical entity pair -> set of agreeing layers."""

    nodes: tuple[str, ...]
    n_layers: int
    layer_sets: dict[Pair, frozenset[str]]

    def value(self, u: str, v: str) -> float:
        """Normalized co-association in [0, 1]; 0 for absent pairs."""
        key = (u, v) if u <= v else (v, u)
        return len(self.layer_sets.get(key, ())) / self.n_layers

    @property
    def num_entries(self) -> int:
        return len(self.layer_sets)

    def without(self, dropped: set[Pair]) -> "CoassociationMatrix":
        """Copy with the given entries removed."""
        kept = {pair: layers for pair, layers in self.layer_sets.items()
                if pair not in dropped}
        return CoassociationMatrix(self.nodes, self.n_layers, kept)


@dataclass
class CoassociationGraph:
    """Weighted monoplex view of the matrix: weight = number of layers."""

    graph: WeightedGraph
    layer_sets: dict[Pair, frozenset[str]]


def build_coassociation(g: MultilayerGraph, e: Ensemble) -> CoassociationMatrix:
    """Collect, per entity pair, the layers where it is linked and co-clustered."""
    e.validate_against(g)
    layer_sets: dict[Pair, set[str]] = {}
    for layer, structure in zip(g.layers, e.structures):
        membership = structure.membership
        for pair in g.edges[layer]:
            u, v = pair
            if membership[u] == membership[v]:
                layer_sets.setdefault(pair, set()).add(layer)
    return CoassociationMatrix(
        nodes=g.entities,
        n_layers=g.num_layers,
        layer_sets={pair: frozenset(layers) for pair, layers in layer_sets.items()},
    )


def build_coassociation_graph(m: CoassociationMatrix) -> CoassociationGraph:
    """Weighted graph over all entities; edges are the nonempty matrix entries."""
    weights = {pair: len(layers) for pair, layers in m.layer_sets.items()}
    return CoassociationGraph(
        graph=WeightedGraph(m.nodes, weights),
        layer_sets=dict(m.layer_sets),
    )


def save_coassociation(m: CoassociationMatrix, path: str,
                       layer_order: tuple[str, ...] | None = None) -> None:
    """Dump entries as TSV: srcId dstId weight layerList."""
    def layer_sort_key(layer: str):
        if layer_order is not None and layer in layer_order:
            return (0, layer_order.index(layer))
        return (1, layer)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# src\tdst\tweight\tlayers\n")
        for (u, v) in sorted(m.layer_sets):
            layers = sorted(m.layer_sets[(u, v)], key=layer_sort_key)
            fh.write(f"{u}\t{v}\t{len(layers)}\t{','.join(layers)}\n")


def misalignment_check(g: MultilayerGraph, m: CoassociationMatrix) -> None:
    """Verify that a matrix was derived from this graph's entity universe."""
    if set(m.nodes) != set(g.entities) or m.n_layers != g.num_layers:
        raise InputError("co-association matrix does not match the graph")
