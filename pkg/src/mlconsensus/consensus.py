"""Consensus community detection over a filtered co-association matrix.

The lower-bound consensus takes the connected components of the filtered
co-association graph as communities and materializes, for every surviving
pair, the multilayer edges of the layers that supported it. The optimizer
then repeats three stages per layer until no change improves multilayer
modularity: (i) add all missing intra-community layer edges to the best
community, (ii) refine inter-community connectivity with each neighbor or
relocate nodes into it, whichever is better, (iii) try splitting the
selected community on its flattened retained-edge graph.

Scoring note: every accept/reject decision compares an exact integer
rescaling of Q (per-layer terms share the denominator 4*|E_i|^2, so
sum_i T_i * prod_{j!=i} |E_j|^2 with integer T_i orders candidates
exactly). Floating-point Q is derived for reports; commits are therefore
strictly improving by construction and the loop always terminates.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .coassoc import CoassociationMatrix, misalignment_check
from .ensemble import CommunityStructure, Ensemble, partition_weighted_graph
from .errors import InputError
from .filters import FilterConfig, filter_coassociation
from .graphs import (MultilayerGraph, Pair, WeightedGraph,
                     connected_components, edge_key)
from .metrics import modularity_from_counts

__all__ = [
    "ConsensusState",
    "CommitRecord",
    "lower_bound_consensus",
    "update_community",
    "update_community_structure",
    "relocate_nodes",
    "partition_community",
    "optimize_consensus",
    "optimize_from_filtered",
    "membership_state",
    "save_communities",
    "load_communities",
    "save_retained",
    "load_retained",
    "save_commit_log",
]


class _ScoreBasis:
    """Per-graph constants for the exact integer modularity score."""

    def __init__(self, g: MultilayerGraph):
        self.size = {layer: g.layer_edge_count(layer) for layer in g.layers}
        self.active = tuple(l for l in g.layers if self.size[l] > 0)
        product = 1
        for layer in self.active:
            product *= self.size[layer] ** 2
        self.m_product = product
        self.weight = {layer: product // (self.size[layer] ** 2)
                       for layer in self.active}
        self.n_layers = g.num_layers


@dataclass
class CommitRecord:
    """One accepted optimizer step."""

    stage: str
    layer: str | None
    communities: tuple[int, ...]
    q_before: float
    q_after: float
    score_before: int
    score_after: int


class ConsensusState:
    """Membership plus retained multilayer edges, with cached modularity.

    Caches hold, per (layer, community), the retained intra-edge count and
    the retained degree sum; they are updated incrementally and always
    recomputable from `membership` and the retained edge sets.
    """

    def __init__(self, graph: MultilayerGraph, membership: dict[str, int],
                 retained: dict[str, set[Pair]],
                 basis: _ScoreBasis | None = None):
        if set(membership) != set(graph.entities):
            raise InputError("membership must cover every entity")
        self.graph = graph
        self.membership = dict(membership)
        self.communities: dict[int, set[str]] = {}
        for node, cid in self.membership.items():
            self.communities.setdefault(cid, set()).add(node)
        self._basis = basis or _ScoreBasis(graph)
        self._q: float | None = None
        self._retained: dict[str, dict[str, set[str]]] = {}
        self._intra: dict[tuple[str, int], int] = {}
        self._dhat: dict[tuple[str, int], int] = {}
        self._t: dict[str, int] = {layer: 0 for layer in self._basis.active}
        for layer in graph.layers:
            adj: dict[str, set[str]] = {}
            for pair in retained.get(layer, ()):
                u, v = edge_key(*pair)
                if (u, v) not in graph.edges[layer]:
                    raise InputError(f"retained edge ({u!r}, {v!r}) is not an "
                                     f"edge of layer {layer!r}")
                adj.setdefault(u, set()).add(v)
                adj.setdefault(v, set()).add(u)
            self._retained[layer] = adj
        for layer, adj in self._retained.items():
            for u, nbrs in adj.items():
                for v in nbrs:
                    if u < v:
                        cu, cv = self.membership[u], self.membership[v]
                        if cu == cv:
                            self._bump(layer, cu, 1, 2)
                        else:
                            self._bump(layer, cu, 0, 1)
                            self._bump(layer, cv, 0, 1)
        self._next_cid = max(self.communities, default=-1) + 1
        self.log: list[CommitRecord] = []

    # -- bookkeeping ------------------------------------------------------

    def _bump(self, layer: str, cid: int, de: int, dd: int) -> None:
        m = self._basis.size[layer]
        key = (layer, cid)
        d_old = self._dhat.get(key, 0)
        if de:
            self._intra[key] = self._intra.get(key, 0) + de
        if dd:
            self._dhat[key] = d_old + dd
        self._t[layer] += 4 * m * de - ((d_old + dd) ** 2 - d_old ** 2)
        self._q = None

    def exact_score(self) -> int:
        return sum(self._t[layer] * self._basis.weight[layer]
                   for layer in self._basis.active)

    def exact_q(self) -> Fraction:
        """Modularity as an exact rational (the score over its denominator)."""
        denom = 4 * self._basis.n_layers * self._basis.m_product
        return Fraction(self.exact_score(), denom)

    @property
    def q(self) -> float:
        """Multilayer modularity of the current state."""
        if self._q is None:
            self._q = modularity_from_counts(
                self._intra, self._dhat, self._basis.size, self._basis.n_layers)
        return self._q

    def retained_neighbors(self, layer: str, node: str) -> set[str]:
        return self._retained[layer].get(node, set())

    def has_retained(self, layer: str, u: str, v: str) -> bool:
        return v in self._retained[layer].get(u, ())

    def retained_edge_sets(self) -> dict[str, set[Pair]]:
        out: dict[str, set[Pair]] = {}
        for layer, adj in self._retained.items():
            out[layer] = {(u, v) for u, nbrs in adj.items() for v in nbrs if u < v}
        return out

    def retained_count(self) -> int:
        return sum(len(edges) for edges in self.retained_edge_sets().values())

    def copy(self) -> "ConsensusState":
        dup = object.__new__(ConsensusState)
        dup.graph = self.graph
        dup.membership = dict(self.membership)
        dup.communities = {cid: set(m) for cid, m in self.communities.items()}
        dup._basis = self._basis
        dup._retained = {layer: {n: set(nbrs) for n, nbrs in adj.items()}
                         for layer, adj in self._retained.items()}
        dup._intra = dict(self._intra)
        dup._dhat = dict(self._dhat)
        dup._t = dict(self._t)
        dup._q = self._q
        dup._next_cid = self._next_cid
        dup.log = []
        return dup

    # -- mutations (used on candidate copies) ------------------------------

    def _add_retained(self, layer: str, pair: Pair) -> None:
        u, v = pair
        self._retained[layer].setdefault(u, set()).add(v)
        self._retained[layer].setdefault(v, set()).add(u)
        cu, cv = self.membership[u], self.membership[v]
        if cu == cv:
            self._bump(layer, cu, 1, 2)
        else:
            self._bump(layer, cu, 0, 1)
            self._bump(layer, cv, 0, 1)

    def _remove_retained(self, layer: str, pair: Pair) -> None:
        u, v = pair
        self._retained[layer][u].discard(v)
        self._retained[layer][v].discard(u)
        cu, cv = self.membership[u], self.membership[v]
        if cu == cv:
            self._bump(layer, cu, -1, -2)
        else:
            self._bump(layer, cu, 0, -1)
            self._bump(layer, cv, 0, -1)

    def _move_changes(self, node: str, cid_to: int) -> list[tuple[str, int, int, int]]:
        """Per-(layer, community) cache deltas for relocating one node."""
        cid_from = self.membership[node]
        changes = []
        for layer in self._basis.active:
            nbrs = self.retained_neighbors(layer, node)
            if not nbrs:
                continue
            dv = len(nbrs)
            r_from = sum(1 for x in nbrs if self.membership[x] == cid_from)
            r_to = sum(1 for x in nbrs if self.membership[x] == cid_to)
            changes.append((layer, cid_from, -r_from, -dv))
            changes.append((layer, cid_to, r_to, dv))
        return changes

    def _score_delta(self, changes: list[tuple[str, int, int, int]]) -> int:
        delta = 0
        for layer, cid, de, dd in changes:
            m = self._basis.size[layer]
            d_old = self._dhat.get((layer, cid), 0)
            dt = 4 * m * de - ((d_old + dd) ** 2 - d_old ** 2)
            delta += dt * self._basis.weight[layer]
        return delta

    def _move_node(self, node: str, cid_to: int) -> None:
        for layer, cid, de, dd in self._move_changes(node, cid_to):
            self._bump(layer, cid, de, dd)
        cid_from = self.membership[node]
        self.membership[node] = cid_to
        self.communities[cid_from].discard(node)
        if not self.communities[cid_from]:
            del self.communities[cid_from]
        self.communities[cid_to].add(node)

    def _split_community(self, cid: int, parts: list[set[str]]) -> list[int]:
        """Replace a community with its parts; the first part keeps the id."""
        for layer in self._basis.active:
            key = (layer, cid)
            e_old = self._intra.pop(key, 0)
            d_old = self._dhat.pop(key, 0)
            m = self._basis.size[layer]
            self._t[layer] -= 4 * m * e_old - d_old ** 2
        ids = [cid]
        for _ in parts[1:]:
            ids.append(self._next_cid)
            self._next_cid += 1
        del self.communities[cid]
        for pid, part in zip(ids, parts):
            self.communities[pid] = set(part)
            for node in part:
                self.membership[node] = pid
            for layer in self._basis.active:
                m = self._basis.size[layer]
                e_new = 0
                d_new = 0
                for node in part:
                    nbrs = self.retained_neighbors(layer, node)
                    d_new += len(nbrs)
                    e_new += sum(1 for x in nbrs if x in part)
                e_new //= 2
                if e_new or d_new:
                    self._intra[(layer, pid)] = e_new
                    self._dhat[(layer, pid)] = d_new
                    self._t[layer] += 4 * m * e_new - d_new ** 2
        self._q = None
        return ids

    def as_structure(self) -> CommunityStructure:
        """Dense-id community structure over all entities."""
        return CommunityStructure.from_labels(
            {node: self.membership[node] for node in self.graph.entities})

    def __repr__(self) -> str:
        return (f"ConsensusState({len(self.communities)} communities, "
                f"{self.retained_count()} retained edges, Q={self.q:.4f})")


# -- spec operations --------------------------------------------------------


def lower_bound_consensus(g: MultilayerGraph,
                          m_filtered: CoassociationMatrix) -> ConsensusState:
    """Connected components of the filtered co-association graph.

    Every surviving pair contributes, for each of its supporting layers,
    the corresponding multilayer edge to the retained set; entities with no
    surviving co-association become singleton communities.
    """
    misalignment_check(g, m_filtered)
    adjacency: dict[str, set[str]] = {}
    for u, v in m_filtered.layer_sets:
        adjacency.setdefault(u, set()).add(v)
        adjacency.setdefault(v, set()).add(u)
    components = connected_components(g.entities, adjacency)
    membership = {node: cid for cid, comp in enumerate(components) for node in comp}
    retained: dict[str, set[Pair]] = {layer: set() for layer in g.layers}
    for pair, layers in m_filtered.layer_sets.items():
        for layer in layers:
            retained[layer].add(pair)
    return ConsensusState(g, membership, retained)


def _require_community(state: ConsensusState, cid: int) -> set[str]:
    members = state.communities.get(cid)
    if members is None:
        raise InputError(f"no community with id {cid}")
    return members


def _missing_intra_edges(state: ConsensusState, cid: int, layer: str) -> list[Pair]:
    members = state.communities[cid]
    missing = []
    for u in members:
        for nb in state.graph.neighbors(layer, u):
            if u < nb and nb in members and not state.has_retained(layer, u, nb):
                missing.append((u, nb))
    return missing


def update_community(state: ConsensusState, cid: int,
                     layer: str) -> tuple[ConsensusState, float]:
    """Candidate adding every missing intra-community edge of one layer."""
    _require_community(state, cid)
    if layer not in state.graph.edges:
        raise InputError(f"unknown layer {layer!r}")
    candidate = state.copy()
    for pair in _missing_intra_edges(state, cid, layer):
        candidate._add_retained(layer, pair)
    return candidate, candidate.q


def update_community_structure(state: ConsensusState, cid_j: int, cid_h: int,
                               layer: str) -> tuple[ConsensusState, float]:
    """Better of two unilateral inter-community edits for one layer.

    Either add every original layer edge between the two communities that
    is not retained yet, or drop every retained one; the higher-scoring
    variant is returned (both leave intra counts untouched).
    """
    members_j = _require_community(state, cid_j)
    members_h = _require_community(state, cid_h)
    if cid_j == cid_h:
        raise InputError("inter-community refinement needs two communities")
    if layer not in state.graph.edges:
        raise InputError(f"unknown layer {layer!r}")
    small, other_cid = ((members_j, cid_h) if len(members_j) <= len(members_h)
                        else (members_h, cid_j))
    addable: list[Pair] = []
    removable: list[Pair] = []
    for u in small:
        for nb in state.graph.neighbors(layer, u):
            if state.membership[nb] == other_cid:
                pair = (u, nb) if u <= nb else (nb, u)
                if state.has_retained(layer, *pair):
                    removable.append(pair)
                else:
                    addable.append(pair)
    if not addable and not removable:
        return state.copy(), state.q
    cand_add = state.copy()
    for pair in set(addable):
        cand_add._add_retained(layer, pair)
    cand_remove = state.copy()
    for pair in set(removable):
        cand_remove._remove_retained(layer, pair)
    if cand_remove.exact_score() >= cand_add.exact_score():
        return cand_remove, cand_remove.q
    return cand_add, cand_add.q


def _relocation_priority(state: ConsensusState, node: str, cid_h: int) -> int:
    """Original edges (any layer) toward the target community, minus those
    toward the node's own community."""
    toward = 0
    inside = 0
    own = state.membership[node]
    for layer in state.graph.layers:
        for nb in state.graph.neighbors(layer, node):
            if state.membership[nb] == cid_h:
                toward += 1
            elif state.membership[nb] == own:
                inside += 1
    return toward - inside


def relocate_nodes(state: ConsensusState, cid_j: int,
                   cid_h: int) -> tuple[ConsensusState, float]:
    """Greedy one-at-a-time relocation from cid_j into cid_h.

    Nodes are tried in descending priority (ties: lower id); a move is kept
    only if modularity strictly increases, the queue is rebuilt after every
    kept move, and the loop stops when no queued node improves.
    """
    _require_community(state, cid_j)
    _require_community(state, cid_h)
    if cid_j == cid_h:
        raise InputError("relocation needs two distinct communities")
    candidate = state.copy()
    while cid_j in candidate.communities:
        order = sorted(candidate.communities[cid_j],
                       key=lambda v: (-_relocation_priority(candidate, v, cid_h), v))
        for node in order:
            if candidate._score_delta(candidate._move_changes(node, cid_h)) > 0:
                candidate._move_node(node, cid_h)
                break
        else:
            break
    return candidate, candidate.q


def partition_community(state: ConsensusState, cid: int,
                        seed: int = 0) -> tuple[ConsensusState, float]:
    """Candidate splitting one community via its flattened retained edges.

    The community is viewed as a weighted monoplex graph whose weights count
    the layers with a retained edge between two members; the base partitioner
    proposes the split. Communities of fewer than two nodes are a no-op.
    """
    members = _require_community(state, cid)
    if len(members) < 2:
        return state.copy(), state.q
    weights: dict[Pair, int] = {}
    for u in members:
        for layer in state.graph.layers:
            for nb in state.retained_neighbors(layer, u):
                if u < nb and nb in members:
                    pair = (u, nb)
                    weights[pair] = weights.get(pair, 0) + 1
    sub = partition_weighted_graph(WeightedGraph(sorted(members), weights), seed)
    groups: dict[int, set[str]] = {}
    for node, label in sub.membership.items():
        groups.setdefault(label, set()).add(node)
    if len(groups) <= 1:
        return state.copy(), state.q
    parts = [groups[label] for label in sorted(groups)]
    candidate = state.copy()
    candidate._split_community(cid, parts)
    return candidate, candidate.q


# -- the optimizer -----------------------------------------------------------


def _intra_gain(state: ConsensusState, cid: int, layer: str) -> int:
    """Exact score delta of update_community, without building the candidate."""
    if layer not in state._basis.weight:
        return 0
    n_add = len(_missing_intra_edges(state, cid, layer))
    if n_add == 0:
        return 0
    m = state._basis.size[layer]
    d = state._dhat.get((layer, cid), 0)
    return 4 * n_add * (m - d - n_add) * state._basis.weight[layer]


def _neighbor_communities(state: ConsensusState, cid: int) -> list[int]:
    """Communities sharing at least one original multilayer edge with cid."""
    members = state.communities.get(cid, set())
    out: set[int] = set()
    for node in members:
        for layer in state.graph.layers:
            for nb in state.graph.neighbors(layer, node):
                other = state.membership[nb]
                if other != cid:
                    out.add(other)
    return sorted(out)


def optimize_from_filtered(g: MultilayerGraph, m_filtered: CoassociationMatrix,
                           seed: int = 0,
                           on_commit: Callable[[ConsensusState, CommitRecord], None] | None = None,
                           ) -> ConsensusState:
    """Run the three-stage modularity optimization from the lower bound.

    Sweeps layers in input order and repeats until one full pass commits
    nothing. Every commit strictly increases the exact modularity score, so
    the final state never scores below the lower-bound consensus.
    """
    state = lower_bound_consensus(g, m_filtered)
    records: list[CommitRecord] = []

    def commit(candidate: ConsensusState, stage: str, layer: str | None,
               cids: tuple[int, ...]) -> ConsensusState:
        record = CommitRecord(
            stage=stage, layer=layer, communities=cids,
            q_before=state.q, q_after=candidate.q,
            score_before=state.exact_score(),
            score_after=candidate.exact_score(),
        )
        records.append(record)
        if on_commit is not None:
            on_commit(candidate, record)
        return candidate

    while True:
        commits_before = len(records)
        for layer in g.layers:
            if not state.communities:
                break
            # Stage (i): best intra-community refinement, committed if improving.
            j_star = None
            best_gain = None
            for cid in sorted(state.communities):
                gain = _intra_gain(state, cid, layer)
                if best_gain is None or gain > best_gain:
                    j_star, best_gain = cid, gain
            if j_star is None:
                continue
            if best_gain > 0:
                candidate, _ = update_community(state, j_star, layer)
                state = commit(candidate, "intra", layer, (j_star,))

            # Stage (ii): per-neighbor best of inter refinement vs relocation.
            base_score = state.exact_score()
            best = None  # (score, cid_h, candidate, relocation_won)
            for cid_h in _neighbor_communities(state, j_star):
                cand_ic, _ = update_community_structure(state, j_star, cid_h, layer)
                cand_rl, _ = relocate_nodes(state, j_star, cid_h)
                s_ic, s_rl = cand_ic.exact_score(), cand_rl.exact_score()
                if s_rl >= s_ic:
                    entry = (s_rl, cid_h, cand_rl, True)
                else:
                    entry = (s_ic, cid_h, cand_ic, False)
                if best is None or entry[0] > best[0]:
                    best = entry
            if best is not None and best[0] > base_score:
                score_h, h_star, cand_h, relocation_won = best
                stage = "relocate" if relocation_won else "inter"
                state = commit(cand_h, stage, layer, (j_star, h_star))
                # Complementary operation on the same neighbor.
                if (j_star in state.communities and h_star in state.communities):
                    if relocation_won:
                        cand2, _ = update_community_structure(state, j_star,
                                                              h_star, layer)
                        stage2 = "inter"
                    else:
                        cand2, _ = relocate_nodes(state, j_star, h_star)
                        stage2 = "relocate"
                    if cand2.exact_score() > state.exact_score():
                        state = commit(cand2, stage2, layer, (j_star, h_star))

            # Stage (iii): try splitting the selected community.
            if j_star in state.communities and len(state.communities[j_star]) >= 2:
                cand_split, _ = partition_community(state, j_star, seed)
                if cand_split.exact_score() > state.exact_score():
                    new_ids = tuple(sorted(set(cand_split.communities)
                                           - set(state.communities)))
                    state = commit(cand_split, "partition", layer,
                                   (j_star,) + new_ids)
        if len(records) == commits_before:
            break

    state.log = records
    return state


def optimize_consensus(g: MultilayerGraph, e: Ensemble, model: str = "mlf",
                       cfg: FilterConfig | None = None, seed: int = 0,
                       on_commit: Callable[[ConsensusState, CommitRecord], None] | None = None,
                       ) -> ConsensusState:
    """Full pipeline: co-association filtering, then consensus optimization."""
    cfg = cfg or FilterConfig()
    _, _, _, filtered = filter_coassociation(g, e, model, cfg)
    return optimize_from_filtered(g, filtered, seed=seed, on_commit=on_commit)


def membership_state(g: MultilayerGraph,
                     structure: CommunityStructure) -> ConsensusState:
    """Consensus state for a bare membership: intra-community edges retained.

    This is the evaluation convention for partitions that come without a
    retained-edge set (e.g. external methods): each layer keeps exactly its
    intra-community edges, so all-singleton partitions score 0.
    """
    retained: dict[str, set[Pair]] = {}
    for layer in g.layers:
        retained[layer] = {(u, v) for u, v in g.edges[layer]
                           if structure.membership[u] == structure.membership[v]}
    return ConsensusState(g, structure.membership, retained)


# -- serialization -----------------------------------------------------------


def save_communities(state: ConsensusState, path: str) -> None:
    """Write "nodeId communityId" with dense ids, in entity order."""
    structure = state.as_structure()
    with open(path, "w", encoding="utf-8") as fh:
        for node in state.graph.entities:
            fh.write(f"{node}\t{structure.membership[node]}\n")


def load_communities(path: str) -> CommunityStructure:
    """Read a "nodeId communityId" file into a community structure."""
    labels: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split()
            if len(fields) != 2:
                raise InputError(f"{path}:{lineno}: expected 'nodeId communityId'")
            node, label = fields
            if node in labels and labels[node] != label:
                raise InputError(f"{path}:{lineno}: node {node!r} assigned twice")
            labels[node] = label
    return CommunityStructure.from_labels(labels)


def save_retained(state: ConsensusState, path: str) -> None:
    """Write retained multilayer edges as "layerId srcId dstId"."""
    edge_sets = state.retained_edge_sets()
    with open(path, "w", encoding="utf-8") as fh:
        for layer in state.graph.layers:
            for u, v in sorted(edge_sets.get(layer, ())):
                fh.write(f"{layer}\t{u}\t{v}\n")


def load_retained(path: str, g: MultilayerGraph) -> dict[str, set[Pair]]:
    """Read a retained-edge file; every edge must exist in the graph."""
    retained: dict[str, set[Pair]] = {layer: set() for layer in g.layers}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split()
            if len(fields) != 3:
                raise InputError(f"{path}:{lineno}: expected 'layerId srcId dstId'")
            layer, u, v = fields
            if layer not in retained:
                raise InputError(f"{path}:{lineno}: unknown layer {layer!r}")
            pair = (u, v) if u <= v else (v, u)
            if pair not in g.edges[layer]:
                raise InputError(f"{path}:{lineno}: ({u!r}, {v!r}) is not an "
                                 f"edge of layer {layer!r}")
            retained[layer].add(pair)
    return retained


def save_commit_log(records: list[CommitRecord], path: str) -> None:
    """One line per commit: stage, layer, communities, dQ, Q."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# stage\tlayer\tcommunities\tdelta_q\tq\n")
        for rec in records:
            cids = ",".join(str(c) for c in rec.communities)
            fh.write(f"{rec.stage}\t{rec.layer}\t{cids}\t"
                     f"{rec.q_after - rec.q_before:.12g}\t{rec.q_after:.12g}\n")
