"""
Single-machine enumeration (SM-E) and the brute-force oracle.

A candidate v for the start vertex whose border distance is at least the
start vertex's span can only be part of embeddings made of owned vertices,
so those candidates are enumerated locally with plain backtracking. The
same pass records how many trie nodes each candidate would have produced;
region grouping uses the average as its memory estimate.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from graph.partition_view import PartitionView
from graph.pattern import OrderConstraints, QueryPattern, span, symmetry_constraints
from planner.execution_plan import ExecutionPlan

logger = logging.getLogger(__name__)

DEFAULT_NODE_BYTES = 24

Embedding = Tuple[int, ...]


def embedding_tuple(p: QueryPattern, mapping: Mapping[int, int]) -> Embedding:
    """Embedding as data vertices listed in the pattern's sorted vertex order."""
    return tuple(mapping[u] for u in p.vertices)


@dataclass
class LocalStats:
    node_counts: Dict[int, int] = field(default_factory=dict)
    node_bytes: int = DEFAULT_NODE_BYTES

    @property
    def average_bytes(self) -> Optional[float]:
        """Average trie bytes per candidate, or None when no candidate was enumerated."""
        if not self.node_counts:
            return None
        return self.node_bytes * sum(self.node_counts.values()) / len(self.node_counts)

    @property
    def total_nodes(self) -> int:
        return sum(self.node_counts.values())


def split_candidates(pv: PartitionView, p: QueryPattern, u_start: int) -> Tuple[List[int], List[int]]:
    """(C1, C2): degree-feasible owned candidates, split by border distance >= span(u_start)."""
    required_degree = p.degree(u_start)
    reach = span(p, u_start)
    local, distributed = [], []
    for v in pv.owned_vertices():
        if pv.degree(v) < required_degree:
            continue
        if reach <= pv.border_distance[v]:
            local.append(v)
        else:
            distributed.append(v)
    logger.debug(f"Machine {pv.machine_id}: |C1|={len(local)}, |C2|={len(distributed)}")
    return local, distributed


def _placement(order: Tuple[int, ...], p: QueryPattern, anchors: Mapping[int, int]):
    """For each non-first vertex: the mapped vertex whose adjacency seeds candidates, and its earlier neighbors."""
    position = {u: i for i, u in enumerate(order)}
    steps = []
    for u in order[1:]:
        earlier = [w for w in p.neighbors(u) if position[w] < position[u]]
        steps.append((u, anchors[u], sorted(earlier, key=position.__getitem__)))
    return steps


def local_enumerate(
    pv: PartitionView,
    p: QueryPattern,
    plan: ExecutionPlan,
    candidates: Iterable[int],
    node_bytes: int = DEFAULT_NODE_BYTES,
) -> Tuple[List[Embedding], LocalStats]:
    """Backtracking over owned adjacency in the plan's matching order."""
    anchors = {leaf: unit.piv for unit in plan.units for leaf in unit.leaves}
    steps = _placement(plan.matching_order, p, anchors)
    start = plan.matching_order[0]
    constraints = plan.constraints
    stats = LocalStats(node_bytes=node_bytes)
    results: List[Embedding] = []

    for v in sorted(candidates):
        mapping = {start: v}
        used = {v}
        counter = [1]

        def extend(i: int):
            if i == len(steps):
                results.append(embedding_tuple(p, mapping))
                return
            u, anchor, earlier = steps[i]
            required_degree = p.degree(u)
            for w in pv.adjacency(mapping[anchor]):
                if w in used or pv.degree(w) < required_degree:
                    continue
                if not constraints.admits(u, w, mapping):
                    continue
                if not all(pv.has_owned_edge(mapping[x], w) for x in earlier if x != anchor):
                    continue
                counter[0] += 1
                mapping[u] = w
                used.add(w)
                extend(i + 1)
                del mapping[u]
                used.discard(w)

        extend(0)
        stats.node_counts[v] = counter[0]

    logger.debug(f"Machine {pv.machine_id}: SM-E found {len(results)} embeddings from {len(stats.node_counts)} candidates")
    return results, stats


def oracle_enumerate(
    adjacency: Mapping[int, Iterable[int]],
    p: QueryPattern,
    constraints: Optional[OrderConstraints] = None,
) -> Set[Embedding]:
    """Every embedding of p in the whole graph, one per automorphism class."""
    constraints = symmetry_constraints(p) if constraints is None else constraints
    graph: Dict[int, FrozenSet[int]] = {v: frozenset(n) for v, n in adjacency.items()}
    if len(p.vertices) > len(graph):
        return set()

    order = [p.vertices[0]]
    while len(order) < len(p.vertices):
        order.append(min(u for u in p.vertices if u not in order and p.neighbors(u) & set(order)))
    anchors = {u: next(w for w in order if w in p.neighbors(u)) for u in order[1:]}
    steps = _placement(tuple(order), p, anchors)

    results: Set[Embedding] = set()
    mapping: Dict[int, int] = {}
    used: Set[int] = set()

    def extend(i: int):
        if i == len(steps):
            results.add(embedding_tuple(p, mapping))
            return
        u, anchor, earlier = steps[i]
        for w in graph[mapping[anchor]]:
            if w in used or not constraints.admits(u, w, mapping):
                continue
            if all(w in graph[mapping[x]] for x in earlier):
                mapping[u] = w
                used.add(w)
                extend(i + 1)
                del mapping[u]
                used.discard(w)

    for v in sorted(graph):
        if constraints.admits(order[0], v, {}):
            mapping[order[0]] = v
            used.add(v)
            extend(0)
            del mapping[order[0]]
            used.discard(v)
    return results
