"""
Embedding Trie

Intermediate results of one region group, stored as a forest: results that
share a prefix (in matching order) share the trie nodes for that prefix.
A node holds a data vertex, its parent and a live-child counter; the leaf
of a result doubles as the result's id.

Nodes live in parallel slot arrays. A ResultId is (slot, generation); the
generation is bumped whenever a slot is freed, so an id that outlived its
node is detected as stale instead of silently naming a new result.

Also here:
- EdgeVerificationIndex: undetermined data edge -> ids of the results using it
- expand_embed_trie / adj_enum: one round of expansion for one frontier result
- filter_failed: drop every result indicted by a false verdict
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Set, Tuple, Union

from graph.partition_view import EdgePresence, PartitionView
from graph.pattern import Edge, OrderConstraints, QueryPattern, canonical_edge
from planner.execution_plan import DecompositionUnit, ExecutionPlan
from utils.errors import MissingAdjacencyError, MissingVerdictError, StaleIdError

logger = logging.getLogger(__name__)

NO_PARENT = -1


class ResultId(NamedTuple):
    slot: int
    generation: int


class EmbeddingTrie:
    def __init__(self):
        self._vertex: List[int] = []
        self._parent: List[int] = []
        self._child_count: List[int] = []
        self._level: List[int] = []
        self._generation: List[int] = []
        self._alive: List[bool] = []
        self._linked: List[bool] = []
        self._free: List[int] = []
        # (parent slot, vertex) -> child slot, linked nodes only
        self._child_index: Dict[Tuple[int, int], int] = {}
        self._levels: Dict[int, Set[int]] = {}
        self.node_count = 0
        self.peak_node_count = 0

    # ===== SLOTS =====

    def _allocate(self, v: int, parent: int, level: int) -> int:
        if self._free:
            slot = self._free.pop()
            self._vertex[slot] = v
            self._parent[slot] = parent
            self._child_count[slot] = 0
            self._level[slot] = level
            self._alive[slot] = True
            self._linked[slot] = False
        else:
            slot = len(self._vertex)
            self._vertex.append(v)
            self._parent.append(parent)
            self._child_count.append(0)
            self._level.append(level)
            self._generation.append(0)
            self._alive.append(True)
            self._linked.append(False)
        self.node_count += 1
        self.peak_node_count = max(self.peak_node_count, self.node_count)
        return slot

    def _release(self, slot: int):
        self._alive[slot] = False
        self._generation[slot] += 1
        self._free.append(slot)
        self.node_count -= 1

    def _id(self, slot: int) -> ResultId:
        return ResultId(slot, self._generation[slot])

    def _slot(self, rid: ResultId) -> int:
        slot, generation = rid
        if not self.is_live(rid):
            raise StaleIdError(f"result id {rid} is not live")
        return slot

    def is_live(self, rid: ResultId) -> bool:
        slot, generation = rid
        return (
            0 <= slot < len(self._vertex)
            and self._alive[slot]
            and self._linked[slot]
            and self._generation[slot] == generation
        )

    # ===== NODES =====

    def new_child(self, parent: ResultId, v: int) -> ResultId:
        """Allocate an unlinked child; it joins the trie only through link().

        parent may itself be unlinked (a branch still under construction).
        """
        parent_slot, generation = parent
        if not (self._alive[parent_slot] and self._generation[parent_slot] == generation):
            raise StaleIdError(f"result id {parent} is not live")
        slot = self._allocate(v, parent_slot, self._level[parent_slot] + 1)
        return self._id(slot)

    def link(self, rid: ResultId) -> ResultId:
        slot, generation = rid
        if not (self._alive[slot] and self._generation[slot] == generation) or self._linked[slot]:
            raise StaleIdError(f"cannot link {rid}")
        parent = self._parent[slot]
        key = (parent, self._vertex[slot])
        if key in self._child_index:
            raise ValueError(f"sibling already stores vertex {self._vertex[slot]}")
        self._child_index[key] = slot
        self._linked[slot] = True
        self._levels.setdefault(self._level[slot], set()).add(slot)
        if parent != NO_PARENT:
            self._child_count[parent] += 1
        return rid

    def discard(self, rid: ResultId):
        """Free a node created by new_child that was never linked."""
        slot, generation = rid
        if self._alive[slot] and self._generation[slot] == generation and not self._linked[slot]:
            self._release(slot)

    def seed(self, v: int) -> ResultId:
        """Root node for data vertex v, created if absent."""
        slot = self._child_index.get((NO_PARENT, v))
        if slot is not None:
            return self._id(slot)
        slot = self._allocate(v, NO_PARENT, 0)
        return self.link(self._id(slot))

    def insert_path(self, parent: Union[ResultId, int], suffix: Iterable[int]) -> ResultId:
        """
        Append suffix below parent, reusing existing nodes.

        Args:
            parent: A live ResultId, or a data vertex naming a root
            suffix: Data vertices to append, non-empty

        Returns:
            ResultId of the deepest node of the inserted path
        """
        suffix = list(suffix)
        if not suffix:
            raise ValueError("suffix must be non-empty")
        current = parent if isinstance(parent, ResultId) else self.seed(parent)
        for v in suffix:
            current_slot = self._slot(current)
            existing = self._child_index.get((current_slot, v))
            if existing is not None:
                current = self._id(existing)
            else:
                current = self.link(self.new_child(current, v))
        return current

    def result_vertices(self, rid: ResultId) -> List[int]:
        slot = self._slot(rid)
        path = []
        while slot != NO_PARENT:
            path.append(self._vertex[slot])
            slot = self._parent[slot]
        path.reverse()
        return path

    def remove_result(self, rid: ResultId):
        """Remove a leaf, then every ancestor left without children. Stale ids are ignored."""
        if not self.is_live(rid):
            return
        slot = rid.slot
        while True:
            parent = self._parent[slot]
            del self._child_index[(parent, self._vertex[slot])]
            self._levels[self._level[slot]].discard(slot)
            self._release(slot)
            if parent == NO_PARENT:
                return
            self._child_count[parent] -= 1
            if self._child_count[parent] > 0:
                return
            slot = parent

    # ===== QUERIES =====

    def frontier(self, level: int) -> List[ResultId]:
        """Live nodes at a level, in slot order."""
        return [self._id(slot) for slot in sorted(self._levels.get(level, ()))]

    def leaf_count(self, level: int) -> int:
        return len(self._levels.get(level, ()))

    def child_count(self, rid: ResultId) -> int:
        return self._child_count[self._slot(rid)]

    def vertex(self, rid: ResultId) -> int:
        return self._vertex[self._slot(rid)]

    def level(self, rid: ResultId) -> int:
        return self._level[self._slot(rid)]

    @property
    def roots(self) -> Dict[int, ResultId]:
        return {v: self._id(slot) for (parent, v), slot in self._child_index.items() if parent == NO_PARENT}

    def linked_node_count(self) -> int:
        return sum(len(slots) for slots in self._levels.values())

    def compression_ratio(self, level: int) -> float:
        """Linked nodes over the total length of the results stored at level."""
        total = self.leaf_count(level) * (level + 1)
        return self.linked_node_count() / total if total else 0.0

    def audit(self) -> List[str]:
        """Recompute child counts by a full scan; returns a description of every mismatch."""
        counted: Dict[int, int] = {}
        for slots in self._levels.values():
            for slot in slots:
                parent = self._parent[slot]
                if parent != NO_PARENT:
                    counted[parent] = counted.get(parent, 0) + 1
        problems = []
        for slots in self._levels.values():
            for slot in slots:
                if self._child_count[slot] != counted.get(slot, 0):
                    problems.append(
                        f"slot {slot}: stored {self._child_count[slot]}, counted {counted.get(slot, 0)}"
                    )
                parent = self._parent[slot]
                if parent != NO_PARENT and not (self._alive[parent] and self._linked[parent]):
                    problems.append(f"slot {slot}: parent {parent} is not live")
        return problems


class EdgeVerificationIndex:
    def __init__(self):
        self.entries: Dict[Edge, Set[ResultId]] = {}

    def add(self, edge: Edge, rid: ResultId):
        self.entries.setdefault(canonical_edge(*edge), set()).add(rid)

    def keys(self) -> Set[Edge]:
        return set(self.entries)

    def ids(self, edge: Edge) -> Set[ResultId]:
        return self.entries.get(canonical_edge(*edge), set())

    def clear(self):
        self.entries.clear()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, edge) -> bool:
        return canonical_edge(*edge) in self.entries


def filter_failed(evi: EdgeVerificationIndex, verdicts: Mapping[Edge, bool], trie: EmbeddingTrie) -> int:
    """Remove every result indicted by a false verdict, then clear the index. Returns removals."""
    missing = [edge for edge in evi.entries if edge not in verdicts]
    if missing:
        raise MissingVerdictError(missing[0])
    removed = 0
    for edge, ids in evi.entries.items():
        if verdicts[edge]:
            continue
        for rid in ids:
            if trie.is_live(rid):
                trie.remove_result(rid)
                removed += 1
    evi.clear()
    return removed


# ===== EXPANSION =====

@dataclass
class UnitSchedule:
    """Per-unit lookups derived once from the plan."""
    unit: DecompositionUnit
    leaf_order: List[int]
    cross_partners: Dict[int, List[int]]
    sibling_partners: Dict[int, List[int]]

    @classmethod
    def build(cls, plan: ExecutionPlan, index: int) -> "UnitSchedule":
        unit = plan.units[index]
        leaves = set(unit.leaves)
        leaf_order = [u for u in plan.matching_order if u in leaves]
        rank = {u: i for i, u in enumerate(leaf_order)}
        cross: Dict[int, List[int]] = {u: [] for u in leaf_order}
        sibling: Dict[int, List[int]] = {u: [] for u in leaf_order}
        for a, b in sorted(unit.e_cro):
            leaf, other = (a, b) if a in leaves else (b, a)
            cross[leaf].append(other)
        for a, b in sorted(unit.e_sib):
            later, earlier = (a, b) if rank[a] > rank[b] else (b, a)
            sibling[later].append(earlier)
        return cls(unit, leaf_order, cross, sibling)

    def partners(self, u: int) -> List[int]:
        return self.cross_partners[u] + self.sibling_partners[u]


@dataclass
class ExpansionState:
    pv: PartitionView
    pattern: QueryPattern
    schedule: UnitSchedule
    trie: EmbeddingTrie
    evi: EdgeVerificationIndex
    constraints: OrderConstraints
    mapping: Dict[int, int]
    candidates: Dict[int, Set[int]] = field(default_factory=dict)
    used: Set[int] = field(default_factory=set)
    pending: List[Edge] = field(default_factory=list)
    verdicts: Optional[Mapping[Edge, bool]] = None


def expand_embed_trie(
    f: ResultId,
    pv: PartitionView,
    plan: ExecutionPlan,
    unit_index: int,
    trie: EmbeddingTrie,
    evi: EdgeVerificationIndex,
    pattern: QueryPattern,
    schedule: Optional[UnitSchedule] = None,
    verdicts: Optional[Mapping[Edge, bool]] = None,
) -> bool:
    """
    Extend frontier result f by unit dp_i; returns True if any extension was stored.

    f is removed from the trie when it cannot be extended. Undetermined
    sibling/cross edges of the new results are added to evi. verdicts, when
    given, holds edges already verified remotely and is consulted before
    an edge is declared undetermined.
    """
    schedule = schedule or UnitSchedule.build(plan, unit_index)
    unit = schedule.unit
    images = trie.result_vertices(f)
    mapping = dict(zip(plan.matching_order, images))

    pivot_image = mapping[unit.piv]
    if not pv.is_resolvable(pivot_image):
        raise MissingAdjacencyError(pivot_image)
    pivot_neighbors = pv.neighbor_set(pivot_image)

    state = ExpansionState(
        pv=pv,
        pattern=pattern,
        schedule=schedule,
        trie=trie,
        evi=evi,
        constraints=plan.constraints,
        mapping=mapping,
        used=set(images),
        verdicts=verdicts,
    )
    for u in schedule.leaf_order:
        candidates = set(pivot_neighbors)
        for other in schedule.cross_partners[u]:
            image = mapping[other]
            if pv.is_resolvable(image):
                candidates &= pv.neighbor_set(image)
        if not candidates:
            trie.remove_result(f)
            return False
        state.candidates[u] = candidates

    found = adj_enum(f, 0, state)
    if not found:
        trie.remove_result(f)
    return found


def adj_enum(node: ResultId, depth: int, state: ExpansionState) -> bool:
    schedule = state.schedule
    pv = state.pv
    u = schedule.leaf_order[depth]
    last = depth == len(schedule.leaf_order) - 1

    refined = state.candidates[u]
    for other in schedule.sibling_partners[u]:
        image = state.mapping[other]
        if pv.is_resolvable(image):
            refined = refined & pv.neighbor_set(image)

    required_degree = state.pattern.degree(u)
    found = False
    for v in sorted(refined):
        if v in state.used or not state.constraints.admits(u, v, state.mapping):
            continue
        known = pv.known_degree(v)
        if known is not None and known < required_degree:
            continue

        undetermined = []
        rejected = False
        for other in schedule.partners(u):
            presence = pv.edge_presence(v, state.mapping[other])
            if presence is EdgePresence.ABSENT:
                rejected = True
                break
            if presence is EdgePresence.UNDETERMINED:
                edge = canonical_edge(v, state.mapping[other])
                verdict = state.verdicts.get(edge) if state.verdicts is not None else None
                if verdict is False:
                    rejected = True
                    break
                if verdict is None:
                    undetermined.append(edge)
        if rejected:
            continue

        child = state.trie.new_child(node, v)
        state.mapping[u] = v
        state.used.add(v)
        state.pending.extend(undetermined)

        if last:
            for edge in state.pending:
                state.evi.add(edge, child)
            success = True
        else:
            success = adj_enum(child, depth + 1, state)

        del state.pending[len(state.pending) - len(undetermined):]
        del state.mapping[u]
        state.used.discard(v)

        if success:
            state.trie.link(child)
            found = True
        else:
            state.trie.discard(child)
    return found
