"""
Partition View

One machine's share of the data graph:
- owned adjacency lists (immutable after load)
- the global ownership map
- border vertices and border distances, computed once at load
- a budgeted cache of fetched foreign adjacency lists

Owned data may be read from any thread. The foreign cache belongs to the
enumeration thread; the daemon answers from owned data only.
"""

import bisect
import logging
import math
from collections import OrderedDict, deque
from enum import Enum
from typing import Collection, Dict, FrozenSet, Iterable, Mapping, Optional, Set, Tuple

from utils.errors import GraphError, OwnerUnknownError, UnknownVertexError

logger = logging.getLogger(__name__)

# border distance of owned vertices in a partition without any border vertex
INFINITE_DISTANCE = math.inf

VERTEX_ID_BYTES = 8

Adjacency = Tuple[int, ...]


class EdgePresence(Enum):
    PRESENT = "present"
    ABSENT = "absent"
    UNDETERMINED = "undetermined"


def normalize_adjacency(neighbors: Iterable[int]) -> Adjacency:
    return tuple(sorted(set(int(n) for n in neighbors)))


def border_vertices(local_adj: Mapping[int, Adjacency], ownership: Mapping[int, int], machine_id: int) -> Set[int]:
    """Owned vertices with at least one neighbor owned elsewhere."""
    border = set()
    for v, neighbors in local_adj.items():
        for n in neighbors:
            if ownership.get(n) != machine_id:
                border.add(v)
                break
    return border


def compute_border_distances(local_adj: Mapping[int, Adjacency], border: Set[int]) -> Dict[int, float]:
    """
    Multi-source BFS from every border vertex over owned edges only.

    Vertices unreachable from the border (including every vertex of a
    partition that has no border at all) get INFINITE_DISTANCE.
    """
    distances: Dict[int, float] = {v: INFINITE_DISTANCE for v in local_adj}
    queue = deque()
    for b in sorted(border):
        distances[b] = 0
        queue.append(b)

    while queue:
        v = queue.popleft()
        next_distance = distances[v] + 1
        for n in local_adj[v]:
            if n in local_adj and distances[n] > next_distance:
                distances[n] = next_distance
                queue.append(n)
    return distances


class ForeignCache:
    """
    Fetched adjacency lists of foreign vertices, evicted oldest fetch first.

    A budget of 0 means unbounded.
    """

    def __init__(self, budget_bytes: int = 0):
        self.budget_bytes = budget_bytes
        self._entries: "OrderedDict[int, Adjacency]" = OrderedDict()
        self._sets: Dict[int, FrozenSet[int]] = {}
        self.bytes_used = 0
        self.evictions = 0

    @staticmethod
    def entry_bytes(neighbors: Adjacency) -> int:
        return VERTEX_ID_BYTES * (1 + len(neighbors))

    def __contains__(self, v: int) -> bool:
        return v in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, v: int) -> Optional[Adjacency]:
        return self._entries.get(v)

    def neighbor_set(self, v: int) -> FrozenSet[int]:
        return self._sets[v]

    def vertices(self):
        return list(self._entries.keys())

    def put(self, v: int, neighbors: Iterable[int]):
        if v in self._entries:
            return
        adjacency = normalize_adjacency(neighbors)
        self._entries[v] = adjacency
        self._sets[v] = frozenset(adjacency)
        self.bytes_used += self.entry_bytes(adjacency)

    def evict(self, pinned: Collection[int] = ()) -> int:
        """
        Drop oldest entries until the cache fits its budget. Returns the number evicted.

        Pinned vertices are never dropped, so a round's pivot targets may hold
        the cache above budget until the round ends.
        """
        if self.budget_bytes <= 0:
            return 0
        evicted = 0
        for v in list(self._entries):
            if self.bytes_used <= self.budget_bytes:
                break
            if v in pinned:
                continue
            adjacency = self._entries.pop(v)
            del self._sets[v]
            self.bytes_used -= self.entry_bytes(adjacency)
            evicted += 1
        if evicted:
            self.evictions += evicted
            logger.debug(f"Evicted {evicted} cached vertices, {self.bytes_used} bytes remain")
        return evicted


class PartitionView:
    """
    The data-graph partition held by one worker.

    Args:
        machine_id: Worker index t
        local_adj: VertexId -> neighbors, for owned vertices only
        ownership: VertexId -> machine index, total over the data graph
        cache_budget: Bytes of foreign adjacency to keep cached; 0 = unbounded
    """

    def __init__(
        self,
        machine_id: int,
        local_adj: Mapping[int, Iterable[int]],
        ownership: Mapping[int, int],
        cache_budget: int = 0,
    ):
        self.machine_id = machine_id
        self.ownership: Dict[int, int] = {int(v): int(m) for v, m in ownership.items()}
        self.local_adj: Dict[int, Adjacency] = {int(v): normalize_adjacency(n) for v, n in local_adj.items()}
        self._adj_sets: Dict[int, FrozenSet[int]] = {v: frozenset(n) for v, n in self.local_adj.items()}
        self.cache = ForeignCache(cache_budget)

        self._check_ownership()
        self.border: Set[int] = border_vertices(self.local_adj, self.ownership, machine_id)
        self.border_distance: Dict[int, float] = compute_border_distances(self.local_adj, self.border)
        logger.debug(
            f"Machine {machine_id}: {len(self.local_adj)} owned vertices, {len(self.border)} border vertices"
        )

    def _check_ownership(self):
        for v in self.local_adj:
            if self.ownership.get(v) != self.machine_id:
                raise GraphError(f"vertex {v} listed locally but owned by {self.ownership.get(v)}")
        owned = sum(1 for m in self.ownership.values() if m == self.machine_id)
        if owned != len(self.local_adj):
            raise GraphError(f"ownership map assigns {owned} vertices to machine {self.machine_id}, "
                             f"adjacency covers {len(self.local_adj)}")

    @classmethod
    def whole_graph(cls, adjacency: Mapping[int, Iterable[int]], cache_budget: int = 0) -> "PartitionView":
        """Single-machine view: machine 0 owns everything."""
        return cls(0, adjacency, {v: 0 for v in adjacency}, cache_budget)

    # ===== OWNERSHIP =====

    def is_owned(self, v: int) -> bool:
        return v in self.local_adj

    def is_cached(self, v: int) -> bool:
        return v in self.cache

    def is_resolvable(self, v: int) -> bool:
        return v in self.local_adj or v in self.cache

    def owner(self, v: int) -> int:
        try:
            return self.ownership[v]
        except KeyError:
            raise OwnerUnknownError(v) from None

    def owned_vertices(self):
        return sorted(self.local_adj)

    # ===== ADJACENCY =====

    def adjacency(self, v: int) -> Adjacency:
        neighbors = self.local_adj.get(v)
        if neighbors is not None:
            return neighbors
        neighbors = self.cache.get(v)
        if neighbors is not None:
            return neighbors
        raise UnknownVertexError(v, self.machine_id)

    def neighbor_set(self, v: int) -> FrozenSet[int]:
        neighbors = self._adj_sets.get(v)
        if neighbors is not None:
            return neighbors
        if v in self.cache:
            return self.cache.neighbor_set(v)
        raise UnknownVertexError(v, self.machine_id)

    def degree(self, v: int) -> int:
        return len(self.adjacency(v))

    def known_degree(self, v: int) -> Optional[int]:
        """Degree if v is owned or cached, else None."""
        neighbors = self.local_adj.get(v)
        if neighbors is None:
            neighbors = self.cache.get(v)
        return None if neighbors is None else len(neighbors)

    def has_owned_edge(self, a: int, b: int) -> bool:
        neighbors = self.local_adj[a]
        i = bisect.bisect_left(neighbors, b)
        return i < len(neighbors) and neighbors[i] == b

    def edge_presence(self, a: int, b: int) -> EdgePresence:
        for x, y in ((a, b), (b, a)):
            if x in self.local_adj:
                return EdgePresence.PRESENT if self.has_owned_edge(x, y) else EdgePresence.ABSENT
        for x, y in ((a, b), (b, a)):
            if x in self.cache:
                return EdgePresence.PRESENT if y in self.cache.neighbor_set(x) else EdgePresence.ABSENT
        return EdgePresence.UNDETERMINED

    # ===== CACHE =====

    def cache_put(self, v: int, neighbors: Iterable[int]):
        if v in self.local_adj:
            return
        self.cache.put(v, neighbors)

    def cache_evict(self, pinned: Collection[int] = ()) -> int:
        return self.cache.evict(pinned)
