"""
Region grouping for memory control.

Distributed candidates are packed greedily into groups whose estimated trie
size fits the memory budget, always adding the candidate whose neighbors
overlap most with the group's neighborhood. The estimate per candidate is
the SM-E average; when SM-E had no candidates a configured fallback is used.
"""

import logging
import math
import threading
from dataclasses import dataclass
from typing import Iterable, List, Optional, Set

from enumeration.single_machine import LocalStats
from graph.partition_view import PartitionView
from utils.errors import ZeroDegreeError

logger = logging.getLogger(__name__)

DEFAULT_FALLBACK_CANDIDATE_BYTES = 64


@dataclass
class RegionGroup:
    members: List[int]
    estimated_bytes: int = 0
    processed: bool = False
    group_id: int = 0


def _neighborhood(rg: RegionGroup, pv: PartitionView) -> Set[int]:
    neighborhood: Set[int] = set()
    for member in rg.members:
        neighborhood.update(pv.adjacency(member))
    return neighborhood


def proximity(v: int, rg: RegionGroup, pv: PartitionView, neighborhood: Optional[Set[int]] = None) -> float:
    """
    Share of v's neighbors that neighbor some member of rg.

    neighborhood, when given, must be the union of the members' adjacency lists.
    """
    if neighborhood is None:
        neighborhood = _neighborhood(rg, pv)
    neighbors = pv.adjacency(v)
    if not neighbors:
        raise ZeroDegreeError(v)
    return sum(1 for n in neighbors if n in neighborhood) / len(neighbors)


def candidate_bytes(stats: Optional[LocalStats], fallback: int = DEFAULT_FALLBACK_CANDIDATE_BYTES) -> float:
    average = stats.average_bytes if stats is not None else None
    return fallback if average is None else average


def estimate_group_bytes(rg: RegionGroup, stats: Optional[LocalStats],
                         fallback: int = DEFAULT_FALLBACK_CANDIDATE_BYTES) -> int:
    if not rg.members:
        return 0
    return math.ceil(len(rg.members) * candidate_bytes(stats, fallback))


def find_region_groups(
    candidates: Iterable[int],
    budget: float,
    stats: Optional[LocalStats],
    pv: PartitionView,
    fallback: int = DEFAULT_FALLBACK_CANDIDATE_BYTES,
) -> List[RegionGroup]:
    """
    Partition candidates into region groups.

    Args:
        candidates: C2, owned vertices
        budget: Bytes per group; 0 or math.inf means unbounded
        stats: SM-E statistics for the per-candidate estimate
        pv: Partition the candidates are owned by

    Returns:
        Groups in creation order, each seeded by the smallest remaining id
    """
    budget = math.inf if not budget else budget
    pool = set(candidates)
    groups: List[RegionGroup] = []

    while pool:
        seed = min(pool)
        pool.discard(seed)
        rg = RegionGroup(members=[seed], group_id=len(groups))
        if math.isinf(budget):
            rg.members.extend(sorted(pool))
            pool.clear()
        neighborhood = _neighborhood(rg, pv)

        while pool and estimate_group_bytes(rg, stats, fallback) < budget:
            best = max(sorted(pool), key=lambda v: proximity(v, rg, pv, neighborhood))
            rg.members.append(best)
            if estimate_group_bytes(rg, stats, fallback) > budget:
                rg.members.pop()
                break
            pool.discard(best)
            neighborhood.update(pv.adjacency(best))

        rg.estimated_bytes = estimate_group_bytes(rg, stats, fallback)
        groups.append(rg)

    logger.debug(f"Machine {pv.machine_id}: {len(groups)} region groups from {sum(len(g.members) for g in groups)} candidates")
    return groups


class GroupTable:
    """
    Region groups of one worker, claimable from the enumeration thread and
    the daemon (shareR). Every group is handed out at most once.
    """

    def __init__(self, groups: Optional[List[RegionGroup]] = None):
        self._lock = threading.Lock()
        self._groups: List[RegionGroup] = list(groups or [])
        self.claimed_locally = 0
        self.given_away = 0

    def load(self, groups: List[RegionGroup]):
        with self._lock:
            self._groups.extend(groups)

    def unprocessed_count(self) -> int:
        with self._lock:
            return sum(1 for g in self._groups if not g.processed)

    def claim(self, remote: bool = False) -> Optional[RegionGroup]:
        """Atomically mark an unprocessed group processed and return it.

        Local claims take from the front, remote claims from the back.
        """
        with self._lock:
            for group in (reversed(self._groups) if remote else self._groups):
                if not group.processed:
                    group.processed = True
                    if remote:
                        self.given_away += 1
                    else:
                        self.claimed_locally += 1
                    return group
            return None

    def __len__(self) -> int:
        with self._lock:
            return len(self._groups)
