"""
Batched protocol operations issued by a worker's enumeration thread.

- verify_edges: one VERIFY_E_REQ per owner, edges routed to the owner of
  their smaller-id endpoint
- fetch_vertices: one FETCH_V_REQ per owner for every needed vertex not
  already cached
- steal_work: CHECK_R_REQ broadcast, then SHARE_R_REQ to the busiest peer
"""

import logging
from collections import Counter, defaultdict
from typing import Any, Dict, Iterable, List, Optional

from graph.partition_view import PartitionView
from graph.pattern import Edge, canonical_edge
from transport.base import Transport
from transport.messages import MessageKind
from utils.errors import NotOwnerError, TransportFailure

logger = logging.getLogger(__name__)


def verify_edges(transport: Transport, pv: PartitionView, batch: Iterable[Edge],
                 round_tag: Any = None) -> Dict[Edge, bool]:
    edges = sorted({canonical_edge(a, b) for a, b in batch})
    if not edges:
        return {}

    by_target: Dict[int, List[Edge]] = defaultdict(list)
    for edge in edges:
        by_target[pv.owner(edge[0])].append(edge)

    seen = transport.counters.verified.setdefault(round_tag, Counter())
    verdicts: Dict[Edge, bool] = {}
    for target in sorted(by_target):
        request = by_target[target]
        response = transport.request(target, MessageKind.VERIFY_E_REQ, request)
        if len(response.payload) != len(request):
            raise TransportFailure(
                f"machine {target} answered {len(response.payload)} verdicts for {len(request)} edges"
            )
        for edge, ok in zip(request, response.payload):
            verdicts[edge] = ok
            seen[edge] += 1
    logger.debug(f"Machine {pv.machine_id}: verified {len(edges)} edges on {len(by_target)} machines")
    return verdicts


def fetch_vertices(transport: Transport, pv: PartitionView, needed: Iterable[int]) -> int:
    """Fetch adjacency lists into pv's cache; returns how many vertices were requested."""
    missing = sorted(v for v in set(needed) if not pv.is_resolvable(v))
    if not missing:
        return 0

    by_owner: Dict[int, List[int]] = defaultdict(list)
    for v in missing:
        by_owner[pv.owner(v)].append(v)

    for owner in sorted(by_owner):
        request = by_owner[owner]
        response = transport.request(owner, MessageKind.FETCH_V_REQ, request)
        returned = {v: neighbors for v, neighbors in response.payload}
        absent = set(request) - set(returned)
        if absent:
            raise NotOwnerError(absent, owner)
        for v in request:
            pv.cache_put(v, returned[v])
            transport.counters.fetched[v] += 1
    return len(missing)


def steal_work(transport: Transport) -> Optional[List[int]]:
    """Members of a region group claimed from the busiest peer, or None when every peer is idle."""
    while True:
        counts = {}
        for peer in transport.peers():
            try:
                counts[peer] = transport.request(peer, MessageKind.CHECK_R_REQ).payload
            except TransportFailure as e:
                logger.warning(f"Machine {transport.machine_id}: CHECK_R to {peer} failed, counted as 0: {e}")
                counts[peer] = 0
        if not counts or max(counts.values()) == 0:
            return None

        victim = min(counts, key=lambda peer: (-counts[peer], peer))
        members = transport.request(victim, MessageKind.SHARE_R_REQ).payload
        if members:
            logger.info(f"Machine {transport.machine_id}: stole {len(members)} candidates from machine {victim}")
            return list(members)
        # another thief claimed it first; ask again


def broadcast_done(transport: Transport) -> int:
    """Send DONE to every peer; unreachable peers are logged and skipped. Returns how many acknowledged."""
    acknowledged = 0
    for peer in transport.peers():
        try:
            transport.request(peer, MessageKind.DONE_REQ)
            acknowledged += 1
        except TransportFailure as e:
            logger.warning(f"Machine {transport.machine_id}: DONE to {peer} failed: {e}")
    return acknowledged
