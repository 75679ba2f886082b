"""
R-Meef worker

Per worker:
1. Select the execution plan
2. Split start-vertex candidates into local (C1) and distributed (C2)
3. SM-E over C1, keeping its node statistics
4. Pack C2 into region groups under the memory budget
5. For each claimed group, run the multi-round expand -> verify -> filter loop
6. Steal groups from peers until every peer reports none left

The enumeration thread alone touches the trie, the EVI and the cache.
"""

import logging
import threading
from dataclasses import dataclass, field, asdict
from typing import Any, Collection, Dict, List, Optional, Set

from enumeration.embedding_trie import (
    EdgeVerificationIndex,
    EmbeddingTrie,
    ResultId,
    UnitSchedule,
    expand_embed_trie,
    filter_failed,
)
from enumeration.region_groups import (
    DEFAULT_FALLBACK_CANDIDATE_BYTES,
    GroupTable,
    candidate_bytes,
    find_region_groups,
)
from enumeration.single_machine import DEFAULT_NODE_BYTES, Embedding, LocalStats, local_enumerate, split_candidates
from graph.partition_view import PartitionView
from graph.pattern import Edge, QueryPattern
from planner.execution_plan import DEFAULT_MLST_SEARCH_LIMIT, ExecutionPlan, plan_for_strategy
from transport.base import Transport
from transport.client import fetch_vertices, steal_work, verify_edges
from utils.audit_logger import AuditLogger
from utils.config import PLAN_STRATEGIES, Settings
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class WorkerConfig:
    rho: float = 1.0
    mlst_search_limit: int = DEFAULT_MLST_SEARCH_LIMIT
    plan_strategy: str = "rads"
    plan_seed: int = 0
    memory_budget: int = 0
    cache_budget: int = 0
    transport: str = "loopback"
    emit: str = "count"
    node_bytes: int = DEFAULT_NODE_BYTES
    fallback_candidate_bytes: int = DEFAULT_FALLBACK_CANDIDATE_BYTES
    trie_slack_factor: float = 2.0
    steal: bool = True
    # test-only: treat every undetermined edge as present
    skip_verify: bool = False

    def __post_init__(self):
        if self.rho <= 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if self.memory_budget < 0 or self.cache_budget < 0:
            raise ConfigError("budgets must be >= 0")
        if self.emit not in ("count", "results"):
            raise ConfigError(f"Unknown emit mode: {self.emit}")
        if self.plan_strategy not in PLAN_STRATEGIES:
            raise ConfigError(f"Unknown plan strategy: {self.plan_strategy}")

    @classmethod
    def from_settings(cls, settings: Settings, **overrides) -> "WorkerConfig":
        values = dict(
            rho=settings.rho,
            mlst_search_limit=settings.mlst_search_limit,
            plan_strategy=settings.plan_strategy,
            plan_seed=settings.seed,
            memory_budget=settings.memory_budget,
            cache_budget=settings.cache_budget,
            transport=settings.transport,
            emit=settings.emit,
            node_bytes=settings.node_bytes,
            fallback_candidate_bytes=settings.fallback_candidate_bytes,
            trie_slack_factor=settings.trie_slack_factor,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class RoundState:
    index: int
    frontier: List[ResultId]
    evi: EdgeVerificationIndex = field(default_factory=EdgeVerificationIndex)


@dataclass
class WorkerReport:
    machine_id: int
    sme_count: int = 0
    rmeef_count: int = 0
    c1_size: int = 0
    c2_size: int = 0
    groups_created: int = 0
    groups_processed: int = 0
    groups_stolen: int = 0
    groups_given_away: int = 0
    rounds: int = 0
    peak_trie_nodes: int = 0
    peak_trie_bytes: int = 0
    max_estimated_bytes: int = 0
    cache_evictions: int = 0
    # compression of the final results: linked trie nodes vs. a flat embedding list
    trie_nodes_linked: int = 0
    embedding_list_entries: int = 0
    messages: Dict[str, Any] = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.sme_count + self.rmeef_count

    @property
    def compression_ratio(self) -> float:
        if not self.embedding_list_entries:
            return 0.0
        return self.trie_nodes_linked / self.embedding_list_entries

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["count"] = self.count
        data["compression_ratio"] = self.compression_ratio
        return data


@dataclass
class WorkerResult:
    count: int
    embeddings: Optional[List[Embedding]]
    report: WorkerReport


def select_worker_plan(pattern: QueryPattern, cfg: WorkerConfig) -> ExecutionPlan:
    return plan_for_strategy(pattern, cfg.plan_strategy, cfg.rho, cfg.mlst_search_limit, cfg.plan_seed)


def collect_pivot_targets(trie: EmbeddingTrie, frontier: List[ResultId], pivot_position: int) -> Set[int]:
    """Data vertices the frontier maps the unit's pivot to."""
    return {trie.result_vertices(f)[pivot_position] for f in frontier if trie.is_live(f)}


def cache_evict(pv: PartitionView, pinned: Collection[int] = ()) -> int:
    return pv.cache_evict(pinned)


class RMeefWorker:
    def __init__(
        self,
        pv: PartitionView,
        pattern: QueryPattern,
        cfg: WorkerConfig,
        transport: Transport,
        groups: Optional[GroupTable] = None,
        plan: Optional[ExecutionPlan] = None,
        ready_barrier: Optional[threading.Barrier] = None,
    ):
        self.pv = pv
        self.pattern = pattern
        self.cfg = cfg
        self.transport = transport
        self.groups = groups if groups is not None else GroupTable()
        self.plan = plan
        self.ready_barrier = ready_barrier
        self.report = WorkerReport(machine_id=pv.machine_id)
        self.verdict_cache: Dict[Edge, bool] = {}
        self.stats: Optional[LocalStats] = None
        self._schedules: List[UnitSchedule] = []
        self._embeddings: List[Embedding] = []
        self._group_seq = 0
        pv.cache.budget_bytes = cfg.cache_budget

    @property
    def machine_id(self) -> int:
        return self.pv.machine_id

    # ===== DRIVER =====

    def run(self) -> WorkerResult:
        AuditLogger.log_run_event("WORKER_START", machine_id=self.machine_id,
                                  metadata={"owned": len(self.pv.local_adj), "border": len(self.pv.border)})
        try:
            self.prepare()
        except Exception:
            if self.ready_barrier is not None:
                self.ready_barrier.abort()
            raise
        if self.ready_barrier is not None:
            self.ready_barrier.wait()

        while True:
            group = self.groups.claim()
            if group is None:
                break
            self.run_region_group(group.members, group.estimated_bytes)

        if self.cfg.steal:
            while True:
                members = steal_work(self.transport)
                if members is None:
                    break
                self.report.groups_stolen += 1
                estimate = int(len(members) * candidate_bytes(self.stats, self.cfg.fallback_candidate_bytes))
                self.run_region_group(members, estimate)

        self.report.groups_given_away = self.groups.given_away
        self.report.cache_evictions = self.pv.cache.evictions
        self.report.messages = self.transport.counters.to_dict()
        AuditLogger.log_run_event("WORKER_FINISH", machine_id=self.machine_id, metadata=self.report.to_dict())
        embeddings = self._embeddings if self.cfg.emit == "results" else None
        return WorkerResult(self.report.count, embeddings, self.report)

    def prepare(self):
        """Run SM-E over C1 and load the region groups built from C2."""
        if self.plan is None:
            self.plan = select_worker_plan(self.pattern, self.cfg)
        plan = self.plan
        self._schedules = [UnitSchedule.build(plan, i) for i in range(len(plan.units))]

        local, distributed = split_candidates(self.pv, self.pattern, plan.matching_order[0])
        self.report.c1_size, self.report.c2_size = len(local), len(distributed)

        embeddings, self.stats = local_enumerate(self.pv, self.pattern, plan, local, self.cfg.node_bytes)
        self.report.sme_count = len(embeddings)
        if self.cfg.emit == "results":
            self._embeddings.extend(embeddings)
        AuditLogger.log_run_event("SME_DONE", machine_id=self.machine_id,
                                  metadata={"c1": len(local), "c2": len(distributed), "embeddings": len(embeddings)})

        groups = find_region_groups(distributed, self.cfg.memory_budget, self.stats, self.pv,
                                    self.cfg.fallback_candidate_bytes)
        self.groups.load(groups)
        self.report.groups_created = len(groups)

    # ===== ONE REGION GROUP =====

    def _verify(self, evi: EdgeVerificationIndex, round_tag) -> Dict[Edge, bool]:
        keys = evi.keys()
        if self.cfg.skip_verify:
            return {edge: True for edge in keys}
        unknown = [edge for edge in keys if edge not in self.verdict_cache]
        self.verdict_cache.update(verify_edges(self.transport, self.pv, unknown, round_tag))
        return {edge: self.verdict_cache[edge] for edge in keys}

    def run_region_group(self, members: List[int], estimated_bytes: int = 0) -> int:
        """Enumerate every embedding whose start vertex maps into members. Returns the count found."""
        plan = self.plan
        trie = EmbeddingTrie()
        self._group_seq += 1
        self.report.groups_processed += 1

        seeds = sorted(set(members))
        fetch_vertices(self.transport, self.pv, [v for v in seeds if not self.pv.is_owned(v)])
        cache_evict(self.pv, pinned=set(seeds))
        state = RoundState(index=0, frontier=[trie.seed(v) for v in seeds])

        for i in range(len(plan.units)):
            state.index = i
            state.evi.clear()
            pivot_position = plan.position(plan.units[i].piv)
            if i > 0:
                targets = collect_pivot_targets(trie, state.frontier, pivot_position)
                fetch_vertices(self.transport, self.pv, targets)
                cache_evict(self.pv, pinned=targets)

            for f in state.frontier:
                if not trie.is_live(f):
                    continue
                expand_embed_trie(f, self.pv, plan, i, trie, state.evi, self.pattern,
                                  self._schedules[i], self.verdict_cache)

            verdicts = self._verify(state.evi, (self._group_seq, i))
            filter_failed(state.evi, verdicts, trie)
            cache_evict(self.pv)
            self.report.rounds += 1

            state.frontier = trie.frontier(plan.prefix_size(i) - 1)
            if not state.frontier:
                break

        final_level = len(self.pattern.vertices) - 1
        final = trie.frontier(final_level) if state.frontier else []
        if self.cfg.emit == "results":
            for rid in final:
                mapping = dict(zip(plan.matching_order, trie.result_vertices(rid)))
                self._embeddings.append(tuple(mapping[u] for u in self.pattern.vertices))
        self.report.rmeef_count += len(final)
        if final:
            self.report.trie_nodes_linked += trie.linked_node_count()
            self.report.embedding_list_entries += len(final) * len(self.pattern.vertices)

        self._record_memory(trie, estimated_bytes)
        return len(final)

    def _record_memory(self, trie: EmbeddingTrie, estimated_bytes: int):
        peak_bytes = trie.peak_node_count * self.cfg.node_bytes
        self.report.peak_trie_nodes = max(self.report.peak_trie_nodes, trie.peak_node_count)
        self.report.peak_trie_bytes = max(self.report.peak_trie_bytes, peak_bytes)
        self.report.max_estimated_bytes = max(self.report.max_estimated_bytes, estimated_bytes)
        limit = estimated_bytes * self.cfg.trie_slack_factor
        if estimated_bytes and peak_bytes > limit:
            AuditLogger.log_soft_violation("peak_trie_bytes", self.machine_id, peak_bytes, limit)


def run_worker(pv: PartitionView, p: QueryPattern, cfg: WorkerConfig, transport: Transport,
               groups: Optional[GroupTable] = None, plan: Optional[ExecutionPlan] = None) -> WorkerResult:
    return RMeefWorker(pv, p, cfg, transport, groups, plan).run()
