"""
Cluster drivers

- run_loopback_cluster: m workers as threads of this process, talking over
  LoopbackTransport. The driver is the termination barrier: daemons stop
  only after every enumeration thread has returned.
- run_tcp_cluster: the same over real sockets, on the hosts-file addresses
  or ephemeral ports on 127.0.0.1
- run_tcp_worker: one worker process of a multi-process TCP run; the DONE
  broadcast is the barrier
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from enumeration.region_groups import GroupTable
from enumeration.single_machine import Embedding
from graph.partition_view import PartitionView
from graph.pattern import QueryPattern
from planner.execution_plan import ExecutionPlan
from transport.base import Transport
from transport.client import broadcast_done
from transport.daemon import DaemonHandler
from transport.factory import get_transport
from transport.loopback import LoopbackHub
from transport.tcp import Address, TcpDaemon
from utils.audit_logger import AuditLogger
from utils.errors import ConfigError, TransportFailure
from workers.rmeef_worker import RMeefWorker, WorkerConfig, WorkerReport, WorkerResult, select_worker_plan

logger = logging.getLogger(__name__)


@dataclass
class ClusterResult:
    count: int
    plan: ExecutionPlan
    embeddings: Optional[List[Embedding]] = None
    reports: List[WorkerReport] = field(default_factory=list)

    def embedding_set(self) -> set:
        return set(self.embeddings or [])

    def summary(self) -> Dict:
        return {
            "count": self.count,
            "workers": len(self.reports),
            "groups_created": sum(r.groups_created for r in self.reports),
            "groups_processed": sum(r.groups_processed for r in self.reports),
            "groups_stolen": sum(r.groups_stolen for r in self.reports),
            "rounds": sum(r.rounds for r in self.reports),
            "compression_ratio": self.compression_ratio(),
        }

    def compression_ratio(self) -> float:
        entries = sum(r.embedding_list_entries for r in self.reports)
        return sum(r.trie_nodes_linked for r in self.reports) / entries if entries else 0.0


def _merge(plan: ExecutionPlan, results: List[WorkerResult]) -> ClusterResult:
    results = sorted(results, key=lambda r: r.report.machine_id)
    embeddings = None
    if all(r.embeddings is not None for r in results):
        embeddings = [e for r in results for e in r.embeddings]
    return ClusterResult(
        count=sum(r.count for r in results),
        plan=plan,
        embeddings=embeddings,
        reports=[r.report for r in results],
    )


def _run_workers(workers: List[RMeefWorker]) -> List[WorkerResult]:
    """Run every worker to completion in its own thread; re-raise the first failure."""
    results: List[WorkerResult] = []
    failures: List[BaseException] = []
    with ThreadPoolExecutor(max_workers=len(workers), thread_name_prefix="enum") as executor:
        futures = {executor.submit(worker.run): worker for worker in workers}
        for future in as_completed(futures):
            worker = futures[future]
            try:
                results.append(future.result())
            except Exception as e:
                logger.error(f"Machine {worker.machine_id} failed: {e}")
                failures.append(e)
                if worker.ready_barrier is not None:
                    worker.ready_barrier.abort()
    if failures:
        # a broken barrier is a symptom; surface the worker that broke it
        root = [e for e in failures if not isinstance(e, threading.BrokenBarrierError)]
        raise (root or failures)[0]
    return results


def _build_workers(
    views: Sequence[PartitionView],
    pattern: QueryPattern,
    cfg: WorkerConfig,
    plan: ExecutionPlan,
    transports: Sequence[Transport],
    tables: Sequence[GroupTable],
    worker_configs: Optional[Dict[int, WorkerConfig]],
) -> List[RMeefWorker]:
    barrier = threading.Barrier(len(views))
    workers = []
    for pv, transport, table in zip(views, transports, tables):
        worker_cfg = (worker_configs or {}).get(pv.machine_id, cfg)
        workers.append(RMeefWorker(pv, pattern, worker_cfg, transport, table, plan, ready_barrier=barrier))
    return workers


def run_loopback_cluster(
    views: Sequence[PartitionView],
    pattern: QueryPattern,
    cfg: WorkerConfig,
    plan: Optional[ExecutionPlan] = None,
    timeout_s: float = 30.0,
    worker_configs: Optional[Dict[int, WorkerConfig]] = None,
) -> ClusterResult:
    """
    Enumerate pattern over the partitions in-process.

    worker_configs overrides cfg per machine id (memory budgets differ per
    worker in some runs). All workers use the same plan.
    """
    plan = plan or select_worker_plan(pattern, cfg)
    AuditLogger.log_run_event("RUN_START", metadata={"transport": "loopback", "machines": len(views)})

    hub = LoopbackHub()
    tables = [GroupTable() for _ in views]
    try:
        for pv, table in zip(views, tables):
            hub.register(DaemonHandler(pv, table))
        transports = [get_transport("loopback", pv.machine_id, hub=hub, timeout_s=timeout_s) for pv in views]
        workers = _build_workers(views, pattern, cfg, plan, transports, tables, worker_configs)
        results = _run_workers(workers)
    finally:
        hub.stop_all()

    result = _merge(plan, results)
    AuditLogger.log_run_event("RUN_FINISH", metadata=result.summary())
    return result


def run_tcp_cluster(
    views: Sequence[PartitionView],
    pattern: QueryPattern,
    cfg: WorkerConfig,
    plan: Optional[ExecutionPlan] = None,
    timeout_s: float = 30.0,
    worker_configs: Optional[Dict[int, WorkerConfig]] = None,
    hosts: Optional[Dict[int, Address]] = None,
) -> ClusterResult:
    """
    Like run_loopback_cluster, with every message crossing a real TCP socket.

    Daemons bind the addresses in hosts, or ephemeral ports on 127.0.0.1
    when no hosts map is given.
    """
    if hosts is not None:
        missing = sorted(pv.machine_id for pv in views if pv.machine_id not in hosts)
        if missing:
            raise ConfigError(f"hosts file has no address for machines {missing}")
    plan = plan or select_worker_plan(pattern, cfg)
    AuditLogger.log_run_event("RUN_START", metadata={"transport": "tcp", "machines": len(views)})

    tables = [GroupTable() for _ in views]
    daemons = []
    transports = []
    try:
        for pv, table in zip(views, tables):
            host, port = hosts[pv.machine_id] if hosts is not None else ("127.0.0.1", 0)
            daemons.append(TcpDaemon(DaemonHandler(pv, table), host, port).start())
        bound: Dict[int, Address] = {pv.machine_id: d.address for pv, d in zip(views, daemons)}
        transports = [get_transport("tcp", pv.machine_id, hosts=bound, timeout_s=timeout_s) for pv in views]
        workers = _build_workers(views, pattern, cfg, plan, transports, tables, worker_configs)
        results = _run_workers(workers)
    finally:
        for transport in transports:
            transport.close()
        for daemon in daemons:
            daemon.stop()

    result = _merge(plan, results)
    AuditLogger.log_run_event("RUN_FINISH", metadata=result.summary())
    return result


def run_tcp_worker(
    pv: PartitionView,
    pattern: QueryPattern,
    cfg: WorkerConfig,
    hosts: Dict[int, Address],
    timeout_s: float = 30.0,
    done_timeout_s: float = 300.0,
    connect_retry_s: float = 10.0,
    plan: Optional[ExecutionPlan] = None,
) -> WorkerResult:
    """
    Run machine pv.machine_id of a multi-process TCP cluster.

    The daemon keeps serving until every peer has broadcast DONE, so late
    steal and fetch requests are still answered after this worker finishes.
    A worker that fails still broadcasts DONE before re-raising, so its
    peers are not left waiting.
    """
    if pv.machine_id not in hosts:
        raise ConfigError(f"hosts file has no address for machine {pv.machine_id}")
    host, port = hosts[pv.machine_id]
    table = GroupTable()
    handler = DaemonHandler(pv, table)
    daemon = TcpDaemon(handler, host, port).start()
    transport = get_transport("tcp", pv.machine_id, hosts=hosts, timeout_s=timeout_s,
                              connect_retry_s=connect_retry_s)
    try:
        try:
            result = RMeefWorker(pv, pattern, cfg, transport, table, plan).run()
        except Exception as e:
            AuditLogger.log_error(type(e).__name__, str(e), metadata={"machine_id": pv.machine_id})
            broadcast_done(transport)
            raise
        broadcast_done(transport)
        peers = len(transport.peers())
        if not handler.wait_for_done(peers, done_timeout_s):
            raise TransportFailure(
                f"machine {pv.machine_id}: not every peer reported DONE within {done_timeout_s}s"
            )
    finally:
        transport.close()
        daemon.stop()
    return result
