"""
In-process transport: every worker is a pair of threads in one process.

Each daemon runs in its own thread with an inbox queue. Requests cross the
thread boundary as encoded frames and come back as encoded frames, so the
wire codec is exercised exactly as over TCP.
"""

import logging
import queue
import threading
import traceback
from typing import Dict, List, Optional

from transport.base import Transport
from transport.daemon import DaemonHandler
from utils.audit_logger import AuditLogger
from utils.errors import RadsError, TransportFailure

logger = logging.getLogger(__name__)


class LoopbackDaemon(threading.Thread):
    def __init__(self, handler: DaemonHandler):
        super().__init__(name=f"daemon-{handler.machine_id}", daemon=True)
        self.handler = handler
        self.inbox: "queue.Queue" = queue.Queue()

    def run(self):
        while True:
            item = self.inbox.get()
            if item is None:
                return
            frame, reply = item
            try:
                reply.put(self.handler.handle_frame(frame))
            except RadsError as e:
                AuditLogger.log_error(
                    error_type=type(e).__name__,
                    error_message=str(e),
                    stack_trace=traceback.format_exc(),
                    metadata={"machine_id": self.handler.machine_id},
                )
                reply.put(e)

    def stop(self):
        self.inbox.put(None)
        if self.is_alive():
            self.join()


class LoopbackHub:
    """Registry of the daemons of one in-process cluster."""

    def __init__(self):
        self._daemons: Dict[int, LoopbackDaemon] = {}
        self._lock = threading.Lock()

    def register(self, handler: DaemonHandler) -> LoopbackDaemon:
        daemon = LoopbackDaemon(handler)
        with self._lock:
            self._daemons[handler.machine_id] = daemon
        daemon.start()
        return daemon

    def get(self, machine_id: int) -> Optional[LoopbackDaemon]:
        with self._lock:
            return self._daemons.get(machine_id)

    def machine_ids(self) -> List[int]:
        with self._lock:
            return sorted(self._daemons)

    def stop_all(self):
        with self._lock:
            daemons = list(self._daemons.values())
            self._daemons.clear()
        for daemon in daemons:
            daemon.stop()


class LoopbackTransport(Transport):
    def __init__(self, machine_id: int, hub: LoopbackHub, timeout_s: float = 30.0):
        super().__init__(machine_id, timeout_s)
        self.hub = hub

    def peers(self) -> List[int]:
        return [m for m in self.hub.machine_ids() if m != self.machine_id]

    def _exchange(self, target: int, frame: bytes) -> bytes:
        daemon = self.hub.get(target)
        if daemon is None or not daemon.is_alive():
            raise TransportFailure(f"no daemon running for machine {target}")
        reply: "queue.Queue" = queue.Queue(maxsize=1)
        daemon.inbox.put((frame, reply))
        try:
            result = reply.get(timeout=self.timeout_s)
        except queue.Empty:
            raise TransportFailure(f"machine {target} did not answer within {self.timeout_s}s") from None
        if isinstance(result, Exception):
            raise TransportFailure(f"machine {target} rejected request: {result}") from result
        return result
