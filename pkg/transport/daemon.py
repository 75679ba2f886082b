"""
Daemon request handling

Answers peers from owned partition data and the worker's region-group
table. Transport-agnostic: takes a request frame, returns a response frame.
The loopback and TCP servers wrap it in their own threads.
"""

import logging
import threading
from typing import Optional, Set

from enumeration.region_groups import GroupTable
from graph.partition_view import PartitionView
from transport.messages import RESPONSE_KIND, Message, MessageKind, decode_message, encode_message
from utils.audit_logger import AuditLogger
from utils.errors import ProtocolError

logger = logging.getLogger(__name__)


class DaemonHandler:
    def __init__(self, pv: PartitionView, groups: Optional[GroupTable] = None):
        self.pv = pv
        self.groups = groups if groups is not None else GroupTable()
        self.served = 0
        self._done_lock = threading.Lock()
        self._done_from: Set[int] = set()
        self._done_event = threading.Event()
        self.expected_done = 0

    @property
    def machine_id(self) -> int:
        return self.pv.machine_id

    def handle_frame(self, frame: bytes) -> bytes:
        request = decode_message(frame)
        response = self.handle(request)
        return encode_message(response)

    def handle(self, request: Message) -> Message:
        if request.kind not in RESPONSE_KIND:
            raise ProtocolError(f"{request.kind.name} is not a request kind")
        handler = {
            MessageKind.VERIFY_E_REQ: self._verify,
            MessageKind.FETCH_V_REQ: self._fetch,
            MessageKind.CHECK_R_REQ: self._check,
            MessageKind.SHARE_R_REQ: self._share,
            MessageKind.DONE_REQ: self._done,
        }[request.kind]
        payload = handler(request)
        self.served += 1
        return Message(RESPONSE_KIND[request.kind], request.correlation_id, self.machine_id, payload)

    def _verify(self, request: Message):
        verdicts = []
        for a, b in request.payload:
            if self.pv.is_owned(a):
                verdicts.append(self.pv.has_owned_edge(a, b))
            elif self.pv.is_owned(b):
                verdicts.append(self.pv.has_owned_edge(b, a))
            else:
                raise ProtocolError(
                    f"machine {self.machine_id} owns neither endpoint of ({a}, {b}) from machine {request.sender}"
                )
        return verdicts

    def _fetch(self, request: Message):
        # vertices this machine does not own are left out; the requester reports them
        return [(v, self.pv.local_adj[v]) for v in request.payload if self.pv.is_owned(v)]

    def _check(self, request: Message):
        return self.groups.unprocessed_count()

    def _share(self, request: Message):
        group = self.groups.claim(remote=True)
        if group is None:
            return []
        AuditLogger.log_run_event(
            "GROUP_SHARED",
            machine_id=self.machine_id,
            metadata={"to": request.sender, "group_id": group.group_id, "members": len(group.members)},
        )
        return list(group.members)

    def _done(self, request: Message):
        with self._done_lock:
            self._done_from.add(request.sender)
            if self.expected_done and len(self._done_from) >= self.expected_done:
                self._done_event.set()
        return None

    def wait_for_done(self, expected: int, timeout_s: Optional[float] = None) -> bool:
        """Block until `expected` distinct peers have sent DONE_REQ."""
        with self._done_lock:
            self.expected_done = expected
            if len(self._done_from) >= expected:
                self._done_event.set()
        return self._done_event.wait(timeout_s)
