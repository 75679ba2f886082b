"""
Base Transport

Abstract interface shared by the loopback and TCP transports. Worker code
talks only to Transport.request(); swapping transports never touches the
enumeration logic.

Every request is:
- encoded to a frame (so loopback exercises the same codec as TCP)
- timed and counted per message kind
- logged through AuditLogger
- checked for a matching correlation id and response kind
"""

import itertools
import time
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from transport.messages import RESPONSE_KIND, Message, MessageKind, decode_message, encode_message
from utils.errors import ProtocolError, RadsError, TransportFailure


@dataclass
class MessageCounters:
    requests: Counter = field(default_factory=Counter)
    entries: Counter = field(default_factory=Counter)
    bytes_sent: int = 0
    bytes_received: int = 0
    # vertex -> times it appeared in a FETCH_V_REQ
    fetched: Counter = field(default_factory=Counter)
    # round tag -> edge -> times it appeared in a VERIFY_E_REQ
    verified: Dict[Any, Counter] = field(default_factory=dict)

    def record(self, message: Message, sent: int, received: int):
        self.requests[message.kind.name] += 1
        self.entries[message.kind.name] += message.entry_count()
        self.bytes_sent += sent
        self.bytes_received += received

    def max_fetches_per_vertex(self) -> int:
        return max(self.fetched.values(), default=0)

    def max_verifications_per_round(self) -> int:
        return max((max(c.values(), default=0) for c in self.verified.values()), default=0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "requests": dict(self.requests),
            "entries": dict(self.entries),
            "bytes_sent": self.bytes_sent,
            "bytes_received": self.bytes_received,
            "distinct_vertices_fetched": len(self.fetched),
        }


class Transport(ABC):
    """
    Abstract base class for worker-to-worker request/response transports.

    Implementations provide _exchange(), which delivers one encoded request
    frame to a peer's daemon and returns the encoded response frame.
    """

    def __init__(self, machine_id: int, timeout_s: float = 30.0):
        """
        Args:
            machine_id: Index of the worker that owns this transport
            timeout_s: Per-request timeout
        """
        self.machine_id = machine_id
        self.timeout_s = timeout_s
        self.counters = MessageCounters()
        self._correlation = itertools.count(1)

    @abstractmethod
    def peers(self) -> List[int]:
        """Machine ids of every other worker."""
        pass

    @abstractmethod
    def _exchange(self, target: int, frame: bytes) -> bytes:
        """
        Deliver a request frame to target's daemon and wait for the response.

        Raises:
            TransportFailure: peer unreachable, timed out or dropped the request
        """
        pass

    def close(self):
        pass

    def request(self, target: int, kind: MessageKind, payload: Any = None) -> Message:
        message = Message(kind, next(self._correlation), self.machine_id, payload)
        frame = encode_message(message)
        try:
            started = time.perf_counter()
            response_frame = self._exchange(target, frame)
            response_time_ms = (time.perf_counter() - started) * 1000
            response = decode_message(response_frame)
        except RadsError as e:
            self._log_call(message, target, len(frame), error=str(e))
            if isinstance(e, TransportFailure):
                raise
            raise TransportFailure(f"{kind.name} to machine {target} failed: {e}") from e

        if response.correlation_id != message.correlation_id:
            raise ProtocolError(
                f"response correlation id {response.correlation_id} != request {message.correlation_id}"
            )
        if response.kind != RESPONSE_KIND[kind]:
            raise ProtocolError(f"expected {RESPONSE_KIND[kind].name}, got {response.kind.name}")

        self.counters.record(message, len(frame), len(response_frame))
        self._log_call(message, target, len(frame), response_time_ms=response_time_ms)
        return response

    def _log_call(self, message: Message, target: int, frame_bytes: int,
                  response_time_ms: Optional[float] = None, error: Optional[str] = None):
        from utils.audit_logger import AuditLogger

        AuditLogger.log_message(
            kind=message.kind.name,
            sender=self.machine_id,
            target=target,
            entries=message.entry_count(),
            frame_bytes=frame_bytes,
            response_time_ms=response_time_ms,
            error=error,
        )
