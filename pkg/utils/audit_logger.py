"""
Run Audit Logger

Structured, single-line JSON events for everything a distributed run does
that someone may want to reconstruct afterwards:
- Worker lifecycle (start, SM-E done, group claimed, steal, finish)
- Every protocol request sent by an enumeration thread
- Soft-property violations (memory estimates exceeded)
- Errors surfaced by daemons and drivers

Events go through the standard logging tree so the CLI log level applies.
"""

import logging
import json
from datetime import datetime, timezone
from typing import Optional, Dict, Any
from enum import Enum

logger = logging.getLogger(__name__)


class EventType(Enum):
    """Types of recorded events"""
    RUN_EVENT = "RUN_EVENT"
    MESSAGE = "MESSAGE"
    SOFT_VIOLATION = "SOFT_VIOLATION"
    ERROR = "ERROR"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class AuditLogger:
    """
    Centralized event logging for workers, daemons and the CLI.

    All methods are static; callers never hold an instance.
    """

    @staticmethod
    def log_run_event(
        event_name: str,
        machine_id: Optional[int] = None,
        severity: str = "INFO",
        metadata: Optional[Dict[str, Any]] = None
    ):
        """
        Log a worker lifecycle event.

        Args:
            event_name: Short upper-case name (e.g. 'WORKER_START', 'GROUP_CLAIMED')
            machine_id: Worker the event belongs to, if any
            severity: INFO, WARNING, ERROR or CRITICAL
            metadata: Additional context (counts, group sizes, round index)
        """
        log_entry = {
            "event_type": EventType.RUN_EVENT.value,
            "timestamp": _now(),
            "event_name": event_name,
            "machine_id": machine_id,
            "severity": severity,
            "metadata": metadata or {}
        }

        severity_lower = severity.lower()
        if severity_lower == "error":
            logger.error(f"RUN_EVENT: {json.dumps(log_entry)}")
        elif severity_lower == "warning":
            logger.warning(f"RUN_EVENT: {json.dumps(log_entry)}")
        elif severity_lower == "critical":
            logger.critical(f"RUN_EVENT: {json.dumps(log_entry)}")
        else:
            logger.info(f"RUN_EVENT: {json.dumps(log_entry)}")

    @staticmethod
    def log_message(
        kind: str,
        sender: int,
        target: int,
        entries: int,
        frame_bytes: int,
        response_time_ms: Optional[float] = None,
        error: Optional[str] = None
    ):
        """
        Log one protocol request issued by an enumeration thread.

        Args:
            kind: Request kind name (e.g. 'VERIFY_E_REQ')
            sender: Requesting machine
            target: Machine the request was routed to
            entries: Number of edges / vertices carried
            frame_bytes: Encoded request size, header included
            response_time_ms: Round-trip time
            error: Transport error text if the request failed
        """
        log_entry = {
            "event_type": EventType.MESSAGE.value,
            "timestamp": _now(),
            "kind": kind,
            "sender": sender,
            "target": target,
            "entries": entries,
            "frame_bytes": frame_bytes,
            "response_time_ms": response_time_ms,
            "success": error is None,
            "error": error
        }

        if error:
            logger.error(f"MESSAGE: {json.dumps(log_entry)}")
        else:
            logger.debug(f"MESSAGE: {json.dumps(log_entry)}")

    @staticmethod
    def log_soft_violation(
        property_name: str,
        machine_id: int,
        observed: float,
        limit: float,
        metadata: Optional[Dict[str, Any]] = None
    ):
        """Record a heuristic bound that was exceeded. Never fatal."""
        log_entry = {
            "event_type": EventType.SOFT_VIOLATION.value,
            "timestamp": _now(),
            "property": property_name,
            "machine_id": machine_id,
            "observed": observed,
            "limit": limit,
            "metadata": metadata or {}
        }

        logger.warning(f"SOFT_VIOLATION: {json.dumps(log_entry)}")

    @staticmethod
    def log_error(
        error_type: str,
        error_message: str,
        stack_trace: Optional[str] = None,
        metadata: Optional[Dict[str, Any]] = None
    ):
        """
        Log error event.

        Args:
            error_type: Exception class name (e.g. 'ProtocolError')
            error_message: Error message
            stack_trace: Full stack trace
            metadata: Additional context (peer address, machine id)
        """
        log_entry = {
            "event_type": EventType.ERROR.value,
            "timestamp": _now(),
            "error_type": error_type,
            "error_message": error_message,
            "stack_trace": stack_trace,
            "metadata": metadata or {}
        }

        logger.error(f"ERROR: {json.dumps(log_entry)}")


# Example usage:
"""
from utils.audit_logger import AuditLogger

AuditLogger.log_run_event(
    event_name="GROUP_CLAIMED",
    machine_id=1,
    metadata={"members": 12, "estimated_bytes": 2880}
)

AuditLogger.log_message(
    kind="FETCH_V_REQ",
    sender=0,
    target=1,
    entries=2,
    frame_bytes=37
)
"""
