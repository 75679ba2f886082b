"""
Wire format

Frame (little-endian):

    [u32 length][u8 kind][u64 correlation_id][u32 sender][payload]

length counts every byte after the length field itself.

Payloads:
    VERIFY_E_REQ   u32 n, n x (u64, u64)
    VERIFY_E_RESP  u32 n, n x u8 (0/1)
    FETCH_V_REQ    u32 n, n x u64
    FETCH_V_RESP   u32 n, n x (u64 id, u32 deg, deg x u64)
    CHECK_R_REQ    empty
    CHECK_R_RESP   u32 count
    SHARE_R_REQ    empty
    SHARE_R_RESP   u32 m (0 = none), m x u64
    DONE_REQ       empty   (TCP termination barrier)
    DONE_RESP      empty
"""

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, List, Tuple

from utils.errors import ProtocolError

LENGTH = struct.Struct("<I")
HEADER = struct.Struct("<BQI")
U32 = struct.Struct("<I")
U64 = struct.Struct("<Q")
PAIR = struct.Struct("<QQ")
VERTEX_HEAD = struct.Struct("<QI")

MAX_FRAME_BYTES = 1 << 30


class MessageKind(IntEnum):
    VERIFY_E_REQ = 1
    VERIFY_E_RESP = 2
    FETCH_V_REQ = 3
    FETCH_V_RESP = 4
    CHECK_R_REQ = 5
    CHECK_R_RESP = 6
    SHARE_R_REQ = 7
    SHARE_R_RESP = 8
    DONE_REQ = 9
    DONE_RESP = 10


RESPONSE_KIND = {
    MessageKind.VERIFY_E_REQ: MessageKind.VERIFY_E_RESP,
    MessageKind.FETCH_V_REQ: MessageKind.FETCH_V_RESP,
    MessageKind.CHECK_R_REQ: MessageKind.CHECK_R_RESP,
    MessageKind.SHARE_R_REQ: MessageKind.SHARE_R_RESP,
    MessageKind.DONE_REQ: MessageKind.DONE_RESP,
}


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    correlation_id: int
    sender: int
    payload: Any = None

    def entry_count(self) -> int:
        if isinstance(self.payload, (list, tuple)):
            return len(self.payload)
        return 0


# ===== PAYLOAD CODECS =====

def _encode_payload(kind: MessageKind, payload: Any) -> bytes:
    if kind == MessageKind.VERIFY_E_REQ:
        return U32.pack(len(payload)) + b"".join(PAIR.pack(a, b) for a, b in payload)
    if kind == MessageKind.VERIFY_E_RESP:
        return U32.pack(len(payload)) + bytes(1 if ok else 0 for ok in payload)
    if kind in (MessageKind.FETCH_V_REQ, MessageKind.SHARE_R_RESP):
        return U32.pack(len(payload)) + b"".join(U64.pack(v) for v in payload)
    if kind == MessageKind.FETCH_V_RESP:
        parts = [U32.pack(len(payload))]
        for v, neighbors in payload:
            parts.append(VERTEX_HEAD.pack(v, len(neighbors)))
            parts.extend(U64.pack(n) for n in neighbors)
        return b"".join(parts)
    if kind == MessageKind.CHECK_R_RESP:
        return U32.pack(payload)
    return b""


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, fmt: struct.Struct) -> Tuple:
        if self.offset + fmt.size > len(self.data):
            raise ProtocolError(f"truncated payload at byte {self.offset}")
        values = fmt.unpack_from(self.data, self.offset)
        self.offset += fmt.size
        return values

    def take_bytes(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise ProtocolError(f"truncated payload at byte {self.offset}")
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def finish(self):
        if self.offset != len(self.data):
            raise ProtocolError(f"{len(self.data) - self.offset} trailing payload bytes")


def _decode_payload(kind: MessageKind, data: bytes) -> Any:
    reader = _Reader(data)
    if kind == MessageKind.VERIFY_E_REQ:
        (n,) = reader.take(U32)
        payload: Any = [reader.take(PAIR) for _ in range(n)]
    elif kind == MessageKind.VERIFY_E_RESP:
        (n,) = reader.take(U32)
        raw = reader.take_bytes(n)
        if any(b not in (0, 1) for b in raw):
            raise ProtocolError("verdict bytes must be 0 or 1")
        payload = [b == 1 for b in raw]
    elif kind in (MessageKind.FETCH_V_REQ, MessageKind.SHARE_R_RESP):
        (n,) = reader.take(U32)
        payload = [reader.take(U64)[0] for _ in range(n)]
    elif kind == MessageKind.FETCH_V_RESP:
        (n,) = reader.take(U32)
        payload = []
        for _ in range(n):
            v, degree = reader.take(VERTEX_HEAD)
            payload.append((v, tuple(reader.take(U64)[0] for _ in range(degree))))
    elif kind == MessageKind.CHECK_R_RESP:
        (payload,) = reader.take(U32)
    else:
        payload = None
    reader.finish()
    return payload


# ===== FRAMES =====

def encode_message(message: Message) -> bytes:
    body = HEADER.pack(int(message.kind), message.correlation_id, message.sender)
    body += _encode_payload(message.kind, message.payload)
    return LENGTH.pack(len(body)) + body


def decode_body(body: bytes) -> Message:
    """Decode everything after the length prefix."""
    if len(body) < HEADER.size:
        raise ProtocolError(f"frame body of {len(body)} bytes is shorter than the header")
    kind_value, correlation_id, sender = HEADER.unpack_from(body, 0)
    try:
        kind = MessageKind(kind_value)
    except ValueError:
        raise ProtocolError(f"unknown message kind {kind_value}") from None
    return Message(kind, correlation_id, sender, _decode_payload(kind, body[HEADER.size:]))


def decode_message(frame: bytes) -> Message:
    if len(frame) < LENGTH.size:
        raise ProtocolError("frame shorter than its length prefix")
    (length,) = LENGTH.unpack_from(frame, 0)
    if length != len(frame) - LENGTH.size:
        raise ProtocolError(f"length prefix says {length} bytes, frame carries {len(frame) - LENGTH.size}")
    return decode_body(frame[LENGTH.size:])


def read_frame(recv_exact) -> bytes:
    """Read one frame using recv_exact(n) -> bytes; returns the full frame."""
    prefix = recv_exact(LENGTH.size)
    (length,) = LENGTH.unpack(prefix)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {length} bytes exceeds limit")
    return prefix + recv_exact(length)
