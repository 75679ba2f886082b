import io
import struct

import pytest

from transport.messages import (
    MAX_FRAME_BYTES,
    Message,
    MessageKind,
    decode_message,
    encode_message,
    read_frame,
)
from utils.errors import ProtocolError

GOLDEN = [
    (
        Message(MessageKind.VERIFY_E_REQ, 1, 2, [(3, 4)]),
        "21000000" "01" "0100000000000000" "02000000"
        "01000000" "0300000000000000" "0400000000000000",
    ),
    (
        Message(MessageKind.VERIFY_E_RESP, 1, 0, [True, False]),
        "13000000" "02" "0100000000000000" "00000000"
        "02000000" "0100",
    ),
    (
        Message(MessageKind.FETCH_V_RESP, 3, 1, [(5, (1, 2))]),
        "2d000000" "04" "0300000000000000" "01000000"
        "01000000" "0500000000000000" "02000000" "0100000000000000" "0200000000000000",
    ),
    (
        Message(MessageKind.CHECK_R_REQ, 7, 0),
        "0d000000" "05" "0700000000000000" "00000000",
    ),
    (
        Message(MessageKind.CHECK_R_RESP, 7, 1, 4),
        "11000000" "06" "0700000000000000" "01000000" "04000000",
    ),
]


@pytest.mark.parametrize("message, frame_hex", GOLDEN)
def test_golden_frames(message, frame_hex):
    frame = encode_message(message)
    assert frame.hex() == frame_hex
    assert decode_message(bytes.fromhex(frame_hex)) == message


def test_empty_share_response_means_none_available():
    frame = encode_message(Message(MessageKind.SHARE_R_RESP, 9, 1, []))
    assert decode_message(frame).payload == []


def _frame(kind: int, payload: bytes, correlation_id: int = 1, sender: int = 0) -> bytes:
    body = struct.pack("<BQI", kind, correlation_id, sender) + payload
    return struct.pack("<I", len(body)) + body


@pytest.mark.parametrize("frame", [
    pytest.param(_frame(99, b""), id="unknown-kind"),
    pytest.param(_frame(1, struct.pack("<I", 2) + struct.pack("<QQ", 1, 2)), id="truncated-payload"),
    pytest.param(_frame(5, b"\x00"), id="trailing-bytes"),
    pytest.param(_frame(2, struct.pack("<I", 1) + b"\x02"), id="bad-verdict-byte"),
    pytest.param(struct.pack("<I", 3) + b"\x01\x00\x00", id="short-header"),
    pytest.param(b"\x01\x00", id="short-length"),
    pytest.param(_frame(5, b"")[:-1], id="length-mismatch"),
])
def test_malformed_frames_raise(frame):
    with pytest.raises(ProtocolError):
        decode_message(frame)


def test_read_frame_from_stream():
    first = encode_message(Message(MessageKind.CHECK_R_REQ, 1, 0))
    second = encode_message(Message(MessageKind.FETCH_V_REQ, 2, 0, [8, 9]))
    stream = io.BytesIO(first + second)
    assert read_frame(stream.read) == first
    assert decode_message(read_frame(stream.read)).payload == [8, 9]


def test_read_frame_rejects_oversized_length():
    stream = io.BytesIO(struct.pack("<I", MAX_FRAME_BYTES + 1))
    with pytest.raises(ProtocolError):
        read_frame(stream.read)
