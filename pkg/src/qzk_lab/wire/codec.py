"""
wire/codec.py - Length-prefixed JSON frames for protocol messages.

A frame is a 4-byte big-endian length followed by a UTF-8 JSON object
{session_id, round, dir, type, payload_hex}. Payloads are ARR1 containers.
Round 0 carries the session header, round 10 the verdict.
"""

from __future__ import annotations

import asyncio
import struct
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from qzk_lab.core.bits import pack_arrays, unpack_arrays
from qzk_lab.core.errors import FormatError, FrameError
from qzk_lab.core.graphs import Graph
from qzk_lab.core.protocol import (
    LAST_ROUND,
    ROUND_KINDS,
    Outcome,
    ProtocolMsg,
    SessionHeader,
    Verdict,
    direction_of,
)

HEADER_SIZE = 4
MAX_FRAME_SIZE = 64 * 1024 * 1024
HEADER_ROUND = 0
VERDICT_ROUND = LAST_ROUND + 1

_OUTCOMES = list(Outcome)
_PARTIES = [None, "prover", "verifier"]


class Frame(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    session_id: str = Field(min_length=1, max_length=128)
    round: int = Field(ge=HEADER_ROUND, le=VERDICT_ROUND)
    dir: Literal["P->V", "V->P"]
    type: str
    payload_hex: str = Field(pattern=r"^([0-9a-f]{2})*$")

    def payload(self) -> bytes:
        return bytes.fromhex(self.payload_hex)


def encode_frame(frame: Frame) -> bytes:
    body = frame.model_dump_json().encode("utf-8")
    if len(body) > MAX_FRAME_SIZE:
        raise FrameError(f"frame of {len(body)} bytes exceeds {MAX_FRAME_SIZE}")
    return struct.pack(">I", len(body)) + body


def parse_body(body: bytes) -> Frame:
    try:
        return Frame.model_validate_json(body)
    except ValidationError as e:
        raise FrameError(f"invalid frame: {e.error_count()} problem(s)") from e


def decode_frame(blob: bytes) -> Frame:
    if len(blob) < HEADER_SIZE:
        raise FrameError("truncated frame header")
    (length,) = struct.unpack(">I", blob[:HEADER_SIZE])
    if length > MAX_FRAME_SIZE:
        raise FrameError(f"frame length {length} is too large")
    if len(blob) != HEADER_SIZE + length:
        raise FrameError(f"frame declares {length} bytes, carries {len(blob) - HEADER_SIZE}")
    return parse_body(blob[HEADER_SIZE:])


# ---------- protocol objects ----------


def encode_msg(msg: ProtocolMsg) -> bytes:
    return encode_frame(
        Frame(
            session_id=msg.session_id,
            round=msg.round,
            dir=msg.direction.value,
            type=msg.kind,
            payload_hex=msg.payload_bytes().hex(),
        )
    )


def _msg_from_frame(frame: Frame) -> ProtocolMsg:
    if frame.round not in ROUND_KINDS:
        raise FrameError(f"round {frame.round} does not carry a protocol message")
    if frame.type != ROUND_KINDS[frame.round] or frame.dir != direction_of(frame.round).value:
        raise FrameError(f"round {frame.round} cannot carry a '{frame.type}' frame ({frame.dir})")
    return ProtocolMsg.from_payload_bytes(frame.session_id, frame.round, frame.payload())


def decode_msg(blob: bytes) -> ProtocolMsg:
    return _msg_from_frame(decode_frame(blob))


def encode_header(h: SessionHeader) -> bytes:
    payload = pack_arrays(
        {
            "x": np.frombuffer(h.x.to_bytes(), dtype=np.uint8),
            "lam": h.lam,
            "t": h.t,
            "rmsg_v": h.rmsg_v,
        }
    )
    return encode_frame(
        Frame(session_id=h.session_id, round=HEADER_ROUND, dir="V->P", type="header", payload_hex=payload.hex())
    )


def _header_from_frame(frame: Frame) -> SessionHeader:
    a = unpack_arrays(frame.payload())
    try:
        return SessionHeader(
            frame.session_id,
            Graph.from_bytes(bytes(a["x"].astype(np.uint8))),
            int(a["lam"]),
            int(a["t"]),
            int(a["rmsg_v"]),
        )
    except (KeyError, TypeError, ValueError, OverflowError) as e:
        raise FormatError(f"malformed header frame: {e}") from e


def encode_verdict(session_id: str, v: Verdict) -> bytes:
    payload = pack_arrays(
        {
            "outcome": _OUTCOMES.index(v.outcome),
            "step": -1 if v.step is None else v.step,
            "party": _PARTIES.index(v.party),
            "reason": np.frombuffer(v.reason.encode("utf-8"), dtype=np.uint8),
        }
    )
    return encode_frame(
        Frame(session_id=session_id, round=VERDICT_ROUND, dir="V->P", type="verdict", payload_hex=payload.hex())
    )


def _verdict_from_frame(frame: Frame) -> Verdict:
    a = unpack_arrays(frame.payload())
    try:
        outcome = _OUTCOMES[int(a["outcome"])]
        step = int(a["step"])
        party = _PARTIES[int(a["party"])]
        reason = bytes(a["reason"].astype(np.uint8)).decode("utf-8")
    except (KeyError, IndexError, TypeError, ValueError, OverflowError) as e:
        raise FormatError(f"malformed verdict frame: {e}") from e
    return Verdict(outcome, None if step < 0 else step, party, reason)


def decode_any(blob: bytes) -> ProtocolMsg | Verdict | SessionHeader:
    """Decode a header, message or verdict frame."""
    frame = decode_frame(blob)
    if frame.type == "header" and frame.round == HEADER_ROUND:
        return _header_from_frame(frame)
    if frame.type == "verdict" and frame.round == VERDICT_ROUND:
        return _verdict_from_frame(frame)
    return _msg_from_frame(frame)


def encode_reply(session_id: str, reply: ProtocolMsg | Verdict) -> bytes:
    return encode_verdict(session_id, reply) if isinstance(reply, Verdict) else encode_msg(reply)


def frame_to_json(blob: bytes) -> str:
    """The JSON body of an encoded frame, for JSON-lines transcript files."""
    return decode_frame(blob).model_dump_json()


def json_to_frame(line: str) -> bytes:
    return encode_frame(parse_body(line.encode("utf-8")))


# ---------- async stream helpers ----------


async def read_frame(reader: asyncio.StreamReader) -> bytes:
    header = await reader.readexactly(HEADER_SIZE)
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_SIZE:
        raise FrameError(f"frame length {length} is too large")
    return header + await reader.readexactly(length)


async def write_frame(writer: asyncio.StreamWriter, data: bytes) -> None:
    writer.write(data)
    await writer.drain()

