import asyncio
import struct
import threading
from unittest.mock import AsyncMock, MagicMock

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from qzk_lab.core.bits import ARRAY_MAGIC
from qzk_lab.core.errors import FormatError, FrameError
from qzk_lab.core.graphs import planted_hamiltonian
from qzk_lab.core.protocol import (
    ROUND_KINDS,
    HonestProver,
    HonestVerifier,
    Outcome,
    ProtocolMsg,
    SessionHeader,
    Verdict,
    VerifierState,
    direction_of,
    run_session,
)
from qzk_lab.core.utils import trial_rng
from qzk_lab.wire.codec import (
    Frame,
    decode_any,
    decode_frame,
    decode_msg,
    encode_frame,
    encode_header,
    encode_msg,
    encode_reply,
    encode_verdict,
    frame_to_json,
    json_to_frame,
    read_frame,
    write_frame,
)
from qzk_lab.wire.transport import InProcTransport, TcpTransport, parse_addr, serve_verifier

LAM = 4
T = 4


def _raw(body: bytes) -> bytes:
    return struct.pack(">I", len(body)) + body


def test_message_frame():
    msg = ProtocolMsg("s1", 3, {"b": np.array([1, 0, 1, 1], dtype=np.uint8)})
    blob = encode_msg(msg)
    frame = decode_frame(blob)
    assert (frame.round, frame.dir, frame.type) == (3, "P->V", "challenge")
    assert decode_msg(blob) == msg
    assert decode_any(blob) == msg


def test_header_frame(rng):
    x, _ = planted_hamiltonian(5, 2, rng)
    header = SessionHeader("s2", x, LAM, T, 5)
    decoded = decode_any(encode_header(header))
    assert decoded == header


@pytest.mark.parametrize(
    "verdict",
    [Verdict.accept(), Verdict.reject(4, "prover", "bad opening"), Verdict(Outcome.ABORT, None, None, "ü")],
)
def test_verdict_frame(verdict):
    decoded = decode_any(encode_verdict("s3", verdict))
    assert decoded == verdict
    assert decode_any(encode_reply("s3", verdict)) == verdict


@pytest.mark.parametrize(
    "blob",
    [
        b"\x00\x00",
        struct.pack(">I", 10) + b"{}",
        struct.pack(">I", 2**31),
        _raw(b"not json"),
        _raw(b'{"session_id": "s", "round": 3, "dir": "P->V", "type": "challenge", "payload_hex": "ZZ"}'),
        _raw(b'{"session_id": "s", "round": 11, "dir": "P->V", "type": "challenge", "payload_hex": ""}'),
        _raw(b'{"session_id": "", "round": 3, "dir": "P->V", "type": "challenge", "payload_hex": ""}'),
    ],
)
def test_malformed_frames(blob):
    with pytest.raises(FrameError):
        decode_any(blob)


def test_frame_must_match_round():
    wrong_type = Frame(session_id="s", round=3, dir="P->V", type="header", payload_hex="")
    wrong_dir = Frame(session_id="s", round=3, dir="V->P", type="challenge", payload_hex="")
    for frame in (wrong_type, wrong_dir):
        with pytest.raises(FrameError):
            decode_msg(encode_frame(frame))


def test_malformed_verdict_payload():
    frame = Frame(session_id="s", round=10, dir="V->P", type="verdict", payload_hex="")
    with pytest.raises(FormatError):
        decode_any(encode_frame(frame))


FRAME_SLOTS = [(0, "V->P", "header"), (10, "V->P", "verdict")] + [
    (r, direction_of(r).value, kind) for r, kind in ROUND_KINDS.items()
]
ARRAY_NAMES = ["x", "lam", "t", "rmsg_v", "outcome", "step", "party", "reason", "b", "a"]


def _decode_or_format_error(blob: bytes) -> None:
    try:
        decode_any(blob)
    except FormatError:
        pass


def _slot_frame(slot: tuple[int, str, str], payload: bytes) -> bytes:
    r, d, kind = slot
    return encode_frame(Frame(session_id="fz", round=r, dir=d, type=kind, payload_hex=payload.hex()))


@st.composite
def arr1_payloads(draw: st.DrawFn) -> bytes:
    count = draw(st.integers(0, 4))
    parts = [ARRAY_MAGIC, struct.pack("<I", count)]
    for _ in range(count):
        name = draw(st.sampled_from(ARRAY_NAMES)).encode()
        ndim = draw(st.integers(0, 9))
        dims = draw(st.lists(st.integers(0, 2**32 - 1) | st.integers(0, 4), min_size=ndim, max_size=ndim))
        parts.append(struct.pack("<H", len(name)) + name)
        parts.append(struct.pack("<BB", draw(st.integers(0, 7)), ndim))
        parts.append(struct.pack(f"<{ndim}I", *dims))
        parts.append(draw(st.binary(max_size=48)))
    return b"".join(parts)


def test_huge_dims_without_data_raise_format_error():
    payload = ARRAY_MAGIC + struct.pack("<IH", 1, 1) + b"a" + struct.pack("<BB4I", 0, 4, *[65536] * 4)
    with pytest.raises(FormatError):
        decode_msg(_slot_frame((1, "P->V", ROUND_KINDS[1]), payload))


def test_random_bytes_never_crash_the_decoder():
    rng = np.random.default_rng(99)
    for _ in range(10_000):
        body = rng.integers(0, 256, size=int(rng.integers(0, 64)), dtype=np.uint8).tobytes()
        _decode_or_format_error(body)
        _decode_or_format_error(_raw(body))


@settings(max_examples=500, deadline=None)
@given(st.binary(max_size=256))
def test_arbitrary_bytes_decode_or_format_error(blob):
    _decode_or_format_error(blob)
    _decode_or_format_error(_raw(blob))


@settings(max_examples=500, deadline=None)
@given(st.sampled_from(FRAME_SLOTS), st.binary(max_size=128))
def test_arbitrary_payloads_decode_or_format_error(slot, payload):
    _decode_or_format_error(_slot_frame(slot, payload))
    _decode_or_format_error(_slot_frame(slot, ARRAY_MAGIC + payload))


@settings(max_examples=1000, deadline=None)
@given(st.sampled_from(FRAME_SLOTS), arr1_payloads())
def test_structured_arrays_decode_or_format_error(slot, payload):
    _decode_or_format_error(_slot_frame(slot, payload))



def test_json_lines_form():
    blob = encode_msg(ProtocolMsg("s4", 8, {"e": np.ones(3, dtype=np.uint8)}))
    line = frame_to_json(blob)
    assert "\n" not in line
    assert json_to_frame(line) == blob


def test_async_frame_helpers():
    first = encode_msg(ProtocolMsg("s5", 1, {}))
    second = encode_verdict("s5", Verdict.accept())

    async def scenario() -> list[bytes]:
        reader = asyncio.StreamReader()
        reader.feed_data(first + second)
        reader.feed_eof()
        out = [await read_frame(reader), await read_frame(reader)]
        with pytest.raises(asyncio.IncompleteReadError):
            await read_frame(reader)
        return out

    assert asyncio.run(scenario()) == [first, second]

    writer = MagicMock()
    writer.drain = AsyncMock()
    asyncio.run(write_frame(writer, first))
    writer.write.assert_called_once_with(first)
    writer.drain.assert_awaited_once()


def test_async_reader_refuses_huge_frames():
    async def scenario() -> None:
        reader = asyncio.StreamReader()
        reader.feed_data(struct.pack(">I", 2**31))
        reader.feed_eof()
        await read_frame(reader)

    with pytest.raises(FrameError):
        asyncio.run(scenario())


def test_parse_addr():
    assert parse_addr("example.org:7000") == ("example.org", 7000)
    assert parse_addr(":7001") == ("127.0.0.1", 7001)
    for bad in ("nohost", "host:port"):
        with pytest.raises(FrameError):
            parse_addr(bad)


def test_transports_need_a_verifier(rng):
    with pytest.raises(FrameError):
        InProcTransport().connect(None, rng)
    with pytest.raises(FrameError):
        TcpTransport().connect(None, rng)


def _verifier(x, i):  # type: ignore[no-untyped-def]
    rng = trial_rng(11, i)
    return HonestVerifier(VerifierState.fresh(f"tcp-{i}", x, LAM, rng, T)), rng


def test_tcp_loopback_session(rng):
    x, cycle = planted_hamiltonian(5, 2, rng)
    verifier, vrng = _verifier(x, 0)
    transcript = run_session(HonestProver(cycle), verifier, TcpTransport(), vrng)
    assert transcript.verdict is not None and transcript.verdict.accepted
    assert len(transcript.messages) == 9


def test_served_verifier_handles_several_sessions(rng):
    x, cycle = planted_hamiltonian(5, 2, rng)
    port: list[int] = []
    bound = threading.Event()
    verdicts: list[Verdict | None] = []

    def ready(p: int) -> None:
        port.append(p)
        bound.set()

    def serve() -> None:
        verdicts.extend(asyncio.run(serve_verifier("127.0.0.1", 0, lambda i: _verifier(x, i), 2, ready)))

    server = threading.Thread(target=serve, daemon=True)
    server.start()
    assert bound.wait(10)

    for i in range(2):
        transport = TcpTransport(port=port[0], serve=False)
        transcript = run_session(HonestProver(cycle), None, transport, trial_rng(12, i))
        assert transcript.verdict is not None and transcript.verdict.accepted

    server.join(10)
    assert len(verdicts) == 2
    assert all(v is not None and v.accepted for v in verdicts)
