"""
wire/transport.py - In-process and TCP links between a prover and a verifier.

The verifier side of a TCP session is an asyncio server; the prover side is a
blocking length-prefixed socket client. Each accepted connection is one session.
"""

from __future__ import annotations

import asyncio
from collections.abc import Callable
import logging
import socket
import struct
import threading

import numpy as np

from qzk_lab.core.errors import FrameError, QzkError
from qzk_lab.core.protocol import ProtocolMsg, SessionHeader, Verdict, VerifierParty
from qzk_lab.wire.codec import (
    HEADER_SIZE,
    MAX_FRAME_SIZE,
    decode_any,
    decode_msg,
    encode_header,
    encode_msg,
    encode_reply,
    read_frame,
    write_frame,
)

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 60.0


def parse_addr(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise FrameError(f"address must look like HOST:PORT, got '{addr}'")
    return host or "127.0.0.1", int(port)


# ---------- in process ----------


class InProcLink:
    def __init__(self, verifier: VerifierParty, rng: np.random.Generator, encode: bool) -> None:
        self.verifier = verifier
        self.rng = rng
        self.encode = encode

    def header(self) -> SessionHeader:
        h = self.verifier.header
        if not self.encode:
            return h
        decoded = decode_any(encode_header(h))
        assert isinstance(decoded, SessionHeader)
        return decoded

    def send(self, msg: ProtocolMsg) -> ProtocolMsg | Verdict:
        if self.encode:
            msg = decode_msg(encode_msg(msg))
        reply = self.verifier.respond(msg, self.rng)
        if not self.encode:
            return reply
        decoded = decode_any(encode_reply(msg.session_id, reply))
        if isinstance(decoded, SessionHeader):
            raise FrameError("unexpected header frame mid-session")
        return decoded

    def close(self) -> None:
        pass


class InProcTransport:
    """Direct calls; encode=True pushes every message through the frame codec."""

    def __init__(self, encode: bool = True) -> None:
        self.encode = encode

    def connect(self, verifier: VerifierParty | None, rng: np.random.Generator) -> InProcLink:
        if verifier is None:
            raise FrameError("in-process transport needs a local verifier")
        return InProcLink(verifier, rng, self.encode)


# ---------- TCP ----------


def _recv_exact(sock: socket.socket, length: int) -> bytes:
    chunks = []
    got = 0
    while got < length:
        chunk = sock.recv(min(length - got, 1 << 20))
        if not chunk:
            raise EOFError("peer closed the connection")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> bytes:
    header = _recv_exact(sock, HEADER_SIZE)
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_SIZE:
        raise FrameError(f"frame length {length} is too large")
    return header + _recv_exact(sock, length)


class TcpLink:
    def __init__(self, host: str, port: int, timeout: float = DEFAULT_TIMEOUT) -> None:
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self._header: SessionHeader | None = None

    def header(self) -> SessionHeader:
        if self._header is None:
            decoded = decode_any(recv_frame(self.sock))
            if not isinstance(decoded, SessionHeader):
                raise FrameError("session must open with a header frame")
            self._header = decoded
        return self._header

    def send(self, msg: ProtocolMsg) -> ProtocolMsg | Verdict:
        self.sock.sendall(encode_msg(msg))
        decoded = decode_any(recv_frame(self.sock))
        if isinstance(decoded, SessionHeader):
            raise FrameError("unexpected header frame mid-session")
        return decoded

    def close(self) -> None:
        self.sock.close()


async def serve_session(
    reader: asyncio.StreamReader,
    writer: asyncio.StreamWriter,
    verifier: VerifierParty,
    rng: np.random.Generator,
) -> Verdict | None:
    """Run one verifier session on an accepted connection."""
    sid = verifier.header.session_id
    try:
        await write_frame(writer, encode_header(verifier.header))
        while True:
            msg = decode_msg(await read_frame(reader))
            reply = verifier.respond(msg, rng)
            await write_frame(writer, encode_reply(sid, reply))
            if isinstance(reply, Verdict):
                return reply
    except asyncio.IncompleteReadError:
        logger.debug("session %s: prover closed the connection", sid)
        return None
    except QzkError as e:
        logger.warning("session %s: dropped after %s", sid, e)
        return None
    finally:
        writer.close()
        await writer.wait_closed()


async def serve_verifier(
    host: str,
    port: int,
    factory: Callable[[int], tuple[VerifierParty, np.random.Generator]],
    sessions: int,
    ready: Callable[[int], None] | None = None,
) -> list[Verdict | None]:
    """Accept `sessions` connections, one verifier per connection."""
    verdicts: list[Verdict | None] = []
    done = asyncio.Event()
    counter = 0

    async def handle(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        nonlocal counter
        index = counter
        counter += 1
        verifier, rng = factory(index)
        verdicts.append(await serve_session(reader, writer, verifier, rng))
        if len(verdicts) >= sessions:
            done.set()

    server = await asyncio.start_server(handle, host, port)
    bound = server.sockets[0].getsockname()[1]
    logger.info("verifier listening on %s:%d for %d session(s)", host, bound, sessions)
    if ready is not None:
        ready(bound)
    async with server:
        await done.wait()
    return verdicts


class TcpTransport:
    """TCP link; with serve=True a local verifier is served from a background thread."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0, serve: bool = True) -> None:
        self.host = host
        self.port = port
        self.serve = serve

    def connect(self, verifier: VerifierParty | None, rng: np.random.Generator) -> TcpLink:
        if not self.serve:
            return TcpLink(self.host, self.port)
        if verifier is None:
            raise FrameError("serving transport needs a local verifier")
        party: VerifierParty = verifier
        bound = threading.Event()
        holder: list[int] = []

        def ready(port: int) -> None:
            holder.append(port)
            bound.set()

        def run() -> None:
            asyncio.run(serve_verifier(self.host, self.port, lambda _: (party, rng), 1, ready))

        threading.Thread(target=run, daemon=True).start()
        if not bound.wait(DEFAULT_TIMEOUT):
            raise FrameError("verifier server did not start")
        return TcpLink(self.host, holder[0])
