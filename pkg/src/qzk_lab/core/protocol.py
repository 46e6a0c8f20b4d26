"""
Prover and verifier state machines for the trapdoor phase plus the WI phase.

Round map (P = prover, V = verifier):

    1 P->V  c* = commitments to r*, and the prover's receiver message
    2 V->P  commitments to alpha[i][b] under the prover's receiver message
    3 P->V  challenge bits b
    4 V->P  openings of alpha[i][b_i]
    5 P->V  c** (the honest prover commits zeros with seeds expanded from r*)
    6 V->P  openings of alpha[i][1 - b_i], WI receiver message
    7 P->V  WI commitments
    8 V->P  WI challenge
    9 P->V  WI responses

Rounds 1-6 are steps 1-6; rounds 7-9 form step 7. Each verdict records the
step and the party that ended the session.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
import logging
from typing import Protocol

import numpy as np
from numpy.typing import NDArray

from qzk_lab.core.bits import Bits, int_to_bits, pack_arrays, random_bits, unpack_arrays
from qzk_lab.core.compound import CompoundStatement, trap_seeds, trap_width
from qzk_lab.core.crypto import NaorBackend, ReceiverMsg, check_lambda, commit_bits, sample_seeds
from qzk_lab.core.errors import FormatError, FrameError, ProtocolError, SessionAborted
from qzk_lab.core.graphs import Graph
from qzk_lab.core.wi import (
    DEFAULT_REPETITIONS,
    CircuitStatement,
    Secret,
    WiMessage,
    field_of,
    wi_check,
    wi_commit,
    wi_respond,
)

logger = logging.getLogger(__name__)

LAST_ROUND = 9
WI_STEP = 7
WI_ROUND_OFFSET = 5

ROUND_KINDS = {
    1: "commit-rstar",
    2: "commit-alpha",
    3: "challenge",
    4: "open-chosen",
    5: "commit-trapdoor",
    6: "open-rest",
    7: "wi-commit",
    8: "wi-challenge",
    9: "wi-response",
}

Payload = dict[str, NDArray[np.generic]]


class Direction(str, Enum):
    P2V = "P->V"
    V2P = "V->P"


def direction_of(round_index: int) -> Direction:
    return Direction.P2V if round_index % 2 else Direction.V2P


def step_of(round_index: int) -> int:
    return min(round_index, WI_STEP)


@dataclass(frozen=True)
class ProtocolMsg:
    session_id: str
    round: int
    payload: Payload = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.round not in ROUND_KINDS:
            raise ProtocolError(f"unknown round {self.round}", self.round)

    @property
    def direction(self) -> Direction:
        return direction_of(self.round)

    @property
    def kind(self) -> str:
        return ROUND_KINDS[self.round]

    def payload_bytes(self) -> bytes:
        return pack_arrays(self.payload)

    @classmethod
    def from_payload_bytes(cls, session_id: str, round_index: int, blob: bytes) -> ProtocolMsg:
        return cls(session_id, round_index, dict(unpack_arrays(blob)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProtocolMsg):
            return NotImplemented
        return (
            self.session_id == other.session_id
            and self.round == other.round
            and self.payload.keys() == other.payload.keys()
            and all(np.array_equal(v, other.payload[k]) for k, v in self.payload.items())
        )


class Outcome(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    ABORT = "abort"


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    step: int | None = None
    party: str | None = None
    reason: str = ""

    @classmethod
    def accept(cls) -> Verdict:
        return cls(Outcome.ACCEPT, WI_STEP, "verifier")

    @classmethod
    def reject(cls, step: int, party: str, reason: str = "") -> Verdict:
        return cls(Outcome.REJECT, step, party, reason)

    @classmethod
    def abort(cls, step: int, reason: str = "") -> Verdict:
        return cls(Outcome.ABORT, step, "verifier", reason)

    @property
    def accepted(self) -> bool:
        return self.outcome is Outcome.ACCEPT

    def same_as(self, other: Verdict) -> bool:
        return (self.outcome, self.step, self.party) == (other.outcome, other.step, other.party)

    def __str__(self) -> str:
        if self.outcome is Outcome.ACCEPT:
            return "Accept"
        return f"{self.outcome.value.capitalize()}(step {self.step}, {self.party})"


@dataclass(frozen=True)
class SessionHeader:
    """Public setup chosen by the verifier: instance, parameters, receiver message r_V."""

    session_id: str
    x: Graph
    lam: int
    t: int
    rmsg_v: int

    def __post_init__(self) -> None:
        check_lambda(self.lam)
        if self.t < 1:
            raise FormatError("WI repetition count must be at least 1")
        ReceiverMsg(self.rmsg_v, self.lam)

    @property
    def receiver(self) -> ReceiverMsg:
        return ReceiverMsg(self.rmsg_v, self.lam)

    @property
    def width(self) -> int:
        return trap_width(self.lam)


@dataclass
class Transcript:
    header: SessionHeader
    messages: list[ProtocolMsg] = field(default_factory=list)
    verdict: Verdict | None = None

    def append(self, msg: ProtocolMsg) -> None:
        last = self.messages[-1].round if self.messages else 0
        if msg.round != last + 1:
            raise ProtocolError(f"round {msg.round} after round {last}", msg.round)
        if msg.session_id != self.header.session_id:
            raise ProtocolError(f"message for session {msg.session_id}", msg.round)
        self.messages.append(msg)

    def by_round(self, round_index: int) -> ProtocolMsg | None:
        return self.messages[round_index - 1] if round_index <= len(self.messages) else None

    def __iter__(self) -> Iterator[ProtocolMsg]:
        return iter(self.messages)


# ---------- shared checks ----------


def _scalar(payload: Mapping[str, NDArray[np.generic]], key: str, round_index: int) -> int:
    return int(field_of(payload, key, (1,), round_index)[0])


def _bits(payload: Mapping[str, NDArray[np.generic]], key: str, shape: tuple[int, ...], round_index: int) -> Bits:
    arr = field_of(payload, key, shape, round_index)
    if np.any((arr != 0) & (arr != 1)):
        raise ProtocolError(f"round {round_index}: field '{key}' must hold bits", round_index)
    return arr.astype(np.uint8)


def openings_valid(
    rmsg_p: ReceiverMsg,
    calpha: NDArray[np.uint64],
    b: Bits,
    payload: Mapping[str, NDArray[np.generic]],
    round_index: int,
    chosen: bool,
) -> tuple[bool, Bits | None]:
    """Check openings of alpha[i][b_i] (chosen) or alpha[i][1 - b_i]; returns the opened rows."""
    lam = rmsg_p.lam
    try:
        alpha = _bits(payload, "alpha", (lam, lam), round_index)
        seeds = field_of(payload, "seeds", (lam, lam), round_index)
    except ProtocolError:
        return False, None
    col = b if chosen else 1 - b
    cells = calpha[np.arange(lam), col]
    if np.any(seeds.astype(np.uint64) >> np.uint64(lam)):
        return False, None
    ok = bool(np.all(commit_bits(rmsg_p, alpha, seeds) == cells))
    return ok, alpha if ok else None


def compound_statement(
    header: SessionHeader,
    cstar: NDArray[np.uint64],
    c2star: NDArray[np.uint64],
    alphas: NDArray[np.uint8],
) -> tuple[CompoundStatement, CircuitStatement]:
    cs = CompoundStatement(
        header.x, header.lam, header.rmsg_v, cstar, c2star, (alphas[:, 0] ^ alphas[:, 1]).astype(np.uint8)
    )
    circuit, params = cs.circuit()
    return cs, CircuitStatement(circuit, params)


# ---------- prover ----------


class ProverStrategy:
    """Honest prover behaviour; adversaries and the simulator override pieces of it."""

    def challenge(self, st: ProverState, rng: np.random.Generator) -> Bits:
        return random_bits(rng, st.header.lam)

    def rstar_message(self, st: ProverState) -> Bits:
        return int_to_bits(st.rstar, st.header.lam)

    def trapdoor_message(self, st: ProverState) -> Bits:
        return np.zeros(st.header.width, dtype=np.uint8)

    def trapdoor_commitment(self, st: ProverState) -> NDArray[np.uint64]:
        h = st.header
        return commit_bits(h.receiver, self.trapdoor_message(st), trap_seeds(st.rstar, h.lam))

    def wi_witness(self, st: ProverState, stmt: CompoundStatement) -> tuple[Bits | None, bool]:
        """Witness for the WI phase and whether to guess challenges instead; None gives up."""
        if st.cycle is None:
            raise FormatError("honest prover needs a Hamiltonian cycle of x")
        return stmt.layout.witness_from_cycle(st.cycle), False


@dataclass
class ProverState:
    header: SessionHeader
    cycle: list[int] | None
    strategy: ProverStrategy = field(default_factory=ProverStrategy)
    next_round: int = 1
    rstar: int = 0
    seeds: NDArray[np.uint16] = field(default_factory=lambda: np.zeros(0, dtype=np.uint16))
    rmsg_p: ReceiverMsg | None = None
    cstar: NDArray[np.uint64] | None = None
    calpha: NDArray[np.uint64] | None = None
    b: Bits | None = None
    alphas: NDArray[np.uint8] | None = None
    c2star: NDArray[np.uint64] | None = None
    wi_rmsg: int | None = None
    wi_stmt: CircuitStatement | None = None
    wi_secret: Secret | None = None
    done: bool = False

    @classmethod
    def fresh(
        cls, header: SessionHeader, cycle: list[int] | None, strategy: ProverStrategy | None = None
    ) -> ProverState:
        return cls(header, cycle, strategy or ProverStrategy())


def _expect(incoming: ProtocolMsg | None, round_index: int, session_id: str) -> ProtocolMsg:
    if incoming is None or incoming.round != round_index:
        got = None if incoming is None else incoming.round
        raise ProtocolError(f"expected round {round_index}, got {got}", round_index)
    if incoming.session_id != session_id:
        raise ProtocolError(f"message for session {incoming.session_id}", round_index)
    return incoming


def prover_next(
    state: ProverState, incoming: ProtocolMsg | None, rng: np.random.Generator
) -> tuple[ProverState, ProtocolMsg | Verdict]:
    """Advance the prover by one round; returns its outgoing message or its verdict."""
    h = state.header
    lam = h.lam
    sid = h.session_id
    st = replace(state)
    if st.done:
        raise ProtocolError("prover already finished", st.next_round)

    if st.next_round == 1:
        if incoming is not None:
            raise ProtocolError("the prover speaks first", 1)
        st.rstar = int(rng.integers(0, 2**lam))
        st.seeds = sample_seeds(rng, lam, lam)
        st.cstar = commit_bits(h.receiver, st.strategy.rstar_message(st), st.seeds)
        st.rmsg_p = ReceiverMsg.sample(rng, lam)
        st.next_round = 3
        out = {"cstar": st.cstar, "rmsg_p": np.array([st.rmsg_p.r], dtype=np.uint64)}
        return st, ProtocolMsg(sid, 1, out)

    if st.next_round == 3:
        msg = _expect(incoming, 2, sid)
        try:
            calpha = field_of(msg.payload, "calpha", (lam, 2, lam), 2).astype(np.uint64)
        except ProtocolError as e:
            st.done = True
            return st, Verdict.reject(2, "prover", str(e))
        st.calpha = calpha
        st.b = st.strategy.challenge(st, rng)
        st.next_round = 5
        return st, ProtocolMsg(sid, 3, {"b": st.b})

    if st.next_round == 5:
        msg = _expect(incoming, 4, sid)
        assert st.rmsg_p is not None and st.calpha is not None and st.b is not None
        ok, opened = openings_valid(st.rmsg_p, st.calpha, st.b, msg.payload, 4, chosen=True)
        if not ok or opened is None:
            st.done = True
            return st, Verdict.reject(4, "prover", "invalid opening of alpha[i][b_i]")
        st.alphas = np.zeros((lam, 2, lam), dtype=np.uint8)
        st.alphas[np.arange(lam), st.b] = opened
        st.c2star = st.strategy.trapdoor_commitment(st)
        st.next_round = 7
        return st, ProtocolMsg(sid, 5, {"c2star": st.c2star})

    if st.next_round == 7:
        msg = _expect(incoming, 6, sid)
        assert st.rmsg_p is not None and st.calpha is not None and st.b is not None
        assert st.alphas is not None and st.cstar is not None and st.c2star is not None
        ok, opened = openings_valid(st.rmsg_p, st.calpha, st.b, msg.payload, 6, chosen=False)
        if not ok or opened is None:
            st.done = True
            return st, Verdict.reject(6, "prover", "invalid opening of alpha[i][1 - b_i]")
        try:
            st.wi_rmsg = _scalar(msg.payload, "wi_rmsg", 6)
            wi_receiver = ReceiverMsg(st.wi_rmsg, lam)
        except (ProtocolError, FormatError) as e:
            st.done = True
            return st, Verdict.reject(6, "prover", str(e))
        st.alphas = st.alphas.copy()
        st.alphas[np.arange(lam), 1 - st.b] = opened
        compound, st.wi_stmt = compound_statement(h, st.cstar, st.c2star, st.alphas)
        witness, cheat = st.strategy.wi_witness(st, compound)
        st.next_round = 9
        if witness is None and not cheat:
            logger.debug("prover %s gives up in the WI phase", sid)
            return st, ProtocolMsg(sid, 7, {})
        guesses = random_bits(rng, h.t) if cheat else None
        first, st.wi_secret = wi_commit(st.wi_stmt, witness, NaorBackend(wi_receiver), h.t, rng, guesses)
        return st, ProtocolMsg(sid, 7, first)

    if st.next_round == 9:
        msg = _expect(incoming, 8, sid)
        st.done = True
        if st.wi_secret is None or st.wi_stmt is None:
            return st, ProtocolMsg(sid, 9, {})
        try:
            e = _bits(msg.payload, "e", (h.t,), 8)
        except ProtocolError as err:
            return st, Verdict.reject(8, "prover", str(err))
        return st, ProtocolMsg(sid, 9, wi_respond(st.wi_stmt, st.wi_secret, e))

    raise ProtocolError(f"prover cannot act at round {st.next_round}", st.next_round)


# ---------- verifier ----------


@dataclass
class VerifierState:
    header: SessionHeader
    alphas: NDArray[np.uint8]
    next_round: int = 1
    rmsg_p: int = 0
    cstar: NDArray[np.uint64] | None = None
    alpha_seeds: NDArray[np.uint16] | None = None
    calpha: NDArray[np.uint64] | None = None
    b: Bits | None = None
    c2star: NDArray[np.uint64] | None = None
    wi_rmsg: int = 0
    wi_first: WiMessage = field(default_factory=dict)
    e: Bits | None = None

    @classmethod
    def fresh(
        cls, session_id: str, x: Graph, lam: int, rng: np.random.Generator, t: int = DEFAULT_REPETITIONS
    ) -> VerifierState:
        header = SessionHeader(session_id, x, lam, t, ReceiverMsg.sample(rng, lam).r)
        return cls(header, random_bits(rng, lam, 2, lam))

    def to_bytes(self) -> bytes:
        """Classical state as an ARR1 container."""
        h = self.header
        arrays: dict[str, NDArray[np.generic] | int] = {
            "session_id": np.frombuffer(h.session_id.encode("utf-8"), dtype=np.uint8),
            "x": np.frombuffer(h.x.to_bytes(), dtype=np.uint8),
            "lam": h.lam,
            "t": h.t,
            "rmsg_v": h.rmsg_v,
            "alphas": self.alphas,
            "next_round": self.next_round,
            "rmsg_p": self.rmsg_p,
            "wi_rmsg": self.wi_rmsg,
        }
        for name in ("cstar", "alpha_seeds", "calpha", "b", "c2star", "e"):
            value = getattr(self, name)
            if value is not None:
                arrays[name] = value
        for key, value in self.wi_first.items():
            arrays[f"wi.{key}"] = value
        return pack_arrays(arrays)

    @classmethod
    def from_bytes(cls, blob: bytes) -> VerifierState:
        a = unpack_arrays(blob)
        try:
            header = SessionHeader(
                bytes(a["session_id"].astype(np.uint8)).decode("utf-8"),
                Graph.from_bytes(bytes(a["x"].astype(np.uint8))),
                int(a["lam"]),
                int(a["t"]),
                int(a["rmsg_v"]),
            )
            st = cls(header, a["alphas"].astype(np.uint8), int(a["next_round"]), int(a["rmsg_p"]))
            st.wi_rmsg = int(a["wi_rmsg"])
        except (KeyError, UnicodeDecodeError, TypeError) as e:
            raise FormatError(f"incomplete verifier state: {e}") from e
        st.cstar = a.get("cstar")
        seeds = a.get("alpha_seeds")
        st.alpha_seeds = None if seeds is None else seeds.astype(np.uint16)
        st.calpha = a.get("calpha")
        b = a.get("b")
        st.b = None if b is None else b.astype(np.uint8)
        st.c2star = a.get("c2star")
        e = a.get("e")
        st.e = None if e is None else e.astype(np.uint8)
        st.wi_first = {k[3:]: v for k, v in a.items() if k.startswith("wi.")}
        return st

    def copy(self) -> VerifierState:
        return VerifierState.from_bytes(self.to_bytes())


def verifier_next(
    state: VerifierState, incoming: ProtocolMsg, rng: np.random.Generator
) -> tuple[VerifierState, ProtocolMsg | Verdict]:
    h = state.header
    lam = h.lam
    sid = h.session_id
    st = replace(state)
    r = st.next_round
    msg = _expect(incoming, r, sid)

    try:
        if r == 1:
            st.cstar = field_of(msg.payload, "cstar", (lam,), 1).astype(np.uint64)
            st.rmsg_p = _scalar(msg.payload, "rmsg_p", 1)
            rmsg_p = ReceiverMsg(st.rmsg_p, lam)
            st.alpha_seeds = sample_seeds(rng, lam, lam, 2, lam)
            st.calpha = commit_bits(rmsg_p, st.alphas, st.alpha_seeds)
            st.next_round = 3
            return st, ProtocolMsg(sid, 2, {"calpha": st.calpha})

        assert st.alpha_seeds is not None
        rows = np.arange(lam)
        if r == 3:
            st.b = _bits(msg.payload, "b", (lam,), 3)
            st.next_round = 5
            payload = {"alpha": st.alphas[rows, st.b], "seeds": st.alpha_seeds[rows, st.b]}
            return st, ProtocolMsg(sid, 4, payload)

        assert st.b is not None
        if r == 5:
            st.c2star = field_of(msg.payload, "c2star", (h.width,), 5).astype(np.uint64)
            st.wi_rmsg = ReceiverMsg.sample(rng, lam).r
            st.next_round = 7
            other = 1 - st.b
            payload = {
                "alpha": st.alphas[rows, other],
                "seeds": st.alpha_seeds[rows, other],
                "wi_rmsg": np.array([st.wi_rmsg], dtype=np.uint64),
            }
            return st, ProtocolMsg(sid, 6, payload)

        if r == 7:
            st.wi_first = dict(msg.payload)
            st.e = random_bits(rng, h.t)
            st.next_round = 9
            return st, ProtocolMsg(sid, 8, {"e": st.e})
    except (ProtocolError, FormatError) as e:
        return st, Verdict.reject(r + 1, "verifier", str(e))

    if r == 9:
        st.next_round = LAST_ROUND + 1
        assert st.cstar is not None and st.c2star is not None and st.e is not None
        return st, _wi_verdict(h, st.cstar, st.c2star, st.alphas, st.wi_rmsg, st.wi_first, st.e, msg.payload)

    raise ProtocolError(f"verifier cannot act at round {r}", r)


def _wi_verdict(
    h: SessionHeader,
    cstar: NDArray[np.uint64],
    c2star: NDArray[np.uint64],
    alphas: NDArray[np.uint8],
    wi_rmsg: int,
    first: WiMessage,
    e: Bits,
    response: Payload,
) -> Verdict:
    _, stmt = compound_statement(h, cstar, c2star, alphas)
    backend = NaorBackend(ReceiverMsg(wi_rmsg, h.lam))
    try:
        ok = wi_check(stmt, backend, first, e, response, WI_ROUND_OFFSET)
    except (ProtocolError, FormatError) as err:
        return Verdict.reject(WI_STEP, "verifier", str(err))
    return Verdict.accept() if ok else Verdict.reject(WI_STEP, "verifier", "WI check failed")


# ---------- sessions ----------


class HonestVerifier:
    """Verifier party driven by verifier_next; other verifier parties share this surface."""

    def __init__(self, state: VerifierState) -> None:
        self.state = state

    @property
    def header(self) -> SessionHeader:
        return self.state.header

    def respond(self, msg: ProtocolMsg, rng: np.random.Generator) -> ProtocolMsg | Verdict:
        self.state, out = verifier_next(self.state, msg, rng)
        return out


class HonestProver:
    def __init__(self, cycle: list[int] | None, strategy: ProverStrategy | None = None) -> None:
        self.cycle = cycle
        self.strategy = strategy or ProverStrategy()
        self.state: ProverState | None = None

    def start(self, header: SessionHeader) -> None:
        self.state = ProverState.fresh(header, self.cycle, self.strategy)

    def respond(self, msg: ProtocolMsg | None, rng: np.random.Generator) -> ProtocolMsg | Verdict:
        if self.state is None:
            raise ProtocolError("prover has no session", 1)
        self.state, out = prover_next(self.state, msg, rng)
        return out


def replay_verdict(transcript: Transcript) -> Verdict:
    """Recompute the verdict from the public messages alone."""
    h = transcript.header
    lam = h.lam
    msgs = transcript.messages
    if msgs and (msgs[0].round != 1 or msgs[0].direction is not Direction.P2V):
        raise ProtocolError("the first message must be the prover's c* batch", 1)
    for i, m in enumerate(msgs):
        if m.round != i + 1:
            raise ProtocolError(f"round {m.round} at position {i + 1}", m.round)

    def get(r: int) -> Payload:
        return msgs[r - 1].payload

    n = len(msgs)
    try:
        if n >= 1:
            cstar = field_of(get(1), "cstar", (lam,), 1).astype(np.uint64)
            rmsg_p = ReceiverMsg(_scalar(get(1), "rmsg_p", 1), lam)
    except (ProtocolError, FormatError) as e:
        return Verdict.reject(2, "verifier", str(e))
    if n == 2:
        try:
            field_of(get(2), "calpha", (lam, 2, lam), 2)
        except ProtocolError as e:
            return Verdict.reject(2, "prover", str(e))
    if n >= 3:
        calpha = get(2)["calpha"].astype(np.uint64)
        try:
            b = _bits(get(3), "b", (lam,), 3)
        except ProtocolError as e:
            return Verdict.reject(4, "verifier", str(e))
    if n >= 4:
        ok, chosen = openings_valid(rmsg_p, calpha, b, get(4), 4, chosen=True)
        if not ok or chosen is None:
            return Verdict.reject(4, "prover", "invalid opening of alpha[i][b_i]")
    if n >= 5:
        try:
            c2star = field_of(get(5), "c2star", (h.width,), 5).astype(np.uint64)
        except ProtocolError as e:
            return Verdict.reject(6, "verifier", str(e))
    if n >= 6:
        ok, rest = openings_valid(rmsg_p, calpha, b, get(6), 6, chosen=False)
        if not ok or rest is None:
            return Verdict.reject(6, "prover", "invalid opening of alpha[i][1 - b_i]")
        try:
            wi_rmsg = _scalar(get(6), "wi_rmsg", 6)
            ReceiverMsg(wi_rmsg, lam)
        except (ProtocolError, FormatError) as e:
            return Verdict.reject(6, "prover", str(e))
    if n >= 8:
        try:
            e_bits = _bits(get(8), "e", (h.t,), 8)
        except ProtocolError as e:
            return Verdict.reject(8, "prover", str(e))
    if n % 2 == 1 and transcript.verdict is not None and transcript.verdict.outcome is Outcome.ABORT:
        return Verdict.abort(step_of(n + 1))
    if n == LAST_ROUND:
        alphas = np.zeros((lam, 2, lam), dtype=np.uint8)
        rows = np.arange(lam)
        alphas[rows, b] = chosen
        alphas[rows, 1 - b] = rest
        return _wi_verdict(h, cstar, c2star, alphas, wi_rmsg, dict(get(7)), e_bits, get(9))
    if n % 2 == 1:
        return Verdict.abort(step_of(n + 1))
    raise ProtocolError(f"transcript stops after verifier round {n} without a prover verdict", n)


# ---------- sessions over a transport ----------


class VerifierParty(Protocol):
    @property
    def header(self) -> SessionHeader: ...

    def respond(self, msg: ProtocolMsg, rng: np.random.Generator) -> ProtocolMsg | Verdict: ...


class ProverParty(Protocol):
    def start(self, header: SessionHeader) -> None: ...

    def respond(self, msg: ProtocolMsg | None, rng: np.random.Generator) -> ProtocolMsg | Verdict: ...


class Link(Protocol):
    def header(self) -> SessionHeader: ...

    def send(self, msg: ProtocolMsg) -> ProtocolMsg | Verdict: ...

    def close(self) -> None: ...


class Transport(Protocol):
    def connect(self, verifier: VerifierParty | None, rng: np.random.Generator) -> Link: ...


def run_session(
    prover: ProverParty,
    verifier: VerifierParty | None,
    transport: Transport,
    rng: np.random.Generator,
) -> Transcript:
    """Drive both parties to a verdict; transport failures raise SessionAborted."""
    link = transport.connect(verifier, rng)
    transcript: Transcript | None = None
    try:
        header = link.header()
        transcript = Transcript(header)
        prover.start(header)
        out = prover.respond(None, rng)
        while True:
            if isinstance(out, Verdict):
                transcript.verdict = out
                break
            transcript.append(out)
            reply = link.send(out)
            if isinstance(reply, Verdict):
                transcript.verdict = reply
                break
            transcript.append(reply)
            out = prover.respond(reply, rng)
    except (OSError, FrameError, EOFError) as e:
        raise SessionAborted(f"transport failed: {e}", transcript) from e
    finally:
        link.close()
    logger.debug("session %s: %s after %d messages", header.session_id, transcript.verdict, len(transcript.messages))
    return transcript
