"""
Contrived verifier that forces straight-line simulation, plus the tooling that
watches how a simulator queries it.

Channel i of the contrived verifier first projects its Y register onto the
subspace state |S_{i-1}>; a failed projection aborts. Later channels also check
a tag over the ciphertext in Z, decrypt the wrapped verifier state from it, run
the honest round and hand back |S_i>, a fresh ciphertext and its tag.

A query that survives the projection is state-successful; one that produces
the next round is non-abort. classify_queries turns a QueryLog into counts of
the events a successful simulator would have to trigger.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Callable
from dataclasses import dataclass, field
import logging
from typing import Literal, Protocol

import numpy as np

from qzk_lab.core.bits import Bits
from qzk_lab.core.compound import CompoundStatement
from qzk_lab.core.crypto import SymKey, TagKey, dec, enc, tag, tag_verify
from qzk_lab.core.errors import ConfigError, FormatError, ProtocolError
from qzk_lab.core.graphs import Graph, find_hamiltonian_cycle
from qzk_lab.core.protocol import (
    HonestProver,
    Link,
    ProtocolMsg,
    ProverState,
    ProverStrategy,
    SessionHeader,
    Transcript,
    Verdict,
    VerifierState,
    verifier_next,
)
from qzk_lab.core.qsim import QState, measure_prefix
from qzk_lab.core.subspace import Subspace, prepare_state, project_A, sample_subspace
from qzk_lab.core.verifiers import N_CHANNELS

logger = logging.getLogger(__name__)

MAX_AMBIENT = 10


# ---------- query log and events ----------


@dataclass(frozen=True)
class QueryRecord:
    channel: int
    state_successful: bool
    non_abort: bool
    timestamp: int
    z_match: bool = True


@dataclass
class QueryLog:
    records: list[QueryRecord] = field(default_factory=list)
    finished: bool = False

    def record(self, channel: int, state_successful: bool, non_abort: bool, z_match: bool = True) -> QueryRecord:
        if non_abort and not state_successful:
            raise ProtocolError(f"channel {channel}: a non-abort query must be state-successful")
        rec = QueryRecord(channel, state_successful, non_abort, len(self.records), z_match)
        self.records.append(rec)
        return rec

    def successes(self, channel: int) -> int:
        return sum(r.state_successful for r in self.records if r.channel == channel)


@dataclass
class EventCounters:
    jumps: Counter[int] = field(default_factory=Counter)
    repeats: Counter[int] = field(default_factory=Counter)
    reorders: Counter[tuple[int, int]] = field(default_factory=Counter)
    z_mismatch: int = 0
    forged: int = 0
    unfinished: int = 0

    def total(self) -> int:
        return (
            sum(self.jumps.values())
            + sum(self.repeats.values())
            + sum(self.reorders.values())
            + self.z_mismatch
            + self.unfinished
        )

    def merge(self, other: EventCounters) -> None:
        self.jumps.update(other.jumps)
        self.repeats.update(other.repeats)
        self.reorders.update(other.reorders)
        self.z_mismatch += other.z_mismatch
        self.forged += other.forged
        self.unfinished += other.unfinished

    def as_dict(self) -> dict[str, int]:
        out = {f"J{i}": v for i, v in sorted(self.jumps.items())}
        out |= {f"B{i}": v for i, v in sorted(self.repeats.items())}
        out |= {f"C{i},{j}": v for (i, j), v in sorted(self.reorders.items())}
        out |= {"D": self.z_mismatch, "D_forged": self.forged, "E": self.unfinished}
        return out


def classify_queries(log: QueryLog, k: int = N_CHANNELS) -> EventCounters:
    """J: success at i > 1 before any non-abort i - 1. B: extra successes at i.
    C: success at i after a success at some j > i. D: success with a stale Z.
    E: a finished run without a non-abort query to the last channel."""
    ev = EventCounters()
    non_abort_seen: set[int] = set()
    succeeded: list[int] = []
    per_channel: Counter[int] = Counter()
    for rec in log.records:
        if rec.state_successful:
            i = rec.channel
            if i > 1 and i - 1 not in non_abort_seen:
                ev.jumps[i] += 1
            per_channel[i] += 1
            if per_channel[i] > 1:
                ev.repeats[i] += 1
            for j in {j for j in succeeded if j > i}:
                ev.reorders[(i, j)] += 1
            if not rec.z_match:
                ev.z_mismatch += 1
                ev.forged += int(rec.non_abort)
            succeeded.append(i)
        if rec.non_abort:
            non_abort_seen.add(rec.channel)
    if log.finished and k not in non_abort_seen:
        ev.unfinished += 1
    return ev


# ---------- contrived verifier ----------


@dataclass
class ContrivedOutput:
    reply: ProtocolMsg | Verdict | None
    y: QState
    z: bytes
    t: int
    state_successful: bool
    non_abort: bool

    @property
    def aborted(self) -> bool:
        return self.reply is None


class ContrivedInterface(Protocol):
    k: int
    n: int

    @property
    def header(self) -> SessionHeader: ...

    def query(
        self, i: int, msg: ProtocolMsg, y: QState, z: bytes, t: int, rng: np.random.Generator
    ) -> ContrivedOutput: ...


def _tag_input(channel: int, z: bytes) -> bytes:
    return channel.to_bytes(1, "big") + z


def _sample_chain(k: int, n: int, rng: np.random.Generator) -> list[Subspace]:
    if n % 2 or not 2 <= n <= MAX_AMBIENT:
        raise ConfigError(f"subspace ambient dimension must be even and in [2, {MAX_AMBIENT}], got {n}")
    return [sample_subspace(n, n // 2, rng) for _ in range(k + 1)]


class ContrivedVerifier:
    def __init__(
        self,
        k: int,
        n: int,
        subspaces: list[Subspace],
        sk_enc: SymKey,
        tag_key: TagKey,
        honest: VerifierState,
    ) -> None:
        if len(subspaces) != k + 1:
            raise ConfigError(f"{k} channels need {k + 1} subspaces")
        self.k = k
        self.n = n
        self._subspaces = subspaces
        self._sk = sk_enc
        self._tag_key = tag_key
        self._gamma0 = honest.to_bytes()
        self._header = honest.header
        self._issued = b""
        self.log = QueryLog()

    @property
    def header(self) -> SessionHeader:
        return self._header

    def advice(self) -> QState:
        return prepare_state(self._subspaces[0])

    def query(
        self, i: int, msg: ProtocolMsg, y: QState, z: bytes, t: int, rng: np.random.Generator
    ) -> ContrivedOutput:
        if not 1 <= i <= self.k:
            raise ProtocolError(f"channel {i} outside [1, {self.k}]")
        outcome, y = project_A(self._subspaces[i - 1], y, rng)
        z_match = z == self._issued
        if outcome:
            self.log.record(i, False, False, z_match)
            return ContrivedOutput(None, y, z, t, False, False)
        gamma = self._gamma0
        if i > 1:
            if not tag_verify(self._tag_key, _tag_input(i, z), t):
                self.log.record(i, True, False, z_match)
                return ContrivedOutput(None, y, z, t, True, False)
            gamma = dec(self._sk, z)
        try:
            st, reply = verifier_next(VerifierState.from_bytes(gamma), msg, rng)
        except (FormatError, ProtocolError) as e:
            logger.debug("channel %d: wrapped verifier refused the query: %s", i, e)
            self.log.record(i, True, False, z_match)
            return ContrivedOutput(None, y, z, t, True, False)
        z2 = enc(self._sk, st.to_bytes(), rng)
        t2 = tag(self._tag_key, _tag_input(i + 1, z2))
        self._issued = z2
        self.log.record(i, True, True, z_match)
        return ContrivedOutput(reply, prepare_state(self._subspaces[i]), z2, t2, True, True)


def build_contrived_verifier(
    k: int, n: int, honest: VerifierState, rng: np.random.Generator
) -> ContrivedVerifier:
    if k != N_CHANNELS:
        raise ConfigError(f"the wrapped verifier has {N_CHANNELS} channels, got k={k}")
    lam = honest.header.lam
    return ContrivedVerifier(k, n, _sample_chain(k, n, rng), SymKey.sample(rng, lam), SymKey.sample(rng, lam), honest)


# ---------- simulator policies ----------


@dataclass
class SimOutcome:
    finished: bool
    verdict: Verdict | None = None
    queries: int = 0
    probe_successful: bool | None = None


class DecidingStrategy(ProverStrategy):
    """Honest prover that gives up in the WI phase when it has no cycle."""

    def wi_witness(self, st: ProverState, stmt: CompoundStatement) -> tuple[Bits | None, bool]:
        if st.cycle is None:
            return None, False
        return super().wi_witness(st, stmt)


SimPolicy = Callable[[ContrivedInterface, QState, np.random.Generator], SimOutcome]


def _decide(x: Graph) -> list[int] | None:
    """Stand-in for the decision procedure a straight-line simulator implies."""
    return find_hamiltonian_cycle(x)


def _in_order(
    v: ContrivedInterface,
    y: QState,
    rng: np.random.Generator,
    stop_before: int | None = None,
) -> tuple[SimOutcome, QState, bytes, int, ProtocolMsg | None, HonestProver]:
    """Drive channels 1, 2, ... in order; stops early at `stop_before`."""
    prover = HonestProver(_decide(v.header.x), DecidingStrategy())
    prover.start(v.header)
    z, t = b"", 0
    reply: ProtocolMsg | None = None
    queries = 0
    while True:
        out = prover.respond(reply, rng)
        if isinstance(out, Verdict):
            return SimOutcome(False, out, queries), y, z, t, None, prover
        i = (out.round + 1) // 2
        if stop_before is not None and i == stop_before:
            return SimOutcome(False, None, queries), y, z, t, out, prover
        res = v.query(i, out, y, z, t, rng)
        queries += 1
        y, z, t = res.y, res.z, res.t
        if res.reply is None:
            return SimOutcome(False, None, queries), y, z, t, None, prover
        if isinstance(res.reply, Verdict):
            return SimOutcome(True, res.reply, queries), y, z, t, None, prover
        reply = res.reply


def straight_line(v: ContrivedInterface, advice: QState, rng: np.random.Generator) -> SimOutcome:
    return _in_order(v, advice, rng)[0]


def _probe_state(n: int) -> QState:
    return QState.zero(n)


def out_of_order(r: int = 2) -> SimPolicy:
    """Query channel r + 1 with a fixed |0^n> probe before channel r."""

    def policy(v: ContrivedInterface, advice: QState, rng: np.random.Generator) -> SimOutcome:
        outcome, y, z, t, pending, _ = _in_order(v, advice, rng, stop_before=r)
        if pending is None:
            return outcome
        probe_msg = ProtocolMsg(v.header.session_id, 2 * r + 1, {})
        probe = v.query(r + 1, probe_msg, _probe_state(v.n), z, t, rng)
        v.query(r, pending, y, z, t, rng)
        return SimOutcome(False, None, outcome.queries + 2, probe.state_successful)

    return policy


def repeat_query(r: int = 2) -> SimPolicy:
    """Query channel r with the real register, then again with a |0^n> probe."""

    def policy(v: ContrivedInterface, advice: QState, rng: np.random.Generator) -> SimOutcome:
        outcome, y, z, t, pending, _ = _in_order(v, advice, rng, stop_before=r)
        if pending is None:
            return outcome
        v.query(r, pending, y, z, t, rng)
        second = v.query(r, pending, _probe_state(v.n), z, t, rng)
        return SimOutcome(False, None, outcome.queries + 2, second.state_successful)

    return policy


def clone_query(r: int = 2) -> SimPolicy:
    """Measure Y in the computational basis and send the outcome to channel r twice."""

    def policy(v: ContrivedInterface, advice: QState, rng: np.random.Generator) -> SimOutcome:
        outcome, y, z, t, pending, _ = _in_order(v, advice, rng, stop_before=r)
        if pending is None:
            return outcome
        bits, _ = measure_prefix(y, v.n, rng)
        copy = QState.from_bits(bits.tolist())
        v.query(r, pending, copy.copy(), z, t, rng)
        second = v.query(r, pending, copy, z, t, rng)
        return SimOutcome(False, None, outcome.queries + 2, second.state_successful)

    return policy


def skip_query(r: int = 2) -> SimPolicy:
    """Skip channel r; probe channel r + 1 with |0^n> and the stale Z, T."""

    def policy(v: ContrivedInterface, advice: QState, rng: np.random.Generator) -> SimOutcome:
        outcome, y, z, t, pending, _ = _in_order(v, advice, rng, stop_before=r)
        if pending is None:
            return outcome
        if r == v.k:
            return SimOutcome(True, Verdict.accept(), outcome.queries)
        probe_msg = ProtocolMsg(v.header.session_id, 2 * r + 1, {})
        probe = v.query(r + 1, probe_msg, _probe_state(v.n), z, t, rng)
        return SimOutcome(False, None, outcome.queries + 1, probe.state_successful)

    return policy


POLICIES: dict[str, Callable[[int], SimPolicy]] = {
    "out_of_order": out_of_order,
    "repeat_query": repeat_query,
    "clone_query": clone_query,
    "skip_query": skip_query,
}


def policy_by_name(name: str, r: int = 2) -> SimPolicy:
    if name == "straight_line":
        return straight_line
    if name not in POLICIES:
        raise ConfigError(f"unknown policy '{name}'; known: {['straight_line', *POLICIES]}")
    return POLICIES[name](r)


def run_policy(
    policy: SimPolicy, x: Graph, lam: int, n: int, rng: np.random.Generator, t: int = 8, session_id: str = "vprime"
) -> tuple[SimOutcome, EventCounters]:
    v = build_contrived_verifier(N_CHANNELS, n, VerifierState.fresh(session_id, x, lam, rng, t), rng)
    outcome = policy(v, v.advice(), rng)
    v.log.finished = outcome.finished
    return outcome, classify_queries(v.log, v.k)


# ---------- extracted prover ----------


@dataclass
class ExtractionResult:
    transcript: Transcript
    outcome: SimOutcome
    events: EventCounters
    tags: list[str] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        v = self.transcript.verdict
        return v is not None and v.accepted


class _EmulatedContrived:
    """The contrived verifier as the extracted prover plays it, forwarding to a live link."""

    def __init__(
        self,
        link: Link,
        header: SessionHeader,
        n: int,
        rng: np.random.Generator,
        ciphertext: Literal["zero", "real"],
        max_queries: int,
    ) -> None:
        self.k = N_CHANNELS
        self.n = n
        self.link = link
        self._header = header
        self._subspaces = _sample_chain(self.k, n, rng)
        self._sk = SymKey.sample(rng, header.lam)
        self._tag_key = SymKey.sample(rng, header.lam)
        self._ciphertext = ciphertext
        self._max_queries = max_queries
        self._issued = b""
        self.next_channel = 1
        self.transcript = Transcript(header)
        self.log = QueryLog()
        self.tags: list[str] = []

    @property
    def header(self) -> SessionHeader:
        return self._header

    def advice(self) -> QState:
        return prepare_state(self._subspaces[0])

    def _payload(self, rng: np.random.Generator) -> bytes:
        if self._ciphertext == "real":
            seen = b"".join(m.payload_bytes() for m in self.transcript.messages)
            return enc(self._sk, seen, rng)
        return enc(self._sk, bytes(16), rng)

    def query(
        self, i: int, msg: ProtocolMsg, y: QState, z: bytes, t: int, rng: np.random.Generator
    ) -> ContrivedOutput:
        if len(self.log.records) >= self._max_queries:
            self.tags.append("truncated")
            return ContrivedOutput(None, y, z, t, False, False)
        outcome, y = project_A(self._subspaces[i - 1], y, rng)
        z_match = z == self._issued
        ok = not outcome
        if ok and i > 1 and not tag_verify(self._tag_key, _tag_input(i, z), t):
            self.log.record(i, True, False, z_match)
            return ContrivedOutput(None, y, z, t, True, False)
        if not ok:
            self.log.record(i, False, False, z_match)
            return ContrivedOutput(None, y, z, t, False, False)
        if i != self.next_channel:
            self.tags.append(f"out_of_round:{i}")
            self.log.record(i, True, False, z_match)
            return ContrivedOutput(None, y, z, t, True, False)
        if not z_match:
            self.tags.append(f"z_mismatch:{i}")
            self.log.record(i, True, False, False)
            return ContrivedOutput(None, y, z, t, True, False)
        self.transcript.append(msg)
        reply = self.link.send(msg)
        if isinstance(reply, Verdict):
            self.transcript.verdict = reply
        else:
            self.transcript.append(reply)
        self.next_channel = i + 1
        z2 = self._payload(rng)
        t2 = tag(self._tag_key, _tag_input(i + 1, z2))
        self._issued = z2
        self.log.record(i, True, True, True)
        return ContrivedOutput(reply, prepare_state(self._subspaces[i]), z2, t2, True, True)


@dataclass
class ExtractedProver:
    """Runs a simulator policy against an emulated contrived verifier; in-round
    queries are answered by a live honest verifier over `link`."""

    policy: SimPolicy = straight_line
    n: int = 6
    ciphertext: Literal["zero", "real"] = "zero"
    max_queries: int = N_CHANNELS**2

    def run(self, link: Link, rng: np.random.Generator) -> ExtractionResult:
        try:
            header = link.header()
            emu = _EmulatedContrived(link, header, self.n, rng, self.ciphertext, self.max_queries)
            outcome = self.policy(emu, emu.advice(), rng)
        finally:
            link.close()
        emu.log.finished = outcome.finished
        if emu.transcript.verdict is None:
            emu.transcript.verdict = outcome.verdict if outcome.verdict is not None else Verdict.reject(
                emu.next_channel, "prover", "simulator stopped"
            )
        events = classify_queries(emu.log, emu.k)
        if emu.tags:
            logger.debug("extracted prover events: %s", emu.tags)
        return ExtractionResult(emu.transcript, outcome, events, emu.tags)


def extract_prover(
    policy: SimPolicy = straight_line, n: int = 6, ciphertext: Literal["zero", "real"] = "zero"
) -> ExtractedProver:
    return ExtractedProver(policy, n, ciphertext)

