"""
Black-box simulator with maximally mixed rewinding.

The simulator sees a verifier only through a ChannelOracle: channel i maps the
verifier's opaque classical state, the prover message of round 2i - 1 and the
M-qubit register to a new classical state, a reply (or a verdict) and the
register's post-state. Rewinding never touches the main-thread register X; each
lookahead restarts channel 2 on (I / 2^M, st) in a second register R.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from numpy.typing import NDArray

from qzk_lab.core.bits import Bits, random_bits
from qzk_lab.core.compound import CompoundStatement, trap_message
from qzk_lab.core.crypto import ReceiverMsg
from qzk_lab.core.errors import DimensionError, IterationBudgetExceeded, ModeError, ProtocolError
from qzk_lab.core.graphs import Graph
from qzk_lab.core.protocol import (
    Outcome,
    ProtocolMsg,
    ProverState,
    ProverStrategy,
    SessionHeader,
    Transcript,
    Verdict,
    VerifierState,
    openings_valid,
    prover_next,
    step_of,
    verifier_next,
)
from qzk_lab.core.qsim import (
    QState,
    QubitBudget,
    apply_unitary,
    maximally_mixed,
    povm_prob,
    project_basis,
    reset_prefix,
)
from qzk_lab.core.verifiers import MAX_WIDTH, N_CHANNELS, VerifierSpec
from qzk_lab.core.wi import DEFAULT_REPETITIONS

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERS = 10**6


# ---------- oracle ----------


@dataclass
class ChannelOutput:
    state: bytes
    reply: ProtocolMsg | Verdict
    quantum: QState

    @property
    def aborted(self) -> bool:
        return isinstance(self.reply, Verdict) and self.reply.outcome is Outcome.ABORT


class ChannelOracle:
    """Channel access to one verifier; its program stays private."""

    k = N_CHANNELS

    def __init__(self, spec: VerifierSpec) -> None:
        self._spec = spec
        self.call_counts: Counter[int] = Counter()

    @property
    def m(self) -> int:
        return self._spec.m

    def open_session(
        self, session_id: str, x: Graph, lam: int, rng: np.random.Generator, t: int = DEFAULT_REPETITIONS
    ) -> tuple[SessionHeader, bytes]:
        """Verifier setup: the public header and the opaque initial classical state."""
        st = VerifierState.fresh(session_id, x, lam, rng, t)
        return st.header, st.to_bytes()

    def call(self, i: int, classical: bytes, msg: ProtocolMsg, q: QState, rng: np.random.Generator) -> ChannelOutput:
        if not 1 <= i <= self.k:
            raise ProtocolError(f"channel {i} outside [1, {self.k}]")
        if q.num_qubits != self.m:
            raise DimensionError(f"channel register has {self.m} qubits, got {q.num_qubits}")
        if msg.round != 2 * i - 1:
            raise ProtocolError(f"channel {i} consumes round {2 * i - 1}, got {msg.round}", msg.round)
        self.call_counts[i] += 1
        st, reply = verifier_next(VerifierState.from_bytes(classical), msg, rng)
        out = st.to_bytes()
        if isinstance(reply, Verdict):
            return ChannelOutput(out, reply, q)
        rule = self._spec.rule_for(i)
        if rule is None:
            return ChannelOutput(out, reply, q)
        keep, q = rule.run(q, st.b, rng)
        if not keep:
            return ChannelOutput(classical, Verdict.abort(step_of(2 * i), f"{self._spec.name} aborts"), q)
        return ChannelOutput(out, reply, q)


def make_oracle(spec: VerifierSpec, m: int | None = None) -> ChannelOracle:
    if m is not None and m != spec.m:
        raise DimensionError(f"verifier '{spec.name}' declares {spec.m} qubits, caller expects {m}")
    return ChannelOracle(spec)


class OracleVerifier:
    """Live verifier party driven through the channel interface."""

    def __init__(
        self,
        oracle: ChannelOracle,
        advice: QState,
        session_id: str,
        x: Graph,
        lam: int,
        rng: np.random.Generator,
        t: int = DEFAULT_REPETITIONS,
    ) -> None:
        self.oracle = oracle
        self._header, self.state = oracle.open_session(session_id, x, lam, rng, t)
        self.quantum = advice.copy()

    @property
    def header(self) -> SessionHeader:
        return self._header

    def respond(self, msg: ProtocolMsg, rng: np.random.Generator) -> ProtocolMsg | Verdict:
        out = self.oracle.call((msg.round + 1) // 2, self.state, msg, self.quantum, rng)
        self.state, self.quantum = out.state, out.quantum
        return out.reply


# ---------- simulation ----------


@dataclass
class SimStrategy(ProverStrategy):
    """Commits the trapdoor (i*, alpha xor) and proves with (r*, seeds, i*).

    `cycle` switches the WI witness back to a Hamiltonian cycle and
    `zero_rstar` commits zeros in c*; both only matter for hybrid runs.
    """

    istar: int = 0
    xor_row: Bits | None = None
    cycle: list[int] | None = None
    zero_rstar: bool = False
    trapdoor_ok: bool = True

    def rstar_message(self, st: ProverState) -> Bits:
        if self.zero_rstar:
            return np.zeros(st.header.lam, dtype=np.uint8)
        return super().rstar_message(st)

    def trapdoor_message(self, st: ProverState) -> Bits:
        if self.xor_row is None:
            return super().trapdoor_message(st)
        return trap_message(self.istar, self.xor_row, st.header.lam)

    def wi_witness(self, st: ProverState, stmt: CompoundStatement) -> tuple[Bits | None, bool]:
        if self.cycle is not None:
            return stmt.layout.witness_from_cycle(self.cycle), False
        witness = stmt.layout.witness_from_trapdoor(st.rstar, st.seeds, self.istar)
        circuit, params = stmt.circuit()
        if not circuit.evaluate(witness, params):
            self.trapdoor_ok = False
            logger.warning("trapdoor witness does not satisfy x_wi (i*=%d)", self.istar)
            return None, False
        return witness, False


@dataclass
class SimView:
    transcript: Transcript
    verifier_state: bytes
    quantum: QState
    iterations: int
    peak_qubits: int
    channel_calls: dict[int, int] = field(default_factory=dict)
    istar: int | None = None
    trapdoor_ok: bool = True

    @property
    def verdict(self) -> Verdict:
        assert self.transcript.verdict is not None
        return self.transcript.verdict


@dataclass
class Lookahead:
    istar: int
    b_prime: Bits
    alpha_row: NDArray[np.uint8]
    iterations: int


def rewind(
    oracle: ChannelOracle,
    st: bytes,
    header: SessionHeader,
    b: Bits,
    rmsg_p: ReceiverMsg,
    calpha: NDArray[np.uint64],
    budget: QubitBudget,
    rng: np.random.Generator,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> Lookahead:
    """Restart channel 2 on (I/2^M, st) with fresh challenges until it opens a differing index."""
    lam = header.lam
    for it in range(1, max_iters + 1):
        b_prime = random_bits(rng, lam)
        with budget.hold(oracle.m):
            out = oracle.call(2, st, ProtocolMsg(header.session_id, 3, {"b": b_prime}), maximally_mixed(oracle.m), rng)
        if isinstance(out.reply, Verdict):
            continue
        ok, opened = openings_valid(rmsg_p, calpha, b_prime, out.reply.payload, 4, chosen=True)
        if not ok or opened is None:
            continue
        diff = np.flatnonzero(b_prime != b)
        if diff.size == 0:
            continue
        istar = int(diff[0])
        return Lookahead(istar, b_prime, opened[istar].astype(np.uint8), it)
    raise IterationBudgetExceeded(f"no usable lookahead within {max_iters} iterations", max_iters)


def simulate(
    oracle: ChannelOracle,
    advice: QState,
    header: SessionHeader,
    st0: bytes,
    rng: np.random.Generator,
    max_iters: int = DEFAULT_MAX_ITERS,
    strategy: SimStrategy | None = None,
) -> SimView:
    """Produce a view of the verifier without a witness."""
    m = oracle.m
    if advice.num_qubits != m:
        raise DimensionError(f"advice has {advice.num_qubits} qubits, oracle expects {m}")
    strategy = strategy or SimStrategy()
    budget = QubitBudget(2 * m)
    budget.allocate(m)
    transcript = Transcript(header)
    before = dict(oracle.call_counts)
    pst = ProverState.fresh(header, None, strategy)
    x_reg = advice.copy()
    st = st0
    iterations = 0
    istar: int | None = None

    def finish(verdict: Verdict) -> SimView:
        transcript.verdict = verdict
        calls = {i: oracle.call_counts[i] - before.get(i, 0) for i in range(1, oracle.k + 1)}
        return SimView(transcript, st, x_reg, iterations, budget.peak_used, calls, istar, strategy.trapdoor_ok)

    def prover_step(incoming: ProtocolMsg | None) -> ProtocolMsg | Verdict:
        nonlocal pst
        pst, out = prover_next(pst, incoming, rng)
        if isinstance(out, ProtocolMsg):
            transcript.append(out)
        return out

    def channel(i: int, msg: ProtocolMsg) -> ProtocolMsg | Verdict:
        nonlocal st, x_reg
        out = oracle.call(i, st, msg, x_reg, rng)
        st, x_reg = out.state, out.quantum
        if isinstance(out.reply, ProtocolMsg):
            transcript.append(out.reply)
        return out.reply

    # main thread through the opening of alpha[i][b_i]
    out: ProtocolMsg | Verdict = prover_step(None)
    assert isinstance(out, ProtocolMsg)
    reply = channel(1, out)
    if isinstance(reply, Verdict):
        return finish(reply)
    out = prover_step(reply)
    if isinstance(out, Verdict):
        return finish(out)
    st_before = st
    reply = channel(2, out)
    if isinstance(reply, Verdict):
        return finish(reply)
    assert pst.rmsg_p is not None and pst.calpha is not None and pst.b is not None
    ok, chosen = openings_valid(pst.rmsg_p, pst.calpha, pst.b, reply.payload, 4, chosen=True)
    if ok and chosen is not None:
        look = rewind(oracle, st_before, header, pst.b, pst.rmsg_p, pst.calpha, budget, rng, max_iters)
        iterations = look.iterations
        istar = look.istar
        strategy.istar = look.istar
        strategy.xor_row = (chosen[look.istar] ^ look.alpha_row).astype(np.uint8)
        logger.debug("lookahead found i*=%d after %d iteration(s)", istar, iterations)

    # resume the main thread on X
    for i in (3, 4, 5):
        out = prover_step(reply)
        if isinstance(out, Verdict):
            return finish(out)
        reply = channel(i, out)
        if isinstance(reply, Verdict):
            return finish(reply)
    raise ProtocolError("verifier did not return a verdict after round 9", 9)


def simulate_spec(
    spec: VerifierSpec,
    x: Graph,
    lam: int,
    rng: np.random.Generator,
    t: int = DEFAULT_REPETITIONS,
    session_id: str = "sim",
    max_iters: int = DEFAULT_MAX_ITERS,
    strategy: SimStrategy | None = None,
) -> SimView:
    oracle = make_oracle(spec)
    header, st0 = oracle.open_session(session_id, x, lam, rng, t)
    return simulate(oracle, spec.advice, header, st0, rng, max_iters, strategy)


# ---------- exact bounds ----------


@dataclass
class BoundReport:
    p: float
    p_prime: float
    lower: float
    holds: bool
    p_prime_estimate: float | None = None

    @property
    def ratio(self) -> float:
        return self.p_prime / self.p if self.p > 0 else math.inf


def _residual_state(spec: VerifierSpec) -> QState:
    """Register state entering channel 2, conditioned on channel 1 continuing."""
    rule = spec.rule_for(1)
    if rule is None:
        return spec.advice
    rotated = apply_unitary(spec.advice.to_density(), rule.unitary)
    acc = np.zeros((2**spec.m, 2**spec.m), dtype=np.complex128)
    for o in np.flatnonzero(rule.accept[:, 0]):
        p, post = project_basis(rotated, rule.measure, int(o))
        if post is not None:
            acc += p * reset_prefix(post, rule.measure, int(o)).density()
    total = float(np.trace(acc).real)
    if total < 1e-14:
        return spec.advice
    return QState.from_density(acc / total)


def bound_check(spec: VerifierSpec, lam: int, trials: int = 0, rng: np.random.Generator | None = None) -> BoundReport:
    """Exact p and p' for the step-4 abort decision of a wrapped verifier."""
    m = spec.m
    if m > MAX_WIDTH:
        raise ModeError(f"exact mode handles at most {MAX_WIDTH} qubits, verifier has {m}")
    rule = spec.rule_for(2)
    rho = _residual_state(spec)
    miss = 1.0 - 2.0**-lam
    if rule is None:
        p, mixed = 1.0, 1.0
    else:
        if any(w >= lam for w in rule.watch):
            raise ModeError(f"rule watches bit {max(rule.watch)} of a {lam}-bit challenge")
        n_watch = 2 ** len(rule.watch)
        effects = [rule.effect(w) for w in range(n_watch)]
        p = float(np.mean([povm_prob(e, rho) for e in effects]))
        mixed = float(np.mean([np.trace(e).real / 2**m for e in effects]))
    p_prime = miss * mixed
    lower = miss * p / 2**m
    report = BoundReport(p, p_prime, lower, p_prime >= lower - 1e-9)
    if trials > 0:
        report.p_prime_estimate = _estimate_p_prime(spec, lam, trials, rng or np.random.default_rng())
    if not report.holds:
        logger.error("bound violated for %s: p'=%.6g < %.6g", spec.name, p_prime, lower)
    return report


def _estimate_p_prime(spec: VerifierSpec, lam: int, trials: int, rng: np.random.Generator) -> float:
    rule = spec.rule_for(2)
    hits = 0
    for _ in range(trials):
        b = random_bits(rng, lam)
        b_prime = random_bits(rng, lam)
        keep = True
        if rule is not None:
            keep, _ = rule.run(maximally_mixed(spec.m), b_prime, rng)
        hits += int(keep and bool(np.any(b != b_prime)))
    return hits / trials


# ---------- termination ----------


@dataclass
class TailReport:
    p_prime: float
    threshold: float
    tail: float
    bound: float
    runs: int
    mean_iterations: float
    budget_hits: int = 0


def termination_tail(
    spec: VerifierSpec,
    x: Graph,
    lam: int,
    runs: int,
    rng: np.random.Generator,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> TailReport:
    """Empirical Pr[lookahead iterations > lam / p'] over runs that reach the loop."""
    p_prime = bound_check(spec, lam).p_prime
    threshold = lam / p_prime if p_prime > 0 else math.inf
    counts: list[int] = []
    hits = 0
    oracle = make_oracle(spec)
    for r in range(runs):
        header, st = oracle.open_session(f"tail-{r}", x, lam, rng, 1)
        pst = ProverState.fresh(header, None)
        x_reg = spec.advice.copy()
        pst, m1 = prover_next(pst, None, rng)
        assert isinstance(m1, ProtocolMsg)
        out = oracle.call(1, st, m1, x_reg, rng)
        if isinstance(out.reply, Verdict):
            continue
        pst, m3 = prover_next(pst, out.reply, rng)
        if isinstance(m3, Verdict):
            continue
        main = oracle.call(2, out.state, m3, out.quantum, rng)
        if isinstance(main.reply, Verdict):
            continue
        assert pst.rmsg_p is not None and pst.calpha is not None and pst.b is not None
        budget = QubitBudget(2 * oracle.m)
        budget.allocate(oracle.m)
        try:
            look = rewind(oracle, out.state, header, pst.b, pst.rmsg_p, pst.calpha, budget, rng, max_iters)
        except IterationBudgetExceeded:
            hits += 1
            counts.append(max_iters)
            continue
        counts.append(look.iterations)
    entered = len(counts)
    tail = float(np.mean([c > threshold for c in counts])) if entered else 0.0
    mean = float(np.mean(counts)) if entered else 0.0
    return TailReport(p_prime, threshold, tail, math.exp(-lam), entered, mean, hits)
