import numpy as np
import pytest

from qzk_lab.core.errors import FormatError, ProtocolError
from qzk_lab.core.graphs import Graph, planted_hamiltonian
from qzk_lab.core.protocol import (
    Direction,
    HonestProver,
    HonestVerifier,
    Outcome,
    ProtocolMsg,
    ProverState,
    ProverStrategy,
    SessionHeader,
    Transcript,
    Verdict,
    VerifierState,
    direction_of,
    prover_next,
    replay_verdict,
    run_session,
    step_of,
    verifier_next,
)
from qzk_lab.wire.transport import InProcTransport

LAM = 4
T = 4


def _setup(rng: np.random.Generator) -> tuple[Graph, list[int], HonestVerifier]:
    x, cycle = planted_hamiltonian(5, 2, rng)
    return x, cycle, HonestVerifier(VerifierState.fresh("s0", x, LAM, rng, T))


class GivingUp(ProverStrategy):
    def wi_witness(self, st, stmt):  # type: ignore[no-untyped-def]
        return None, False


class Tamper:
    """Honest verifier that corrupts its reply in one round."""

    def __init__(self, inner: HonestVerifier, round_index: int) -> None:
        self.inner = inner
        self.round_index = round_index

    @property
    def header(self) -> SessionHeader:
        return self.inner.header

    def respond(self, msg: ProtocolMsg, rng: np.random.Generator) -> ProtocolMsg | Verdict:
        out = self.inner.respond(msg, rng)
        if isinstance(out, ProtocolMsg) and out.round == self.round_index:
            payload = dict(out.payload)
            alpha = payload["alpha"].copy()
            alpha[0, 0] ^= 1
            payload["alpha"] = alpha
            return ProtocolMsg(out.session_id, out.round, payload)
        return out


def test_round_map():
    assert direction_of(1) is Direction.P2V
    assert direction_of(2) is Direction.V2P
    assert [step_of(r) for r in range(1, 10)] == [1, 2, 3, 4, 5, 6, 7, 7, 7]
    assert ProtocolMsg("s", 8).kind == "wi-challenge"

    with pytest.raises(ProtocolError):
        ProtocolMsg("s", 10)


def test_verdict_rendering():
    assert str(Verdict.accept()) == "Accept"
    assert str(Verdict.reject(4, "prover")) == "Reject(step 4, prover)"
    assert str(Verdict.abort(2)) == "Abort(step 2, verifier)"
    assert Verdict.reject(4, "prover", "x").same_as(Verdict.reject(4, "prover", "y"))


def test_header_validation():
    x = Graph.complete(4)
    with pytest.raises(FormatError):
        SessionHeader("s", x, 17, T, 1)
    with pytest.raises(FormatError):
        SessionHeader("s", x, LAM, 0, 1)


@pytest.mark.parametrize("encode", [True, False])
def test_honest_session_accepts(rng, encode):
    _, cycle, verifier = _setup(rng)
    transcript = run_session(HonestProver(cycle), verifier, InProcTransport(encode=encode), rng)

    assert transcript.verdict is not None and transcript.verdict.accepted
    assert [m.round for m in transcript] == list(range(1, 10))
    assert all(m.direction is direction_of(m.round) for m in transcript)
    assert replay_verdict(transcript).same_as(transcript.verdict)


def test_corrupted_opening_rejected_by_prover(rng):
    _, cycle, verifier = _setup(rng)
    transcript = run_session(HonestProver(cycle), Tamper(verifier, 4), InProcTransport(), rng)

    assert transcript.verdict == Verdict.reject(4, "prover", "invalid opening of alpha[i][b_i]")
    assert len(transcript.messages) == 4
    assert replay_verdict(transcript).same_as(transcript.verdict)


def test_corrupted_second_opening_rejected_by_prover(rng):
    _, cycle, verifier = _setup(rng)
    transcript = run_session(HonestProver(cycle), Tamper(verifier, 6), InProcTransport(), rng)

    assert transcript.verdict is not None
    assert (transcript.verdict.outcome, transcript.verdict.step) == (Outcome.REJECT, 6)
    assert replay_verdict(transcript).same_as(transcript.verdict)


def test_giving_up_prover_rejected_at_wi_step(rng):
    _, cycle, verifier = _setup(rng)
    transcript = run_session(HonestProver(cycle, GivingUp()), verifier, InProcTransport(), rng)

    assert transcript.verdict is not None
    assert transcript.verdict.same_as(Verdict.reject(7, "verifier"))
    assert transcript.by_round(7) == ProtocolMsg("s0", 7, {})
    assert replay_verdict(transcript).same_as(transcript.verdict)


def test_honest_prover_without_witness(rng):
    _, _, verifier = _setup(rng)
    with pytest.raises(FormatError):
        run_session(HonestProver(None), verifier, InProcTransport(), rng)


def test_truncated_transcript_replays_as_abort(rng):
    _, cycle, verifier = _setup(rng)
    full = run_session(HonestProver(cycle), verifier, InProcTransport(), rng)

    cut = Transcript(full.header, full.messages[:3], Verdict.abort(4))
    assert replay_verdict(cut).same_as(Verdict.abort(4))

    with pytest.raises(ProtocolError):
        replay_verdict(Transcript(full.header, full.messages[:4]))


def test_transcript_append_order(rng):
    _, _, verifier = _setup(rng)
    transcript = Transcript(verifier.header)
    with pytest.raises(ProtocolError):
        transcript.append(ProtocolMsg("s0", 2))
    with pytest.raises(ProtocolError):
        transcript.append(ProtocolMsg("other", 1))
    transcript.append(ProtocolMsg("s0", 1))
    assert transcript.by_round(1) is not None
    assert transcript.by_round(2) is None


def test_prover_rejects_out_of_turn_messages(rng):
    _, cycle, verifier = _setup(rng)
    state = ProverState.fresh(verifier.header, cycle)

    with pytest.raises(ProtocolError):
        prover_next(state, ProtocolMsg("s0", 2), rng)

    state, first = prover_next(state, None, rng)
    assert isinstance(first, ProtocolMsg) and first.round == 1
    with pytest.raises(ProtocolError):
        prover_next(state, ProtocolMsg("s0", 4), rng)
    with pytest.raises(ProtocolError):
        prover_next(state, ProtocolMsg("elsewhere", 2), rng)


def test_malformed_prover_message_rejected(rng):
    _, _, verifier = _setup(rng)
    state, reply = verifier_next(verifier.state, ProtocolMsg("s0", 1, {"cstar": np.zeros(2, np.uint64)}), rng)
    assert isinstance(reply, Verdict)
    assert reply.same_as(Verdict.reject(2, "verifier"))


def test_verifier_state_survives_serialization(rng):
    _, cycle, verifier = _setup(rng)
    prover = HonestProver(cycle)
    prover.start(verifier.header)

    out = prover.respond(None, rng)
    for _ in range(2):
        assert isinstance(out, ProtocolMsg)
        out = prover.respond(verifier.respond(out, rng), rng)
    assert isinstance(out, ProtocolMsg) and out.round == 5

    copy = verifier.state.copy()
    _, a = verifier_next(verifier.state, out, np.random.default_rng(7))
    _, b = verifier_next(copy, out, np.random.default_rng(7))
    assert a == b
    assert copy.to_bytes() == verifier.state.to_bytes()
