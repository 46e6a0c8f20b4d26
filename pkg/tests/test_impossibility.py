import numpy as np
import pytest

from qzk_lab.core.errors import ConfigError, ProtocolError
from qzk_lab.core.graphs import planted_hamiltonian, star
from qzk_lab.core.impossibility import (
    EventCounters,
    ExtractedProver,
    QueryLog,
    build_contrived_verifier,
    classify_queries,
    out_of_order,
    policy_by_name,
    repeat_query,
    run_policy,
    skip_query,
    straight_line,
)
from qzk_lab.core.protocol import HonestProver, HonestVerifier, Outcome, ProtocolMsg, Verdict, VerifierState
from qzk_lab.core.utils import trial_rng
from qzk_lab.wire.transport import InProcTransport

LAM = 4
T = 4
N = 4


@pytest.fixture
def yes(rng):
    return planted_hamiltonian(5, 2, rng)[0]


def _log(*entries: tuple[int, bool, bool], finished: bool = True) -> QueryLog:
    log = QueryLog()
    for channel, ok, non_abort in entries:
        log.record(channel, ok, non_abort)
    log.finished = finished
    return log


def test_in_order_log_has_no_events():
    ev = classify_queries(_log(*[(i, True, True) for i in range(1, 6)]))
    assert ev.total() == 0
    assert ev.as_dict() == {"D": 0, "D_forged": 0, "E": 0}


def test_event_classification():
    ev = classify_queries(_log((1, True, True), (3, True, False), (2, True, True), (2, False, False), (2, True, False)))
    assert ev.jumps == {3: 1}
    assert ev.reorders == {(2, 3): 2}
    assert ev.repeats == {2: 1}
    assert ev.unfinished == 1
    assert ev.as_dict()["C2,3"] == 2


def test_stale_ciphertext_counts():
    log = QueryLog()
    log.record(1, True, True)
    log.record(2, True, True, z_match=False)
    ev = classify_queries(log)
    assert (ev.z_mismatch, ev.forged) == (1, 1)


def test_non_abort_requires_state_success():
    with pytest.raises(ProtocolError):
        QueryLog().record(1, False, True)


def test_counters_merge():
    a = classify_queries(_log((2, True, False)))
    b = classify_queries(_log((3, True, False), (3, True, False)))
    a.merge(b)
    assert a.jumps == {2: 1, 3: 2}
    assert a.repeats == {3: 1}
    assert a.unfinished == 2
    assert EventCounters().total() == 0


def test_contrived_verifier_validation(rng, yes):
    honest = VerifierState.fresh("v", yes, LAM, rng, T)
    with pytest.raises(ConfigError):
        build_contrived_verifier(4, N, honest, rng)
    for n in (5, 12):
        with pytest.raises(ConfigError):
            build_contrived_verifier(5, n, honest, rng)
    v = build_contrived_verifier(5, N, honest, rng)
    with pytest.raises(ProtocolError):
        v.query(0, ProtocolMsg("v", 1), v.advice(), b"", 0, rng)


def test_contrived_verifier_rejects_forged_tag(rng, yes):
    v = build_contrived_verifier(5, N, VerifierState.fresh("v", yes, LAM, rng, T), rng)
    prover = HonestProver(None)
    prover.start(v.header)
    m1 = prover.respond(None, rng)
    assert isinstance(m1, ProtocolMsg)
    first = v.query(1, m1, v.advice(), b"", 0, rng)
    assert first.non_abort and isinstance(first.reply, ProtocolMsg)

    m3 = prover.respond(first.reply, rng)
    assert isinstance(m3, ProtocolMsg)
    forged = v.query(2, m3, first.y, first.z, first.t ^ 1, rng)
    assert forged.state_successful and forged.aborted

    genuine = v.query(2, m3, forged.y, first.z, first.t, rng)
    assert genuine.non_abort
    assert classify_queries(v.log).repeats == {2: 1}


def test_straight_line_on_yes_instance(rng, yes):
    outcome, events = run_policy(straight_line, yes, LAM, N, rng, T)
    assert outcome.finished
    assert outcome.verdict is not None and outcome.verdict.accepted
    assert outcome.queries == 5
    assert events.total() == 0


def test_straight_line_on_no_instance(rng):
    outcome, events = run_policy(straight_line, star(5), LAM, N, rng, T)
    assert outcome.finished
    assert outcome.verdict is not None
    assert (outcome.verdict.outcome, outcome.verdict.step) == (Outcome.REJECT, 7)
    assert events.total() == 0


@pytest.mark.parametrize("make", [out_of_order, repeat_query, skip_query])
def test_probe_success_sits_at_overlap(make, yes):
    runs = 200
    hits = 0
    for i in range(runs):
        outcome, events = run_policy(make(2), yes, LAM, N, trial_rng(3, i), T)
        assert not outcome.finished
        hits += bool(outcome.probe_successful)
        if outcome.probe_successful and make is not repeat_query:
            assert events.jumps[3] == 1
        if outcome.probe_successful and make is repeat_query:
            assert events.repeats[2] == 1
    assert 0.1 < hits / runs < 0.4


def test_policy_lookup():
    assert policy_by_name("straight_line") is straight_line
    assert callable(policy_by_name("clone_query", 3))
    with pytest.raises(ConfigError):
        policy_by_name("teleport")


def _link(x, rng):  # type: ignore[no-untyped-def]
    verifier = HonestVerifier(VerifierState.fresh("ext", x, LAM, rng, T))
    return InProcTransport(encode=False).connect(verifier, rng)


@pytest.mark.parametrize("ciphertext", ["zero", "real"])
def test_extracted_prover_convinces_on_yes_instance(rng, yes, ciphertext):
    result = ExtractedProver(straight_line, N, ciphertext).run(_link(yes, rng), rng)
    assert result.accepted
    assert result.tags == []
    assert len(result.transcript.messages) == 9
    assert result.events.total() == 0


def test_extracted_prover_fails_on_no_instance(rng):
    result = ExtractedProver(straight_line, N).run(_link(star(5), rng), rng)
    assert not result.accepted


def test_extracted_prover_query_cap(rng, yes):
    result = ExtractedProver(straight_line, N, max_queries=2).run(_link(yes, rng), rng)
    assert not result.accepted
    assert "truncated" in result.tags
    assert result.transcript.verdict is not None
    assert result.transcript.verdict.same_as(Verdict.reject(3, "prover"))


def test_extracted_prover_with_out_of_order_policy(rng, yes):
    result = ExtractedProver(out_of_order(2), N).run(_link(yes, rng), rng)
    assert not result.accepted
    assert result.transcript.verdict is not None
    assert result.transcript.verdict.outcome is Outcome.REJECT
    assert np.all([m.round <= 4 for m in result.transcript.messages])
