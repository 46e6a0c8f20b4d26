import numpy as np
import pytest

from qzk_lab.core.adversary import (
    GuessingStrategy,
    MaulingStrategy,
    WiGuessingStrategy,
    guessing_prover,
    guessing_success,
    mauling_prover,
    prover_by_name,
    soundness_budget,
    wi_guessing_prover,
)
from qzk_lab.core.errors import ConfigError
from qzk_lab.core.graphs import star
from qzk_lab.core.protocol import HonestVerifier, Outcome, VerifierState, run_session
from qzk_lab.core.utils import trial_rng
from qzk_lab.wire.transport import InProcTransport

NO_INSTANCE = star(5)


def _session(prover, lam, t, i):  # type: ignore[no-untyped-def]
    rng = trial_rng(99, i)
    verifier = HonestVerifier(VerifierState.fresh(f"adv-{i}", NO_INSTANCE, lam, rng, t))
    return run_session(prover, verifier, InProcTransport(encode=False), rng)


def test_guessing_prover_accepts_exactly_on_a_hit():
    hits = 0
    for i in range(120):
        prover = guessing_prover(np.random.default_rng(i))
        transcript = _session(prover, 2, 2, i)
        assert isinstance(prover.strategy, GuessingStrategy)
        assert transcript.verdict is not None
        assert transcript.verdict.accepted == prover.strategy.hit
        if not prover.strategy.hit:
            assert (transcript.verdict.outcome, transcript.verdict.step) == (Outcome.REJECT, 7)
        hits += prover.strategy.hit
    assert 0.1 < hits / 120 < 0.45


def test_mauling_prover_copies_alpha_commitments():
    for i in range(20):
        transcript = _session(mauling_prover(), 4, 8, i)
        calpha = transcript.by_round(2).payload["calpha"]  # type: ignore[union-attr]
        c2star = transcript.by_round(5).payload["c2star"]  # type: ignore[union-attr]
        np.testing.assert_array_equal(c2star, calpha.reshape(-1)[: c2star.size])
        assert transcript.verdict is not None
        assert transcript.verdict.step == 7


def test_wi_guessing_prover_wins_half_the_time_with_one_repetition():
    outcomes = [_session(wi_guessing_prover(), 4, 1, i).verdict for i in range(40)]
    assert all(v is not None and v.step == 7 for v in outcomes)
    accepted = sum(v.accepted for v in outcomes if v is not None)
    assert 0 < accepted < 40


def test_prover_by_name(rng):
    assert isinstance(prover_by_name("guessing", None, rng).strategy, GuessingStrategy)
    assert isinstance(prover_by_name("mauling", None, rng).strategy, MaulingStrategy)
    assert isinstance(prover_by_name("wi_guessing", None, rng).strategy, WiGuessingStrategy)
    assert prover_by_name("honest", [0, 1, 2], rng).cycle == [0, 1, 2]
    with pytest.raises(ConfigError):
        prover_by_name("oracle", None, rng)


def test_exact_success_formulas():
    assert guessing_success(2, 3) == 0.25
    assert guessing_success(2, 3, wi_guess=True) == pytest.approx(0.25 + 0.75 / 8)
    assert soundness_budget(4, 4) == pytest.approx(5 / 16)
