from typing import Any

import numpy as np
import pytest

from qzk_lab.core.config import make_config
from qzk_lab.core.errors import ConfigError
from qzk_lab.core.graphs import petersen, planted_hamiltonian, save_instance
from qzk_lab.core.harness import EXPERIMENTS, _observable, map_trials, run_experiment, yes_instance
from qzk_lab.core.models import ExperimentConfig, Report
from qzk_lab.core.protocol import ProtocolMsg, SessionHeader, Transcript, Verdict
from qzk_lab.core.stats import align, chi2_test, histogram

SMALL: dict[str, Any] = {"lam": 4, "t": 2}


def _run(experiment: str, **fields: Any) -> Report:
    return run_experiment(make_config(name=f"test-{experiment}", experiment=experiment, **{**SMALL, **fields}))


def _names(report: Report) -> list[str]:
    return [m.name for m in report.metrics]


def test_every_kind_is_registered():
    kinds = ExperimentConfig.model_fields["experiment"].annotation.__args__  # type: ignore[union-attr]
    assert set(kinds) == set(EXPERIMENTS)


def test_unknown_kind():
    cfg = ExperimentConfig.model_construct(name="x", experiment="teleport")
    with pytest.raises(ConfigError):
        run_experiment(cfg)


def test_map_trials_is_order_and_worker_independent():
    def draw(i: int, rng: np.random.Generator) -> tuple[int, int]:
        return i, int(rng.integers(2**31))

    serial = map_trials(make_config(name="m", experiment="replay", trials=12), draw)
    pooled = map_trials(make_config(name="m", experiment="replay", trials=12, workers=4), draw)
    assert serial == pooled
    assert [i for i, _ in serial] == list(range(12))


def test_instance_file(tmp_path, rng):
    x, _ = planted_hamiltonian(6, 1, rng)
    good = tmp_path / "yes.gra"
    save_instance(x, good)
    cfg = make_config(name="i", experiment="completeness", instance=str(good))
    got, cycle = yes_instance(cfg, rng)
    assert got == x and len(cycle) == 6

    bad = tmp_path / "petersen.gra"
    save_instance(petersen(), bad)
    with pytest.raises(ConfigError):
        yes_instance(make_config(name="i", experiment="completeness", instance=str(bad)), rng)


def test_completeness():
    report = _run("completeness", trials=4)
    assert _names(report) == ["accept_rate"]
    assert report.passed
    assert report.histograms["verdicts"] == {"Accept": 4}


def test_completeness_over_tcp():
    assert _run("completeness", trials=2, transport="tcp").passed


def test_reports_are_reproducible():
    skip: Any = {"wall_clock": True, "config": {"workers"}}
    a = _run("completeness", trials=3, seed=5).model_dump(exclude=skip)
    b = _run("completeness", trials=3, seed=5, workers=3).model_dump(exclude=skip)
    assert a == b


def test_challenge_uniformity_shape():
    report = _run("challenge-uniformity", trials=20)
    assert _names(report) == ["b_positions_outside_band", "b_chi2_p", "e_chi2_p"]
    assert sum(report.histograms["b_ones"].values()) <= 20 * 4


def test_replay():
    report = _run("replay", trials=8)
    assert report.passed
    assert sum(report.histograms["verdicts"].values()) == 8


def test_soundness_shapes():
    guessing = _run("soundness-guessing", lam=2, trials=20)
    assert _names(guessing) == ["accept_rate", "accept_rate_vs_exact"]
    mauling = _run("soundness-mauling", trials=10)
    assert _names(mauling) == ["mauling_accept_rate", "wi_guess_accept_rate"]


def test_binding():
    report = _run("binding")
    assert report.passed
    assert report.metric("bad_receiver_fraction").bound == 2.0**-4
    with pytest.raises(ConfigError):
        _run("binding", lam=9)


def test_mixed_state_bound():
    report = _run("mixed-state-bound", m=3, trials=15)
    assert report.passed
    assert report.metric("violations").value == 0


def test_simulator_experiments():
    iters = _run("sim-iterations", m=1, trials=4)
    assert _names(iters) == ["mean_iterations", "mean_iterations_vs_p", "mean_channel_calls", "budget_hits"]
    assert iters.metric("budget_hits").passed

    tail = _run("termination-tail", m=1, trials=10)
    assert _names(tail) == ["tail", "mean_iterations", "budget_hits"]
    assert not tail.metric("mean_iterations").graded
    assert tail.metric("budget_hits").graded

    space = _run("space", m=1, trials=1, verifier="zoo")
    assert space.metric("space_violations").passed
    assert space.metric("max_peak_ratio").value <= 1.0


def test_view_indistinguishability_shape():
    report = _run("view-indistinguishability", m=1, trials=6, verifier="honest")
    assert _names(report) == ["chi2_p:honest"]
    assert set(report.histograms) == {"real:honest", "sim:honest"}


def test_channel_blocks_shape():
    report = _run("channel-blocks", trials=50)
    assert _names(report) == ["mean_blocks", "strict_nontermination_rate"]
    assert min(int(k) for k in report.histograms["blocks"]) >= 1


def test_subspace_test():
    report = _run("subspace-test", n=4, trials=3)
    assert report.metric("test_pass_rate").passed
    assert report.metric("min_post_fidelity").passed
    assert "max_projection_error" in _names(report)


def test_clone_floor():
    report = _run("clone-floor", n=4, trials=40, strategy="oracle_grover_budget(1)")
    assert report.metric("measure_and_resend_exact").passed
    assert report.metric("identity_pad_exact").passed
    grover = report.metric("oracle_grover_budget(1)_rate")
    assert grover.graded and grover.tolerance is not None
    assert grover.passed == (abs(grover.value - grover.bound) <= grover.tolerance)


def test_impossibility_structure():
    report = _run("impossibility-structure", n=4, trials=4)
    assert report.metric("in_order_events").passed
    assert report.metric("forged_tag_events").passed
    assert {"out_of_order_probe_rate", "repeat_query_probe_rate"} <= set(_names(report))


def test_extraction():
    report = _run("extraction", n=4, trials=3)
    assert report.passed
    assert report.metric("yes_accept_rate").value == 1.0
    assert report.metric("no_accept_rate").value == 0.0


@pytest.mark.parametrize("hybrid", ["witness", "witness-zero"])
def test_witness_hybrid_views_accept(hybrid):
    report = _run("view-indistinguishability", m=1, trials=4, verifier="never_abort", hybrid=hybrid)
    assert all(key.startswith("Accept|b=") for key in report.histograms["sim:never_abort"])


def test_observable_detects_a_skewed_second_challenge_bit(rng):
    x, _ = planted_hamiltonian(5, 2, rng)
    header = SessionHeader("v", x, 4, 2, 0)

    def view(b: np.ndarray) -> str:
        return _observable(Transcript(header, [ProtocolMsg("v", 3, {"b": b})], Verdict.accept()))

    uniform = [view(rng.integers(0, 2, 4).astype(np.uint8)) for _ in range(400)]
    skewed = []
    for _ in range(400):
        b = rng.integers(0, 2, 4).astype(np.uint8)
        b[1] = 0
        skewed.append(view(b))

    assert uniform[0].startswith("Accept|b=")
    assert not chi2_test(*align(histogram(uniform), histogram(skewed))).passes(1e-3)


def test_observable_long_challenge(rng):
    x, _ = planted_hamiltonian(5, 2, rng)
    header = SessionHeader("v", x, 16, 2, 0)
    b = np.ones(16, dtype=np.uint8)
    b[3] = 0
    transcript = Transcript(header, [ProtocolMsg("v", 3, {"b": b})], Verdict.abort(4))
    assert _observable(transcript, (0, 3)) == "Abort(step 4, verifier)|w=10|watched=10"
