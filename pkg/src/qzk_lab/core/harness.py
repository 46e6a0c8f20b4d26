"""
Experiment registry and runner.

Each experiment kind maps an ExperimentConfig to a list of metrics plus raw
histograms; run_experiment times it and wraps the result in a Report. Trial i
draws from trial_rng(seed, i), so trials are independent streams and may run
on a thread pool (cfg.workers) without changing results.
"""

from __future__ import annotations

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
import logging
import math
from pathlib import Path
import tempfile
import time
from typing import TypeVar

import numpy as np

from qzk_lab.core.adversary import (
    PROVERS,
    guessing_prover,
    guessing_success,
    mauling_prover,
    prover_by_name,
    wi_guessing_prover,
)
from qzk_lab.core.bits import Bits
from qzk_lab.core.crypto import binding_bad_fraction
from qzk_lab.core.errors import (
    BasisNotOrthonormal,
    ConfigError,
    IterationBudgetExceeded,
    NonTermination,
)
from qzk_lab.core.graphs import (
    Graph,
    find_hamiltonian_cycle,
    load_instance,
    planted_hamiltonian,
    star,
)
from qzk_lab.core.impossibility import (
    DecidingStrategy,
    EventCounters,
    ExtractedProver,
    SimPolicy,
    policy_by_name,
    run_policy,
    straight_line,
)
from qzk_lab.core.models import ExperimentConfig, Metric, Report
from qzk_lab.core.protocol import (
    HonestProver,
    HonestVerifier,
    ProverParty,
    Transcript,
    Transport,
    Verdict,
    VerifierState,
    run_session,
)
from qzk_lab.core.qsim import (
    HybridState,
    QState,
    UnitaryDescriptor,
    apply_unitary,
    fidelity,
    run_channel,
)
from qzk_lab.core.simulator import (
    OracleVerifier,
    SimStrategy,
    bound_check,
    make_oracle,
    simulate_spec,
    termination_tail,
)
from qzk_lab.core.stats import (
    align,
    binomial_tolerance,
    chi2_gof,
    chi2_test,
    histogram,
    mean_sigma,
)
from qzk_lab.core.subspace import (
    SubspaceOracleHandle,
    build_CA,
    clone_experiment,
    orthonormal_basis,
    prepare_state,
    project_A,
    sample_subspace,
    test_state,
)
from qzk_lab.core.utils import trial_rng
from qzk_lab.core.verifiers import (
    VerifierSpec,
    build_zoo,
    quantum_coin,
    random_effect,
    random_state,
    verifier_by_name,
)
from qzk_lab.wire.transcripts import load_transcript, save_transcript, verify_transcript
from qzk_lab.wire.transport import InProcTransport, TcpTransport

logger = logging.getLogger(__name__)

VERTICES = 5
EXTRA_EDGES = 2
FIDELITY_TOL = 1e-12
PROJECTION_TOL = 1e-9
EXTRACTION_YES = 0.95
EXTRACTION_NO = 0.05
MAIN_THREAD_CALLS = 5
FULL_CHALLENGE_BITS = 6

# provenance strings carried by metrics
COMPLETENESS = "protocol: honest sessions accept"
UNIFORM_B = "protocol: prover challenge bits are uniform"
UNIFORM_E = "wi: verifier challenge bits are public coins"
REPLAY = "protocol: transcripts are replay-verifiable"
HIDDEN_TRAPDOOR = "adversary: the trapdoor index is hidden from the prover"
GUESS_EXACT = "adversary: guessing prover accept probability"
MAULING = "adversary: copied commitments leave only the WI branch"
WI_SOUND = "wi: soundness error 2^-t"
BINDING = "crypto: statistical binding"
MIXED_BOUND = "simulator: restart on I/2^M keeps p' >= p (1 - 2^-lam) / 2^M"
ITER_BOUND = "simulator: expected loop iterations <= 2^(M+1)"
ITER_EXPECTED = "simulator: expected loop iterations <= (1-p) + p/p'"
CALLS = "simulator: main-thread calls plus lookahead calls"
VALVE = "simulator: iteration valve never reached"
TAIL = "simulator: Pr[iterations > lam / p'] <= e^-lam"
SPACE = "simulator: peak qubits <= 2M"
VIEWS = "simulator: real and simulated views agree (heuristic)"
BLOCKS = "qsim: expected-time channel halts after 2 blocks on average"
STRICT = "qsim: strict mode raises NonTermination past max_blocks"
TEST_PASS = "subspace: Test^{U_A} accepts |A> with certainty"
TEST_FIDELITY = "subspace: Test leaves |A> undisturbed"
BASIS = "subspace: orthonormal basis search"
CA_MAP = "subspace: C_A maps |0^k>|0^n> to |0^k>|A>"
PROJECTION = "subspace: project_A through C_A matches the projector"
CLONE_FLOOR = "subspace: zero-query cloning sits at the overlap floor"
CLONE_QUERIES = "subspace: cloning success grows with oracle queries"
IN_ORDER = "impossibility: in-order driving triggers no event"
PROBE = "impossibility: a fixed probe passes a hidden projection w.p. 2^-n/2"
FORGED = "impossibility: tags cannot be forged"
EXTRACTION = "impossibility: the extracted prover decides the language"

T = TypeVar("T")
Findings = tuple[list[Metric], dict[str, dict[str, int]]]
Runner = Callable[[ExperimentConfig], Findings]

EXPERIMENTS: dict[str, Runner] = {}


def experiment(kind: str) -> Callable[[Runner], Runner]:
    def register(fn: Runner) -> Runner:
        EXPERIMENTS[kind] = fn
        return fn

    return register


# ---------- shared plumbing ----------


def map_trials(
    cfg: ExperimentConfig,
    fn: Callable[[int, np.random.Generator], T],
    count: int | None = None,
    offset: int = 0,
) -> list[T]:
    """fn(i, trial_rng(seed, offset + i)) for each trial, in trial order."""
    total = cfg.trials if count is None else count

    def one(i: int) -> T:
        return fn(i, trial_rng(cfg.seed, offset + i))

    if cfg.workers == 1:
        return [one(i) for i in range(total)]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(one, range(total)))


@lru_cache(maxsize=8)
def _instance_file(path: str) -> tuple[Graph, tuple[int, ...]]:
    x = load_instance(Path(path))
    cycle = find_hamiltonian_cycle(x)
    if cycle is None:
        raise ConfigError(f"instance {path} has no Hamiltonian cycle")
    return x, tuple(cycle)


def yes_instance(cfg: ExperimentConfig, rng: np.random.Generator) -> tuple[Graph, list[int]]:
    """cfg.instance when given, else a planted Hamiltonian graph."""
    if cfg.instance is not None:
        x, cycle = _instance_file(cfg.instance)
        return x, list(cycle)
    return planted_hamiltonian(VERTICES, EXTRA_EDGES, rng)


def no_instance() -> Graph:
    return star(VERTICES)


def make_transport(cfg: ExperimentConfig) -> Transport:
    if cfg.transport == "tcp":
        return TcpTransport()
    return InProcTransport()


def verifier_set(cfg: ExperimentConfig) -> list[VerifierSpec]:
    """The whole zoo for verifier="zoo", else the one named verifier."""
    rng = trial_rng(cfg.seed, 0)
    if cfg.verifier == "zoo":
        return list(build_zoo(rng, cfg.m))
    return [verifier_by_name(cfg.verifier, cfg.m, rng)]


def honest_session(
    cfg: ExperimentConfig, prover: ProverParty, x: Graph, i: int, rng: np.random.Generator
) -> Transcript:
    verifier = HonestVerifier(VerifierState.fresh(f"{cfg.name}-{i}", x, cfg.lam, rng, cfg.t))
    return run_session(prover, verifier, make_transport(cfg), rng)


def _verdict(transcript: Transcript) -> Verdict:
    assert transcript.verdict is not None
    return transcript.verdict


def _check(
    name: str,
    value: float,
    bound: float | None,
    passed: bool,
    provenance: str,
    tolerance: float | None = None,
) -> Metric:
    return Metric(
        name=name,
        value=value,
        bound=bound,
        tolerance=tolerance,
        passed=passed,
        provenance=provenance,
    )


def _info(name: str, value: float, reference: float | None, provenance: str) -> Metric:
    return Metric(name=name, value=value, bound=reference, passed=True, provenance=provenance, graded=False)


def _at_most(
    name: str, observed: float, bound: float, n: int, cfg: ExperimentConfig, provenance: str
) -> Metric:
    tol = binomial_tolerance(bound, n, cfg.sigmas)
    return _check(name, observed, bound, observed <= bound + tol, provenance, tol)


def _near(
    name: str, observed: float, expected: float, n: int, cfg: ExperimentConfig, provenance: str
) -> Metric:
    tol = binomial_tolerance(expected, n, cfg.sigmas)
    return _check(name, observed, expected, abs(observed - expected) <= tol, provenance, tol)


def _mean_at_most(
    name: str, samples: list[float], bound: float, cfg: ExperimentConfig, provenance: str
) -> Metric:
    mean, se = mean_sigma(samples)
    tol = cfg.sigmas * se
    return _check(name, mean, bound, mean <= bound + tol, provenance, tol)


# ---------- protocol ----------


@experiment("completeness")
def _completeness(cfg: ExperimentConfig) -> Findings:
    def trial(i: int, rng: np.random.Generator) -> Verdict:
        x, cycle = yes_instance(cfg, rng)
        return _verdict(honest_session(cfg, HonestProver(cycle), x, i, rng))

    verdicts = map_trials(cfg, trial)
    accepted = sum(v.accepted for v in verdicts)
    metric = _check(
        "accept_rate", accepted / len(verdicts), 1.0, accepted == len(verdicts), COMPLETENESS
    )
    return [metric], {"verdicts": histogram([str(v) for v in verdicts])}


@experiment("challenge-uniformity")
def _challenge_uniformity(cfg: ExperimentConfig) -> Findings:
    # a prover without a witness still reaches round 8, so both coin rounds are observed cheaply
    def trial(i: int, rng: np.random.Generator) -> tuple[Bits, Bits]:
        x, _ = yes_instance(cfg, rng)
        transcript = honest_session(cfg, HonestProver(None, DecidingStrategy()), x, i, rng)
        b, e = transcript.by_round(3), transcript.by_round(8)
        assert b is not None and e is not None
        return b.payload["b"].astype(np.uint8), e.payload["e"].astype(np.uint8)

    pairs = map_trials(cfg, trial)
    n = len(pairs)
    b_ones = np.stack([b for b, _ in pairs]).sum(axis=0)
    e_bits = np.concatenate([e for _, e in pairs])
    band = binomial_tolerance(0.5, n, cfg.sigmas)
    off = [i for i, ones in enumerate(b_ones) if abs(ones / n - 0.5) > band]
    total_b = int(b_ones.sum())
    pooled_b = chi2_gof([n * cfg.lam - total_b, total_b], [0.5, 0.5])
    pooled_e = chi2_gof([e_bits.size - int(e_bits.sum()), int(e_bits.sum())], [0.5, 0.5])
    metrics = [
        _check("b_positions_outside_band", len(off), 0, not off, UNIFORM_B, band),
        _check("b_chi2_p", pooled_b.p_value, cfg.alpha, pooled_b.passes(cfg.alpha), UNIFORM_B),
        _check("e_chi2_p", pooled_e.p_value, cfg.alpha, pooled_e.passes(cfg.alpha), UNIFORM_E),
    ]
    return metrics, {"b_ones": {str(i): int(v) for i, v in enumerate(b_ones)}}


@experiment("replay")
def _replay(cfg: ExperimentConfig) -> Findings:
    def trial(i: int, rng: np.random.Generator) -> tuple[str, Transcript]:
        name = PROVERS[i % len(PROVERS)]
        x, cycle = yes_instance(cfg, rng)
        target = x if name == "honest" else no_instance()
        return name, honest_session(cfg, prover_by_name(name, cycle, rng), target, i, rng)

    results = map_trials(cfg, trial)
    mismatches = 0
    seen: list[str] = []
    with tempfile.TemporaryDirectory() as tmp:
        for i, (name, transcript) in enumerate(results):
            path = Path(tmp) / f"session-{i}.jsonl"
            save_transcript(transcript, path)
            if not verify_transcript(load_transcript(path)):
                mismatches += 1
                logger.warning("transcript %d (%s) does not replay to its verdict", i, name)
            seen.append(f"{name}: {_verdict(transcript)}")
    metric = _check("replay_mismatches", mismatches, 0, mismatches == 0, REPLAY)
    return [metric], {"verdicts": histogram(seen)}


@experiment("soundness-guessing")
def _soundness_guessing(cfg: ExperimentConfig) -> Findings:
    def trial(i: int, rng: np.random.Generator) -> bool:
        return _verdict(honest_session(cfg, guessing_prover(rng), no_instance(), i, rng)).accepted

    wins = map_trials(cfg, trial)
    n = len(wins)
    rate = sum(wins) / n
    metrics = [
        _at_most("accept_rate", rate, cfg.lam / 2**cfg.lam, n, cfg, HIDDEN_TRAPDOOR),
        _near("accept_rate_vs_exact", rate, guessing_success(cfg.lam, cfg.t), n, cfg, GUESS_EXACT),
    ]
    return metrics, {"accepted": histogram(wins)}


@experiment("soundness-mauling")
def _soundness_mauling(cfg: ExperimentConfig) -> Findings:
    bound = 2.0**-cfg.t

    def mauling(i: int, rng: np.random.Generator) -> bool:
        return _verdict(honest_session(cfg, mauling_prover(), no_instance(), i, rng)).accepted

    def wi_guess(i: int, rng: np.random.Generator) -> bool:
        return _verdict(honest_session(cfg, wi_guessing_prover(), no_instance(), i, rng)).accepted

    a = map_trials(cfg, mauling)
    b = map_trials(cfg, wi_guess, offset=cfg.trials)
    metrics = [
        _at_most("mauling_accept_rate", sum(a) / len(a), bound, len(a), cfg, MAULING),
        _at_most("wi_guess_accept_rate", sum(b) / len(b), bound, len(b), cfg, WI_SOUND),
    ]
    return metrics, {"mauling": histogram(a), "wi_guess": histogram(b)}


@experiment("binding")
def _binding(cfg: ExperimentConfig) -> Findings:
    if cfg.lam > 8:
        raise ConfigError("the binding check is exhaustive and limited to lam <= 8")
    frac = binding_bad_fraction(cfg.lam)
    bound = 2.0**-cfg.lam
    return [_check("bad_receiver_fraction", frac, bound, frac <= bound, BINDING)], {}


# ---------- simulator ----------


@experiment("mixed-state-bound")
def _mixed_state_bound(cfg: ExperimentConfig) -> Findings:
    def trial(i: int, rng: np.random.Generator) -> tuple[int, float, bool]:
        m = int(rng.integers(1, cfg.m + 1))
        rep = bound_check(random_effect(m, rng), cfg.lam)
        return m, rep.p_prime - rep.lower, rep.holds

    rows = map_trials(cfg, trial)
    violations = sum(not holds for _, _, holds in rows)
    slack = min(s for _, s, _ in rows)
    metrics = [
        _check("violations", violations, 0, violations == 0, MIXED_BOUND),
        _check("min_slack", slack, 0.0, slack >= -1e-9, MIXED_BOUND, 1e-9),
    ]
    return metrics, {"m": histogram([m for m, _, _ in rows])}


@experiment("sim-iterations")
def _sim_iterations(cfg: ExperimentConfig) -> Findings:
    spec = quantum_coin(m=cfg.m)
    rep = bound_check(spec, cfg.lam)
    lookahead = rep.p / rep.p_prime if rep.p_prime > 0 else math.inf

    def trial(i: int, rng: np.random.Generator) -> tuple[int, int, bool]:
        x, _ = yes_instance(cfg, rng)
        try:
            view = simulate_spec(spec, x, cfg.lam, rng, cfg.t, f"{cfg.name}-{i}", cfg.budget)
        except IterationBudgetExceeded as e:
            return e.iterations, cfg.budget, True
        return view.iterations, sum(view.channel_calls.values()), False

    rows = map_trials(cfg, trial)
    iters = [float(it) for it, _, _ in rows]
    calls = [float(c) for _, c, _ in rows]
    hits = sum(hit for _, _, hit in rows)
    metrics = [
        _mean_at_most("mean_iterations", iters, 2.0 ** (cfg.m + 1), cfg, ITER_BOUND),
        _mean_at_most("mean_iterations_vs_p", iters, (1 - rep.p) + lookahead, cfg, ITER_EXPECTED),
        _mean_at_most("mean_channel_calls", calls, MAIN_THREAD_CALLS + lookahead, cfg, CALLS),
        _check("budget_hits", hits, 0, hits == 0, VALVE),
    ]
    return metrics, {"iterations": histogram([int(i) for i in iters])}


@experiment("termination-tail")
def _termination_tail(cfg: ExperimentConfig) -> Findings:
    spec = quantum_coin(m=cfg.m)
    x, _ = yes_instance(cfg, trial_rng(cfg.seed, 0))
    rep = termination_tail(spec, x, cfg.lam, cfg.trials, trial_rng(cfg.seed, 1), cfg.budget)
    tail = _at_most("tail", rep.tail, rep.bound, max(rep.runs, 1), cfg, TAIL)
    tail.passed = tail.passed and rep.runs > 0
    expected = 1 / rep.p_prime if rep.p_prime > 0 else None
    metrics = [
        tail,
        _info("mean_iterations", rep.mean_iterations, expected, ITER_EXPECTED),
        _check("budget_hits", rep.budget_hits, 0, rep.budget_hits == 0, VALVE),
    ]
    return metrics, {"entered": {"runs": rep.runs, "total": cfg.trials}}


@experiment("space")
def _space(cfg: ExperimentConfig) -> Findings:
    specs = verifier_set(cfg)

    def trial(i: int, rng: np.random.Generator) -> tuple[str, int, int]:
        spec = specs[i % len(specs)]
        x, _ = yes_instance(cfg, rng)
        try:
            view = simulate_spec(spec, x, cfg.lam, rng, cfg.t, f"{cfg.name}-{i}", cfg.budget)
        except IterationBudgetExceeded:
            return spec.name, -1, spec.m
        return spec.name, view.peak_qubits, spec.m

    rows = map_trials(cfg, trial, count=cfg.trials * len(specs), offset=1)
    done = [(name, peak, m) for name, peak, m in rows if peak >= 0]
    over = sum(peak > 2 * m for _, peak, m in done)
    worst = max((peak / (2 * m) for _, peak, m in done), default=0.0)
    skipped = len(rows) - len(done)
    metrics = [
        _check("space_violations", over, 0, over == 0 and bool(done), SPACE),
        _check("max_peak_ratio", worst, 1.0, worst <= 1.0, SPACE),
        _check("budget_hits", skipped, 0, skipped == 0, VALVE),
    ]
    return metrics, {"peak": histogram([f"{name}:{peak}" for name, peak, _ in done])}


def _observable(transcript: Transcript, watch: tuple[int, ...] = ()) -> str:
    """Verdict (with its abort step) plus the challenge bits b.

    Short challenges are kept whole. Longer ones collapse to their Hamming
    weight, clamped to mid +- 2 so chi-square cells stay populated, plus the
    positions the verifier's rules watch.
    """
    head = str(_verdict(transcript))
    msg = transcript.by_round(3)
    if msg is None:
        return head
    b = np.asarray(msg.payload["b"], dtype=np.uint8)
    if b.size <= FULL_CHALLENGE_BITS:
        return f"{head}|b={''.join(str(v) for v in b.tolist())}"
    mid = b.size // 2
    weight = min(max(int(b.sum()), mid - 2), mid + 2)
    watched = "".join(str(int(b[j])) for j in watch if j < b.size)
    return f"{head}|w={weight}|watched={watched}"


def _watched_bits(spec: VerifierSpec) -> tuple[int, ...]:
    return tuple(sorted({j for rule in spec.rules for j in rule.watch}))


def _view_pair(
    cfg: ExperimentConfig, spec: VerifierSpec, offset: int
) -> tuple[list[str], list[str]]:
    watch = _watched_bits(spec)

    def real(i: int, rng: np.random.Generator) -> str:
        x, cycle = yes_instance(cfg, rng)
        verifier = OracleVerifier(
            make_oracle(spec), spec.advice, f"real-{i}", x, cfg.lam, rng, cfg.t
        )
        transcript = run_session(HonestProver(cycle), verifier, InProcTransport(encode=False), rng)
        return _observable(transcript, watch)

    def sim(i: int, rng: np.random.Generator) -> str:
        x, cycle = yes_instance(cfg, rng)
        # witness hybrids prove x_wi with the cycle; witness-zero also commits 0 in c*
        strategy = SimStrategy(
            cycle=None if cfg.hybrid == "trapdoor" else cycle,
            zero_rstar=cfg.hybrid == "witness-zero",
        )
        view = simulate_spec(spec, x, cfg.lam, rng, cfg.t, f"sim-{i}", cfg.budget, strategy)
        return _observable(view.transcript, watch)

    return map_trials(cfg, real, offset=offset), map_trials(cfg, sim, offset=offset + cfg.trials)


@experiment("view-indistinguishability")
def _view_indistinguishability(cfg: ExperimentConfig) -> Findings:
    metrics: list[Metric] = []
    hists: dict[str, dict[str, int]] = {}
    for j, spec in enumerate(verifier_set(cfg)):
        real, sim = _view_pair(cfg, spec, offset=1 + 2 * j * cfg.trials)
        hr, hs = histogram(list(real)), histogram(list(sim))
        res = chi2_test(*align(hr, hs))
        metrics.append(
            _check(f"chi2_p:{spec.name}", res.p_value, cfg.alpha, res.passes(cfg.alpha), VIEWS)
        )
        hists[f"real:{spec.name}"] = hr
        hists[f"sim:{spec.name}"] = hs
    return metrics, hists


@experiment("channel-blocks")
def _channel_blocks(cfg: ExperimentConfig) -> Findings:
    """Repeat-until-success channel: H, measure, halt on 0. Blocks are geometric(1/2)."""
    coin = UnitaryDescriptor.identity(1).add("H", 0)

    def again(
        c: bytes, u: UnitaryDescriptor | None, ell: int, outcome: Bits
    ) -> tuple[bytes, UnitaryDescriptor | None, int]:
        return (c, u, 1) if outcome[0] else (c, None, 0)

    def trial(i: int, rng: np.random.Generator) -> tuple[int, bool]:
        start = HybridState(b"", coin, 1, QState.zero(1))
        blocks = run_channel(start, again, rng, cfg.budget).blocks_executed
        try:
            run_channel(start, again, rng, max_blocks=1)
        except NonTermination:
            return blocks, True
        return blocks, False

    rows = map_trials(cfg, trial)
    n = len(rows)
    blocks = [float(b) for b, _ in rows]
    mean, _ = mean_sigma(blocks)
    tol = cfg.sigmas * math.sqrt(2 / n)
    strict = sum(s for _, s in rows) / n
    metrics = [
        _check("mean_blocks", mean, 2.0, abs(mean - 2.0) <= tol, BLOCKS, tol),
        _near("strict_nontermination_rate", strict, 0.5, n, cfg, STRICT),
    ]
    return metrics, {"blocks": histogram([int(b) for b in blocks])}


# ---------- subspace ----------


@experiment("subspace-test")
def _subspace_test(cfg: ExperimentConfig) -> Findings:
    n, k = cfg.n, cfg.n // 2

    def trial(i: int, rng: np.random.Generator) -> tuple[int, float, float | None, float | None]:
        a = sample_subspace(n, k, rng)
        flag, post = test_state(SubspaceOracleHandle(a), prepare_state(a), rng)
        fid = fidelity(post, a.state_vector())
        try:
            basis = orthonormal_basis(a)
        except BasisNotOrthonormal:
            return flag, fid, None, None
        out = apply_unitary(QState.zero(k + n), build_CA(a, basis))
        target = np.kron(QState.zero(k).data, a.state_vector())
        ca_err = float(np.max(np.abs(out.data - target)))
        rho = random_state(n, rng)
        seed = int(rng.integers(2**32))
        o1, p1 = project_A(a, rho, np.random.default_rng(seed), "direct")
        o2, p2 = project_A(a, rho, np.random.default_rng(seed), "ca")
        if o1 != o2:
            return flag, fid, ca_err, math.inf
        return flag, fid, ca_err, float(np.max(np.abs(p1.density() - p2.density())))

    rows = map_trials(cfg, trial)
    runs = len(rows)
    passes = sum(flag for flag, _, _, _ in rows)
    min_fid = min(fid for _, fid, _, _ in rows)
    ca = [e for _, _, e, _ in rows if e is not None]
    proj = [e for _, _, _, e in rows if e is not None]
    ca_err = max(ca, default=0.0)
    proj_err = max(proj, default=0.0)
    metrics = [
        _check("test_pass_rate", passes / runs, 1.0, passes == runs, TEST_PASS),
        _check(
            "min_post_fidelity", min_fid, 1.0, min_fid >= 1 - FIDELITY_TOL, TEST_FIDELITY, FIDELITY_TOL
        ),
        _check("bases_checked", len(ca), None, bool(ca), BASIS),
        _check("max_ca_error", ca_err, 0.0, ca_err <= FIDELITY_TOL, CA_MAP, FIDELITY_TOL),
        _check(
            "max_projection_error", proj_err, 0.0, proj_err <= PROJECTION_TOL, PROJECTION, PROJECTION_TOL
        ),
    ]
    return metrics, {"orthonormal_basis": {"found": len(ca), "none": runs - len(ca)}}


@experiment("clone-floor")
def _clone_floor(cfg: ExperimentConfig) -> Findings:
    n = cfg.n
    floors = {"measure_and_resend": 2.0**-n, "identity_pad": 2.0 ** -(n / 2)}
    metrics: list[Metric] = []
    hists: dict[str, dict[str, int]] = {}
    for j, (strategy, expected) in enumerate(floors.items()):
        res = clone_experiment(strategy, n, cfg.trials, trial_rng(cfg.seed, j))
        exact = math.isclose(res.exact_mean, expected, rel_tol=1e-9)
        metrics.append(_near(f"{strategy}_rate", res.success_rate, expected, cfg.trials, cfg, CLONE_FLOOR))
        metrics.append(_check(f"{strategy}_exact", res.exact_mean, expected, exact, CLONE_FLOOR, 1e-9))
        hists[strategy] = {"success": round(res.success_rate * cfg.trials), "trials": cfg.trials}
    if cfg.strategy not in floors:
        res = clone_experiment(cfg.strategy, n, cfg.trials, trial_rng(cfg.seed, len(floors)))
        rate = _near(f"{cfg.strategy}_rate", res.success_rate, res.exact_mean, cfg.trials, cfg, CLONE_QUERIES)
        metrics.append(rate)
        hists[cfg.strategy] = {"queries": res.queries_total, "trials": cfg.trials}
    return metrics, hists


# ---------- impossibility ----------


def _probe_trial(
    cfg: ExperimentConfig, policy: SimPolicy
) -> Callable[[int, np.random.Generator], tuple[bool | None, EventCounters]]:
    def trial(i: int, rng: np.random.Generator) -> tuple[bool | None, EventCounters]:
        x, _ = yes_instance(cfg, rng)
        outcome, events = run_policy(policy, x, cfg.lam, cfg.n, rng, cfg.t, f"vp-{i}")
        return outcome.probe_successful, events

    return trial


@experiment("impossibility-structure")
def _impossibility_structure(cfg: ExperimentConfig) -> Findings:
    floor = 2.0 ** -(cfg.n / 2)

    def in_order(i: int, rng: np.random.Generator) -> EventCounters:
        x, _ = yes_instance(cfg, rng)
        return run_policy(straight_line, x, cfg.lam, cfg.n, rng, cfg.t, f"vp-{i}")[1]

    base = EventCounters()
    for ev in map_trials(cfg, in_order):
        base.merge(ev)
    metrics = [_check("in_order_events", base.total(), 0, base.total() == 0, IN_ORDER)]
    hists = {"in_order": base.as_dict()}
    forged = base.forged

    for j, name in enumerate(("out_of_order", "repeat_query")):
        probe = _probe_trial(cfg, policy_by_name(name, cfg.probe))
        rows = map_trials(cfg, probe, offset=(j + 1) * cfg.trials)
        probes = [p for p, _ in rows if p is not None]
        merged = EventCounters()
        for _, ev in rows:
            merged.merge(ev)
        forged += merged.forged
        rate = sum(probes) / len(probes) if probes else 0.0
        metric = _at_most(f"{name}_probe_rate", rate, floor, max(len(probes), 1), cfg, PROBE)
        metric.passed = metric.passed and bool(probes)
        metrics.append(metric)
        hists[name] = merged.as_dict()

    metrics.append(_check("forged_tag_events", forged, 0, forged == 0, FORGED))
    return metrics, hists


@experiment("extraction")
def _extraction(cfg: ExperimentConfig) -> Findings:
    prover = ExtractedProver(policy_by_name(cfg.policy, cfg.probe), cfg.n, cfg.ciphertext)

    def against(yes: bool) -> Callable[[int, np.random.Generator], tuple[bool, list[str]]]:
        def trial(i: int, rng: np.random.Generator) -> tuple[bool, list[str]]:
            x = yes_instance(cfg, rng)[0] if yes else no_instance()
            verifier = HonestVerifier(VerifierState.fresh(f"ext-{i}", x, cfg.lam, rng, cfg.t))
            res = prover.run(make_transport(cfg).connect(verifier, rng), rng)
            return res.accepted, res.tags

        return trial

    yes = map_trials(cfg, against(True))
    no = map_trials(cfg, against(False), offset=cfg.trials)
    yes_rate = sum(a for a, _ in yes) / len(yes)
    no_rate = sum(a for a, _ in no) / len(no)
    gap = yes_rate - no_rate
    target = EXTRACTION_YES - EXTRACTION_NO
    metrics = [
        _check("yes_accept_rate", yes_rate, EXTRACTION_YES, yes_rate >= EXTRACTION_YES, EXTRACTION),
        _check("no_accept_rate", no_rate, EXTRACTION_NO, no_rate <= EXTRACTION_NO, EXTRACTION),
        _check("decision_gap", gap, target, gap >= target, EXTRACTION),
    ]
    tags = [tag for _, ts in yes + no for tag in ts]
    return metrics, ({"tags": histogram(tags)} if tags else {})


# ---------- runner ----------


def run_experiment(cfg: ExperimentConfig) -> Report:
    runner = EXPERIMENTS.get(cfg.experiment)
    if runner is None:
        raise ConfigError(f"Unknown experiment '{cfg.experiment}'; known: {sorted(EXPERIMENTS)}")
    logger.info(
        "experiment %s (%s): lam=%d trials=%d seed=%d",
        cfg.name,
        cfg.experiment,
        cfg.lam,
        cfg.trials,
        cfg.seed,
    )
    start = time.perf_counter()
    metrics, histograms = runner(cfg)
    elapsed = time.perf_counter() - start
    report = Report(config=cfg, metrics=metrics, histograms=histograms, wall_clock=round(elapsed, 3))
    logger.info("experiment %s %s in %.2fs", cfg.name, "passed" if report.passed else "FAILED", elapsed)
    return report
