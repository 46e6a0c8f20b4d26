from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from qzk_lab.core.errors import (
    BudgetExceeded,
    DimensionError,
    FormatError,
    ImpossibleBranch,
    InvalidEffect,
    NonTermination,
    PostprocessError,
)
from qzk_lab.core.qsim import (
    HybridState,
    QState,
    QubitBudget,
    UnitaryDescriptor,
    apply_unitary,
    discard_prefix,
    dump_state,
    fidelity,
    load_state,
    maximally_mixed,
    measure_prefix,
    povm_prob,
    project_basis,
    reset_prefix,
    run_block,
    run_channel,
    tensor,
)

BELL = UnitaryDescriptor.identity(2).add("H", 0).add("CNOT", 0, 1)


def test_qubit_zero_is_most_significant():
    out = apply_unitary(QState.zero(3), UnitaryDescriptor.identity(3).add("X", 0))
    assert np.argmax(np.abs(out.data)) == 0b100


def test_bell_state_amplitudes():
    out = apply_unitary(QState.zero(2), BELL)
    expected = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(out.data, expected)


def test_pure_and_density_paths_agree():
    u = BELL.add("T", 1).add("H", 1)
    psi = apply_unitary(QState.zero(2), u)
    rho = apply_unitary(QState.zero(2).to_density(), u)
    assert np.allclose(psi.density(), rho.data)


def test_dagger_undoes_descriptor():
    u = UnitaryDescriptor.identity(3).add("H", 0).add("T", 1).add("TOFFOLI", 0, 1, 2).add("SWAP", 0, 2)
    assert np.allclose(u.then(u.dagger()).matrix(), np.eye(8))


def test_shifted_relocates_gates():
    u = UnitaryDescriptor.identity(1).add("X", 0).shifted(2, 3)
    out = apply_unitary(QState.zero(3), u)
    assert np.argmax(np.abs(out.data)) == 0b001


@pytest.mark.parametrize(
    "build",
    [
        lambda: UnitaryDescriptor.identity(2).add("CNOT", 0),
        lambda: UnitaryDescriptor.identity(2).add("CNOT", 1, 1),
        lambda: UnitaryDescriptor.identity(2).add("H", 2),
        lambda: UnitaryDescriptor.identity(2).add("U", 0, matrix=np.eye(4)),
    ],
)
def test_malformed_descriptors_raise(build):
    with pytest.raises(DimensionError):
        build()


def test_arity_mismatch_and_bottom():
    with pytest.raises(DimensionError):
        apply_unitary(QState.zero(2), UnitaryDescriptor.identity(3))
    with pytest.raises(PostprocessError):
        apply_unitary(QState.zero(1), None)


def test_measure_prefix_collapses(rng):
    bell = apply_unitary(QState.zero(2), BELL)
    outcome, post = measure_prefix(bell, 1, rng)
    idx = 0b11 if outcome[0] else 0b00
    assert abs(post.data[idx]) == pytest.approx(1.0)


def test_forced_outcome_and_impossible_branch(rng):
    bell = apply_unitary(QState.zero(2), BELL)
    outcome, _ = measure_prefix(bell, 2, rng, forced=3)
    assert outcome.tolist() == [1, 1]
    with pytest.raises(ImpossibleBranch):
        measure_prefix(bell, 2, rng, forced=1)


def test_reset_prefix_moves_block_to_zero():
    state = QState.from_bits([1, 0, 1])
    out = reset_prefix(state, 2, 0b10)
    assert np.argmax(np.abs(out.data)) == 0b001


@given(st.integers(min_value=1, max_value=4), st.integers(min_value=0, max_value=2**31))
@settings(max_examples=25, deadline=None)
def test_random_circuits_preserve_norm(m, seed):
    rng = np.random.default_rng(seed)
    u = UnitaryDescriptor.identity(m)
    for _ in range(6):
        q = int(rng.integers(m))
        u = u.add(["H", "T", "X", "Z"][int(rng.integers(4))], q)
    out = apply_unitary(QState.zero(m), u)
    out.validate()


def test_validate_rejects_bad_density():
    with pytest.raises(DimensionError):
        QState(1, np.array([[1, 1], [0, 0]])).validate()
    with pytest.raises(DimensionError):
        QState(1, np.diag([0.5, 0.2])).validate()
    with pytest.raises(DimensionError):
        QState(2, np.zeros(3))


def test_block_model_halts_on_bottom(rng):
    coin = UnitaryDescriptor.identity(1).add("H", 0)

    def until_zero(c, u, ell, outcome):
        return (c + b"+", u, 1) if outcome[0] else (c, None, 0)

    res = run_channel(HybridState(b"", coin, 1, QState.zero(1)), until_zero, rng)
    assert res.blocks_executed == len(res.outcomes) >= 1
    assert res.outcomes[-1].tolist() == [0]
    assert res.classical == b"+" * (res.blocks_executed - 1)


def test_strict_channel_raises_nontermination(rng):
    spin = UnitaryDescriptor.identity(1)

    def forever(c, u, ell, outcome):
        return c, u, 0

    with pytest.raises(NonTermination):
        run_channel(HybridState(b"", spin, 0, QState.zero(1)), forever, rng, max_blocks=5)


def test_postprocess_measure_count_checked(rng):
    def bad(c, u, ell, outcome):
        return c, u, 7

    with pytest.raises(PostprocessError):
        run_block(HybridState(b"", UnitaryDescriptor.identity(1), 0, QState.zero(1)), bad, rng)
    with pytest.raises(DimensionError):
        HybridState(b"", None, 2, QState.zero(1))


def test_povm_prob_and_effect_validation():
    effect = np.diag([1.0, 0.0]).astype(np.complex128)
    assert povm_prob(effect, maximally_mixed(1)) == pytest.approx(0.5)
    assert povm_prob(effect, QState.zero(1)) == pytest.approx(1.0)
    with pytest.raises(InvalidEffect):
        povm_prob(np.diag([2.0, 0.0]), QState.zero(1))
    with pytest.raises(DimensionError):
        povm_prob(np.eye(4), QState.zero(1))


def test_qubit_budget_tracks_peak():
    budget = QubitBudget(4)
    with budget.hold(3):
        with pytest.raises(BudgetExceeded):
            budget.allocate(2)
        budget.allocate(1)
        budget.release(1)
    assert budget.used == 0
    assert budget.peak_used == 4


def test_qubit_budget_rejects_over_release():
    budget = QubitBudget(4)
    budget.allocate(2)
    with pytest.raises(DimensionError):
        budget.release(3)
    assert budget.used == 2
    with pytest.raises(DimensionError):
        budget.release(-1)


def test_tensor_and_discard_prefix():
    plus = apply_unitary(QState.zero(1), UnitaryDescriptor.identity(1).add("H", 0))
    joint = tensor(QState.basis(1, 1), plus)
    rest = discard_prefix(joint, 1)
    assert rest.is_pure
    assert fidelity(rest, plus.data) == pytest.approx(1.0)
    bell = apply_unitary(QState.zero(2), BELL)
    assert np.allclose(discard_prefix(bell, 1).data, np.eye(2) / 2)


def test_project_basis():
    bell = apply_unitary(QState.zero(2), BELL)
    p, post = project_basis(bell, 1, 1)
    assert p == pytest.approx(0.5)
    assert post is not None and abs(post.data[3]) == pytest.approx(1.0)
    assert project_basis(QState.zero(2), 1, 1) == (0.0, None)


def test_state_dump_roundtrip_and_rejection():
    rho = maximally_mixed(2)
    assert np.allclose(load_state(dump_state(rho)).data, rho.data)
    with pytest.raises(FormatError):
        load_state(b"QST0\x01\x00\x00\x00")
    with pytest.raises(FormatError):
        load_state(dump_state(QState.zero(2))[:-16])
