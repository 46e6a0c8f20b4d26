from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from qzk_lab.core import subspace
from qzk_lab.core.errors import BasisNotOrthonormal, ConfigError, DimensionError, FormatError
from qzk_lab.core.qsim import QState, apply_unitary, fidelity
from qzk_lab.core.subspace import (
    Subspace,
    SubspaceOracleHandle,
    build_CA,
    clone_experiment,
    is_orthonormal,
    orthonormal_basis,
    prepare_state,
    project_A,
    sample_subspace,
)


def test_span_is_canonical_and_membership():
    a = Subspace.span(4, ["1100", "0110"])
    b = Subspace.span(4, ["1010", "0110"])
    assert a == b
    assert a.members().tolist() == [0b0000, 0b0110, 0b1010, 0b1100]
    assert a.contains(0b1010)
    assert not a.contains(0b0001)
    assert Subspace(4, ()).contains(0)


def test_dependent_rows_rejected():
    with pytest.raises(DimensionError):
        Subspace.span(3, ["110", "011", "101"])


def test_intersection_dim():
    a = Subspace.span(4, ["1000", "0100"])
    b = Subspace.span(4, ["0100", "0010"])
    assert a.intersection_dim(b) == 1
    with pytest.raises(DimensionError):
        a.intersection_dim(Subspace.span(3, ["100"]))


def test_state_vector_is_uniform_and_normalized(rng):
    a = sample_subspace(6, 3, rng)
    v = a.state_vector()
    assert np.count_nonzero(v) == 8
    assert np.vdot(v, v).real == pytest.approx(1.0)


def test_sub1_roundtrip_and_rejection(rng):
    a = sample_subspace(10, 5, rng)
    assert Subspace.from_bytes(a.to_bytes()) == a
    blob = a.to_bytes()
    with pytest.raises(FormatError):
        Subspace.from_bytes(b"SUB0" + blob[4:])
    with pytest.raises(FormatError):
        Subspace.from_bytes(blob[:-1])
    # rows 0110, 1100 span a valid subspace but are not in reduced echelon order
    raw = b"SUB1" + bytes([4, 0, 2, 0]) + bytes([0b0110, 0b0011])
    with pytest.raises(FormatError):
        Subspace.from_bytes(raw)


def test_sample_subspace_range(rng):
    assert sample_subspace(4, 0, rng).dim == 0
    with pytest.raises(DimensionError):
        sample_subspace(4, 5, rng)


@given(st.integers(min_value=0, max_value=2**31))
@settings(max_examples=20, deadline=None)
def test_subspace_state_passes_the_oracle_test(seed):
    rng = np.random.default_rng(seed)
    a = sample_subspace(6, 3, rng)
    for state in (prepare_state(a), prepare_state(a).to_density()):
        flag, post = subspace.test_state(SubspaceOracleHandle(a), state, rng)
        assert flag == 1
        assert fidelity(post, a.state_vector()) == pytest.approx(1.0, abs=1e-12)


def test_oracle_counts_queries_and_checks_width(rng):
    a = sample_subspace(4, 2, rng)
    h = SubspaceOracleHandle(a)
    subspace.test_state(h, prepare_state(a), rng)
    subspace.apply_UA(h, QState.zero(5))
    assert h.query_counter == 2
    with pytest.raises(DimensionError):
        h.apply(QState.zero(4))


def test_orthogonal_state_fails_the_oracle_test(rng):
    a = Subspace.span(2, ["11"])
    # (|00> - |11>)/sqrt2 is orthogonal to |A> = (|00> + |11>)/sqrt2
    minus = QState(2, np.array([1, 0, 0, -1]) / np.sqrt(2))
    flag, _ = subspace.test_state(SubspaceOracleHandle(a), minus, rng)
    assert flag == 0


@given(st.integers(min_value=0, max_value=2**31), st.sampled_from([(4, 2), (6, 3), (8, 4)]))
@settings(max_examples=30, deadline=None)
def test_orthonormal_basis_spans_the_same_subspace(seed, shape):
    n, k = shape
    a = sample_subspace(n, k, np.random.default_rng(seed))
    try:
        basis = orthonormal_basis(a)
    except BasisNotOrthonormal:
        return
    assert is_orthonormal(basis)
    assert Subspace.from_rows(n, list(basis)) == a


def test_even_subspace_has_no_orthonormal_basis():
    with pytest.raises(BasisNotOrthonormal):
        orthonormal_basis(Subspace.span(4, ["1100"]))
    with pytest.raises(BasisNotOrthonormal):
        build_CA(Subspace.span(4, ["1100"]))


def test_ca_prepares_subspace_state():
    a = Subspace.span(4, ["1000", "0111"])
    basis = orthonormal_basis(a)
    out = apply_unitary(QState.zero(6), build_CA(a, basis))
    target = np.kron(QState.zero(2).data, a.state_vector())
    assert np.allclose(out.data, target, atol=1e-12)


def test_projection_routes_agree(rng):
    a = Subspace.span(4, ["1000", "0111"])
    rho = QState(4, rng.normal(size=16) + 1j * rng.normal(size=16))
    rho = QState(4, rho.data / np.linalg.norm(rho.data))
    o1, p1 = project_A(a, rho, np.random.default_rng(5), "direct")
    o2, p2 = project_A(a, rho, np.random.default_rng(5), "ca")
    assert o1 == o2
    assert np.allclose(p1.density(), p2.density(), atol=1e-9)


def test_projection_accepts_subspace_state_and_rejects_bad_route(rng):
    a = Subspace.span(4, ["1000", "0111"])
    outcome, post = project_A(a, prepare_state(a), rng, "ca")
    assert outcome == 0
    assert fidelity(post, a.state_vector()) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        project_A(a, prepare_state(a), rng, "sideways")


@pytest.mark.parametrize("n", [4, 6])
def test_clone_floors_are_exact(n, rng):
    mr = clone_experiment("measure_and_resend", n, 50, rng)
    pad = clone_experiment("identity_pad", n, 50, rng)
    assert mr.exact_mean == pytest.approx(2.0**-n)
    assert pad.exact_mean == pytest.approx(2.0 ** -(n / 2))
    assert mr.queries_total == pad.queries_total == 0


def test_one_grover_query_clones_at_n4(rng):
    res = clone_experiment("oracle_grover_budget(1)", 4, 20, rng)
    assert res.exact_mean == pytest.approx(1.0)
    assert res.per_trial_queries == [1] * 20


def test_clone_strategy_names_validated(rng):
    with pytest.raises(ConfigError):
        clone_experiment("photocopier", 4, 1, rng)
    with pytest.raises(ConfigError):
        clone_experiment("oracle_grover_budget", 4, 1, rng)
