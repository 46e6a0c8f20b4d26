"""
Exact simulator for the hybrid classical/quantum computational model.

An M-qubit machine runs blocks: apply a unitary, measure a prefix of qubits,
hand the outcome to a classical post-processing function, reset the measured
prefix. A channel is a sequence of blocks that stops when the post-processing
returns BOTTOM. States are pure vectors or density matrices; qubit 0 is the
most significant bit of a basis index.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
import logging
import math
import struct

import numpy as np
from numpy.typing import NDArray

from qzk_lab.core.bits import Bits, bits_to_int, int_to_bits
from qzk_lab.core.errors import (
    BudgetExceeded,
    DimensionError,
    FormatError,
    ImpossibleBranch,
    InvalidEffect,
    NonTermination,
    PostprocessError,
)

logger = logging.getLogger(__name__)

TOL = 1e-9
QST_MAGIC = b"QST1"
DEFAULT_MAX_BLOCKS = 10_000

Matrix = NDArray[np.complex128]

_S2 = 1 / math.sqrt(2)
_FIXED: dict[str, Matrix] = {
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "T": np.diag([1, np.exp(1j * math.pi / 4)]).astype(np.complex128),
    "TDG": np.diag([1, np.exp(-1j * math.pi / 4)]).astype(np.complex128),
    "CNOT": np.eye(4, dtype=np.complex128)[[0, 1, 3, 2]],
    "SWAP": np.eye(4, dtype=np.complex128)[[0, 2, 1, 3]],
    "TOFFOLI": np.eye(8, dtype=np.complex128)[[0, 1, 2, 3, 4, 5, 7, 6]],
}
_ARITY = {"H": 1, "X": 1, "Z": 1, "T": 1, "TDG": 1, "CNOT": 2, "SWAP": 2, "TOFFOLI": 3}
_ADJOINT = {"T": "TDG", "TDG": "T"}


@dataclass(frozen=True)
class Gate:
    name: str
    targets: tuple[int, ...]
    matrix: Matrix | None = field(default=None, compare=False)

    def unitary(self) -> Matrix:
        if self.name == "U":
            assert self.matrix is not None
            return self.matrix
        return _FIXED[self.name]

    def adjoint(self) -> Gate:
        if self.name == "U":
            assert self.matrix is not None
            return Gate("U", self.targets, self.matrix.conj().T.copy())
        return Gate(_ADJOINT.get(self.name, self.name), self.targets)


@dataclass(frozen=True)
class UnitaryDescriptor:
    """Classical description of an M-qubit unitary as a gate list."""

    arity: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self) -> None:
        for g in self.gates:
            if g.name == "U":
                if g.matrix is None or len(g.targets) > 3:
                    raise DimensionError("dense gates act on at most 3 qubits")
                if g.matrix.shape != (2 ** len(g.targets),) * 2:
                    raise DimensionError(f"dense gate shape {g.matrix.shape} vs {g.targets}")
            elif _ARITY.get(g.name) != len(g.targets):
                raise DimensionError(f"gate {g.name} expects {_ARITY.get(g.name)} targets")
            if len(set(g.targets)) != len(g.targets):
                raise DimensionError(f"repeated target in {g.name}{g.targets}")
            if any(t < 0 or t >= self.arity for t in g.targets):
                raise DimensionError(f"gate {g.name}{g.targets} outside [0, {self.arity})")

    @classmethod
    def identity(cls, arity: int) -> UnitaryDescriptor:
        return cls(arity)

    def add(self, name: str, *targets: int, matrix: Matrix | None = None) -> UnitaryDescriptor:
        gate = Gate(name.upper(), tuple(targets), None if matrix is None else np.asarray(matrix, dtype=np.complex128))
        return UnitaryDescriptor(self.arity, (*self.gates, gate))

    def then(self, other: UnitaryDescriptor) -> UnitaryDescriptor:
        if other.arity != self.arity:
            raise DimensionError(f"cannot compose arity {self.arity} with {other.arity}")
        return UnitaryDescriptor(self.arity, self.gates + other.gates)

    def shifted(self, offset: int, arity: int) -> UnitaryDescriptor:
        """Relocate every gate by `offset` wires inside a wider register."""
        return UnitaryDescriptor(
            arity, tuple(Gate(g.name, tuple(t + offset for t in g.targets), g.matrix) for g in self.gates)
        )

    def dagger(self) -> UnitaryDescriptor:
        return UnitaryDescriptor(self.arity, tuple(g.adjoint() for g in reversed(self.gates)))

    def matrix(self) -> Matrix:
        """Materialize the full 2^M x 2^M matrix (small M only)."""
        if self.arity > 10:
            raise DimensionError("refusing to materialize more than 10 qubits")
        dim = 2**self.arity
        cols = np.eye(dim, dtype=np.complex128)
        out = np.empty((dim, dim), dtype=np.complex128)
        for j in range(dim):
            out[:, j] = apply_unitary(QState(self.arity, cols[:, j].copy()), self).data
        return out


BOTTOM: UnitaryDescriptor | None = None


@dataclass
class QState:
    num_qubits: int
    data: Matrix

    def __post_init__(self) -> None:
        dim = 2**self.num_qubits
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.shape not in ((dim,), (dim, dim)):
            raise DimensionError(f"{self.data.shape} is not a {self.num_qubits}-qubit state")

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    @classmethod
    def zero(cls, m: int) -> QState:
        return cls.basis(m, 0)

    @classmethod
    def basis(cls, m: int, index: int) -> QState:
        v = np.zeros(2**m, dtype=np.complex128)
        v[index] = 1.0
        return cls(m, v)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> QState:
        return cls.basis(len(bits), bits_to_int(np.asarray(bits)))

    @classmethod
    def from_vector(cls, v: NDArray[np.complexfloating] | Sequence[complex]) -> QState:
        arr = np.asarray(v, dtype=np.complex128)
        m = int(round(math.log2(arr.shape[0])))
        return cls(m, arr)

    @classmethod
    def from_density(cls, rho: NDArray[np.complexfloating]) -> QState:
        arr = np.asarray(rho, dtype=np.complex128)
        m = int(round(math.log2(arr.shape[0])))
        return cls(m, arr)

    def copy(self) -> QState:
        return QState(self.num_qubits, self.data.copy())

    def density(self) -> Matrix:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def to_density(self) -> QState:
        return QState(self.num_qubits, self.density().copy())

    def probabilities(self) -> NDArray[np.float64]:
        if self.is_pure:
            return np.abs(self.data) ** 2
        return np.clip(np.real(np.diag(self.data)), 0.0, None)

    def validate(self, tol: float = TOL) -> None:
        if self.is_pure:
            norm = float(np.vdot(self.data, self.data).real)
            if abs(norm - 1) > tol:
                raise DimensionError(f"state norm {norm} differs from 1")
            return
        rho = self.data
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > tol:
            raise DimensionError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1) > tol:
            raise DimensionError(f"density matrix trace {np.trace(rho).real} differs from 1")
        if np.linalg.eigvalsh(rho).min(initial=0.0) < -tol:
            raise DimensionError("density matrix is not positive semidefinite")


def _apply_matrix(tensor: Matrix, mat: Matrix, axes: Sequence[int]) -> Matrix:
    k = len(axes)
    g = mat.reshape((2,) * (2 * k))
    out = np.tensordot(g, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def apply_unitary(state: QState, u: UnitaryDescriptor | None) -> QState:
    if u is None:
        raise PostprocessError("cannot apply BOTTOM")
    if u.arity != state.num_qubits:
        raise DimensionError(f"unitary arity {u.arity} vs state width {state.num_qubits}")
    m = state.num_qubits
    if not u.gates:
        return state.copy()
    if state.is_pure:
        t = state.data.reshape((2,) * m) if m else state.data.copy()
        for g in u.gates:
            t = _apply_matrix(t, g.unitary(), g.targets)
        return QState(m, np.ascontiguousarray(t).reshape(-1))
    t = state.data.reshape((2,) * (2 * m))
    for g in u.gates:
        mat = g.unitary()
        t = _apply_matrix(t, mat, g.targets)
        t = _apply_matrix(t, mat.conj(), [q + m for q in g.targets])
    return QState(m, np.ascontiguousarray(t).reshape(2**m, 2**m))


def prefix_probabilities(state: QState, l: int) -> NDArray[np.float64]:
    if l < 0 or l > state.num_qubits:
        raise DimensionError(f"prefix {l} outside [0, {state.num_qubits}]")
    probs = state.probabilities().reshape(2**l, -1).sum(axis=1)
    return probs / probs.sum()


def measure_prefix(
    state: QState, l: int, rng: np.random.Generator, forced: int | None = None
) -> tuple[Bits, QState]:
    """Measure qubits [0, l) in the computational basis.

    With `forced`, the given outcome index is replayed instead of sampled.
    """
    probs = prefix_probabilities(state, l)
    if l == 0:
        return np.zeros(0, dtype=np.uint8), state.copy()
    if forced is not None:
        if forced < 0 or forced >= probs.size:
            raise DimensionError(f"forced outcome {forced} outside prefix range")
        if probs[forced] < 1e-12:
            raise ImpossibleBranch(f"outcome {forced} has probability {probs[forced]:.3g}")
        o = forced
    else:
        o = int(rng.choice(probs.size, p=probs))
    p = float(probs[o])
    rest = state.dim >> l
    if state.is_pure:
        psi = state.data.reshape(2**l, rest)
        post = np.zeros_like(psi)
        post[o] = psi[o] / math.sqrt(p)
        return int_to_bits(o, l), QState(state.num_qubits, post.reshape(-1))
    rho = state.data.reshape(2**l, rest, 2**l, rest)
    post = np.zeros_like(rho)
    post[o, :, o, :] = rho[o, :, o, :] / p
    return int_to_bits(o, l), QState(state.num_qubits, post.reshape(state.dim, state.dim))


def reset_prefix(state: QState, l: int, outcome: int) -> QState:
    """Move the collapsed block |outcome>|phi> to |0^l>|phi>."""
    if l == 0 or outcome == 0:
        return state.copy()
    rest = state.dim >> l
    if state.is_pure:
        psi = state.data.reshape(2**l, rest)
        out = np.zeros_like(psi)
        out[0] = psi[outcome]
        return QState(state.num_qubits, out.reshape(-1))
    rho = state.data.reshape(2**l, rest, 2**l, rest)
    out = np.zeros_like(rho)
    out[0, :, 0, :] = rho[outcome, :, outcome, :]
    return QState(state.num_qubits, out.reshape(state.dim, state.dim))


# ---------- hybrid model ----------

PostProcess = Callable[
    [bytes, UnitaryDescriptor | None, int, Bits], tuple[bytes, UnitaryDescriptor | None, int]
]


@dataclass(frozen=True)
class HybridState:
    classical: bytes
    unitary: UnitaryDescriptor | None
    measure_count: int
    quantum: QState

    def __post_init__(self) -> None:
        if not 0 <= self.measure_count <= self.quantum.num_qubits:
            raise DimensionError(
                f"measure count {self.measure_count} outside [0, {self.quantum.num_qubits}]"
            )


@dataclass
class ChannelResult:
    classical: bytes
    measure_count: int
    quantum: QState
    blocks_executed: int
    outcomes: list[Bits] = field(default_factory=list)


def run_block(
    hs: HybridState, f: PostProcess, rng: np.random.Generator, forced: int | None = None
) -> tuple[HybridState, Bits]:
    """Run one block and return the next hybrid state plus the measured outcome."""
    if hs.unitary is None:
        raise PostprocessError("run_block called on a halted state")
    q = apply_unitary(hs.quantum, hs.unitary)
    outcome, q = measure_prefix(q, hs.measure_count, rng, forced)
    c2, u2, l2 = f(hs.classical, hs.unitary, hs.measure_count, outcome)
    if not 0 <= l2 <= q.num_qubits:
        raise PostprocessError(f"post-processing returned measure count {l2} > {q.num_qubits}")
    q = reset_prefix(q, hs.measure_count, bits_to_int(outcome))
    return HybridState(c2, u2, l2, q), outcome


def run_channel(
    hs0: HybridState,
    f: PostProcess,
    rng: np.random.Generator,
    max_blocks: int = DEFAULT_MAX_BLOCKS,
) -> ChannelResult:
    if max_blocks < 1:
        raise NonTermination("max_blocks must be at least 1")
    hs = hs0
    outcomes: list[Bits] = []
    blocks = 0
    while hs.unitary is not None:
        if blocks >= max_blocks:
            raise NonTermination(f"channel did not halt within {max_blocks} blocks")
        hs, o = run_block(hs, f, rng)
        outcomes.append(o)
        blocks += 1
    logger.debug("channel halted after %d blocks", blocks)
    return ChannelResult(hs.classical, hs.measure_count, hs.quantum, blocks, outcomes)


# ---------- mixed states, effects, budgets ----------


def maximally_mixed(m: int) -> QState:
    dim = 2**m
    return QState(m, np.eye(dim, dtype=np.complex128) / dim)


def check_effect(effect: Matrix, tol: float = TOL) -> None:
    if np.max(np.abs(effect - effect.conj().T), initial=0.0) > tol:
        raise InvalidEffect("effect is not Hermitian")
    eig = np.linalg.eigvalsh(effect)
    if eig.min(initial=0.0) < -tol or eig.max(initial=0.0) > 1 + tol:
        raise InvalidEffect(f"effect eigenvalues outside [0, 1]: [{eig.min()}, {eig.max()}]")


def povm_prob(effect: Matrix, state: QState) -> float:
    effect = np.asarray(effect, dtype=np.complex128)
    if effect.shape != (state.dim, state.dim):
        raise DimensionError(f"effect shape {effect.shape} vs {state.num_qubits}-qubit state")
    check_effect(effect)
    if state.is_pure:
        return float(np.vdot(state.data, effect @ state.data).real)
    return float(np.trace(effect @ state.data).real)


@dataclass
class QubitBudget:
    limit: int
    used: int = 0
    peak_used: int = 0

    def allocate(self, n: int) -> None:
        if self.used + n > self.limit:
            raise BudgetExceeded(f"allocating {n} qubits exceeds limit {self.limit} (in use {self.used})")
        self.used += n
        self.peak_used = max(self.peak_used, self.used)

    def release(self, n: int) -> None:
        if not 0 <= n <= self.used:
            raise DimensionError(f"releasing {n} qubits with only {self.used} in use")
        self.used -= n

    @contextmanager
    def hold(self, n: int) -> Iterator[None]:
        self.allocate(n)
        try:
            yield
        finally:
            self.release(n)


# ---------- composite helpers ----------


def tensor(a: QState, b: QState) -> QState:
    m = a.num_qubits + b.num_qubits
    if a.is_pure and b.is_pure:
        return QState(m, np.kron(a.data, b.data))
    return QState(m, np.kron(a.density(), b.density()))


def discard_prefix(state: QState, l: int) -> QState:
    """Trace out qubits [0, l); stays pure when the prefix is in a basis state."""
    if l < 0 or l > state.num_qubits:
        raise DimensionError(f"prefix {l} outside [0, {state.num_qubits}]")
    rest = state.dim >> l
    m = state.num_qubits - l
    if state.is_pure:
        psi = state.data.reshape(2**l, rest)
        weights = np.sum(np.abs(psi) ** 2, axis=1)
        nonzero = np.flatnonzero(weights > 1e-14)
        if nonzero.size <= 1:
            row = psi[nonzero[0]] if nonzero.size else np.zeros(rest, dtype=np.complex128)
            norm = np.linalg.norm(row)
            return QState(m, row / norm if norm else row)
        return QState(m, psi.T @ psi.conj())
    rho = state.data.reshape(2**l, rest, 2**l, rest)
    return QState(m, np.einsum("iaib->ab", rho))


def project_basis(state: QState, l: int, outcome: int) -> tuple[float, QState | None]:
    """Probability of `outcome` on prefix l and the normalized post-state."""
    probs = prefix_probabilities(state, l)
    p = float(probs[outcome])
    if p < 1e-14:
        return 0.0, None
    _, post = measure_prefix(state, l, np.random.default_rng(0), forced=outcome)
    return p, post


def fidelity(state: QState, target: Matrix) -> float:
    """<t| rho |t> against a pure target vector."""
    t = np.asarray(target, dtype=np.complex128)
    if state.is_pure:
        return float(abs(np.vdot(t, state.data)) ** 2)
    return float(np.vdot(t, state.data @ t).real)


def with_quantum(hs: HybridState, q: QState) -> HybridState:
    return replace(hs, quantum=q)


def dump_state(state: QState) -> bytes:
    header = QST_MAGIC + struct.pack("<I", state.num_qubits)
    return header + np.ascontiguousarray(state.data, dtype="<c16").tobytes()


def load_state(blob: bytes) -> QState:
    if len(blob) < 8 or blob[:4] != QST_MAGIC:
        raise FormatError("bad QST1 header")
    (m,) = struct.unpack_from("<I", blob, 4)
    if m > 14:
        raise FormatError(f"refusing to load a {m}-qubit state")
    body = np.frombuffer(blob[8:], dtype="<c16")
    dim = 2**m
    if body.size == dim:
        return QState(m, body.astype(np.complex128))
    if body.size == dim * dim:
        return QState(m, body.astype(np.complex128).reshape(dim, dim))
    raise FormatError(f"QST1 body has {body.size} amplitudes for {m} qubits")
