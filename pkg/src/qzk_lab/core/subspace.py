"""
Subspace states over F2^n.

A subspace is kept as RREF rows packed into ints; coordinate 0 is the most
significant bit, which lines up with qubit 0 of the matching basis state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
import re
import struct

import galois
import numpy as np
from numpy.typing import NDArray

from qzk_lab.core.errors import BasisNotOrthonormal, ConfigError, DimensionError, FormatError
from qzk_lab.core.qsim import (
    Matrix,
    QState,
    UnitaryDescriptor,
    apply_unitary,
    discard_prefix,
    fidelity,
    tensor,
)

logger = logging.getLogger(__name__)

GF2 = galois.GF(2)
SUB_MAGIC = b"SUB1"


def dot(u: int, v: int) -> int:
    """F2 inner product of two packed vectors."""
    return (u & v).bit_count() & 1


def _rows_to_matrix(rows: tuple[int, ...] | list[int], n: int) -> NDArray[np.uint8]:
    out = np.zeros((len(rows), n), dtype=np.uint8)
    for i, r in enumerate(rows):
        for j in range(n):
            out[i, j] = (r >> (n - 1 - j)) & 1
    return out


def _matrix_to_rows(mat: NDArray[np.integer]) -> tuple[int, ...]:
    n = mat.shape[1]
    return tuple(int(sum(int(b) << (n - 1 - j) for j, b in enumerate(row))) for row in mat)


@dataclass(frozen=True)
class Subspace:
    ambient_dim: int
    basis: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.basis)

    @classmethod
    def from_rows(cls, n: int, rows: NDArray[np.integer] | list[int]) -> Subspace:
        """Canonicalize spanning rows; they must be linearly independent."""
        if isinstance(rows, list):
            mat = _rows_to_matrix(rows, n)
        else:
            mat = np.asarray(rows, dtype=np.uint8).reshape(-1, n)
        if mat.shape[0] == 0:
            return cls(n, ())
        g = GF2(mat)
        rank = int(np.linalg.matrix_rank(g))
        if rank != mat.shape[0]:
            raise DimensionError(f"{mat.shape[0]} rows span only rank {rank}")
        rref = np.asarray(g.row_reduce(), dtype=np.uint8)[:rank]
        return cls(n, _matrix_to_rows(rref))

    @classmethod
    def span(cls, n: int, vectors: list[str]) -> Subspace:
        """Build from bit-string literals such as '1100'."""
        return cls.from_rows(n, [int(v, 2) for v in vectors])

    def matrix(self) -> NDArray[np.uint8]:
        return _rows_to_matrix(self.basis, self.ambient_dim)

    def members(self) -> NDArray[np.int64]:
        out = np.zeros(1, dtype=np.int64)
        for r in self.basis:
            out = np.concatenate([out, out ^ r])
        return np.sort(out)

    def contains(self, x: int) -> bool:
        if not self.basis:
            return x == 0
        mat = np.vstack([self.matrix(), _rows_to_matrix([x], self.ambient_dim)])
        return int(np.linalg.matrix_rank(GF2(mat))) == self.dim

    def intersection_dim(self, other: Subspace) -> int:
        if other.ambient_dim != self.ambient_dim:
            raise DimensionError("subspaces live in different ambient spaces")
        if not self.basis or not other.basis:
            return 0
        joint = GF2(np.vstack([self.matrix(), other.matrix()]))
        return self.dim + other.dim - int(np.linalg.matrix_rank(joint))

    def state_vector(self) -> Matrix:
        v = np.zeros(2**self.ambient_dim, dtype=np.complex128)
        v[self.members()] = 2 ** (-self.dim / 2)
        return v

    # ---------- SUB1 ----------

    def to_bytes(self) -> bytes:
        width = math.ceil(self.ambient_dim / 8)
        body = b"".join(
            np.packbits(row, bitorder="little").tobytes().ljust(width, b"\x00")
            for row in self.matrix()
        )
        return SUB_MAGIC + struct.pack("<HH", self.ambient_dim, self.dim) + body

    @classmethod
    def from_bytes(cls, blob: bytes) -> Subspace:
        if len(blob) < 8 or blob[:4] != SUB_MAGIC:
            raise FormatError("bad SUB1 header")
        n, k = struct.unpack_from("<HH", blob, 4)
        width = math.ceil(n / 8)
        if len(blob) != 8 + k * width or k > n:
            raise FormatError(f"SUB1 body length {len(blob) - 8} does not match n={n}, k={k}")
        raw = np.frombuffer(blob[8:], dtype=np.uint8).reshape(k, width)
        rows = np.unpackbits(raw, axis=1, bitorder="little")[:, :n]
        try:
            sub = cls.from_rows(n, rows)
        except DimensionError as e:
            raise FormatError(f"SUB1 rows are dependent: {e}") from e
        if sub.basis != _matrix_to_rows(rows):
            raise FormatError("SUB1 rows are not in reduced row-echelon form")
        return sub


def sample_subspace(n: int, k: int, rng: np.random.Generator) -> Subspace:
    if k < 0 or k > n:
        raise DimensionError(f"cannot sample a {k}-dimensional subspace of F2^{n}")
    while True:
        mat = rng.integers(0, 2, size=(k, n), dtype=np.uint8)
        if k == 0 or int(np.linalg.matrix_rank(GF2(mat))) == k:
            return Subspace.from_rows(n, mat)


def prepare_state(a: Subspace) -> QState:
    if a.ambient_dim > 12:
        raise DimensionError("direct preparation supports at most 12 qubits")
    return QState(a.ambient_dim, a.state_vector())


def is_orthonormal(basis: tuple[int, ...] | list[int]) -> bool:
    return all(dot(u, v) == int(i == j) for i, u in enumerate(basis) for j, v in enumerate(basis))


def orthonormal_basis(a: Subspace) -> tuple[int, ...]:
    """Find a basis with <v_i, v_j> = delta_ij over F2, or raise BasisNotOrthonormal."""
    remaining = list(a.basis)
    chosen: list[int] = []
    while remaining:
        odd = next((w for w in remaining if dot(w, w)), None)
        if odd is not None:
            remaining.remove(odd)
            chosen.append(odd)
            remaining = [w ^ (odd if dot(w, odd) else 0) for w in remaining]
            continue
        pair = next(
            ((x, y) for i, x in enumerate(remaining) for y in remaining[i + 1 :] if dot(x, y)),
            None,
        )
        if pair is None or not chosen:
            raise BasisNotOrthonormal(
                f"subspace of dim {a.dim} has a degenerate or purely even part"
            )
        x, y = pair
        v = chosen.pop()
        chosen.extend([v ^ x, v ^ y, v ^ x ^ y])
        remaining.remove(x)
        remaining.remove(y)
        remaining = [
            w ^ (x if dot(w, y) else 0) ^ (y if dot(w, x) else 0) for w in remaining
        ]
    assert is_orthonormal(chosen)
    return tuple(chosen)


def build_CA(a: Subspace, basis: tuple[int, ...] | None = None) -> UnitaryDescriptor:
    """C_A on registers X (k qubits) then Y (n qubits): |0^k>|0^n> -> |0^k>|A>."""
    vs = a.basis if basis is None else basis
    if not is_orthonormal(vs):
        raise BasisNotOrthonormal("basis vectors must satisfy <v_i, v_j> = delta_ij")
    k, n = len(vs), a.ambient_dim
    u = UnitaryDescriptor.identity(k + n)
    for i in range(k):
        u = u.add("H", i)
    for i, v in enumerate(vs):
        for j in range(n):
            if (v >> (n - 1 - j)) & 1:
                u = u.add("CNOT", i, k + j)
    for i, v in enumerate(vs):
        for j in range(n):
            if (v >> (n - 1 - j)) & 1:
                u = u.add("CNOT", k + j, i)
    return u


class SubspaceOracleHandle:
    """Black-box access to U_A; the hidden subspace is not exposed."""

    def __init__(self, subspace: Subspace) -> None:
        self._subspace = subspace
        self._vector = subspace.state_vector()
        self.query_counter = 0

    @property
    def ambient_dim(self) -> int:
        return self._subspace.ambient_dim

    def _flip(self, cols: Matrix) -> Matrix:
        n = self.ambient_dim
        t = cols.reshape(2**n, 2, -1)
        comp = np.einsum("x,xyc->yc", self._vector.conj(), t)
        delta = comp[::-1] - comp
        return (t + np.einsum("x,yc->xyc", self._vector, delta)).reshape(cols.shape)

    def apply(self, state: QState) -> QState:
        if state.num_qubits != self.ambient_dim + 1:
            raise DimensionError(
                f"U_A acts on {self.ambient_dim + 1} qubits, got {state.num_qubits}"
            )
        self.query_counter += 1
        if state.is_pure:
            return QState(state.num_qubits, self._flip(state.data[:, None])[:, 0])
        # U_A is Hermitian: U rho U = U (U rho)^dagger
        half = self._flip(state.data)
        return QState(state.num_qubits, self._flip(half.conj().T.copy()))


def apply_UA(h: SubspaceOracleHandle, state: QState) -> QState:
    return h.apply(state)


def test_state(
    h: SubspaceOracleHandle, rho: QState, rng: np.random.Generator
) -> tuple[int, QState]:
    """Test^{U_A}: attach |0>, query U_A, pass iff the flag reads 1."""
    n = h.ambient_dim
    if rho.num_qubits != n:
        raise DimensionError(f"test expects {n} qubits, got {rho.num_qubits}")
    out = h.apply(tensor(rho, QState.zero(1)))
    if out.is_pure:
        cols = out.data.reshape(2**n, 2)
        p1 = float(np.sum(np.abs(cols[:, 1]) ** 2))
        flag = int(rng.random() < p1)
        branch = cols[:, flag]
        norm = math.sqrt(p1 if flag else 1 - p1)
        return flag, QState(n, branch / norm if norm > 1e-15 else branch)
    r = out.data.reshape(2**n, 2, 2**n, 2)
    p1 = float(np.trace(r[:, 1, :, 1]).real)
    flag = int(rng.random() < p1)
    block = r[:, flag, :, flag]
    p = p1 if flag else 1 - p1
    return flag, QState(n, block / p if p > 1e-15 else block)


def _split_projector(state: QState, target: Matrix, rng: np.random.Generator) -> tuple[int, QState]:
    """Measure {|t><t|, I - |t><t|}; outcome 0 is the projection onto t."""
    p0 = min(1.0, max(0.0, fidelity(state, target)))
    outcome = 0 if rng.random() < p0 else 1
    if outcome == 0:
        return 0, QState(state.num_qubits, target.copy())
    if state.is_pure:
        rest = state.data - target * np.vdot(target, state.data)
        return 1, QState(state.num_qubits, rest / math.sqrt(1 - p0))
    proj = np.eye(state.dim, dtype=np.complex128) - np.outer(target, target.conj())
    return 1, QState(state.num_qubits, proj @ state.data @ proj / (1 - p0))


def project_A(
    a: Subspace, rho: QState, rng: np.random.Generator, route: str = "direct"
) -> tuple[int, QState]:
    """Projective measurement {|A><A|, I - |A><A|}.

    route="ca" runs it with n + k qubits through C_A^dagger and needs an
    orthonormal basis; route="direct" applies the projector.
    """
    if rho.num_qubits != a.ambient_dim:
        raise DimensionError(f"projection on {a.ambient_dim} qubits, got {rho.num_qubits}")
    if route == "direct":
        return _split_projector(rho, a.state_vector(), rng)
    if route != "ca":
        raise ConfigError(f"unknown projection route '{route}'")
    ca = build_CA(a, orthonormal_basis(a))
    k, n = a.dim, a.ambient_dim
    wide = apply_unitary(tensor(QState.zero(k), rho), ca.dagger())
    outcome, post = _split_projector(wide, QState.zero(k + n).data, rng)
    back = apply_unitary(post, ca)
    return outcome, discard_prefix(back, k)


# ---------- cloning experiments ----------

_STRATEGY = re.compile(r"^(measure_and_resend|identity_pad|fixed_output|oracle_grover_budget)(?:\((\d+)\))?$")


@dataclass
class CloneResult:
    strategy: str
    n: int
    trials: int
    success_rate: float
    exact_mean: float
    queries_total: int
    per_trial_queries: list[int] = field(default_factory=list)


def _grover_copy(h: SubspaceOracleHandle, queries: int) -> Matrix:
    """Amplitude amplification from |+^n> toward |A> using U_A with a |-> ancilla."""
    n = h.ambient_dim
    plus = np.full(2**n, 2 ** (-n / 2), dtype=np.complex128)
    minus = np.array([1, -1], dtype=np.complex128) / math.sqrt(2)
    psi = plus.copy()
    for _ in range(queries):
        out = h.apply(QState(n + 1, np.kron(psi, minus)))
        psi = out.data.reshape(2**n, 2) @ minus.conj()
        psi = 2 * plus * np.vdot(plus, psi) - psi
    return psi


def clone_experiment(
    strategy: str,
    n: int,
    trials: int,
    rng: np.random.Generator,
    fixed_state: Matrix | None = None,
) -> CloneResult:
    """Monte-Carlo success of producing |A>|A> from one copy of |A> and oracle access."""
    match = _STRATEGY.match(strategy)
    if match is None:
        raise ConfigError(f"unknown cloning strategy '{strategy}'")
    name, arg = match.group(1), match.group(2)
    if name == "oracle_grover_budget" and arg is None:
        raise ConfigError("oracle_grover_budget needs a query count, e.g. oracle_grover_budget(2)")
    k = n // 2
    second_fixed = fixed_state if fixed_state is not None else QState.zero(n).data
    hits, exact, queries = 0, 0.0, []
    for _ in range(trials):
        a = sample_subspace(n, k, rng)
        h = SubspaceOracleHandle(a)
        va = a.state_vector()
        if name == "measure_and_resend":
            probs = np.abs(va) ** 2
            x = int(rng.choice(probs.size, p=probs / probs.sum()))
            p = float(abs(va[x]) ** 4)
        elif name == "identity_pad":
            p = float(abs(va[0]) ** 2)
        elif name == "fixed_output":
            p = float(abs(np.vdot(va, second_fixed)) ** 2)
        else:
            p = float(abs(np.vdot(va, _grover_copy(h, int(arg or 0)))) ** 2)
        exact += p
        hits += int(rng.random() < p)
        queries.append(h.query_counter)
    logger.debug("clone %s n=%d: %d/%d successes", strategy, n, hits, trials)
    return CloneResult(
        strategy=strategy,
        n=n,
        trials=trials,
        success_rate=hits / trials if trials else 0.0,
        exact_mean=exact / trials if trials else 0.0,
        queries_total=sum(queries),
        per_trial_queries=queries,
    )
