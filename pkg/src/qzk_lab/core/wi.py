"""
Public-coin witness-indistinguishable proofs, t parallel repetitions.

Round shape: (1) V->P receiver message, (2) P->V commitments,
(3) V->P one challenge bit per repetition, (4) P->V responses.

Two engines share that shape:
  - graph statements run Blum's Hamiltonicity protocol;
  - circuit statements run a masked cut-and-choose over the circuit's AND
    gates (challenge 0 opens masks and garbled tables, challenge 1 reveals
    masked wire values with the matching table cells and the output mask).
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
import logging

import numpy as np
from numpy.typing import NDArray

from qzk_lab.core.bits import Bits, random_bits
from qzk_lab.core.circuits import BoolCircuit
from qzk_lab.core.crypto import CommitmentBackend, NaorBackend, ReceiverMsg
from qzk_lab.core.errors import FormatError, ProtocolError
from qzk_lab.core.graphs import Graph, is_hamiltonian_cycle

logger = logging.getLogger(__name__)

DEFAULT_REPETITIONS = 40

WiMessage = dict[str, NDArray[np.generic]]


@dataclass(frozen=True)
class CircuitStatement:
    circuit: BoolCircuit
    params: Bits

    @property
    def out_index(self) -> int:
        """Position of the output among the AND wires."""
        hits = np.flatnonzero(self.circuit.and_wires == self.circuit.output)
        if hits.size != 1:
            raise FormatError("circuit output must be an AND wire (build with pin_output)")
        return int(hits[0])


Statement = Graph | CircuitStatement


def field_of(
    msg: Mapping[str, NDArray[np.generic]], key: str, shape: tuple[int, ...], round_index: int
) -> NDArray[np.generic]:
    if key not in msg:
        raise ProtocolError(f"round {round_index}: missing field '{key}'", round_index)
    arr = np.asarray(msg[key])
    if arr.shape != shape:
        raise ProtocolError(
            f"round {round_index}: field '{key}' has shape {arr.shape}, expected {shape}", round_index
        )
    if arr.dtype.kind not in "ui":
        raise ProtocolError(f"round {round_index}: field '{key}' must be integral", round_index)
    return arr


def _bits_ok(*arrays: NDArray[np.generic]) -> bool:
    return all(bool(np.all((a == 0) | (a == 1))) for a in arrays)


def _is_perm(rows: NDArray[np.generic], n: int) -> bool:
    return bool(np.all(np.sort(rows, axis=-1) == np.arange(n)))


# ---------- secrets kept by the prover between its two messages ----------


@dataclass
class GraphSecret:
    perms: NDArray[np.int64]
    matrices: NDArray[np.uint8]
    values: NDArray[np.uint64]
    seeds: NDArray[np.unsignedinteger]
    # cycle in committed (relabelled) coordinates, one row per repetition
    cycles: NDArray[np.int64]


@dataclass
class CircuitSecret:
    m_in: NDArray[np.uint8]
    m_and: NDArray[np.uint8]
    tables: NDArray[np.uint8]
    vhat_in: NDArray[np.uint8]
    and_bits: NDArray[np.uint8]
    seeds_in: NDArray[np.unsignedinteger]
    seeds_and: NDArray[np.unsignedinteger]
    seeds_tab: NDArray[np.unsignedinteger]


Secret = GraphSecret | CircuitSecret


# ---------- Blum over graphs ----------


def _permuted_matrices(g: Graph, perms: NDArray[np.int64]) -> NDArray[np.uint8]:
    t, n = perms.shape
    out = np.zeros((t, n, n), dtype=np.uint8)
    for r in range(t):
        out[r][np.ix_(perms[r], perms[r])] = g.adjacency
    return out


def graph_commit(
    g: Graph,
    cycle: Sequence[int] | None,
    backend: CommitmentBackend,
    t: int,
    rng: np.random.Generator,
    guesses: NDArray[np.uint8] | None = None,
    perms: NDArray[np.int64] | None = None,
) -> tuple[WiMessage, GraphSecret]:
    """First prover message; guesses turns the prover into a challenge-guessing cheater."""
    n = g.n_vertices
    if perms is None:
        perms = np.array([rng.permutation(n) for _ in range(t)], dtype=np.int64).reshape(t, n)
    matrices = _permuted_matrices(g, perms)
    if guesses is None:
        if cycle is None or not is_hamiltonian_cycle(g, cycle):
            raise FormatError("honest graph prover needs a Hamiltonian cycle")
        cycles = perms[:, np.asarray(cycle, dtype=np.int64)]
    else:
        cycles = np.array([rng.permutation(n) for _ in range(t)], dtype=np.int64).reshape(t, n)
        full = (1 - np.eye(n, dtype=np.uint8)).astype(np.uint8)
        matrices[guesses == 1] = full
    values, seeds = backend.commit(matrices, rng)
    return {"matrix": values}, GraphSecret(perms, matrices, values, seeds, cycles)


def graph_respond(g: Graph, secret: GraphSecret, e: Bits) -> WiMessage:
    zero = np.flatnonzero(e == 0)
    one = np.flatnonzero(e == 1)
    n = g.n_vertices
    cyc = secret.cycles[one]
    nxt = np.roll(cyc, -1, axis=1)
    rows = np.arange(one.size)[:, None]
    return {
        "perm": secret.perms[zero],
        "matrix": secret.matrices[zero],
        "matrix_seeds": secret.seeds[zero],
        "cycle": cyc.reshape(one.size, n),
        "cycle_seeds": secret.seeds[one][rows, cyc, nxt].reshape(one.size, n),
    }


def graph_check(
    g: Graph,
    backend: CommitmentBackend,
    first: WiMessage,
    e: Bits,
    response: WiMessage,
    round_offset: int = 0,
) -> bool:
    n = g.n_vertices
    t = e.size
    values = field_of(first, "matrix", (t, n, n), round_offset + 2)
    zero = np.flatnonzero(e == 0)
    one = np.flatnonzero(e == 1)
    r4 = round_offset + 4
    perm = field_of(response, "perm", (zero.size, n), r4)
    matrix = field_of(response, "matrix", (zero.size, n, n), r4)
    mseeds = field_of(response, "matrix_seeds", (zero.size, n, n), r4)
    cycle = field_of(response, "cycle", (one.size, n), r4)
    cseeds = field_of(response, "cycle_seeds", (one.size, n), r4)

    if zero.size:
        if not _is_perm(perm, n) or not _bits_ok(matrix):
            return False
        expected = _permuted_matrices(g, perm.astype(np.int64))
        if not np.array_equal(expected, matrix):
            return False
        if not np.all(backend.verify(values[zero], matrix, mseeds)):
            return False
    if one.size:
        if not _is_perm(cycle, n):
            return False
        cyc = cycle.astype(np.int64)
        nxt = np.roll(cyc, -1, axis=1)
        cells = values[one][np.arange(one.size)[:, None], cyc, nxt]
        if not np.all(backend.verify(cells, np.ones_like(cells, dtype=np.uint8), cseeds)):
            return False
    return True


# ---------- masked cut-and-choose over circuits ----------


def _tables(stmt: CircuitStatement, masks: NDArray[np.uint8]) -> NDArray[np.uint8]:
    """T[g][2i+j] = ((i ^ m_a) & (j ^ m_b)) ^ m_c for every AND gate g."""
    c = stmt.circuit
    ma = masks[:, c.and_a][..., None]
    mb = masks[:, c.and_b][..., None]
    mc = masks[:, c.and_wires][..., None]
    i = np.array([0, 0, 1, 1], dtype=np.uint8)
    j = np.array([0, 1, 0, 1], dtype=np.uint8)
    return (((i ^ ma) & (j ^ mb)) ^ mc).astype(np.uint8)


def _masked_values(
    stmt: CircuitStatement, vhat_in: NDArray[np.uint8], and_bits: NDArray[np.uint8]
) -> NDArray[np.uint8]:
    return stmt.circuit.propagate(vhat_in, stmt.params, and_values=and_bits)


def circuit_commit(
    stmt: CircuitStatement,
    witness: Bits | None,
    backend: CommitmentBackend,
    t: int,
    rng: np.random.Generator,
    guesses: NDArray[np.uint8] | None = None,
) -> tuple[WiMessage, CircuitSecret]:
    c = stmt.circuit
    out = stmt.out_index
    m_in = random_bits(rng, t, c.n_inputs)
    m_and = random_bits(rng, t, c.n_and)
    masks = c.propagate(m_in, masks=True, and_values=m_and)
    tables = _tables(stmt, masks)
    if guesses is None:
        if witness is None:
            raise FormatError("honest circuit prover needs a witness")
        values = c.propagate(np.asarray(witness, dtype=np.uint8).reshape(1, -1), stmt.params)
        if values[0, c.output] != 1:
            raise FormatError("witness does not satisfy the circuit")
        vhat = values ^ masks
        vhat_in = vhat[:, c.input_wires]
        and_bits = vhat[:, c.and_wires]
    else:
        # guess 0: consistent masks and tables over an all-zero witness
        vhat = c.propagate(np.zeros((1, c.n_inputs), dtype=np.uint8), stmt.params) ^ masks
        vhat_in = vhat[:, c.input_wires]
        and_bits = vhat[:, c.and_wires]
        # guess 1: random masked values that claim output 1, tables forced to agree
        cheat = np.flatnonzero(guesses == 1)
        if cheat.size:
            vhat_in[cheat] = random_bits(rng, cheat.size, c.n_inputs)
            and_bits[cheat] = random_bits(rng, cheat.size, c.n_and)
            and_bits[cheat, out] = 1 ^ m_and[cheat, out]
            forced = _masked_values(stmt, vhat_in[cheat], and_bits[cheat])
            idx = 2 * forced[:, c.and_a] + forced[:, c.and_b]
            sub = random_bits(rng, cheat.size, c.n_and, 4)
            np.put_along_axis(sub, idx[..., None].astype(np.int64), and_bits[cheat][..., None], axis=2)
            tables[cheat] = sub
    c_in, s_in = backend.commit(m_in, rng)
    c_and, s_and = backend.commit(m_and, rng)
    c_tab, s_tab = backend.commit(tables, rng)
    first: WiMessage = {"masks_in": c_in, "masks_and": c_and, "tables": c_tab}
    return first, CircuitSecret(m_in, m_and, tables, vhat_in, and_bits, s_in, s_and, s_tab)


def circuit_respond(stmt: CircuitStatement, secret: CircuitSecret, e: Bits) -> WiMessage:
    c = stmt.circuit
    out = stmt.out_index
    zero = np.flatnonzero(e == 0)
    one = np.flatnonzero(e == 1)
    vhat = _masked_values(stmt, secret.vhat_in[one], secret.and_bits[one])
    idx = (2 * vhat[:, c.and_a] + vhat[:, c.and_b]).astype(np.int64)
    cell_seeds = np.take_along_axis(secret.seeds_tab[one], idx[..., None], axis=2)[..., 0]
    return {
        "masks_in": secret.m_in[zero],
        "masks_in_seeds": secret.seeds_in[zero],
        "masks_and": secret.m_and[zero],
        "masks_and_seeds": secret.seeds_and[zero],
        "tables": secret.tables[zero],
        "tables_seeds": secret.seeds_tab[zero],
        "vhat_in": secret.vhat_in[one],
        "and_bits": secret.and_bits[one],
        "cell_seeds": cell_seeds,
        "out_mask": secret.m_and[one, out],
        "out_seed": secret.seeds_and[one, out],
    }


def circuit_check(
    stmt: CircuitStatement,
    backend: CommitmentBackend,
    first: WiMessage,
    e: Bits,
    response: WiMessage,
    round_offset: int = 0,
) -> bool:
    c = stmt.circuit
    out = stmt.out_index
    t = e.size
    n_in, n_and = c.n_inputs, c.n_and
    r2, r4 = round_offset + 2, round_offset + 4
    c_in = field_of(first, "masks_in", (t, n_in), r2)
    c_and = field_of(first, "masks_and", (t, n_and), r2)
    c_tab = field_of(first, "tables", (t, n_and, 4), r2)
    zero = np.flatnonzero(e == 0)
    one = np.flatnonzero(e == 1)
    z, o = zero.size, one.size
    m_in = field_of(response, "masks_in", (z, n_in), r4)
    s_in = field_of(response, "masks_in_seeds", (z, n_in), r4)
    m_and = field_of(response, "masks_and", (z, n_and), r4)
    s_and = field_of(response, "masks_and_seeds", (z, n_and), r4)
    tab = field_of(response, "tables", (z, n_and, 4), r4)
    s_tab = field_of(response, "tables_seeds", (z, n_and, 4), r4)
    vhat_in = field_of(response, "vhat_in", (o, n_in), r4)
    and_bits = field_of(response, "and_bits", (o, n_and), r4)
    cell_seeds = field_of(response, "cell_seeds", (o, n_and), r4)
    out_mask = field_of(response, "out_mask", (o,), r4)
    out_seed = field_of(response, "out_seed", (o,), r4)

    if not _bits_ok(m_in, m_and, tab, vhat_in, and_bits, out_mask):
        return False
    if z:
        if not (
            np.all(backend.verify(c_in[zero], m_in, s_in))
            and np.all(backend.verify(c_and[zero], m_and, s_and))
            and np.all(backend.verify(c_tab[zero], tab, s_tab))
        ):
            return False
        masks = c.propagate(m_in.astype(np.uint8), masks=True, and_values=m_and.astype(np.uint8))
        if not np.array_equal(_tables(stmt, masks), tab):
            return False
    if o:
        vhat = _masked_values(stmt, vhat_in.astype(np.uint8), and_bits.astype(np.uint8))
        idx = (2 * vhat[:, c.and_a] + vhat[:, c.and_b]).astype(np.int64)
        cells = np.take_along_axis(c_tab[one], idx[..., None], axis=2)[..., 0]
        if not np.all(backend.verify(cells, and_bits, cell_seeds)):
            return False
        if not np.all(backend.verify(c_and[one, out], out_mask, out_seed)):
            return False
        if not np.all(vhat[:, c.output] ^ out_mask.astype(np.uint8) == 1):
            return False
    return True


# ---------- engine dispatch ----------


def wi_commit(
    stmt: Statement,
    witness: Sequence[int] | Bits | None,
    backend: CommitmentBackend,
    t: int,
    rng: np.random.Generator,
    guesses: NDArray[np.uint8] | None = None,
) -> tuple[WiMessage, Secret]:
    if t < 1:
        raise FormatError("at least one repetition is required")
    if isinstance(stmt, Graph):
        return graph_commit(stmt, None if witness is None else list(witness), backend, t, rng, guesses)
    w = None if witness is None else np.asarray(witness, dtype=np.uint8)
    return circuit_commit(stmt, w, backend, t, rng, guesses)


def wi_respond(stmt: Statement, secret: Secret, e: Bits) -> WiMessage:
    e = np.asarray(e, dtype=np.uint8)
    if isinstance(stmt, Graph) and isinstance(secret, GraphSecret):
        return graph_respond(stmt, secret, e)
    if isinstance(stmt, CircuitStatement) and isinstance(secret, CircuitSecret):
        return circuit_respond(stmt, secret, e)
    raise FormatError("statement and prover secret belong to different engines")


def wi_challenge(t: int, rng: np.random.Generator) -> Bits:
    return random_bits(rng, t)


def wi_check(
    stmt: Statement,
    backend: CommitmentBackend,
    first: WiMessage,
    e: Bits,
    response: WiMessage,
    round_offset: int = 0,
) -> bool:
    """Verdict on one WI exchange; malformed messages raise ProtocolError."""
    e = np.asarray(e, dtype=np.uint8)
    if not _bits_ok(e):
        raise ProtocolError("challenge must be bits", round_offset + 3)
    if isinstance(stmt, Graph):
        return graph_check(stmt, backend, first, e, response, round_offset)
    return circuit_check(stmt, backend, first, e, response, round_offset)


# ---------- standalone four-round run ----------


@dataclass
class WiTranscript:
    t: int
    rmsg: int
    first: WiMessage
    challenge: Bits
    response: WiMessage
    accepted: bool = False

    def verify(self, stmt: Statement, lam: int) -> bool:
        """Re-run the verifier's checks; the transcript alone decides."""
        backend = NaorBackend(ReceiverMsg(self.rmsg, lam))
        return wi_check(stmt, backend, self.first, self.challenge, self.response)


def wi_prove_verify(
    stmt: Statement,
    witness: Sequence[int] | Bits | None,
    lam: int,
    t: int,
    rng: np.random.Generator,
    cheat: bool = False,
) -> WiTranscript:
    """Run prover and verifier in process; cheat=True guesses every challenge."""
    rmsg = ReceiverMsg.sample(rng, lam)
    backend = NaorBackend(rmsg)
    guesses = random_bits(rng, t) if cheat else None
    first, secret = wi_commit(stmt, witness, backend, t, rng, guesses)
    e = wi_challenge(t, rng)
    response = wi_respond(stmt, secret, e)
    accepted = wi_check(stmt, backend, first, e, response)
    logger.debug("wi run t=%d cheat=%s accepted=%s", t, cheat, accepted)
    return WiTranscript(t, rmsg.r, first, e, response, accepted)
