"""
The compound relation proved in the WI phase.

x_wi = (x, c*, c**, alpha table) is true when either w is a Hamiltonian cycle
of x, or (r*, r, i*) opens c* to r* with seeds r and c** to
(i*, alpha_{i*,0} xor alpha_{i*,1}) with seeds expanded from r*.
The circuit depends only on (x, lambda); the commitments, the receiver message
and the alpha table enter as public parameter slots.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from qzk_lab.core.bits import Bits, bits_to_words, ceil_log2, int_to_bits, words_to_bits
from qzk_lab.core.circuits import BoolCircuit, CircuitBuilder, prg_circuit
from qzk_lab.core.crypto import check_lambda, prg_expand
from qzk_lab.core.errors import FormatError
from qzk_lab.core.graphs import Graph


def istar_width(lam: int) -> int:
    return ceil_log2(lam)


def trap_width(lam: int) -> int:
    """Bits committed in c**: the index i* followed by one alpha xor (lambda bits)."""
    return istar_width(lam) + lam


@dataclass(frozen=True)
class CompoundLayout:
    n_vertices: int
    lam: int

    @property
    def pos_bits(self) -> int:
        return ceil_log2(self.n_vertices)

    @property
    def cycle_len(self) -> int:
        return self.n_vertices * self.pos_bits

    @property
    def n_inputs(self) -> int:
        return self.cycle_len + self.lam + self.lam * self.lam + istar_width(self.lam)

    def witness_from_cycle(self, cycle: list[int]) -> Bits:
        if len(cycle) != self.n_vertices:
            raise FormatError(f"cycle must list {self.n_vertices} vertices")
        out = np.zeros(self.n_inputs, dtype=np.uint8)
        out[: self.cycle_len] = np.concatenate([int_to_bits(v, self.pos_bits) for v in cycle])
        return out

    def witness_from_trapdoor(self, rstar: int, seeds: NDArray[np.integer], istar: int) -> Bits:
        lam = self.lam
        seeds = np.asarray(seeds)
        if seeds.shape != (lam,):
            raise FormatError(f"trapdoor needs {lam} seeds, got shape {seeds.shape}")
        tail = np.concatenate(
            [
                int_to_bits(rstar, lam),
                words_to_bits(seeds, lam).reshape(-1),
                int_to_bits(istar, istar_width(lam)),
            ]
        )
        out = np.zeros(self.n_inputs, dtype=np.uint8)
        out[self.cycle_len :] = tail
        return out


def trap_message(istar: int, xor_row: NDArray[np.integer], lam: int) -> Bits:
    return np.concatenate([int_to_bits(istar, istar_width(lam)), np.asarray(xor_row, dtype=np.uint8)])


def trap_seeds(rstar: int, lam: int) -> NDArray[np.uint64]:
    """Per-bit c** seeds expanded from r*."""
    w = trap_width(lam)
    return bits_to_words(prg_expand(rstar, w * lam, lam).reshape(w, lam))


def _hamiltonian_check(b: CircuitBuilder, g: Graph) -> int:
    n = g.n_vertices
    width = ceil_log2(n)
    positions = [b.inputs(f"cycle{p}", width) for p in range(n)]
    onehot = [[b.eq_const(positions[p], v) for v in range(n)] for p in range(n)]
    covered = b.and_all([b.or_all([onehot[p][v] for p in range(n)]) for v in range(n)])
    steps = []
    for p in range(n):
        nxt = onehot[(p + 1) % n]
        steps.append(
            b.or_all(
                [
                    b.and_(onehot[p][u], b.or_all([nxt[v] for v in g.successors(u)]))
                    for u in range(n)
                ]
            )
        )
    return b.and_(covered, b.and_all(steps))


def _commit_check(b: CircuitBuilder, seed: list[int], bit: int, rmsg: list[int], expected: list[int], lam: int) -> int:
    g = prg_circuit(b, seed, lam, 3 * lam)
    c = [b.xor(g[i], b.and_(bit, rmsg[i])) for i in range(3 * lam)]
    return b.eq_bits(c, expected)


@lru_cache(maxsize=32)
def _template(graph_blob: bytes, lam: int) -> BoolCircuit:
    g = Graph.from_bytes(graph_blob)
    check_lambda(lam)
    width = trap_width(lam)
    ib = istar_width(lam)
    b = CircuitBuilder()

    witness_ok = _hamiltonian_check(b, g)

    rmsg = b.param("rmsg", 3 * lam)
    cstar = b.param("cstar", lam * 3 * lam)
    c2star = b.param("c2star", width * 3 * lam)
    table = b.param("xor_table", lam * lam)
    rstar = b.inputs("rstar", lam)
    seeds = b.inputs("seeds", lam * lam)
    istar = b.inputs("istar", ib)

    checks = [
        _commit_check(
            b, seeds[j * lam : (j + 1) * lam], rstar[j], rmsg, cstar[j * 3 * lam : (j + 1) * 3 * lam], lam
        )
        for j in range(lam)
    ]
    expanded = prg_circuit(b, rstar, lam, width * lam)
    select = [b.eq_const(istar, i) for i in range(lam)]
    message = list(istar) + [
        b.or_all([b.and_(select[i], table[i * lam + k]) for i in range(lam)]) for k in range(lam)
    ]
    checks += [
        _commit_check(
            b,
            expanded[k * lam : (k + 1) * lam],
            message[k],
            rmsg,
            c2star[k * 3 * lam : (k + 1) * 3 * lam],
            lam,
        )
        for k in range(width)
    ]
    trapdoor_ok = b.and_(b.and_all(checks), b.or_all(select))
    return b.build(b.or_(witness_ok, trapdoor_ok))


def compound_template(graph: Graph, lam: int) -> BoolCircuit:
    return _template(graph.to_bytes(), lam)


@dataclass(frozen=True)
class CompoundStatement:
    graph: Graph
    lam: int
    rmsg: int
    cstar: NDArray[np.uint64]
    c2star: NDArray[np.uint64]
    xor_table: Bits

    @property
    def layout(self) -> CompoundLayout:
        return CompoundLayout(self.graph.n_vertices, self.lam)

    def public(self) -> dict[str, Bits]:
        lam = self.lam
        return {
            "rmsg": int_to_bits(self.rmsg, 3 * lam),
            "cstar": words_to_bits(self.cstar, 3 * lam).reshape(-1),
            "c2star": words_to_bits(self.c2star, 3 * lam).reshape(-1),
            "xor_table": np.asarray(self.xor_table, dtype=np.uint8).reshape(-1),
        }

    def circuit(self) -> tuple[BoolCircuit, Bits]:
        c = compound_template(self.graph, self.lam)
        return c, c.bind(self.public())


def build_compound_circuit(
    x: Graph,
    cstar: NDArray[np.uint64],
    c2star: NDArray[np.uint64],
    alphas: NDArray[np.integer],
    rmsg: int,
    lam: int,
) -> tuple[BoolCircuit, Bits]:
    """Circuit and bound parameters for x_wi; alphas has shape (lambda, 2, lambda)."""
    a = np.asarray(alphas, dtype=np.uint8)
    if a.shape != (lam, 2, lam):
        raise FormatError(f"alpha table must have shape ({lam}, 2, {lam}), got {a.shape}")
    if np.shape(cstar) != (lam,) or np.shape(c2star) != (trap_width(lam),):
        raise FormatError("commitment vectors have the wrong length")
    stmt = CompoundStatement(x, lam, rmsg, np.asarray(cstar), np.asarray(c2star), a[:, 0] ^ a[:, 1])
    return stmt.circuit()
