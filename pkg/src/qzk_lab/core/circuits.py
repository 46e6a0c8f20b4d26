"""
Boolean circuits over {AND, XOR, NOT, CONST} with public parameter slots.

Wires are numbered by the gate that drives them; a gate only reads earlier
wires, so the gate list is already topological. Evaluation is level-vectorized
over a batch axis so one pass serves many repetitions.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import IntEnum
import logging

import numpy as np
from numpy.typing import NDArray

from qzk_lab.core.crypto import BLOCK_BITS, ROUND_CONSTANTS, ROUNDS
from qzk_lab.core.errors import FormatError

logger = logging.getLogger(__name__)


class Op(IntEnum):
    INPUT = 0
    PARAM = 1
    CONST = 2
    XOR = 3
    AND = 4
    NOT = 5


@dataclass(frozen=True)
class CircuitGate:
    op: Op
    a: int = -1
    b: int = -1
    value: int = 0


@dataclass(frozen=True)
class _Level:
    xor_dst: NDArray[np.int64]
    xor_a: NDArray[np.int64]
    xor_b: NDArray[np.int64]
    and_dst: NDArray[np.int64]
    and_a: NDArray[np.int64]
    and_b: NDArray[np.int64]
    not_dst: NDArray[np.int64]
    not_a: NDArray[np.int64]


class BoolCircuit:
    def __init__(
        self,
        gates: Sequence[CircuitGate],
        output: int,
        input_labels: Sequence[str] = (),
        param_slots: Mapping[str, tuple[int, int]] | None = None,
    ) -> None:
        self.gates = list(gates)
        self.output = output
        self.param_slots = dict(param_slots or {})
        for i, g in enumerate(self.gates):
            if g.op in (Op.XOR, Op.AND) and not (0 <= g.a < i and 0 <= g.b < i):
                raise FormatError(f"gate {i} reads a wire that is not yet driven")
            if g.op is Op.NOT and not 0 <= g.a < i:
                raise FormatError(f"gate {i} reads a wire that is not yet driven")
        if not 0 <= output < len(self.gates):
            raise FormatError(f"output wire {output} is not driven")

        ops = np.array([int(g.op) for g in self.gates], dtype=np.int64)
        self.input_wires = np.flatnonzero(ops == Op.INPUT)
        self.param_wires = np.flatnonzero(ops == Op.PARAM)
        self.const_wires = np.flatnonzero(ops == Op.CONST)
        self.const_values = np.array([self.gates[w].value for w in self.const_wires], dtype=np.uint8)
        self.and_wires = np.flatnonzero(ops == Op.AND)
        self.and_a = np.array([self.gates[w].a for w in self.and_wires], dtype=np.int64)
        self.and_b = np.array([self.gates[w].b for w in self.and_wires], dtype=np.int64)
        labels = list(input_labels)
        self.input_labels = labels if labels else [f"x{i}" for i in range(len(self.input_wires))]
        if len(self.input_labels) != len(self.input_wires):
            raise FormatError("one label per input wire is required")
        self._levels = self._build_levels()

    @property
    def size(self) -> int:
        return len(self.gates)

    @property
    def n_inputs(self) -> int:
        return int(self.input_wires.size)

    @property
    def n_params(self) -> int:
        return int(self.param_wires.size)

    @property
    def n_and(self) -> int:
        return int(self.and_wires.size)

    def _build_levels(self) -> list[_Level]:
        depth = np.zeros(len(self.gates), dtype=np.int64)
        for i, g in enumerate(self.gates):
            if g.op in (Op.XOR, Op.AND):
                depth[i] = 1 + max(depth[g.a], depth[g.b])
            elif g.op is Op.NOT:
                depth[i] = 1 + depth[g.a]
        levels = []
        for d in range(1, int(depth.max(initial=0)) + 1):
            rows: dict[Op, list[tuple[int, int, int]]] = {Op.XOR: [], Op.AND: [], Op.NOT: []}
            for i in np.flatnonzero(depth == d):
                g = self.gates[i]
                rows[g.op].append((int(i), g.a, max(g.b, 0)))
            arr = {
                op: np.array(r, dtype=np.int64).reshape(-1, 3).T for op, r in rows.items()
            }
            levels.append(
                _Level(
                    *arr[Op.XOR], *arr[Op.AND], *arr[Op.NOT][:2]
                )
            )
        return levels

    def bind(self, public: Mapping[str, NDArray[np.integer]]) -> NDArray[np.uint8]:
        """Assemble the parameter vector from named public bit strings."""
        params = np.zeros(self.n_params, dtype=np.uint8)
        if set(public) != set(self.param_slots):
            raise FormatError(f"expected parameters {sorted(self.param_slots)}, got {sorted(public)}")
        for name, (start, count) in self.param_slots.items():
            bits = np.asarray(public[name], dtype=np.uint8).ravel()
            if bits.size != count:
                raise FormatError(f"parameter '{name}' needs {count} bits, got {bits.size}")
            params[start : start + count] = bits
        return params

    def propagate(
        self,
        inputs: NDArray[np.integer],
        params: NDArray[np.integer] | None = None,
        and_values: NDArray[np.integer] | None = None,
        masks: bool = False,
    ) -> NDArray[np.uint8]:
        """Evaluate every wire for a batch of input rows.

        and_values pins AND outputs instead of computing them. masks=True
        propagates masks: NOT copies its input, CONST and PARAM carry 0.
        """
        x = np.atleast_2d(np.asarray(inputs, dtype=np.uint8))
        batch = x.shape[0]
        if x.shape[1] != self.n_inputs:
            raise FormatError(f"circuit has {self.n_inputs} inputs, got {x.shape[1]}")
        vals = np.zeros((batch, self.size), dtype=np.uint8)
        vals[:, self.input_wires] = x
        if not masks:
            vals[:, self.const_wires] = self.const_values
            if self.n_params:
                if params is None:
                    raise FormatError("circuit has unbound parameters")
                vals[:, self.param_wires] = np.asarray(params, dtype=np.uint8)
        if and_values is not None:
            vals[:, self.and_wires] = np.atleast_2d(np.asarray(and_values, dtype=np.uint8))
        flip = np.uint8(0 if masks else 1)
        for lv in self._levels:
            if lv.xor_dst.size:
                vals[:, lv.xor_dst] = vals[:, lv.xor_a] ^ vals[:, lv.xor_b]
            if lv.and_dst.size and and_values is None:
                vals[:, lv.and_dst] = vals[:, lv.and_a] & vals[:, lv.and_b]
            if lv.not_dst.size:
                vals[:, lv.not_dst] = vals[:, lv.not_a] ^ flip
        return vals

    def evaluate(
        self, assignment: Sequence[int] | NDArray[np.integer], params: NDArray[np.integer] | None = None
    ) -> int:
        return int(self.propagate(np.asarray(assignment).reshape(1, -1), params)[0, self.output])

    def evaluate_batch(
        self, assignments: NDArray[np.integer], params: NDArray[np.integer] | None = None
    ) -> NDArray[np.uint8]:
        return self.propagate(assignments, params)[:, self.output]


class CircuitBuilder:
    """Emits gates with constant folding and structural hashing."""

    def __init__(self) -> None:
        self.gates: list[CircuitGate] = []
        self.labels: list[str] = []
        self.param_slots: dict[str, tuple[int, int]] = {}
        self._n_params = 0
        self._cache: dict[tuple[int, int, int], int] = {}
        self._const: dict[int, int] = {}
        self._const_of: dict[int, int] = {}
        self._neg: dict[int, int] = {}

    def _emit(self, gate: CircuitGate) -> int:
        self.gates.append(gate)
        return len(self.gates) - 1

    def input(self, label: str) -> int:
        self.labels.append(label)
        return self._emit(CircuitGate(Op.INPUT, value=len(self.labels) - 1))

    def inputs(self, label: str, count: int) -> list[int]:
        return [self.input(f"{label}[{i}]") for i in range(count)]

    def param(self, name: str, count: int) -> list[int]:
        if name in self.param_slots:
            raise FormatError(f"parameter '{name}' declared twice")
        self.param_slots[name] = (self._n_params, count)
        wires = [self._emit(CircuitGate(Op.PARAM, value=self._n_params + i)) for i in range(count)]
        self._n_params += count
        return wires

    def const(self, v: int) -> int:
        v &= 1
        if v not in self._const:
            w = self._emit(CircuitGate(Op.CONST, value=v))
            self._const[v] = w
            self._const_of[w] = v
        return self._const[v]

    def constant_value(self, w: int) -> int | None:
        return self._const_of.get(w)

    def not_(self, a: int) -> int:
        ca = self._const_of.get(a)
        if ca is not None:
            return self.const(1 - ca)
        if a in self._neg:
            return self._neg[a]
        w = self._emit(CircuitGate(Op.NOT, a))
        self._neg[a] = w
        self._neg[w] = a
        return w

    def xor(self, a: int, b: int) -> int:
        a, b = min(a, b), max(a, b)
        if a == b:
            return self.const(0)
        ca, cb = self._const_of.get(a), self._const_of.get(b)
        if ca is not None and cb is not None:
            return self.const(ca ^ cb)
        if ca is not None:
            return b if ca == 0 else self.not_(b)
        if cb is not None:
            return a if cb == 0 else self.not_(a)
        if self._neg.get(a) == b:
            return self.const(1)
        key = (int(Op.XOR), a, b)
        if key not in self._cache:
            self._cache[key] = self._emit(CircuitGate(Op.XOR, a, b))
        return self._cache[key]

    def and_(self, a: int, b: int) -> int:
        a, b = min(a, b), max(a, b)
        if a == b:
            return a
        ca, cb = self._const_of.get(a), self._const_of.get(b)
        if ca is not None:
            return b if ca else self.const(0)
        if cb is not None:
            return a if cb else self.const(0)
        if self._neg.get(a) == b:
            return self.const(0)
        key = (int(Op.AND), a, b)
        if key not in self._cache:
            self._cache[key] = self._emit(CircuitGate(Op.AND, a, b))
        return self._cache[key]

    def or_(self, a: int, b: int) -> int:
        return self.not_(self.and_(self.not_(a), self.not_(b)))

    def xnor(self, a: int, b: int) -> int:
        return self.not_(self.xor(a, b))

    def and_all(self, wires: Sequence[int]) -> int:
        layer = list(wires)
        if not layer:
            return self.const(1)
        while len(layer) > 1:
            nxt = [self.and_(layer[i], layer[i + 1]) for i in range(0, len(layer) - 1, 2)]
            if len(layer) % 2:
                nxt.append(layer[-1])
            layer = nxt
        return layer[0]

    def or_all(self, wires: Sequence[int]) -> int:
        if not wires:
            return self.const(0)
        return self.not_(self.and_all([self.not_(w) for w in wires]))

    def eq_bits(self, wires: Sequence[int], other: Sequence[int]) -> int:
        if len(wires) != len(other):
            raise FormatError("equality over strings of different length")
        return self.and_all([self.xnor(a, b) for a, b in zip(wires, other, strict=True)])

    def eq_const(self, wires: Sequence[int], value: int) -> int:
        n = len(wires)
        return self.and_all(
            [w if (value >> (n - 1 - i)) & 1 else self.not_(w) for i, w in enumerate(wires)]
        )

    def build(self, output: int, pin_output: bool = True) -> BoolCircuit:
        """Finish the circuit; pin_output appends AND(out, 1) so the output is an AND wire."""
        if pin_output:
            one = self.const(1)
            output = self._emit(CircuitGate(Op.AND, output, one))
        circuit = BoolCircuit(self.gates, output, self.labels, self.param_slots)
        logger.debug(
            "built circuit: %d gates, %d AND, %d inputs, %d params",
            circuit.size, circuit.n_and, circuit.n_inputs, circuit.n_params,
        )
        return circuit


# ---------- the PRG as a circuit ----------


def _feistel_block(b: CircuitBuilder, key_lsb: Sequence[int], block: int, lam: int) -> list[int]:
    """E_key(block) for a public counter block; returns 32 wires MSB first."""
    k32 = [key_lsb[p % lam] for p in range(BLOCK_BITS)]
    left = [b.const((block >> (16 + p)) & 1) for p in range(16)]
    right = [b.const((block >> p) & 1) for p in range(16)]
    for r in range(ROUNDS):
        rk = [k32[(p - 7 * r) % BLOCK_BITS] for p in range(16)]
        rk = [b.not_(w) if (ROUND_CONSTANTS[r] >> p) & 1 else w for p, w in enumerate(rk)]
        f = [
            b.xor(b.and_(left[(p - 1) % 16], left[(p - 8) % 16]), left[(p - 2) % 16])
            for p in range(16)
        ]
        left, right = [b.xor(b.xor(right[p], f[p]), rk[p]) for p in range(16)], left
    return [left[15 - i] for i in range(16)] + [right[15 - i] for i in range(16)]


def prg_circuit(b: CircuitBuilder, seed_msb: Sequence[int], lam: int, out_len: int) -> list[int]:
    """Wires for the first out_len bits of G(seed); seed_msb holds the seed MSB first."""
    if len(seed_msb) != lam:
        raise FormatError(f"seed needs {lam} wires, got {len(seed_msb)}")
    key_lsb = list(reversed(seed_msb))
    out: list[int] = []
    block = 0
    while len(out) < out_len:
        out.extend(_feistel_block(b, key_lsb, block, lam))
        block += 1
    return out[:out_len]
