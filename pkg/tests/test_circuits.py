import itertools

import numpy as np
import pytest

from qzk_lab.core.bits import int_to_bits
from qzk_lab.core.circuits import BoolCircuit, CircuitBuilder, CircuitGate, Op, prg_circuit
from qzk_lab.core.crypto import prg_expand
from qzk_lab.core.errors import FormatError

ALL_PAIRS = np.array(list(itertools.product([0, 1], repeat=2)), dtype=np.uint8)


@pytest.mark.parametrize(
    ("gate", "table"),
    [
        ("and_", [0, 0, 0, 1]),
        ("or_", [0, 1, 1, 1]),
        ("xor", [0, 1, 1, 0]),
        ("xnor", [1, 0, 0, 1]),
    ],
)
def test_two_input_gates(gate, table):
    b = CircuitBuilder()
    x, y = b.inputs("x", 2)
    c = b.build(getattr(b, gate)(x, y))
    assert c.evaluate_batch(ALL_PAIRS).tolist() == table


def test_constant_folding_and_hashing():
    b = CircuitBuilder()
    x = b.input("x")
    one, zero = b.const(1), b.const(0)
    assert b.and_(x, one) == x
    assert b.and_(x, zero) == zero
    assert b.xor(x, x) == zero
    assert b.xor(x, b.not_(x)) == one
    assert b.not_(b.not_(x)) == x
    y = b.input("y")
    assert b.and_(x, y) == b.and_(y, x)
    assert b.constant_value(b.xor(one, one)) == 0


def test_wide_helpers():
    b = CircuitBuilder()
    xs = b.inputs("x", 4)
    c_eq = b.build(b.eq_const(xs, 0b1010))
    rows = np.array([int_to_bits(v, 4) for v in range(16)])
    assert c_eq.evaluate_batch(rows).tolist() == [int(v == 0b1010) for v in range(16)]

    b = CircuitBuilder()
    xs = b.inputs("x", 4)
    c_or = b.build(b.or_all(xs))
    assert c_or.evaluate_batch(rows).tolist() == [int(v != 0) for v in range(16)]

    b = CircuitBuilder()
    xs, ys = b.inputs("x", 2), b.inputs("y", 2)
    c = b.build(b.eq_bits(xs, ys))
    rows4 = np.array([int_to_bits(v, 4) for v in range(16)])
    assert c.evaluate_batch(rows4).tolist() == [int(v >> 2 == v & 3) for v in range(16)]
    with pytest.raises(FormatError):
        b.eq_bits(xs, ys[:1])


def test_build_pins_output_to_an_and_gate():
    b = CircuitBuilder()
    x = b.input("x")
    c = b.build(b.not_(x))
    assert c.gates[c.output].op is Op.AND
    assert c.evaluate([0]) == 1


def test_params_bind_by_name():
    b = CircuitBuilder()
    x = b.inputs("x", 3)
    p = b.param("key", 3)
    c = b.build(b.eq_bits(x, p))
    params = c.bind({"key": np.array([1, 0, 1])})
    assert c.evaluate([1, 0, 1], params) == 1
    assert c.evaluate([1, 1, 1], params) == 0
    with pytest.raises(FormatError):
        c.bind({"key": np.array([1, 0])})
    with pytest.raises(FormatError):
        c.bind({"other": np.array([1, 0, 1])})
    with pytest.raises(FormatError):
        c.evaluate([1, 0, 1])
    with pytest.raises(FormatError):
        b.param("key", 1)


def test_pinned_and_values_and_masks():
    b = CircuitBuilder()
    x, y = b.inputs("x", 2)
    c = b.build(b.xor(b.and_(x, y), b.not_(x)), pin_output=False)
    vals = c.propagate(np.array([[1, 1]]), and_values=np.array([[0]]))
    assert vals[0, c.output] == 0
    masks = c.propagate(np.array([[1, 0]]), and_values=np.array([[1]]), masks=True)
    # NOT carries its input mask unchanged: 1 xor 1
    assert masks[0, c.output] == 0


def test_malformed_circuits_rejected():
    with pytest.raises(FormatError):
        BoolCircuit([CircuitGate(Op.AND, 0, 1)], 0)
    with pytest.raises(FormatError):
        BoolCircuit([CircuitGate(Op.INPUT)], 3)
    with pytest.raises(FormatError):
        BoolCircuit([CircuitGate(Op.INPUT)], 0, input_labels=["a", "b"])
    b = CircuitBuilder()
    c = b.build(b.input("x"))
    with pytest.raises(FormatError):
        c.evaluate([0, 1])


@pytest.mark.parametrize("lam", [2, 4])
def test_prg_circuit_matches_vectorized_prg(lam):
    out_len = 40
    b = CircuitBuilder()
    seed = b.inputs("seed", lam)
    outs = prg_circuit(b, seed, lam, out_len)
    circuit = BoolCircuit(b.gates, outs[0], b.labels, b.param_slots)
    rows = np.array([int_to_bits(s, lam) for s in range(2**lam)])
    vals = circuit.propagate(rows)[:, outs]
    for s in range(2**lam):
        assert vals[s].tolist() == prg_expand(s, out_len, lam).tolist()


def test_prg_circuit_checks_seed_width():
    b = CircuitBuilder()
    with pytest.raises(FormatError):
        prg_circuit(b, b.inputs("seed", 3), 4, 8)
