import numpy as np
import pytest

from qzk_lab.core.bits import int_to_bits
from qzk_lab.core.compound import (
    CompoundLayout,
    build_compound_circuit,
    compound_template,
    trap_message,
    trap_seeds,
    trap_width,
)
from qzk_lab.core.crypto import ReceiverMsg, commit_bits, sample_seeds
from qzk_lab.core.errors import FormatError
from qzk_lab.core.graphs import Graph, planted_hamiltonian, star


def _statement(x: Graph, lam: int, rng: np.random.Generator, istar: int):
    rmsg = ReceiverMsg.sample(rng, lam)
    while rmsg.r == 0:
        rmsg = ReceiverMsg.sample(rng, lam)
    alphas = rng.integers(0, 2, size=(lam, 2, lam), dtype=np.uint8)
    rstar = int(rng.integers(0, 2**lam))
    seeds = sample_seeds(rng, lam, lam)
    cstar = commit_bits(rmsg, int_to_bits(rstar, lam), seeds)
    xor_row = alphas[istar, 0] ^ alphas[istar, 1]
    c2star = commit_bits(rmsg, trap_message(istar, xor_row, lam), trap_seeds(rstar, lam))
    circuit, params = build_compound_circuit(x, cstar, c2star, alphas, rmsg.r, lam)
    return circuit, params, rstar, seeds


@pytest.mark.parametrize("lam", [2, 4])
def test_trapdoor_witness_satisfies_on_a_no_instance(lam, rng):
    x = star(4)
    circuit, params, rstar, seeds = _statement(x, lam, rng, istar=lam - 1)
    layout = CompoundLayout(4, lam)
    assert circuit.n_inputs == layout.n_inputs
    assert circuit.evaluate(layout.witness_from_trapdoor(rstar, seeds, lam - 1), params) == 1
    assert circuit.evaluate(layout.witness_from_trapdoor(rstar, seeds, 0), params) == 0
    assert circuit.evaluate(np.zeros(layout.n_inputs, dtype=np.uint8), params) == 0


def test_wrong_seed_breaks_the_trapdoor_branch(rng):
    lam = 4
    circuit, params, rstar, seeds = _statement(star(4), lam, rng, istar=1)
    layout = CompoundLayout(4, lam)
    bad = seeds.copy()
    bad[0] ^= 1
    assert circuit.evaluate(layout.witness_from_trapdoor(rstar, bad, 1), params) == 0


def test_cycle_witness_satisfies_on_a_yes_instance(rng):
    x, cycle = planted_hamiltonian(5, 2, rng)
    circuit, params, _, _ = _statement(x, 2, rng, istar=0)
    layout = CompoundLayout(5, 2)
    assert circuit.evaluate(layout.witness_from_cycle(cycle), params) == 1
    assert circuit.evaluate(layout.witness_from_cycle([0, 0, 0, 0, 0]), params) == 0


def test_template_is_shared_per_graph_and_lambda():
    assert compound_template(star(4), 2) is compound_template(star(4), 2)


def test_layout_widths():
    assert trap_width(8) == 3 + 8
    layout = CompoundLayout(5, 4)
    assert layout.pos_bits == 3
    assert layout.cycle_len == 15
    assert layout.n_inputs == 15 + 4 + 16 + 2
    with pytest.raises(FormatError):
        layout.witness_from_cycle([0, 1])
    with pytest.raises(FormatError):
        layout.witness_from_trapdoor(0, np.zeros(3), 0)


def test_shape_checks(rng):
    lam = 2
    with pytest.raises(FormatError):
        build_compound_circuit(star(4), np.zeros(lam), np.zeros(3), np.zeros((lam, 2)), 0, lam)
    with pytest.raises(FormatError):
        build_compound_circuit(star(4), np.zeros(1), np.zeros(3), np.zeros((lam, 2, lam)), 0, lam)
