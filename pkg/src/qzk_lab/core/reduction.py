"""
Karp chain from circuit satisfiability to directed Hamiltonicity.

circuit -> CNF (truth table for tiny circuits, Tseitin otherwise) -> directed
graph built from variable rows and clause detour nodes. The chain is
deterministic, and satisfying assignments map forward to Hamiltonian cycles.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from itertools import product
import logging

import numpy as np
from numpy.typing import NDArray

from qzk_lab.core.circuits import BoolCircuit, Op
from qzk_lab.core.errors import FormatError
from qzk_lab.core.graphs import Graph, is_hamiltonian_cycle

logger = logging.getLogger(__name__)

TRUTH_TABLE_MAX_INPUTS = 3


@dataclass(frozen=True)
class Cnf:
    """Clauses over variables 1..n_vars; literal -v is the negation of v."""

    n_vars: int
    clauses: tuple[tuple[int, ...], ...]
    input_vars: tuple[int, ...]

    def satisfied_by(self, values: Sequence[int]) -> bool:
        return all(
            any((values[abs(lit) - 1] == 1) == (lit > 0) for lit in clause) for clause in self.clauses
        )

    def is_satisfiable(self) -> bool:
        """Brute force; small formulas only."""
        if self.n_vars > 20:
            raise FormatError("brute-force satisfiability is limited to 20 variables")
        return any(self.satisfied_by(v) for v in product((0, 1), repeat=self.n_vars))


def _clean(clause: Sequence[int]) -> tuple[int, ...]:
    return tuple(dict.fromkeys(clause))


def circuit_to_cnf(c: BoolCircuit, params: NDArray[np.integer] | None = None) -> Cnf:
    if c.n_inputs <= TRUTH_TABLE_MAX_INPUTS and c.n_params == 0:
        rows = np.array(list(product((0, 1), repeat=c.n_inputs)), dtype=np.uint8)
        rows = rows.reshape(-1, c.n_inputs)
        out = c.evaluate_batch(rows)
        table_clauses = [
            _clean([-(i + 1) if bit else i + 1 for i, bit in enumerate(row)])
            for row, value in zip(rows, out, strict=True)
            if not value
        ]
        return Cnf(c.n_inputs, tuple(table_clauses), tuple(range(1, c.n_inputs + 1)))

    if c.n_params and params is None:
        raise FormatError("circuit has unbound parameters")
    bound = np.asarray(params if params is not None else [], dtype=np.uint8)
    param_values = dict(zip(c.param_wires.tolist(), bound.tolist(), strict=True))
    clauses: list[tuple[int, ...]] = []
    for w, g in enumerate(c.gates):
        v = w + 1
        a, b = g.a + 1, g.b + 1
        if g.op is Op.CONST:
            clauses.append((v,) if g.value else (-v,))
        elif g.op is Op.PARAM:
            clauses.append((v,) if param_values[w] else (-v,))
        elif g.op is Op.NOT:
            clauses += [(v, a), (-v, -a)]
        elif g.op is Op.AND:
            clauses += [(-v, a), (-v, b), _clean((v, -a, -b))]
        elif g.op is Op.XOR:
            clauses += [(-v, a, b), (-v, -a, -b), (v, -a, b), (v, a, -b)]
    clauses.append((c.output + 1,))
    inputs = tuple(int(w) + 1 for w in c.input_wires)
    return Cnf(c.size, tuple(_clean(cl) for cl in clauses), inputs)


@dataclass
class HamiltonianReduction:
    """Directed graph for a CNF plus the node map needed to lift assignments."""

    cnf: Cnf
    graph: Graph
    heads: list[int]
    end: int
    rows: list[list[int]]
    clause_nodes: list[int]
    # (clause index, literal) -> occurrence slot in that variable's row
    slots: dict[tuple[int, int], int] = field(default_factory=dict)

    def cycle_for(self, values: Sequence[int]) -> list[int] | None:
        """Hamiltonian cycle for a satisfying variable assignment."""
        if not self.cnf.satisfied_by(values):
            return None
        if not self.heads:
            return [self.end - 1, self.end]
        detours: dict[tuple[int, int], int] = {}
        for j, clause in enumerate(self.cnf.clauses):
            lit = next(lit for lit in clause if (values[abs(lit) - 1] == 1) == (lit > 0))
            detours[(abs(lit) - 1, self.slots[(j, lit)])] = self.clause_nodes[j]

        cycle: list[int] = []
        for i, row in enumerate(self.rows):
            cycle.append(self.heads[i])
            forward = values[i] == 1
            walk = row if forward else row[::-1]
            for node_pos, node in enumerate(walk):
                cycle.append(node)
                pos = node_pos if forward else len(row) - 1 - node_pos
                if pos % 3 == 1 and forward and (i, pos // 3) in detours:
                    cycle.append(detours[(i, pos // 3)])
                elif pos % 3 == 2 and not forward and (i, pos // 3) in detours:
                    cycle.append(detours[(i, pos // 3)])
        cycle.append(self.end)
        return cycle


def cnf_to_graph(cnf: Cnf) -> HamiltonianReduction:
    n = cnf.n_vars
    occurrences: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    slots: dict[tuple[int, int], int] = {}
    for j, clause in enumerate(cnf.clauses):
        for lit in clause:
            var = abs(lit) - 1
            slots[(j, lit)] = len(occurrences[var])
            occurrences[var].append((j, lit))

    edges: list[tuple[int, int]] = []
    if n == 0:
        heads: list[int] = []
        end = 1
        rows: list[list[int]] = []
        edges += [(0, 1), (1, 0)]
        next_node = 2
    else:
        heads = list(range(n))
        end = n
        next_node = n + 1
        rows = []
        for occ in occurrences:
            rows.append(list(range(next_node, next_node + 3 * len(occ) + 1)))
            next_node += 3 * len(occ) + 1
        for i, row in enumerate(rows):
            after = heads[i + 1] if i + 1 < n else end
            edges += [(heads[i], row[0]), (heads[i], row[-1]), (row[0], after), (row[-1], after)]
            edges += [(row[k], row[k + 1]) for k in range(len(row) - 1)]
            edges += [(row[k + 1], row[k]) for k in range(len(row) - 1)]
        edges.append((end, heads[0]))

    clause_nodes = list(range(next_node, next_node + len(cnf.clauses)))
    for j, clause in enumerate(cnf.clauses):
        cj = clause_nodes[j]
        for lit in clause:
            row = rows[abs(lit) - 1]
            t = slots[(j, lit)]
            a, b = row[3 * t + 1], row[3 * t + 2]
            edges += [(a, cj), (cj, b)] if lit > 0 else [(b, cj), (cj, a)]

    total = next_node + len(cnf.clauses)
    graph = Graph.from_edges(total, sorted(set(edges)), directed=True)
    logger.debug("reduced %d vars / %d clauses to %d nodes", n, len(cnf.clauses), total)
    return HamiltonianReduction(cnf, graph, heads, end, rows, clause_nodes, slots)


def reduce_to_hamiltonicity(
    c: BoolCircuit,
    assignment: Sequence[int] | NDArray[np.integer] | None = None,
    params: NDArray[np.integer] | None = None,
) -> tuple[Graph, list[int] | None]:
    """Graph that is Hamiltonian iff c is satisfiable, and a cycle when assignment satisfies c."""
    cnf = circuit_to_cnf(c, params)
    red = cnf_to_graph(cnf)
    if assignment is None:
        return red.graph, None
    x = np.asarray(assignment, dtype=np.uint8).reshape(1, -1)
    if c.n_inputs <= TRUTH_TABLE_MAX_INPUTS and c.n_params == 0:
        values = [int(v) for v in x[0]]
    else:
        values = [int(v) for v in c.propagate(x, params)[0]]
    cycle = red.cycle_for(values)
    if cycle is not None and not is_hamiltonian_cycle(red.graph, cycle):
        raise FormatError("lifted cycle is not Hamiltonian")
    return red.graph, cycle
