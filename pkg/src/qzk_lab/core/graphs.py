"""
Graphs for Hamiltonicity statements and the GRA1 instance format.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
import struct

import numpy as np
from numpy.typing import NDArray

from qzk_lab.core.errors import FormatError

GRAPH_MAGIC = b"GRA1"


@dataclass(eq=False)
class Graph:
    n_vertices: int
    adjacency: NDArray[np.uint8]
    directed: bool = False

    def __post_init__(self) -> None:
        self.adjacency = np.asarray(self.adjacency, dtype=np.uint8)
        n = self.n_vertices
        if self.adjacency.shape != (n, n):
            raise FormatError(f"adjacency shape {self.adjacency.shape} for {n} vertices")
        if np.any(self.adjacency > 1):
            raise FormatError("adjacency entries must be 0/1")
        if np.any(np.diag(self.adjacency)):
            raise FormatError("self-loops are not allowed")
        if not self.directed and not np.array_equal(self.adjacency, self.adjacency.T):
            raise FormatError("undirected graph needs a symmetric adjacency matrix")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.directed == other.directed and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self) -> int:
        return hash((self.directed, self.adjacency.tobytes()))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], directed: bool = False) -> Graph:
        adj = np.zeros((n, n), dtype=np.uint8)
        for u, v in edges:
            adj[u, v] = 1
            if not directed:
                adj[v, u] = 1
        return cls(n, adj, directed)

    @classmethod
    def complete(cls, n: int) -> Graph:
        return cls(n, (1 - np.eye(n, dtype=np.uint8)).astype(np.uint8))

    @classmethod
    def cycle(cls, n: int) -> Graph:
        return cls.from_edges(n, [(i, (i + 1) % n) for i in range(n)])

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adjacency[u, v])

    def edges(self) -> list[tuple[int, int]]:
        return [(int(u), int(v)) for u, v in zip(*np.nonzero(self.adjacency), strict=True)]

    def successors(self, u: int) -> list[int]:
        return [int(v) for v in np.flatnonzero(self.adjacency[u])]

    def permuted(self, pi: Sequence[int]) -> Graph:
        """Relabel vertex u as pi[u]."""
        p = np.asarray(pi, dtype=np.int64)
        adj = np.zeros_like(self.adjacency)
        adj[np.ix_(p, p)] = self.adjacency
        return Graph(self.n_vertices, adj, self.directed)

    def to_bytes(self) -> bytes:
        header = GRAPH_MAGIC + struct.pack("<HB", self.n_vertices, int(self.directed))
        return header + np.packbits(self.adjacency.ravel()).tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> Graph:
        if len(blob) < 7 or blob[:4] != GRAPH_MAGIC:
            raise FormatError("bad GRA1 header")
        n, directed = struct.unpack_from("<HB", blob, 4)
        body = blob[7:]
        if len(body) != (n * n + 7) // 8 or directed > 1:
            raise FormatError(f"GRA1 body of {len(body)} bytes does not fit {n} vertices")
        bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8))[: n * n]
        return cls(n, bits.reshape(n, n), bool(directed))


def save_instance(g: Graph, path: Path) -> None:
    path.write_bytes(g.to_bytes())


def load_instance(path: Path) -> Graph:
    try:
        return Graph.from_bytes(path.read_bytes())
    except OSError as e:
        raise FormatError(f"cannot read instance {path}: {e}") from e


def is_hamiltonian_cycle(g: Graph, cycle: Sequence[int]) -> bool:
    n = g.n_vertices
    if len(cycle) != n or sorted(int(v) for v in cycle) != list(range(n)):
        return False
    return all(g.has_edge(int(cycle[i]), int(cycle[(i + 1) % n])) for i in range(n))


def find_hamiltonian_cycle(g: Graph) -> list[int] | None:
    """Exhaustive search from vertex 0 with memoized dead ends."""
    n = g.n_vertices
    if n == 0:
        return None
    succ = [g.successors(u) for u in range(n)]
    full = (1 << n) - 1
    dead: set[tuple[int, int]] = set()
    path = [0]

    def extend(u: int, mask: int) -> bool:
        if mask == full:
            return g.has_edge(u, 0)
        if (u, mask) in dead:
            return False
        for v in succ[u]:
            if not mask >> v & 1:
                path.append(v)
                if extend(v, mask | 1 << v):
                    return True
                path.pop()
        dead.add((u, mask))
        return False

    return list(path) if extend(0, 1) else None


def hamiltonian_cycles(g: Graph) -> list[list[int]]:
    """All directed Hamiltonian cycles starting at vertex 0 (small graphs)."""
    n = g.n_vertices
    out: list[list[int]] = []

    def walk(path: list[int], mask: int) -> None:
        u = path[-1]
        if len(path) == n:
            if g.has_edge(u, 0):
                out.append(list(path))
            return
        for v in g.successors(u):
            if not mask >> v & 1:
                path.append(v)
                walk(path, mask | 1 << v)
                path.pop()

    if n:
        walk([0], 1)
    return out


def planted_hamiltonian(n: int, extra_edges: int, rng: np.random.Generator) -> tuple[Graph, list[int]]:
    """Random undirected graph with a planted Hamiltonian cycle."""
    order = [int(v) for v in rng.permutation(n)]
    edges = {(min(u, v), max(u, v)) for u, v in zip(order, order[1:] + order[:1], strict=True)}
    candidates = [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in edges]
    for idx in rng.permutation(len(candidates))[:extra_edges]:
        edges.add(candidates[int(idx)])
    return Graph.from_edges(n, sorted(edges)), order


def petersen() -> Graph:
    """The smallest vertex-transitive non-Hamiltonian graph."""
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph.from_edges(10, outer + spokes + inner)


def star(n: int) -> Graph:
    return Graph.from_edges(n, [(0, i) for i in range(1, n)])
