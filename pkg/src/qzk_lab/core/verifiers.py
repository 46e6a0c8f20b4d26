"""
Malicious verifiers as channel programs.

A verifier is the honest state machine plus, per channel, at most one hybrid
block that runs on its M-qubit register before the honest round: apply a
unitary, measure a prefix, and look the outcome up in an accept table indexed
by (outcome, watched challenge bits). A rejected lookup aborts the channel.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from numpy.typing import NDArray
from scipy.stats import unitary_group

from qzk_lab.core.bits import Bits, bits_to_int
from qzk_lab.core.errors import ConfigError, DimensionError
from qzk_lab.core.qsim import HybridState, QState, UnitaryDescriptor, run_channel

logger = logging.getLogger(__name__)

N_CHANNELS = 5
MAX_WIDTH = 5


@dataclass(frozen=True, eq=False)
class AbortRule:
    channel: int
    unitary: UnitaryDescriptor
    measure: int
    accept: NDArray[np.bool_]
    watch: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 1 <= self.channel <= N_CHANNELS:
            raise ConfigError(f"channel {self.channel} outside [1, {N_CHANNELS}]")
        if self.channel == 1 and self.watch:
            raise ConfigError("the first channel runs before any challenge bit exists")
        shape = (2**self.measure, 2 ** len(self.watch))
        if np.shape(self.accept) != shape:
            raise ConfigError(f"accept table needs shape {shape}, got {np.shape(self.accept)}")

    def watched_value(self, b: Bits) -> int:
        return bits_to_int(np.asarray([b[i] for i in self.watch], dtype=np.uint8)) if self.watch else 0

    def run(self, q: QState, b: Bits | None, rng: np.random.Generator) -> tuple[bool, QState]:
        """Execute the block; returns (continue, post-state)."""
        if q.num_qubits != self.unitary.arity:
            raise DimensionError(f"rule acts on {self.unitary.arity} qubits, register has {q.num_qubits}")
        wv = 0 if b is None else self.watched_value(b)

        def post(c: bytes, u: UnitaryDescriptor | None, ell: int, outcome: Bits) -> tuple[bytes, None, int]:
            return bytes([int(self.accept[bits_to_int(outcome), wv])]), None, 0

        res = run_channel(HybridState(b"", self.unitary, self.measure, q), post, rng, max_blocks=1)
        return res.classical == b"\x01", res.quantum

    def effect(self, watched: int) -> NDArray[np.complex128]:
        """U^dagger (sum of accepted outcome projectors, tensor I) U."""
        m = self.unitary.arity
        idx = np.arange(2**m) >> (m - self.measure)
        diag = self.accept[idx, watched].astype(np.complex128)
        u = self.unitary.matrix()
        return u.conj().T @ (diag[:, None] * u)


@dataclass(frozen=True, eq=False)
class VerifierSpec:
    name: str
    m: int
    advice: QState
    rules: tuple[AbortRule, ...] = ()
    description: str = ""

    def __post_init__(self) -> None:
        if self.advice.num_qubits != self.m:
            raise DimensionError(f"advice has {self.advice.num_qubits} qubits, verifier declares {self.m}")
        channels = [r.channel for r in self.rules]
        if len(set(channels)) != len(channels):
            raise ConfigError("at most one rule per channel")

    def rule_for(self, channel: int) -> AbortRule | None:
        return next((r for r in self.rules if r.channel == channel), None)


def _identity_rule(
    m: int, channel: int, accept: NDArray[np.bool_], watch: tuple[int, ...] = (), measure: int = 0
) -> AbortRule:
    return AbortRule(channel, UnitaryDescriptor.identity(m), measure, accept, watch)


def honest(m: int = 1) -> VerifierSpec:
    return VerifierSpec("honest", m, QState.zero(m), description="follows the protocol")


def never_abort(m: int = 1) -> VerifierSpec:
    rule = _identity_rule(m, 2, np.ones((1, 1), dtype=bool))
    return VerifierSpec("never_abort", m, QState.zero(m), (rule,), "runs a trivial block and continues")


def always_abort(m: int = 1) -> VerifierSpec:
    rule = _identity_rule(m, 2, np.zeros((1, 1), dtype=bool))
    return VerifierSpec("always_abort", m, QState.zero(m), (rule,), "aborts at step 4")


def bit_conditional(position: int = 0, abort_on: int = 1, m: int = 1) -> VerifierSpec:
    """Abort at step 4 iff b[position] == abort_on."""
    accept = np.array([[abort_on != 0, abort_on != 1]], dtype=bool)
    rule = _identity_rule(m, 2, accept, (position,))
    return VerifierSpec(f"bit_conditional_{position}_{abort_on}", m, QState.zero(m), (rule,))


def delayed_abort(position: int = 0, m: int = 1) -> VerifierSpec:
    """Abort at step 6 iff b[position] == 1."""
    rule = _identity_rule(m, 3, np.array([[True, False]]), (position,))
    return VerifierSpec("delayed_abort", m, QState.zero(m), (rule,))


def quantum_coin(theta: float = math.pi / 4, m: int = 1) -> VerifierSpec:
    """Advice cos(theta)|0> + sin(theta)|1> on qubit 0, measured at step 4; abort on 1."""
    vec = np.zeros(2**m, dtype=np.complex128)
    vec[0] = math.cos(theta)
    vec[2 ** (m - 1)] = math.sin(theta)
    rule = AbortRule(2, UnitaryDescriptor.identity(m), 1, np.array([[True], [False]]))
    return VerifierSpec(f"quantum_coin_{theta:.3f}", m, QState.from_vector(vec), (rule,))


def random_unitary(m: int, rng: np.random.Generator, layers: int = 2) -> UnitaryDescriptor:
    """Dense three-qubit blocks on sliding windows; a single dense gate when m <= 3."""
    u = UnitaryDescriptor.identity(m)
    if m == 0:
        return u
    if m <= 3:
        return u.add("U", *range(m), matrix=unitary_group.rvs(2**m, random_state=rng))
    for _ in range(layers):
        for start in range(0, m - 2):
            u = u.add("U", start, start + 1, start + 2, matrix=unitary_group.rvs(8, random_state=rng))
    return u


def random_state(m: int, rng: np.random.Generator) -> QState:
    v = rng.normal(size=2**m) + 1j * rng.normal(size=2**m)
    return QState.from_vector(v / np.linalg.norm(v))


def random_effect(m: int, rng: np.random.Generator, watch: int = 1, channel: int = 2) -> VerifierSpec:
    """Random advice, unitary and accept table over one measured qubit and `watch` challenge bits."""
    if not 1 <= m <= MAX_WIDTH:
        raise ConfigError(f"random verifiers use 1..{MAX_WIDTH} qubits")
    measure = 1 if m < 3 else 2
    accept = rng.integers(0, 2, size=(2**measure, 2**watch)).astype(bool)
    rule = AbortRule(channel, random_unitary(m, rng), measure, accept, tuple(range(watch)))
    return VerifierSpec(f"random_effect_m{m}", m, random_state(m, rng), (rule,))


def advice_measuring(m: int = 3) -> VerifierSpec:
    """H on advice qubit 0 then measure it at step 4; abort on 1, so p = 1/2."""
    u = UnitaryDescriptor.identity(m).add("H", 0)
    rule = AbortRule(2, u, 1, np.array([[True], [False]]))
    return VerifierSpec(f"advice_measuring_m{m}", m, QState.zero(m), (rule,))


ZOO_BUILDERS: dict[str, Callable[..., VerifierSpec]] = {
    "honest": honest,
    "never_abort": never_abort,
    "always_abort": always_abort,
    "bit_conditional": bit_conditional,
    "delayed_abort": delayed_abort,
    "quantum_coin": quantum_coin,
    "advice_measuring": advice_measuring,
}


@dataclass
class Zoo:
    specs: dict[str, VerifierSpec] = field(default_factory=dict)

    def __iter__(self) -> Iterator[VerifierSpec]:
        return iter(self.specs.values())

    def __getitem__(self, name: str) -> VerifierSpec:
        try:
            return self.specs[name]
        except KeyError as e:
            raise ConfigError(f"unknown verifier '{name}'; known: {sorted(self.specs)}") from e


def build_zoo(rng: np.random.Generator, m: int = 1, n_random: int = 2) -> Zoo:
    specs = [
        honest(m),
        never_abort(m),
        always_abort(m),
        bit_conditional(0, 1, m),
        bit_conditional(0, 0, m),
        delayed_abort(0, m),
        quantum_coin(math.pi / 3, max(m, 1)),
    ]
    specs += [random_effect(max(m, 1), rng) for _ in range(n_random)]
    zoo = Zoo()
    for i, s in enumerate(specs):
        name = s.name if s.name not in zoo.specs else f"{s.name}_{i}"
        zoo.specs[name] = s if name == s.name else VerifierSpec(name, s.m, s.advice, s.rules, s.description)
    return zoo


def verifier_by_name(name: str, m: int = 1, rng: np.random.Generator | None = None) -> VerifierSpec:
    """Catalog lookup used by the CLI; random_effect draws from rng."""
    if name == "random_effect":
        return random_effect(m, rng or np.random.default_rng())
    if name not in ZOO_BUILDERS:
        raise ConfigError(f"unknown verifier '{name}'; known: {sorted([*ZOO_BUILDERS, 'random_effect'])}")
    builder = ZOO_BUILDERS[name]
    if name in ("bit_conditional", "quantum_coin", "delayed_abort"):
        return builder(m=m)
    return builder(m)
