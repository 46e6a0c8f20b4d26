"""
Malicious provers against the trapdoor protocol.

GuessingStrategy commits a random (i, g) in c** and proves the trapdoor branch
when g happens to equal alpha[i][0] xor alpha[i][1]. MaulingStrategy copies the
verifier's alpha commitments into c**. WiGuessingStrategy keeps c** honest and
guesses every WI challenge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np
from numpy.typing import NDArray

from qzk_lab.core.bits import Bits, random_bits
from qzk_lab.core.compound import CompoundStatement, trap_message
from qzk_lab.core.errors import ConfigError
from qzk_lab.core.protocol import HonestProver, ProverState, ProverStrategy

logger = logging.getLogger(__name__)


@dataclass
class GuessingStrategy(ProverStrategy):
    rng: np.random.Generator = field(default_factory=np.random.default_rng)
    wi_guess: bool = False
    istar: int = 0
    guess: Bits | None = None
    hit: bool = False

    def trapdoor_message(self, st: ProverState) -> Bits:
        lam = st.header.lam
        self.istar = int(self.rng.integers(0, lam))
        self.guess = random_bits(self.rng, lam)
        return trap_message(self.istar, self.guess, lam)

    def wi_witness(self, st: ProverState, stmt: CompoundStatement) -> tuple[Bits | None, bool]:
        assert st.alphas is not None and self.guess is not None
        xor = st.alphas[self.istar, 0] ^ st.alphas[self.istar, 1]
        self.hit = bool(np.array_equal(xor, self.guess))
        if self.hit:
            logger.debug("guess for index %d matched", self.istar)
            return stmt.layout.witness_from_trapdoor(st.rstar, st.seeds, self.istar), False
        return None, self.wi_guess


@dataclass
class MaulingStrategy(ProverStrategy):
    """c** is the first W words of the verifier's alpha commitments; WI by guessing."""

    def trapdoor_commitment(self, st: ProverState) -> NDArray[np.uint64]:
        assert st.calpha is not None
        return st.calpha.reshape(-1)[: st.header.width].astype(np.uint64).copy()

    def wi_witness(self, st: ProverState, stmt: CompoundStatement) -> tuple[Bits | None, bool]:
        return None, True


@dataclass
class WiGuessingStrategy(ProverStrategy):
    def wi_witness(self, st: ProverState, stmt: CompoundStatement) -> tuple[Bits | None, bool]:
        return None, True


def guessing_prover(rng: np.random.Generator, wi_guess: bool = False) -> HonestProver:
    return HonestProver(None, GuessingStrategy(rng, wi_guess))


def mauling_prover() -> HonestProver:
    return HonestProver(None, MaulingStrategy())


def wi_guessing_prover() -> HonestProver:
    return HonestProver(None, WiGuessingStrategy())


PROVERS = ("honest", "guessing", "mauling", "wi_guessing")


def prover_by_name(name: str, cycle: list[int] | None, rng: np.random.Generator) -> HonestProver:
    if name == "honest":
        return HonestProver(cycle)
    if name == "guessing":
        return guessing_prover(rng)
    if name == "mauling":
        return mauling_prover()
    if name == "wi_guessing":
        return wi_guessing_prover()
    raise ConfigError(f"unknown prover '{name}'; known: {list(PROVERS)}")


def guessing_success(lam: int, t: int, wi_guess: bool = False) -> float:
    """Exact accept probability of the guessing prover on a no-instance."""
    hit = 2.0**-lam
    return hit + (1 - hit) * (2.0**-t if wi_guess else 0.0)


def soundness_budget(lam: int, t: int) -> float:
    """lambda / 2^lambda for the trapdoor branch plus the WI soundness error."""
    return lam / 2**lam + 2.0**-t
