"""
Toy-parameterized classical primitives.

Everything here is heuristic at desk scale: a keyed 32-bit Feistel permutation
in counter mode stands in for a one-way-function based PRG, commitments follow
Naor (c = G(s) xor b*r, 3*lambda bits per committed bit), and a keyed BLAKE2b
tag stands in for the signature only the contrived verifier ever checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import hashlib
import math
import struct
from typing import Protocol

import numpy as np
from numpy.typing import NDArray

from qzk_lab.core.bits import Bits, words_to_bits
from qzk_lab.core.errors import FormatError

LAMBDA_MIN = 2
LAMBDA_MAX = 16
ROUNDS = 8
BLOCK_BITS = 32
MAX_PRG_BITS = 2**20
KEY_MAGIC = b"KEY1"

ROUND_CONSTANTS = (0x9E37, 0x79B9, 0x7F4A, 0x7C15, 0xF39C, 0xC060, 0x5CED, 0xC834)

_M16 = np.uint32(0xFFFF)
_M32 = np.uint64(0xFFFFFFFF)

U64 = NDArray[np.uint64]


def check_lambda(lam: int) -> None:
    if not LAMBDA_MIN <= lam <= LAMBDA_MAX:
        raise FormatError(f"lambda must lie in [{LAMBDA_MIN}, {LAMBDA_MAX}], got {lam}")


def _rotl16(v: NDArray[np.uint32], r: int) -> NDArray[np.uint32]:
    return ((v << np.uint32(r)) | (v >> np.uint32(16 - r))) & _M16


def _rotl32(v: U64, r: int) -> U64:
    r %= 32
    if r == 0:
        return v & _M32
    return ((v << np.uint64(r)) | (v >> np.uint64(32 - r))) & _M32


def round_function(v: NDArray[np.uint32]) -> NDArray[np.uint32]:
    return (_rotl16(v, 1) & _rotl16(v, 8)) ^ _rotl16(v, 2)


def expand_key(seeds: NDArray[np.integer], lam: int) -> U64:
    """Replicate each lambda-bit seed cyclically over 32 bits (LSB numbering)."""
    s = np.asarray(seeds, dtype=np.uint64)
    k = np.zeros_like(s)
    for p in range(BLOCK_BITS):
        k |= ((s >> np.uint64(p % lam)) & np.uint64(1)) << np.uint64(p)
    return k


def round_keys(seeds: NDArray[np.integer], lam: int) -> list[NDArray[np.uint32]]:
    k32 = expand_key(seeds, lam)
    return [
        (_rotl32(k32, 7 * r).astype(np.uint32) & _M16) ^ np.uint32(ROUND_CONSTANTS[r])
        for r in range(ROUNDS)
    ]


def permute_blocks(seeds: NDArray[np.integer], blocks: NDArray[np.integer], lam: int) -> NDArray[np.uint32]:
    """E_seed(block), broadcasting seeds against blocks."""
    keys = round_keys(seeds, lam)
    b = np.asarray(blocks, dtype=np.uint32)
    left = (b >> np.uint32(16)) & _M16
    right = b & _M16
    for k in keys:
        left, right = right ^ round_function(left) ^ k, left
    return (left << np.uint32(16)) | right


def prg_words(seeds: NDArray[np.integer], lam: int, n_blocks: int, start: int = 0) -> NDArray[np.uint32]:
    """Counter-mode output words, shape seeds.shape + (n_blocks,)."""
    check_lambda(lam)
    s = np.asarray(seeds, dtype=np.uint64)
    ctr = np.arange(start, start + n_blocks, dtype=np.uint32)
    return permute_blocks(s[..., None], np.broadcast_to(ctr, s.shape + (n_blocks,)), lam)


def prg_prefix(seeds: NDArray[np.integer], lam: int, width: int) -> U64:
    """First `width` (<= 64) output bits of G(seed) as integers."""
    if width > 64:
        raise FormatError("prefix wider than 64 bits")
    n_blocks = math.ceil(width / BLOCK_BITS)
    words = prg_words(seeds, lam, n_blocks).astype(np.uint64)
    acc = np.zeros(words.shape[:-1], dtype=np.uint64)
    for i in range(n_blocks):
        acc = (acc << np.uint64(BLOCK_BITS)) | words[..., i]
    return acc >> np.uint64(n_blocks * BLOCK_BITS - width)


def prg_expand(seed: int, out_len: int, lam: int) -> Bits:
    if out_len < 0 or out_len > MAX_PRG_BITS:
        raise FormatError(f"PRG output length {out_len} outside [0, 2^20]")
    return _stream_bits(seed, out_len, lam)


def _stream_bits(seed: int, out_len: int, lam: int) -> Bits:
    n_blocks = math.ceil(out_len / BLOCK_BITS)
    words = prg_words(np.array(seed, dtype=np.uint64), lam, n_blocks)
    return words_to_bits(words, BLOCK_BITS).reshape(-1)[:out_len]


def sample_seeds(rng: np.random.Generator, lam: int, *shape: int) -> NDArray[np.uint16]:
    return rng.integers(0, 2**lam, size=shape, dtype=np.uint32).astype(np.uint16)


# ---------- Naor commitment ----------


@dataclass(frozen=True)
class ReceiverMsg:
    r: int
    lam: int

    def __post_init__(self) -> None:
        check_lambda(self.lam)
        if self.r < 0 or self.r >> (3 * self.lam):
            raise FormatError(f"receiver message must be exactly {3 * self.lam} bits")

    @classmethod
    def sample(cls, rng: np.random.Generator, lam: int) -> ReceiverMsg:
        return cls(int(rng.integers(0, 2 ** (3 * lam), dtype=np.uint64)), lam)

    @property
    def bits(self) -> Bits:
        return words_to_bits(np.array(self.r, dtype=np.uint64), 3 * self.lam)


@dataclass(frozen=True)
class Commitment:
    values: U64
    lam: int

    @property
    def bits(self) -> Bits:
        return words_to_bits(self.values, 3 * self.lam).reshape(-1)


@dataclass(frozen=True)
class Opening:
    message: Bits
    randomness: NDArray[np.uint16]


def commit_bits(rmsg: ReceiverMsg, bits: NDArray[np.integer], seeds: NDArray[np.integer]) -> U64:
    """Vectorized Naor commitments, one 3*lambda-bit word per bit."""
    g = prg_prefix(seeds, rmsg.lam, 3 * rmsg.lam)
    mask = np.asarray(bits, dtype=np.uint64) * np.uint64(rmsg.r)
    return g ^ mask


def commit_bit(rmsg: ReceiverMsg, b: int, seed: int) -> Commitment:
    return Commitment(commit_bits(rmsg, np.array([b]), np.array([seed])), rmsg.lam)


def commit_string(
    rmsg: ReceiverMsg, message: Bits, rng: np.random.Generator
) -> tuple[Commitment, Opening]:
    seeds = sample_seeds(rng, rmsg.lam, len(message))
    return Commitment(commit_bits(rmsg, message, seeds), rmsg.lam), Opening(
        np.asarray(message, dtype=np.uint8), seeds
    )


def verify_open(rmsg: ReceiverMsg, c: Commitment, opening: Opening) -> bool:
    if c.values.shape != opening.message.shape or opening.message.shape != opening.randomness.shape:
        raise FormatError(
            f"opening shapes {opening.message.shape}/{opening.randomness.shape} vs {c.values.shape}"
        )
    if np.any(opening.message > 1) or np.any(opening.randomness.astype(np.uint64) >> np.uint64(rmsg.lam)):
        return False
    return bool(np.array_equal(commit_bits(rmsg, opening.message, opening.randomness), c.values))


def verify_many(
    rmsg: ReceiverMsg, values: U64, message: NDArray[np.integer], seeds: NDArray[np.integer]
) -> NDArray[np.bool_]:
    """Element-wise opening check used by the batch verifiers."""
    return commit_bits(rmsg, message, seeds) == np.asarray(values, dtype=np.uint64)


def recover_message(rmsg: ReceiverMsg, c: Commitment, randomness: NDArray[np.integer]) -> Bits | None:
    """Recover the committed bits from the committer's seeds; None means FAIL."""
    seeds = np.asarray(randomness)
    if seeds.shape != c.values.shape:
        raise FormatError("one seed per committed bit is required")
    g = prg_prefix(seeds, rmsg.lam, 3 * rmsg.lam)
    zero = c.values == g
    one = c.values == (g ^ np.uint64(rmsg.r))
    if not np.all(zero | one):
        return None
    return one.astype(np.uint8)


def binding_bad_fraction(lam: int) -> float:
    """Exhaustive fraction of receiver messages that admit an equivocation."""
    check_lambda(lam)
    if lam > 8:
        raise FormatError("exhaustive binding check is limited to lambda <= 8")
    g = prg_prefix(np.arange(2**lam, dtype=np.uint64), lam, 3 * lam)
    bad = np.unique(g[:, None] ^ g[None, :])
    return bad.size / 2 ** (3 * lam)


class CommitmentBackend(Protocol):
    def commit(
        self, bits: NDArray[np.integer], rng: np.random.Generator
    ) -> tuple[U64, NDArray[np.unsignedinteger]]: ...

    def verify(self, values: U64, bits: NDArray[np.integer], seeds: NDArray[np.integer]) -> NDArray[np.bool_]: ...


@dataclass
class NaorBackend:
    rmsg: ReceiverMsg

    def commit(self, bits: NDArray[np.integer], rng: np.random.Generator) -> tuple[U64, NDArray[np.unsignedinteger]]:
        b = np.asarray(bits, dtype=np.uint8)
        seeds = sample_seeds(rng, self.rmsg.lam, *b.shape)
        return commit_bits(self.rmsg, b, seeds), seeds

    def verify(self, values: U64, bits: NDArray[np.integer], seeds: NDArray[np.integer]) -> NDArray[np.bool_]:
        return verify_many(self.rmsg, values, bits, seeds)


@dataclass
class IdealBackend:
    """Information-theoretic commitments: handles reveal nothing, the vault binds."""

    _vault: list[int] = field(default_factory=list)

    def commit(self, bits: NDArray[np.integer], rng: np.random.Generator) -> tuple[U64, NDArray[np.unsignedinteger]]:
        b = np.asarray(bits, dtype=np.uint8)
        start = len(self._vault)
        self._vault.extend(int(x) for x in b.ravel())
        handles = np.arange(start, start + b.size, dtype=np.uint64).reshape(b.shape)
        return np.zeros(b.shape, dtype=np.uint64), handles

    def verify(self, values: U64, bits: NDArray[np.integer], seeds: NDArray[np.integer]) -> NDArray[np.bool_]:
        stored = np.array([self._vault[int(h)] for h in np.asarray(seeds).ravel()], dtype=np.uint8)
        return stored.reshape(np.shape(bits)) == np.asarray(bits, dtype=np.uint8)


# ---------- symmetric encryption and tags ----------


@dataclass(frozen=True)
class SymKey:
    key: int
    lam: int

    @classmethod
    def sample(cls, rng: np.random.Generator, lam: int) -> SymKey:
        check_lambda(lam)
        return cls(int(rng.integers(0, 2**lam)), lam)

    def to_bytes(self) -> bytes:
        return KEY_MAGIC + struct.pack("<H", self.lam) + self.key.to_bytes(2, "big")

    @classmethod
    def from_bytes(cls, blob: bytes) -> SymKey:
        if len(blob) != 8 or blob[:4] != KEY_MAGIC:
            raise FormatError("bad KEY1 blob")
        (lam,) = struct.unpack_from("<H", blob, 4)
        key = int.from_bytes(blob[6:8], "big")
        if key >> lam:
            raise FormatError(f"key wider than {lam} bits")
        return cls(key, lam)


TagKey = SymKey

_NONCE_BYTES = 2


def _stream_key(k: SymKey, nonce: int) -> int:
    block = permute_blocks(np.array(k.key, dtype=np.uint64), np.array(0x80000000 | nonce, dtype=np.uint32), k.lam)
    return int(block) >> (BLOCK_BITS - k.lam)


def _keystream(k: SymKey, nonce: int, n_bytes: int) -> NDArray[np.uint8]:
    bits = _stream_bits(_stream_key(k, nonce), 8 * n_bytes, k.lam)
    return np.packbits(bits)


def enc(k: SymKey, m: bytes, rng: np.random.Generator) -> bytes:
    nonce = int(rng.integers(0, 2**k.lam))
    body = np.frombuffer(m, dtype=np.uint8) ^ _keystream(k, nonce, len(m))
    return nonce.to_bytes(_NONCE_BYTES, "big") + body.tobytes()


def dec(k: SymKey, ct: bytes) -> bytes:
    if len(ct) < _NONCE_BYTES:
        raise FormatError("ciphertext shorter than its nonce")
    nonce = int.from_bytes(ct[:_NONCE_BYTES], "big")
    if nonce >> k.lam:
        raise FormatError("nonce wider than the key length")
    body = np.frombuffer(ct[_NONCE_BYTES:], dtype=np.uint8)
    return (body ^ _keystream(k, nonce, len(body))).tobytes()


def tag(k: TagKey, m: bytes) -> int:
    width = 2 * k.lam
    digest = hashlib.blake2b(
        m, key=k.key.to_bytes(2, "big") + k.lam.to_bytes(1, "big"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") >> (64 - width)


def tag_verify(k: TagKey, m: bytes, t: int) -> bool:
    return tag(k, m) == t
