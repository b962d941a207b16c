"""Syndrome reconciliation, key confirmation, and Toeplitz privacy amplification."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from .codes import BlockCode
from .errors import DomainError

CONFIRM_SEED = 0x5EED_C0DE


@dataclass(frozen=True)
class ToeplitzSeed:
    """An ``m x n`` binary Toeplitz matrix ``T[i][j] = t[i - j]``.

    ``first_col[i] = T[i][0]`` and ``first_row[j] = T[0][j]``; the two must
    agree on the corner element.
    """

    first_row: np.ndarray
    first_col: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.first_row, dtype=np.uint8)
        c = np.asarray(self.first_col, dtype=np.uint8)
        object.__setattr__(self, "first_row", r)
        object.__setattr__(self, "first_col", c)
        if r.size == 0 or c.size == 0:
            raise DomainError("Toeplitz seed needs a nonempty row and column")
        if c.size > r.size:
            raise DomainError("output length m must not exceed input length n")
        if r[0] != c[0]:
            raise DomainError("first_row[0] and first_col[0] must agree")

    @property
    def n(self) -> int:
        return self.first_row.size

    @property
    def m(self) -> int:
        return self.first_col.size

    @classmethod
    def random(cls, n: int, m: int, rng: np.random.Generator) -> "ToeplitzSeed":
        if m > n:
            raise DomainError("output length m must not exceed input length n")
        bits = rng.integers(0, 2, size=n + m - 1, dtype=np.uint8)
        col = bits[:m]
        row = np.concatenate([[col[0]], bits[m:]]).astype(np.uint8)
        return cls(row, col)

    def matrix(self) -> np.ndarray:
        i = np.arange(self.m)[:, None]
        j = np.arange(self.n)[None, :]
        d = i - j
        return np.where(d >= 0, self.first_col[np.clip(d, 0, None)],
                        self.first_row[np.clip(-d, 0, None)]).astype(np.uint8)

    def diagonal_sequence(self) -> np.ndarray:
        """``t[k]`` for ``k = -(n-1) .. m-1``."""
        return np.concatenate([self.first_row[:0:-1], self.first_col]).astype(np.uint8)

    def bit_length(self) -> int:
        return self.n + self.m - 1


def syndrome(block, code: BlockCode) -> np.ndarray:
    return code.syndrome(block)


def reconcile_block(block_b, syndrome_a, code: BlockCode):
    """Bob's bounded-distance correction toward Alice's block.

    Returns ``(block, ok)``; ``ok`` is False when no error pattern of weight
    at most ``t`` explains the syndrome difference, in which case Bob's
    block is returned unchanged.
    """
    b = np.asarray(block_b, dtype=np.uint8)
    sa = np.asarray(syndrome_a, dtype=np.uint8)
    if b.shape != (code.n,) or sa.shape != (code.redundancy,):
        raise DomainError("block or syndrome length inconsistent with the code")
    diff = sa ^ code.syndrome(b)
    e = code.error_pattern(diff)
    if e is None:
        return b.copy(), False
    return b ^ e, True


def privacy_amplify(bits, seed: ToeplitzSeed, m: Optional[int] = None) -> np.ndarray:
    """``T @ bits`` over GF(2), computed as a convolution along the diagonals."""
    x = np.asarray(bits, dtype=np.uint8)
    if m is None:
        m = seed.m
    if m > x.size:
        raise DomainError("output length m must not exceed input length n")
    if x.size != seed.n or m != seed.m:
        raise DomainError(f"seed is {seed.m}x{seed.n}, input has {x.size} bits, m={m}")
    if m == 0:
        return np.zeros(0, np.uint8)
    diag = seed.diagonal_sequence()
    n = x.size
    if n * m <= 1 << 20:
        full = np.convolve(diag.astype(np.int64), x.astype(np.int64))
    else:
        full = np.rint(fftconvolve(diag.astype(np.float64), x.astype(np.float64))).astype(np.int64)
    return (full[n - 1:n - 1 + m] & 1).astype(np.uint8)


def leakage_budget(n_total: int, code: BlockCode, n_blocks: int, safety_bits: int = 32) -> int:
    if n_total != n_blocks * code.n:
        raise DomainError("n_total must equal n_blocks * n")
    return max(0, n_total - n_blocks * code.redundancy - safety_bits)


def confirmation_seed(n: int, m: int) -> ToeplitzSeed:
    """The reserved public seed for key-confirmation hashes."""
    return ToeplitzSeed.random(n, m, np.random.default_rng([CONFIRM_SEED, n, m]))


@dataclass
class Transcript:
    """Everything sent over the public channel, in order.

    Only ``syndrome`` and ``confirmation`` entries carry information about
    key bits; :meth:`leaked_bits` sums exactly those.
    """

    entries: list = field(default_factory=list)

    LEAKING = ("syndrome", "confirmation")

    def publish(self, kind: str, payload, n_bits: int) -> None:
        self.entries.append((kind, payload, int(n_bits)))

    def of_kind(self, kind: str) -> list:
        return [p for k, p, _ in self.entries if k == kind]

    def bits_of_kind(self, kind: str) -> int:
        return sum(b for k, _, b in self.entries if k == kind)

    def leaked_bits(self) -> int:
        return sum(b for k, _, b in self.entries if k in self.LEAKING)

    def sizes(self) -> dict:
        out: dict = {}
        for k, _, b in self.entries:
            out[k] = out.get(k, 0) + b
        return out


@dataclass
class ReconciliationResult:
    key_a: np.ndarray
    key_b: np.ndarray
    n_blocks: int
    accepted: list
    decode_failures: int
    confirm_failures: int

    @property
    def n_accepted(self) -> int:
        return len(self.accepted)


def reconcile_keys(bits_a, bits_b, code: BlockCode, transcript: Transcript,
                   confirm_bits: int = 32) -> ReconciliationResult:
    """One-way syndrome reconciliation of full blocks, then per-block confirmation.

    Trailing bits that do not fill a block are discarded.  Blocks that fail
    decoding or confirmation are announced by index and dropped by both
    parties.
    """
    a = np.asarray(bits_a, dtype=np.uint8)
    b = np.asarray(bits_b, dtype=np.uint8)
    if a.shape != b.shape:
        raise DomainError("raw keys differ in length")
    n_blocks = a.size // code.n
    m_conf = min(confirm_bits, code.n)
    conf = confirmation_seed(code.n, m_conf) if m_conf > 0 else None
    if conf is not None and n_blocks:
        transcript.publish("confirm_seed", (code.n, m_conf), 0)
    out_a, out_b, accepted = [], [], []
    dec_fail = conf_fail = 0
    if n_blocks:
        blocks_a = a[:n_blocks * code.n].reshape(n_blocks, code.n)
        blocks_b = b[:n_blocks * code.n].reshape(n_blocks, code.n)
        syn_a = code.syndrome(blocks_a)
    for i in range(n_blocks):
        transcript.publish("syndrome", syn_a[i], code.redundancy)
        fixed, ok = reconcile_block(blocks_b[i], syn_a[i], code)
        if not ok:
            dec_fail += 1
            transcript.publish("block_status", (i, "decode_failure"), 0)
            continue
        if conf is not None:
            ha = privacy_amplify(blocks_a[i], conf)
            hb = privacy_amplify(fixed, conf)
            transcript.publish("confirmation", ha, m_conf)
            if not np.array_equal(ha, hb):
                conf_fail += 1
                transcript.publish("block_status", (i, "confirm_failure"), 0)
                continue
        accepted.append(i)
        out_a.append(blocks_a[i])
        out_b.append(fixed)
    ka = np.concatenate(out_a) if out_a else np.zeros(0, np.uint8)
    kb = np.concatenate(out_b) if out_b else np.zeros(0, np.uint8)
    return ReconciliationResult(ka, kb, n_blocks, accepted, dec_fail, conf_fail)
