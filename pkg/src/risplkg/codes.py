"""Binary linear block codes for syndrome-based reconciliation.

Two codes are provided: Hamming(7,4), small enough to check exhaustively,
and a narrow-sense primitive BCH code (default BCH(127,64), t=10) decoded
by Berlekamp-Massey with a Chien search.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from typing import Optional

import numpy as np

from .errors import DomainError


def gf2_rank(mat) -> int:
    m = np.array(mat, dtype=np.uint8) & 1
    rows, cols = m.shape
    rank = 0
    for c in range(cols):
        pivot = np.flatnonzero(m[rank:, c])
        if pivot.size == 0:
            continue
        p = rank + pivot[0]
        m[[rank, p]] = m[[p, rank]]
        others = np.flatnonzero(m[:, c])
        others = others[others != rank]
        m[others] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def gf2_nullspace(mat) -> np.ndarray:
    """Basis of ``{x : mat @ x = 0 (mod 2)}`` as rows."""
    m = np.array(mat, dtype=np.uint8) & 1
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        pivot = np.flatnonzero(m[r:, c]) if r < rows else np.zeros(0, int)
        if pivot.size == 0:
            continue
        p = r + pivot[0]
        m[[r, p]] = m[[p, r]]
        others = np.flatnonzero(m[:, c])
        others = others[others != r]
        m[others] ^= m[r]
        pivots.append(c)
        r += 1
    free = [c for c in range(cols) if c not in pivots]
    basis = np.zeros((len(free), cols), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, pc in enumerate(pivots):
            basis[i, pc] = m[row, f]
    return basis


class BlockCode:
    """A binary ``[n, k]`` code given by its parity-check matrix.

    Subclasses supply :meth:`error_pattern`, the bounded-distance decoder
    mapping a syndrome to an error of weight at most ``t`` (or ``None``).
    """

    name = "code"

    def __init__(self, n: int, k: int, t: int, parity_check):
        h = np.asarray(parity_check, dtype=np.uint8) & 1
        if not 0 < k < n:
            raise DomainError("need 0 < k < n")
        if h.shape != (n - k, n):
            raise DomainError(f"parity check must be {(n - k, n)}, got {h.shape}")
        if gf2_rank(h) != n - k:
            raise DomainError("parity check matrix is not full row rank")
        self.n, self.k, self.t = n, k, t
        self.parity_check = h

    @property
    def redundancy(self) -> int:
        return self.n - self.k

    def syndrome(self, block) -> np.ndarray:
        b = np.asarray(block, dtype=np.uint8)
        if b.shape[-1] != self.n:
            raise DomainError(f"block length must be {self.n}")
        return ((b.astype(np.int64) @ self.parity_check.T.astype(np.int64)) & 1).astype(np.uint8)

    def generator_matrix(self) -> np.ndarray:
        return gf2_nullspace(self.parity_check)

    def codewords(self) -> np.ndarray:
        if self.k > 16:
            raise DomainError("codeword enumeration limited to k <= 16")
        g = self.generator_matrix()
        msgs = (np.arange(2 ** self.k)[:, None] >> np.arange(self.k)) & 1
        return ((msgs @ g) & 1).astype(np.uint8)

    def error_pattern(self, syn) -> Optional[np.ndarray]:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, k={self.k}, t={self.t})"


class TableCode(BlockCode):
    """Coset-leader table decoding over all error patterns of weight <= t."""

    def __init__(self, n, k, t, parity_check, name="table"):
        super().__init__(n, k, t, parity_check)
        self.name = name
        self._table = {}
        for w in range(t, -1, -1):
            for pos in combinations(range(n), w):
                e = np.zeros(n, np.uint8)
                e[list(pos)] = 1
                self._table[self.syndrome(e).tobytes()] = e

    def error_pattern(self, syn):
        e = self._table.get(np.asarray(syn, dtype=np.uint8).tobytes())
        return None if e is None else e.copy()


def hamming74() -> TableCode:
    # column j (1-based) is the binary expansion of j
    h = np.array([[(j >> b) & 1 for j in range(1, 8)] for b in range(3)], dtype=np.uint8)
    return TableCode(7, 4, 1, h, name="hamming74")


PRIMITIVE_POLYS = {3: 0b1011, 4: 0b10011, 5: 0b100101, 6: 0b1000011, 7: 0b10001001,
                   8: 0b100011101, 9: 0b1000010001, 10: 0b10000001001}


class GF2m:
    def __init__(self, m: int):
        if m not in PRIMITIVE_POLYS:
            raise DomainError(f"no primitive polynomial tabulated for m={m}")
        self.m = m
        self.order = (1 << m) - 1
        exp = np.zeros(2 * self.order, dtype=np.int64)
        log = np.full(self.order + 1, -1, dtype=np.int64)
        x = 1
        for i in range(self.order):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x >> m:
                x ^= PRIMITIVE_POLYS[m]
        exp[self.order:] = exp[:self.order]
        self.exp, self.log = exp, log
        # plain-list copies: scalar lookups on lists are much cheaper than on arrays
        self._exp, self._log = exp.tolist(), log.tolist()

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return self._exp[(self.order - self._log[a]) % self.order]

    def pow_alpha(self, e: int) -> int:
        return int(self.exp[e % self.order])


def _poly_mul_gf2(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def _poly_mod_gf2(a: int, g: int) -> int:
    dg = g.bit_length()
    while a.bit_length() >= dg:
        a ^= g << (a.bit_length() - dg)
    return a


class BCHCode(BlockCode):
    """Narrow-sense primitive binary BCH code of length ``2^m - 1``.

    The parity check is chosen so that the syndrome of ``e`` is the
    coefficient vector of ``e(x) mod g(x)``; the power-sum syndromes needed
    by Berlekamp-Massey follow by evaluating that remainder at ``alpha^i``.
    """

    def __init__(self, m: int = 7, t: int = 10):
        self.field = gf = GF2m(m)
        n = gf.order
        g = 1
        seen = set()
        for i in range(1, 2 * t + 1):
            coset = self._coset(i, n)
            if coset & seen:
                continue
            seen |= coset
            g = _poly_mul_gf2(g, self._minimal_poly(coset))
        self.generator = g
        r = g.bit_length() - 1
        h = np.zeros((r, n), dtype=np.uint8)
        for j in range(n):
            rem = _poly_mod_gf2(1 << j, g)
            h[:, j] = [(rem >> b) & 1 for b in range(r)]
        super().__init__(n, n - r, t, h)
        self.name = f"bch{n}_{n - r}"

    @staticmethod
    def _coset(i, n):
        out, x = set(), i % n
        while x not in out:
            out.add(x)
            x = (2 * x) % n
        return out

    def _minimal_poly(self, coset) -> int:
        gf = self.field
        poly = [1]  # coefficients low to high, GF(2^m) elements
        for c in sorted(coset):
            root = gf.pow_alpha(c)
            nxt = [0] * (len(poly) + 1)
            for d, a in enumerate(poly):
                nxt[d + 1] ^= a
                nxt[d] ^= gf.mul(a, root)
            poly = nxt
        if any(a not in (0, 1) for a in poly):
            raise AssertionError("minimal polynomial not binary")
        return sum(a << d for d, a in enumerate(poly))

    def power_sums(self, syn) -> list[int]:
        gf = self.field
        pos = np.flatnonzero(np.asarray(syn, dtype=np.uint8))
        if pos.size == 0:
            return [0] * (2 * self.t)
        i = np.arange(1, 2 * self.t + 1)
        return np.bitwise_xor.reduce(gf.exp[np.outer(i, pos) % gf.order], axis=1).tolist()

    def error_pattern(self, syn):
        syn = np.asarray(syn, dtype=np.uint8)
        if syn.shape != (self.redundancy,):
            raise DomainError(f"syndrome length must be {self.redundancy}")
        e = np.zeros(self.n, np.uint8)
        if not syn.any():
            return e
        gf = self.field
        s = self.power_sums(syn)
        lam = self._berlekamp_massey(s)
        deg = len(lam) - 1
        if deg == 0 or deg > self.t:
            return None
        # Chien search: position j is in error iff lam(alpha^{-j}) = 0
        log_lam = np.array([gf.log[c] if c else -1 for c in lam])
        nz = np.flatnonzero(log_lam >= 0)
        j = np.arange(self.n)
        terms = gf.exp[(log_lam[nz][None, :] - np.outer(j, nz)) % gf.order]
        vals = np.bitwise_xor.reduce(terms, axis=1)
        roots = np.flatnonzero(vals == 0)
        if roots.size != deg:
            return None
        e[roots] = 1
        if not np.array_equal(self.syndrome(e), syn):
            return None
        return e

    def _berlekamp_massey(self, s):
        gf = self.field
        c, b = [1], [1]
        L, m, bb = 0, 1, 1
        for n_ in range(len(s)):
            d = s[n_]
            for i in range(1, L + 1):
                if i < len(c):
                    d ^= gf.mul(c[i], s[n_ - i])
            if d == 0:
                m += 1
                continue
            coef = gf.mul(d, gf.inv(bb))
            t_ = c[:]
            need = len(b) + m
            if len(c) < need:
                c = c + [0] * (need - len(c))
            for i, bi in enumerate(b):
                c[i + m] ^= gf.mul(coef, bi)
            if 2 * L <= n_:
                L = n_ + 1 - L
                b, bb, m = t_, d, 1
            else:
                m += 1
        c = c[:L + 1] + [0] * max(0, L + 1 - len(c))
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        if len(c) - 1 != L:
            # locator degree disagrees with the register length: uncorrectable
            return [1] * (self.t + 2)
        return c


@lru_cache(maxsize=None)
def get_code(name: str) -> BlockCode:
    """Named codes: ``hamming74``, ``bch127_64`` (default), and ``bchM_t`` forms like ``bch63_t5``."""
    if name == "hamming74":
        return hamming74()
    if name == "bch127_64":
        return BCHCode(7, 10)
    if name.startswith("bch") and "_t" in name:
        n_str, t_str = name[3:].split("_t")
        n = int(n_str)
        m = (n + 1).bit_length() - 1
        if (1 << m) - 1 != n:
            raise DomainError(f"BCH length must be 2^m - 1, got {n}")
        return BCHCode(m, int(t_str))
    raise DomainError(f"unknown code {name!r}; expected hamming74, bch127_64 or bchN_tT")
