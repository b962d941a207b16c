"""A subset of the NIST SP 800-22 statistical battery.

Each test can be called directly on any sequence long enough for its
formula; :func:`suite` additionally enforces the recommended minimum
lengths and only reports the tests that apply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaincc

from .errors import DomainError

SIGNIFICANCE = 0.01


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    test_name: str
    statistic: Optional[float]
    p_value: Optional[float]
    passed: bool
    n_bits: int
    applicable: bool = True

    def to_dict(self) -> dict:
        return {
            "test_name": self.test_name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "pass": self.passed,
            "n_bits": self.n_bits,
        }


def _bits(bits) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64).ravel()
    if b.size == 0:
        raise DomainError("empty bit sequence")
    if np.any((b != 0) & (b != 1)):
        raise DomainError("bits must be 0 or 1")
    return b


def _report(name, stat, p, n, alpha):
    p = float(min(1.0, max(0.0, p)))
    return TestReport(name, float(stat), p, p >= alpha, n)


def _inapplicable(name, n):
    return TestReport(name, None, None, False, n, applicable=False)


def _phi(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def monobit(bits, alpha: float = SIGNIFICANCE) -> TestReport:
    b = _bits(bits)
    n = b.size
    s_obs = abs(int(2 * b.sum() - n)) / math.sqrt(n)
    return _report("monobit", s_obs, math.erfc(s_obs / math.sqrt(2.0)), n, alpha)


def block_frequency(bits, M: int = 128, alpha: float = SIGNIFICANCE) -> TestReport:
    b = _bits(bits)
    n = b.size
    N = n // M
    if N < 1:
        return _inapplicable("block_frequency", n)
    pi = b[:N * M].reshape(N, M).mean(axis=1)
    chi2 = 4.0 * M * float(np.sum((pi - 0.5) ** 2))
    return _report("block_frequency", chi2, gammaincc(N / 2.0, chi2 / 2.0), n, alpha)


def runs(bits, alpha: float = SIGNIFICANCE) -> TestReport:
    b = _bits(bits)
    n = b.size
    if n < 2:
        return _inapplicable("runs", n)
    pi = b.mean()
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        # frequency prerequisite failed: the test is not run and scores zero
        return _report("runs", 0.0, 0.0, n, alpha)
    v = 1 + int(np.count_nonzero(b[1:] != b[:-1]))
    num = abs(v - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return _report("runs", v, math.erfc(num / den), n, alpha)


def _longest_run_categories(M: int = 8) -> np.ndarray:
    """Exact category probabilities (<=1, 2, 3, >=4) by enumerating all M-bit blocks."""
    counts = np.zeros(4)
    for word in range(1 << M):
        run = best = 0
        for j in range(M):
            run = run + 1 if (word >> j) & 1 else 0
            best = max(best, run)
        counts[min(max(best, 1), 4) - 1] += 1
    return counts / (1 << M)


# 55/256, 94/256, 59/256, 48/256; the rounded table values in the standard do not sum to 1
_LONGEST_RUN_PI = _longest_run_categories()


def longest_run(bits, alpha: float = SIGNIFICANCE) -> TestReport:
    """Longest run of ones in blocks of M = 8 (categories <=1, 2, 3, >=4)."""
    b = _bits(bits)
    n = b.size
    M = 8
    N = n // M
    if N < 1:
        return _inapplicable("longest_run", n)
    blocks = b[:N * M].reshape(N, M)
    longest = np.zeros(N, dtype=int)
    cur = np.zeros(N, dtype=int)
    for j in range(M):
        cur = np.where(blocks[:, j] == 1, cur + 1, 0)
        longest = np.maximum(longest, cur)
    v = np.array([np.sum(longest <= 1), np.sum(longest == 2), np.sum(longest == 3),
                  np.sum(longest >= 4)], dtype=float)
    expected = N * _LONGEST_RUN_PI
    chi2 = float(np.sum((v - expected) ** 2 / expected))
    return _report("longest_run", chi2, gammaincc(1.5, chi2 / 2.0), n, alpha)


def _cusum_p(z: float, n: int) -> float:
    if z == 0:
        return 1.0
    sq = math.sqrt(n)
    total = 1.0
    # int() truncates toward zero, matching the reference implementation
    for k in range(int((-n / z + 1) / 4), int((n / z - 1) / 4) + 1):
        total -= _phi((4 * k + 1) * z / sq) - _phi((4 * k - 1) * z / sq)
    for k in range(int((-n / z - 3) / 4), int((n / z - 1) / 4) + 1):
        total += _phi((4 * k + 3) * z / sq) - _phi((4 * k + 1) * z / sq)
    return total


def cumulative_sums(bits, mode: str = "forward", alpha: float = SIGNIFICANCE) -> TestReport:
    b = _bits(bits)
    if mode not in ("forward", "backward"):
        raise DomainError("mode must be 'forward' or 'backward'")
    n = b.size
    x = 2 * b - 1
    if mode == "backward":
        x = x[::-1]
    z = float(np.max(np.abs(np.cumsum(x))))
    return _report(f"cumulative_sums_{mode}", z, _cusum_p(z, n), n, alpha)


def _phi_apen(b: np.ndarray, m: int) -> float:
    n = b.size
    if m == 0:
        return 0.0
    ext = np.concatenate([b, b[:m - 1]]) if m > 1 else b
    codes = np.zeros(n, dtype=np.int64)
    for j in range(m):
        codes = (codes << 1) | ext[j:j + n]
    counts = np.bincount(codes, minlength=1 << m)
    c = counts[counts > 0] / n
    return float(np.sum(c * np.log(c)))


def approximate_entropy(bits, m: int = 2, alpha: float = SIGNIFICANCE) -> TestReport:
    b = _bits(bits)
    n = b.size
    if m < 1 or n < m + 1:
        return _inapplicable("approximate_entropy", n)
    apen = _phi_apen(b, m) - _phi_apen(b, m + 1)
    chi2 = 2.0 * n * (math.log(2.0) - apen)
    return _report("approximate_entropy", chi2, gammaincc(2 ** (m - 1), chi2 / 2.0), n, alpha)


# recommended minimum lengths used by the battery
MIN_LENGTH = {
    "monobit": 100,
    "block_frequency": 128,
    "runs": 100,
    "longest_run": 128,
    "cumulative_sums": 100,
    "approximate_entropy": 256,
}


@dataclass(frozen=True)
class SuiteResult:
    reports: list
    pass_fraction: float

    def to_list(self) -> list:
        return [r.to_dict() for r in self.reports]


def suite(bits, alpha: float = SIGNIFICANCE) -> SuiteResult:
    """Run every applicable test; ``pass_fraction`` is 0 when none applies."""
    b = _bits(bits)
    n = b.size
    out = []
    if n >= MIN_LENGTH["monobit"]:
        out.append(monobit(b, alpha))
    if n >= MIN_LENGTH["block_frequency"]:
        out.append(block_frequency(b, 128, alpha))
    if n >= MIN_LENGTH["runs"]:
        out.append(runs(b, alpha))
    if n >= MIN_LENGTH["longest_run"]:
        out.append(longest_run(b, alpha))
    if n >= MIN_LENGTH["cumulative_sums"]:
        out.append(cumulative_sums(b, "forward", alpha))
        out.append(cumulative_sums(b, "backward", alpha))
    if n >= MIN_LENGTH["approximate_entropy"]:
        out.append(approximate_entropy(b, 2, alpha))
    frac = sum(r.passed for r in out) / len(out) if out else 0.0
    return SuiteResult(out, frac)
