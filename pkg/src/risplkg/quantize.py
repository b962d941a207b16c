"""Channel features to raw key bits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError

FEATURE_MODES = ("RSS", "CSI")
QUANTIZERS = ("double_threshold", "cdf")


@dataclass(frozen=True)
class FeatureSeries:
    mode: str
    values: np.ndarray  # frames x dimensions

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class BitMaterial:
    bits: np.ndarray    # uint8
    origin: np.ndarray  # (n, 2) of (frame, dimension)

    def __post_init__(self):
        if len(self.bits) != len(self.origin):
            raise DomainError("bits and origin_index must have the same length")

    def __len__(self):
        return len(self.bits)

    def keys(self) -> list[tuple[int, int]]:
        return [tuple(map(int, o)) for o in self.origin]

    def select(self, keys) -> "BitMaterial":
        """Subset in the order of ``keys``; every key must be present."""
        lookup = {k: i for i, k in enumerate(self.keys())}
        idx = np.array([lookup[tuple(k)] for k in keys], dtype=int)
        if idx.size == 0:
            return BitMaterial(np.zeros(0, np.uint8), np.zeros((0, 2), int))
        return BitMaterial(self.bits[idx], self.origin[idx])


def feature_extract(observations: Sequence, mode: str, floor_db: float = -150.0) -> FeatureSeries:
    if mode not in FEATURE_MODES:
        raise DomainError(f"unknown feature mode {mode!r}")
    if not observations:
        raise DomainError("no observations")
    if mode == "RSS":
        vals = np.array([[max(ob.rss_db, floor_db)] for ob in observations], dtype=float)
        return FeatureSeries(mode, vals)
    lengths = {len(ob.csi_estimate) for ob in observations}
    if len(lengths) != 1:
        raise DomainError(f"inconsistent pilot counts {sorted(lengths)}")
    mag = np.abs(np.vstack([ob.csi_estimate for ob in observations]))
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag)
    return FeatureSeries(mode, np.maximum(db, floor_db))


def double_threshold_quantize(column, alpha: float = 0.2):
    """Guard-band quantizer: above ``mean + alpha*std`` is 1, below ``mean - alpha*std`` is 0.

    Values inside the guard band are dropped.  Returns ``(bits, retained)``
    with ``retained`` the ascending indices that produced a bit.
    """
    x = np.asarray(column, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise DomainError("column needs at least two values")
    if alpha < 0:
        raise DomainError("alpha must be non-negative")
    sd = x.std()
    if sd == 0:
        return np.zeros(0, np.uint8), np.zeros(0, int)
    mu = x.mean()
    hi, lo = mu + alpha * sd, mu - alpha * sd
    keep = (x > hi) | (x < lo)
    idx = np.flatnonzero(keep)
    return (x[idx] > hi).astype(np.uint8), idx


def cdf_single_bit_quantize(column) -> np.ndarray:
    """One bit per value: 1 strictly above the empirical median."""
    x = np.asarray(column, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise DomainError("column needs at least two values")
    return (x > np.median(x)).astype(np.uint8)


def index_reconcile(retained_a, retained_b) -> list:
    """Order-preserving intersection (order of ``retained_a``)."""
    other = {tuple(k) if isinstance(k, (list, tuple, np.ndarray)) else k for k in retained_b}
    out = []
    for k in retained_a:
        key = tuple(k) if isinstance(k, (list, tuple, np.ndarray)) else k
        if key in other:
            out.append(key)
    return out


def bit_disagreement_rate(bits_a, bits_b) -> float:
    a = np.asarray(bits_a)
    b = np.asarray(bits_b)
    if a.shape != b.shape:
        raise DomainError("bit sequences differ in length")
    if a.size == 0:
        raise DomainError("empty bit sequences")
    return float(np.count_nonzero(a != b)) / a.size


def quantize_series(series: FeatureSeries, quantizer: str = "double_threshold",
                    alpha: float = 0.2, block: Optional[int] = None) -> BitMaterial:
    """Quantize every column, blockwise over frames, in (frame, dimension) order.

    Statistics are computed per column over consecutive blocks of ``block``
    frames (whole series when ``None``); a trailing block shorter than two
    frames is merged into its predecessor.  Column by column this is exactly
    :func:`double_threshold_quantize` / :func:`cdf_single_bit_quantize`.
    """
    if quantizer not in QUANTIZERS:
        raise DomainError(f"unknown quantizer {quantizer!r}")
    if alpha < 0:
        raise DomainError("alpha must be non-negative")
    n, d = series.values.shape
    if n < 2:
        return BitMaterial(np.zeros(0, np.uint8), np.zeros((0, 2), int))
    bits = np.zeros((n, d), dtype=np.uint8)
    keep = np.ones((n, d), dtype=bool)
    for start, stop in _blocks(n, block):
        seg = series.values[start:stop]
        if quantizer == "cdf":
            bits[start:stop] = seg > np.median(seg, axis=0)
            continue
        mu = seg.mean(axis=0)
        sd = seg.std(axis=0)
        hi, lo = mu + alpha * sd, mu - alpha * sd
        above, below = seg > hi, seg < lo
        bits[start:stop] = above
        keep[start:stop] = (above | below) & (sd > 0)
    f, j = np.nonzero(keep)
    return BitMaterial(bits[f, j], np.column_stack([f, j]))


def _blocks(n: int, block: Optional[int]):
    if block is None or block >= n:
        return [(0, n)]
    if block < 2:
        raise DomainError("block must span at least two frames")
    edges = list(range(0, n, block))
    out = [(s, min(s + block, n)) for s in edges]
    if len(out) > 1 and out[-1][1] - out[-1][0] < 2:
        last = out.pop()
        out[-1] = (out[-1][0], last[1])
    return out
