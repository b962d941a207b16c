"""Statistical RIS-aided channel: path loss, link gains, AR(1) evolution, reflection.

Every physical link is stored once.  The reverse directions share storage
(``h_RA is h_AR``, ``h_BR is h_RB``) so that TDD reciprocity holds by
construction; only the reflection state and the passage of time can make
the two probing directions differ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError

SPEED_OF_LIGHT = 299_792_458.0

RIS_LINKS = ("AR", "RB", "RE")
TAP_LINKS = ("AB", "AE", "BE")
LINKS = ("AB", "BA", "AE", "BE")


@dataclass(frozen=True)
class RisGeometry:
    rows: int = 8
    cols: int = 32
    rows_per_group: int = 2
    phase_levels: int = 16
    unit_size_m: float = 0.012

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise DomainError("rows and cols must be positive")
        if self.rows_per_group <= 0 or self.rows % self.rows_per_group:
            raise DomainError("rows must be divisible by rows_per_group")
        if self.phase_levels < 1:
            raise DomainError("phase_levels must be >= 1")
        if self.unit_size_m <= 0:
            raise DomainError("unit_size_m must be positive")

    @property
    def n_units(self) -> int:
        return self.rows * self.cols

    @property
    def n_groups(self) -> int:
        return self.rows // self.rows_per_group

    def unit_group(self) -> np.ndarray:
        """Group index of every unit, row-major."""
        row = np.repeat(np.arange(self.rows), self.cols)
        return row // self.rows_per_group


@dataclass(frozen=True)
class ReflectionState:
    group_phase_index: tuple[int, ...]

    def validate(self, geom: RisGeometry) -> None:
        if len(self.group_phase_index) != geom.n_groups:
            raise DomainError(
                f"expected {geom.n_groups} group indices, got {len(self.group_phase_index)}"
            )
        for idx in self.group_phase_index:
            if not 0 <= idx < geom.phase_levels:
                raise DomainError(f"phase index {idx} outside [0, {geom.phase_levels})")


@dataclass(frozen=True)
class FadingParams:
    """Parameters of the statistical surrogate for the measured room.

    ``tap_spacing`` and ``ris_delay`` are in samples of the OFDM symbol;
    ``unit_gain_db`` is the aperture gain of one RIS unit, applied to each
    RIS segment (Friis with a gain on the RIS side).
    """

    rho: float = 0.9999
    direct_taps: int = 4
    carrier_hz: float = 4.25e9
    pathloss_exponent: float = 2.0
    reference_distance_m: float = 1.0
    static_rho: float = 0.9999
    tap_spacing: float = 3.0
    tap_decay_db: float = 3.0
    ris_delay: float = 1.0
    unit_gain_db: float = 6.0

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise DomainError("rho must lie in [0, 1]")
        if not 0.0 <= self.static_rho <= 1.0:
            raise DomainError("static_rho must lie in [0, 1]")
        if self.direct_taps < 1:
            raise DomainError("direct_taps must be >= 1")
        if self.carrier_hz <= 0 or self.reference_distance_m <= 0:
            raise DomainError("carrier_hz and reference_distance_m must be positive")
        if self.tap_spacing < 0 or self.ris_delay < 0:
            raise DomainError("delays must be non-negative")


@dataclass(frozen=True)
class NodeLayout:
    alice: tuple[float, float] = (-0.75, 0.5)
    bob: tuple[float, float] = (0.75, 0.5)
    ris: tuple[float, float] = (0.0, 0.0)
    eve: tuple[float, float] = (0.0, 1.161)

    def __post_init__(self):
        pts = {"alice": self.alice, "bob": self.bob, "ris": self.ris, "eve": self.eve}
        names = list(pts)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                if distance(pts[a], pts[b]) <= 0:
                    raise DomainError(f"{a} and {b} coincide")


class ChannelSnapshot:
    """All link gains at one instant.

    The RIS segments ``AR``, ``RB``, ``RE`` hold one gain per unit, the
    direct links ``AB``, ``AE``, ``BE`` one gain per delay tap.  Gains live
    in one flat complex array; ``gains[name]`` are views into it.
    ``variances[name]`` is the stationary variance of every entry, used by
    :func:`evolve_channels`.
    """

    __slots__ = ("flat", "slices", "variances", "scale", "tap_delays", "ris_delay", "time_s")

    def __init__(self, gains: dict, variances: dict, tap_delays, ris_delay: float,
                 time_s: float = 0.0, *, _flat=None, _slices=None, _scale=None):
        if _flat is None:
            names = list(gains)
            sizes = [np.asarray(gains[n]).size for n in names]
            edges = np.cumsum([0] + sizes)
            _slices = {n: slice(int(a), int(b)) for n, a, b in zip(names, edges[:-1], edges[1:])}
            _flat = np.concatenate([np.asarray(gains[n], dtype=complex).ravel() for n in names])
            var = np.concatenate([np.broadcast_to(np.asarray(variances[n], float),
                                                  np.asarray(gains[n]).shape).ravel() for n in names])
            _scale = np.sqrt(var / 2.0)
        self.flat = _flat
        self.slices = _slices
        self.variances = variances
        self.scale = _scale
        self.tap_delays = np.asarray(tap_delays, dtype=float)
        self.ris_delay = float(ris_delay)
        self.time_s = float(time_s)

    def with_flat(self, flat: np.ndarray, time_s: float) -> "ChannelSnapshot":
        return ChannelSnapshot(None, self.variances, self.tap_delays, self.ris_delay, time_s,
                               _flat=flat, _slices=self.slices, _scale=self.scale)

    @property
    def gains(self) -> dict:
        return {n: self.flat[s] for n, s in self.slices.items()}

    def gain(self, name: str) -> np.ndarray:
        return self.flat[self.slices[name]]

    @property
    def h_AR(self) -> np.ndarray:
        return self.gain("AR")

    @property
    def h_RB(self) -> np.ndarray:
        return self.gain("RB")

    @property
    def h_RE(self) -> np.ndarray:
        return self.gain("RE")

    @property
    def h_AB_taps(self) -> np.ndarray:
        return self.gain("AB")

    @property
    def h_AE_taps(self) -> np.ndarray:
        return self.gain("AE")

    @property
    def h_BE_taps(self) -> np.ndarray:
        return self.gain("BE")

    # reverse directions alias the forward storage
    h_RA = h_AR
    h_BR = h_RB


def distance(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def path_loss_db(distance_m, carrier_hz, exponent=2.0, reference_distance_m=1.0):
    """Log-distance path loss anchored at free-space loss at ``reference_distance_m``."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    if carrier_hz <= 0 or reference_distance_m <= 0:
        raise DomainError("carrier and reference distance must be positive")
    pl0 = 20.0 * math.log10(4.0 * math.pi * reference_distance_m * carrier_hz / SPEED_OF_LIGHT)
    out = pl0 + 10.0 * exponent * np.log10(d / reference_distance_m)
    return float(out) if out.ndim == 0 else out


def unit_positions(layout: NodeLayout, geom: RisGeometry) -> np.ndarray:
    """Unit centres, row-major; columns run along x, rows are stacked out of plane."""
    offsets = (np.arange(geom.cols) - (geom.cols - 1) / 2.0) * geom.unit_size_m
    x = np.tile(layout.ris[0] + offsets, geom.rows)
    y = np.full(geom.n_units, layout.ris[1])
    return np.column_stack([x, y])


def _cn(rng: np.random.Generator, var: np.ndarray) -> np.ndarray:
    var = np.asarray(var, dtype=float)
    z = rng.standard_normal(var.shape) + 1j * rng.standard_normal(var.shape)
    return z * np.sqrt(var / 2.0)


def tap_profile(params: FadingParams) -> np.ndarray:
    """Exponential power-delay profile normalised to unit total power."""
    p = 10.0 ** (-params.tap_decay_db * np.arange(params.direct_taps) / 10.0)
    return p / p.sum()


def link_variances(layout: NodeLayout, geom: RisGeometry, params: FadingParams) -> dict:
    def gain(d, extra_db=0.0):
        pl = path_loss_db(d, params.carrier_hz, params.pathloss_exponent, params.reference_distance_m)
        return 10.0 ** ((extra_db - np.asarray(pl)) / 10.0)

    units = unit_positions(layout, geom)

    def seg(node):
        d = np.hypot(units[:, 0] - node[0], units[:, 1] - node[1])
        return gain(d, params.unit_gain_db)

    pdp = tap_profile(params)
    return {
        "AR": seg(layout.alice),
        "RB": seg(layout.bob),
        "RE": seg(layout.eve),
        "AB": gain(distance(layout.alice, layout.bob)) * pdp,
        "AE": gain(distance(layout.alice, layout.eve)) * pdp,
        "BE": gain(distance(layout.bob, layout.eve)) * pdp,
    }


def sample_initial_channels(layout: NodeLayout, geom: RisGeometry, params: FadingParams,
                            rng: np.random.Generator) -> ChannelSnapshot:
    variances = link_variances(layout, geom, params)
    gains = {name: _cn(rng, variances[name]) for name in RIS_LINKS + TAP_LINKS}
    delays = params.tap_spacing * np.arange(params.direct_taps)
    return ChannelSnapshot(gains, variances, delays, params.ris_delay, 0.0)


def evolve_channels(snapshot: ChannelSnapshot, rho: float, rng: np.random.Generator,
                    dt: float = 0.0) -> ChannelSnapshot:
    """One AR(1) step on every gain: ``g <- rho*g + sqrt(1-rho^2)*w``.

    ``w`` is fresh circular Gaussian noise with the link's stationary
    variance, so the stationary law is preserved.
    """
    if not 0.0 <= rho <= 1.0:
        raise DomainError("rho must lie in [0, 1]")
    if rho == 1.0:
        return snapshot.with_flat(snapshot.flat, snapshot.time_s + dt)
    w = rng.standard_normal(2 * snapshot.flat.size).view(np.complex128)
    flat = rho * snapshot.flat + math.sqrt(1.0 - rho * rho) * snapshot.scale * w
    return snapshot.with_flat(flat, snapshot.time_s + dt)


def reflection_coefficients(state: ReflectionState, geom: RisGeometry) -> np.ndarray:
    state.validate(geom)
    idx = np.asarray(state.group_phase_index, dtype=float)
    group_coeff = np.exp(2j * np.pi * idx / geom.phase_levels)
    return group_coeff[geom.unit_group()]


def random_reflection(geom: RisGeometry, rng: np.random.Generator) -> ReflectionState:
    idx = rng.integers(0, geom.phase_levels, size=geom.n_groups)
    return ReflectionState(tuple(int(i) for i in idx))


def _segments(snapshot: ChannelSnapshot, link: str):
    g = snapshot.gain
    # (RIS segment, RIS segment, direct taps); a reverse link uses the same
    # storage in the same order, so reciprocity holds bit for bit
    if link in ("AB", "BA"):
        return g("RB"), g("AR"), g("AB")
    if link == "AE":
        return g("RE"), g("AR"), g("AE")
    if link == "BE":
        return g("RE"), g("RB"), g("BE")
    raise DomainError(f"unknown link {link!r}; expected one of {LINKS}")


def cascade_gain(snapshot: ChannelSnapshot, coeffs: Optional[np.ndarray], link: str) -> complex:
    """The multiplicative term ``h_rx^T diag(phi) h_tx``; zero when no RIS is present."""
    rx, tx, _ = _segments(snapshot, link)
    if coeffs is None:
        return 0j
    coeffs = np.asarray(coeffs)
    if coeffs.shape != rx.shape or tx.shape != rx.shape:
        raise DomainError(f"coefficient length {coeffs.shape} does not match {rx.shape}")
    return complex(np.sum(rx * coeffs * tx))


def _coeffs(state, geom):
    if state is None:
        return None
    if isinstance(state, ReflectionState):
        if geom is None:
            raise DomainError("geometry required to expand a ReflectionState")
        return reflection_coefficients(state, geom)
    return np.asarray(state)


def effective_channel(snapshot: ChannelSnapshot, state, link: str,
                      geom: Optional[RisGeometry] = None) -> complex:
    """Narrowband end-to-end gain: cascade plus the summed direct taps.

    ``state`` is a :class:`ReflectionState` (requires ``geom``), a per-unit
    coefficient array, or ``None`` for a room without a RIS.
    """
    _, _, taps = _segments(snapshot, link)
    return cascade_gain(snapshot, _coeffs(state, geom), link) + complex(np.sum(taps))


def delay_matrix(delays, n_subcarriers: int) -> np.ndarray:
    k = np.arange(n_subcarriers)[:, None]
    return np.exp(-2j * np.pi * k * np.asarray(delays, dtype=float)[None, :] / n_subcarriers)


@dataclass
class ResponseKernel:
    """Precomputed delay phase ramps for a fixed subcarrier count."""

    snapshot_delays: np.ndarray
    ris_delay: float
    n_subcarriers: int
    taps: np.ndarray = field(init=False)
    ris: np.ndarray = field(init=False)

    def __post_init__(self):
        self.taps = delay_matrix(self.snapshot_delays, self.n_subcarriers)
        self.ris = delay_matrix([self.ris_delay], self.n_subcarriers)[:, 0]


def frequency_response(snapshot: ChannelSnapshot, state, link: str, n_subcarriers: int,
                       geom: Optional[RisGeometry] = None,
                       kernel: Optional[ResponseKernel] = None) -> np.ndarray:
    """Per-subcarrier response: DFT of the direct taps plus the RIS tap at its delay."""
    _, _, taps = _segments(snapshot, link)
    if kernel is None:
        kernel = ResponseKernel(snapshot.tap_delays, snapshot.ris_delay, n_subcarriers)
    out = kernel.taps @ taps
    casc = cascade_gain(snapshot, _coeffs(state, geom), link)
    if casc != 0:
        out = out + casc * kernel.ris
    return out
