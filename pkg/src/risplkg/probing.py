"""TDD bidirectional probing: frames, noisy reception, LS estimation, RSS, RIS timing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .channel import (
    ChannelSnapshot,
    FadingParams,
    NodeLayout,
    ReflectionState,
    ResponseKernel,
    RisGeometry,
    evolve_channels,
    frequency_response,
    random_reflection,
    reflection_coefficients,
)
from .errors import DomainError

DIRECTIONS = ("A->B", "B->A", "A->E", "B->E")


@dataclass(frozen=True)
class FrameConfig:
    """Frame layout and radio levels.

    ``gain_jitter_db`` is the per-transmission transmit-gain wobble of the
    radio front end (standard deviation, dB).  It scales a whole
    transmission, so it hits every receiver of that transmission equally.
    """

    frame_period_s: float = 0.010
    subcarriers: int = 1200
    pilot_spacing: int = 6
    data_bits: int = 1200
    probe_gap_s: float = 0.005
    tx_power_dbm: float = -24.0
    noise_floor_dbm: float = -90.0
    gain_jitter_db: float = 0.8

    def __post_init__(self):
        if self.subcarriers <= 0 or self.pilot_spacing <= 0:
            raise DomainError("subcarriers and pilot_spacing must be positive")
        if self.subcarriers % self.pilot_spacing:
            raise DomainError("subcarriers must be divisible by pilot_spacing")
        if not 0.0 < self.probe_gap_s < self.frame_period_s:
            raise DomainError("probe_gap_s must lie strictly inside the frame")
        if self.data_bits <= 0:
            raise DomainError("data_bits must be positive")
        if self.gain_jitter_db < 0:
            raise DomainError("gain_jitter_db must be non-negative")
        # derived arrays, cached outside the dataclass fields
        pidx = np.arange(0, self.subcarriers, self.pilot_spacing)
        pidx.flags.writeable = False
        object.__setattr__(self, "_pilot_index", pidx)
        didx = None
        if self.data_bits != self.subcarriers:
            didx = np.arange(self.data_bits) % self.subcarriers
        object.__setattr__(self, "_data_index", didx)

    @property
    def n_pilots(self) -> int:
        return self.subcarriers // self.pilot_spacing

    @property
    def pilot_index(self) -> np.ndarray:
        return self._pilot_index

    @property
    def noise_variance(self) -> float:
        """Noise power per subcarrier relative to the transmit power."""
        if math.isinf(self.noise_floor_dbm) and self.noise_floor_dbm < 0:
            return 0.0
        return 10.0 ** ((self.noise_floor_dbm - self.tx_power_dbm) / 10.0)


@dataclass(frozen=True)
class ProbeObservation:
    frame_index: int
    direction: str
    csi_estimate: np.ndarray
    rss_db: float
    time_s: float


class RisSchedule:
    """Piecewise-constant RIS control in time.

    State ``k`` is drawn from a generator seeded with ``(seed, k)``, so the
    sequence is lazily materialised and random-access.  ``skew`` is the
    fractional error of the controller clock: the RIS actually switches
    every ``switch_period_s * (1 + skew)`` seconds.
    """

    def __init__(self, switch_period_s: float, geom: RisGeometry, seed: int = 0,
                 owner: str = "legitimate", offset_s: float = 0.0, skew: float = 0.0):
        if not switch_period_s > 0:
            raise DomainError("switch_period_s must be positive")
        if owner not in ("legitimate", "attacker"):
            raise DomainError(f"unknown schedule owner {owner!r}")
        if offset_s < 0 or skew <= -1:
            raise DomainError("offset_s must be >= 0 and skew > -1")
        self.switch_period_s = float(switch_period_s)
        self.geom = geom
        self.seed = int(seed)
        self.owner = owner
        self.offset_s = float(offset_s)
        self.skew = float(skew)
        self._cache: dict[int, ReflectionState] = {}

    @property
    def effective_period_s(self) -> float:
        return self.switch_period_s * (1.0 + self.skew)

    def index_at(self, time_s: float) -> int:
        if time_s < 0:
            raise DomainError("time must be non-negative")
        return int(math.floor((time_s + self.offset_s) / self.effective_period_s))

    def state(self, k: int) -> ReflectionState:
        if k not in self._cache:
            if len(self._cache) > 4096:
                self._cache.clear()
            rng = np.random.default_rng([self.seed, k])
            self._cache[k] = random_reflection(self.geom, rng)
        return self._cache[k]


def active_state(schedule: RisSchedule, time_s: float) -> ReflectionState:
    return schedule.state(schedule.index_at(time_s))


@dataclass(frozen=True)
class ReceivedFrame:
    pilots: np.ndarray
    known_pilots: np.ndarray
    data: np.ndarray


def transmit_frame(channel_response, config: FrameConfig, rng: np.random.Generator,
                   tx_gain: float = 1.0) -> ReceivedFrame:
    """Pass one pilot symbol and one data symbol through ``channel_response``.

    Pilots are unit constants on every ``pilot_spacing``-th subcarrier; the
    data symbol carries ``data_bits`` BPSK symbols (one per subcarrier,
    cycling when ``data_bits`` exceeds the subcarrier count).
    """
    h = np.asarray(channel_response, dtype=complex)
    if h.shape != (config.subcarriers,):
        raise DomainError(f"channel response must have {config.subcarriers} entries")
    known = np.ones(config.n_pilots, dtype=complex)
    sym = 1.0 - 2.0 * rng.integers(0, 2, size=config.data_bits).astype(float)
    h_data = h if config._data_index is None else h[config._data_index]
    rx_p = tx_gain * h[config.pilot_index]
    rx_d = (tx_gain * sym) * h_data
    var = config.noise_variance
    if var > 0:
        n_p, n_d = rx_p.size, rx_d.size
        w = rng.standard_normal(2 * (n_p + n_d)).view(np.complex128) * math.sqrt(var / 2.0)
        rx_p = rx_p + w[:n_p]
        rx_d = rx_d + w[n_p:]
    return ReceivedFrame(rx_p, known, rx_d)


def ls_estimate(received_pilots, known_pilots) -> np.ndarray:
    rx = np.asarray(received_pilots, dtype=complex)
    tx = np.asarray(known_pilots, dtype=complex)
    if rx.shape != tx.shape:
        raise DomainError("received and known pilots differ in length")
    if np.any(tx == 0):
        raise DomainError("known pilots must be nonzero")
    return rx / tx


def rss_from_data(samples) -> float:
    x = np.asarray(samples)
    if x.size == 0:
        raise DomainError("RSS needs at least one sample")
    p = float(np.mean(x.real ** 2 + x.imag ** 2)) if np.iscomplexobj(x) else float(np.mean(x * x))
    return 10.0 * math.log10(p) if p > 0 else -math.inf


@dataclass
class Environment:
    """Mutable state of one probing campaign.

    The RIS applies the attacker's schedule when one is present, otherwise
    the legitimate one; with neither, an installed RIS sits in the all-zero
    state and ``ris_present=False`` removes the reflected path entirely.
    """

    snapshot: ChannelSnapshot
    geom: RisGeometry
    fading: FadingParams
    frame: FrameConfig
    channel_rng: np.random.Generator
    noise_rng: np.random.Generator
    legit: Optional[RisSchedule] = None
    attacker: Optional[RisSchedule] = None
    ris_present: bool = True
    layout: Optional[NodeLayout] = None
    kernel: ResponseKernel = field(init=False)

    def __post_init__(self):
        self.kernel = ResponseKernel(self.snapshot.tap_delays, self.snapshot.ris_delay,
                                     self.frame.subcarriers)
        self._idle = ReflectionState((0,) * self.geom.n_groups)
        self._coeffs: dict = {}

    def coefficients_at(self, time_s: float) -> Optional[np.ndarray]:
        state = self.state_at(time_s)
        if state is None:
            return None
        c = self._coeffs.get(state)
        if c is None:
            if len(self._coeffs) > 4096:
                self._coeffs.clear()
            c = self._coeffs[state] = reflection_coefficients(state, self.geom)
        return c

    def state_at(self, time_s: float) -> Optional[ReflectionState]:
        if not self.ris_present:
            return None
        if self.attacker is not None:
            return active_state(self.attacker, time_s)
        if self.legit is not None:
            return active_state(self.legit, time_s)
        return self._idle

    def rho_over(self, dt: float) -> float:
        return self.fading.rho ** (dt / self.frame.frame_period_s)

    def advance(self, dt: float) -> None:
        """Let the room evolve for ``dt`` seconds without probing."""
        if dt > 0:
            self.snapshot = evolve_channels(self.snapshot, self.rho_over(dt), self.channel_rng, dt)

    def response(self, coeffs, link: str) -> np.ndarray:
        return frequency_response(self.snapshot, coeffs, link, self.frame.subcarriers,
                                  kernel=self.kernel)


@dataclass(frozen=True)
class RoundResult:
    at_alice: ProbeObservation
    at_bob: ProbeObservation
    eve_uplink: ProbeObservation
    eve_downlink: ProbeObservation
    snapshot: ChannelSnapshot


def _observe(env, rf: ReceivedFrame, frame_index, direction, t):
    return ProbeObservation(frame_index, direction, ls_estimate(rf.pilots, rf.known_pilots),
                            rss_from_data(rf.data), t)


def probing_round(env: Environment, frame_index: int) -> RoundResult:
    """Uplink at the frame start, downlink ``probe_gap_s`` later; Eve overhears both.

    The environment is advanced to the start of the next frame.
    """
    cfg = env.frame
    t0 = frame_index * cfg.frame_period_s
    if abs(env.snapshot.time_s - t0) > 1e-9 * max(1.0, t0):
        env.advance(t0 - env.snapshot.time_s)
    jitter = cfg.gain_jitter_db

    def gain():
        return 10.0 ** (jitter * env.noise_rng.standard_normal() / 20.0) if jitter > 0 else 1.0

    coeffs = env.coefficients_at(t0)
    g_a = gain()
    at_bob = _observe(env, transmit_frame(env.response(coeffs, "AB"), cfg, env.noise_rng, g_a),
                      frame_index, "A->B", t0)
    eve_up = _observe(env, transmit_frame(env.response(coeffs, "AE"), cfg, env.noise_rng, g_a),
                      frame_index, "A->E", t0)

    t1 = t0 + cfg.probe_gap_s
    env.advance(cfg.probe_gap_s)
    coeffs = env.coefficients_at(t1)
    g_b = gain()
    at_alice = _observe(env, transmit_frame(env.response(coeffs, "BA"), cfg, env.noise_rng, g_b),
                        frame_index, "B->A", t1)
    eve_down = _observe(env, transmit_frame(env.response(coeffs, "BE"), cfg, env.noise_rng, g_b),
                        frame_index, "B->E", t1)

    env.advance(cfg.frame_period_s - cfg.probe_gap_s)
    return RoundResult(at_alice, at_bob, eve_up, eve_down, env.snapshot)


TRACE_COLUMNS = ("frame", "direction", "time_s", "rss_db", "csi")


def write_trace_csv(path, observations: Iterable[ProbeObservation]) -> int:
    """One row per observation; ``csi`` holds ``;``-joined complex literals."""
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for ob in observations:
            csi = ";".join(repr(complex(z)).strip("()") for z in ob.csi_estimate)
            w.writerow([ob.frame_index, ob.direction, repr(ob.time_s), repr(ob.rss_db), csi])
            n += 1
    return n


def read_trace_csv(path) -> list[ProbeObservation]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            csi = np.array([complex(z) for z in row["csi"].split(";")]) if row["csi"] else np.zeros(0, complex)
            out.append(ProbeObservation(int(row["frame"]), row["direction"], csi,
                                        float(row["rss_db"]), float(row["time_s"])))
    return out
