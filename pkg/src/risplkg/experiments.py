"""Scenarios, the end-to-end key pipeline, eavesdropper scoring, attack detection and sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .channel import FadingParams, NodeLayout, RisGeometry, sample_initial_channels
from .codes import get_code
from .errors import DomainError
from .probing import Environment, FrameConfig, RisSchedule, probing_round
from .quantize import (
    FEATURE_MODES,
    QUANTIZERS,
    _blocks,
    bit_disagreement_rate,
    feature_extract,
    quantize_series,
)
from .randomness import suite
from .reconcile import (
    ToeplitzSeed,
    Transcript,
    leakage_budget,
    privacy_amplify,
    reconcile_block,
    reconcile_keys,
)


@dataclass(frozen=True)
class ScheduleConfig:
    """RIS control.  A period of ``None`` means that controller is absent.

    ``legit_skew`` is the fractional clock error of the legitimate RIS
    controller, which is not synchronised to the probing frames.
    """

    legit_period_s: Optional[float] = 0.1
    legit_skew: float = 1e-3
    attacker_period_s: Optional[float] = None
    ris_present: bool = True

    def __post_init__(self):
        for name in ("legit_period_s", "attacker_period_s"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise DomainError(f"{name} must be positive")
        if self.legit_skew <= -1:
            raise DomainError("legit_skew must be > -1")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    seed: int = 0
    n_frames: int = 20000
    decimation: int = 10
    feature_mode: str = "CSI"
    quantizer: str = "double_threshold"
    alpha: float = 0.2
    block: int = 16
    code: str = "bch127_64"
    confirm_bits: int = 32
    safety_bits: int = 32
    layout: NodeLayout = field(default_factory=NodeLayout)
    geometry: RisGeometry = field(default_factory=RisGeometry)
    fading: FadingParams = field(default_factory=FadingParams)
    frame: FrameConfig = field(default_factory=FrameConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)

    def __post_init__(self):
        if self.n_frames < 1:
            raise DomainError("n_frames must be >= 1")
        if self.decimation < 1:
            raise DomainError("decimation must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must be an unsigned 64-bit value")
        if self.feature_mode not in FEATURE_MODES:
            raise DomainError(f"feature_mode must be one of {FEATURE_MODES}")
        if self.quantizer not in QUANTIZERS:
            raise DomainError(f"quantizer must be one of {QUANTIZERS}")
        if self.alpha < 0:
            raise DomainError("alpha must be non-negative")
        if self.block < 2:
            raise DomainError("block must be >= 2")
        if self.confirm_bits < 0 or self.safety_bits < 0:
            raise DomainError("confirm_bits and safety_bits must be non-negative")
        get_code(self.code)

    @property
    def n_processed(self) -> int:
        return len(range(0, self.n_frames, self.decimation))

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def h2(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


# ---------------------------------------------------------------- simulation


@dataclass
class ObservationLog:
    """Processed-frame observations of one campaign."""

    alice: list
    bob: list
    eve_uplink: list
    eve_downlink: list
    n_probed: int

    @property
    def n_processed(self) -> int:
        return len(self.alice)


def _streams(seed: int):
    ss = np.random.SeedSequence(seed)
    chan, noise, sched, pa, interleave = ss.spawn(5)
    return chan, noise, sched, pa, interleave


def build_environment(config: ScenarioConfig) -> Environment:
    chan, noise, sched, _, _ = _streams(config.seed)
    crng = np.random.default_rng(chan)
    nrng = np.random.default_rng(noise)
    srng = np.random.default_rng(sched)
    legit_seed, attack_seed = (int(s) for s in srng.integers(0, 2 ** 63, size=2))
    sc = config.schedule
    legit = attacker = None
    if sc.legit_period_s is not None:
        legit = RisSchedule(sc.legit_period_s, config.geometry, seed=legit_seed,
                            offset_s=float(srng.uniform(0, sc.legit_period_s)), skew=sc.legit_skew)
    if sc.attacker_period_s is not None:
        attacker = RisSchedule(sc.attacker_period_s, config.geometry, seed=attack_seed,
                               owner="attacker",
                               offset_s=float(srng.uniform(0, sc.attacker_period_s)))
    snap = sample_initial_channels(config.layout, config.geometry, config.fading, crng)
    return Environment(snap, config.geometry, config.fading, config.frame, crng, nrng,
                       legit, attacker, sc.ris_present, config.layout)


def simulate(config: ScenarioConfig) -> ObservationLog:
    """Probe every ``decimation``-th of ``n_frames`` frames.

    Frames in between are not probed; the room still evolves across them
    (in one closed-form step).
    """
    env = build_environment(config)
    log = ObservationLog([], [], [], [], config.n_frames)
    for f in range(0, config.n_frames, config.decimation):
        r = probing_round(env, f)
        log.alice.append(r.at_alice)
        log.bob.append(r.at_bob)
        log.eve_uplink.append(r.eve_uplink)
        log.eve_downlink.append(r.eve_downlink)
    return log


# ------------------------------------------------------------------- reports


@dataclass
class MetricsReport:
    scenario: str
    seed: int
    feature_mode: str
    quantizer: str
    bdr_raw: Optional[float]
    kgr_raw: float
    kgr_final: float
    reconciliation_failure_rate: float
    eve_bdr: Optional[float]
    eve_key_match: Optional[float]
    leakage_bits: int
    nist_pass_fraction: float
    randomness: list
    counts: dict
    transcript_sizes: dict
    csi_fluctuation_proxy: float
    config: dict

    def to_dict(self) -> dict:
        return _plain(asdict(self))


CSV_COLUMNS = ("scenario", "seed", "feature_mode", "quantizer", "bdr_raw", "kgr_raw",
               "kgr_final", "eve_bdr", "leakage_bits", "nist_pass_fraction")


def reports_to_csv(reports: Sequence[MetricsReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(["" if getattr(r, c) is None else getattr(r, c) for c in CSV_COLUMNS])
    return buf.getvalue()


def reports_to_json(reports: Sequence[MetricsReport], header: Optional[dict] = None) -> str:
    doc = {"reports": [r.to_dict() for r in reports]}
    if header is not None:
        doc["header"] = _plain(header)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------------ pipeline


def _common(ba, bb, n_dims):
    ka = ba.origin[:, 0] * n_dims + ba.origin[:, 1]
    kb = bb.origin[:, 0] * n_dims + bb.origin[:, 1]
    _, ia, ib = np.intersect1d(ka, kb, assume_unique=True, return_indices=True)
    return ia, ib


def _fluctuation(obs) -> float:
    """Mean over frames of the spread of per-pilot CSI magnitude (dB)."""
    if not obs:
        return 0.0
    vals = feature_extract(obs, "CSI").values
    return float(np.mean(vals.std(axis=1)))


def process(log: ObservationLog, config: ScenarioConfig, feature_mode: Optional[str] = None,
            quantizer: Optional[str] = None) -> MetricsReport:
    """Run quantization, reconciliation and amplification on a probing log."""
    mode = feature_mode or config.feature_mode
    quant = quantizer or config.quantizer
    code = get_code(config.code)
    n_proc = log.n_processed
    transcript = Transcript()

    fa = feature_extract(log.alice, mode)
    fb = feature_extract(log.bob, mode)
    ba = quantize_series(fa, quant, config.alpha, config.block)
    bb = quantize_series(fb, quant, config.alpha, config.block)
    if quant == "double_threshold":
        transcript.publish("retained_indices_a", ba.origin, 0)
        transcript.publish("retained_indices_b", bb.origin, 0)
    ia, ib = _common(ba, bb, fa.n_dims)
    origin = ba.origin[ia]
    transcript.publish("common_indices", origin, 0)
    xa, xb = ba.bits[ia], bb.bits[ib]
    # public interleaver: errors cluster by frame, so spread each frame over many blocks
    perm = np.random.default_rng(_streams(config.seed)[4]).permutation(xa.size)
    transcript.publish("interleaver", perm, 0)

    bdr = bit_disagreement_rate(xa, xb) if xa.size else None
    kgr_raw = xa.size / n_proc * (1.0 - h2(bdr)) if xa.size else 0.0

    rec = reconcile_keys(xa[perm], xb[perm], code, transcript, config.confirm_bits)
    transcript.publish("accepted_blocks", list(rec.accepted), 0)
    m_conf = min(config.confirm_bits, code.n)
    n_in = rec.key_a.size
    m = 0
    if rec.n_accepted:
        m = leakage_budget(n_in, code, rec.n_accepted, config.safety_bits)
        m = max(0, m - rec.n_accepted * m_conf)
    final_a = final_b = np.zeros(0, np.uint8)
    if m > 0:
        pa_rng = np.random.default_rng(_streams(config.seed)[3])
        seed = ToeplitzSeed.random(n_in, m, pa_rng)
        transcript.publish("pa_seed", seed, 0)
        final_a = privacy_amplify(rec.key_a, seed)
        final_b = privacy_amplify(rec.key_b, seed)

    if final_a.size:
        rnd = suite(final_a)
        randomness, pass_frac = rnd.to_list(), rnd.pass_fraction
    else:
        randomness, pass_frac = [], 0.0

    eve = eve_metrics(transcript, [log.eve_uplink, log.eve_downlink], xb, final_a,
                      feature_mode=mode, quantizer=quant, block=config.block, code=code)

    counts = {
        "frames_probed": log.n_probed,
        "frames_processed": n_proc,
        "bits_alice": int(len(ba)),
        "bits_bob": int(len(bb)),
        "bits_common": int(xa.size),
        "bit_errors": int(np.count_nonzero(xa != xb)),
        "blocks": rec.n_blocks,
        "blocks_accepted": rec.n_accepted,
        "decode_failures": rec.decode_failures,
        "confirm_failures": rec.confirm_failures,
        "reconciled_bits": int(n_in),
        "final_bits": int(m),
        "final_keys_match": bool(np.array_equal(final_a, final_b)),
    }
    fail = (rec.decode_failures + rec.confirm_failures) / rec.n_blocks if rec.n_blocks else 0.0
    return MetricsReport(
        scenario=config.name,
        seed=config.seed,
        feature_mode=mode,
        quantizer=quant,
        bdr_raw=bdr,
        kgr_raw=kgr_raw,
        kgr_final=m / n_proc,
        reconciliation_failure_rate=fail,
        eve_bdr=eve.eve_bdr,
        eve_key_match=eve.key_match,
        leakage_bits=transcript.leaked_bits(),
        nist_pass_fraction=pass_frac,
        randomness=randomness,
        counts=counts,
        transcript_sizes=transcript.sizes(),
        csi_fluctuation_proxy=_fluctuation(log.bob),
        config=replace(config, feature_mode=mode, quantizer=quant).to_dict(),
    )


def run_scenario(config: ScenarioConfig) -> MetricsReport:
    return process(simulate(config), config)


def run_all_modes(config: ScenarioConfig) -> dict:
    """Reports for every (feature mode, quantizer) pair from one probing run."""
    log = simulate(config)
    return {(m, q): process(log, config, m, q) for m in FEATURE_MODES for q in QUANTIZERS}


# ---------------------------------------------------------------------- Eve


@dataclass(frozen=True)
class EveReport:
    eve_bdr: Optional[float]
    key_match: Optional[float]
    direction: Optional[int]


def _full_bits(series, quantizer: str, block: int) -> np.ndarray:
    """One bit per (frame, dimension): above the block mean, or median for cdf."""
    vals = series.values
    out = np.zeros(vals.shape, np.uint8)
    if vals.shape[0] < 2:
        return out
    for a, b in _blocks(vals.shape[0], block):
        seg = vals[a:b]
        ref = np.median(seg, axis=0) if quantizer == "cdf" else seg.mean(axis=0)
        out[a:b] = seg > ref
    return out


def eve_metrics(transcript: Transcript, eve_observations: Sequence, reference_bits,
                final_key, *, feature_mode: str, quantizer: str, block: int, code,
                rng: Optional[np.random.Generator] = None) -> EveReport:
    """Score an eavesdropper who runs the legitimate pipeline on her own probes.

    For every overheard direction Eve quantizes her features at the public
    common indices (she has no guard band to hide behind, so every index
    gets a bit) and her raw disagreement with ``reference_bits`` is taken;
    ``eve_bdr`` is the smallest over directions.  She then decodes the
    accepted blocks with Alice's syndromes and applies the public hash;
    ``key_match`` is the fraction of final-key bits she gets right.

    With no observations Eve only has the transcript and guesses uniformly.
    """
    ref = np.asarray(reference_bits, dtype=np.uint8)
    origin = transcript.of_kind("common_indices")
    origin = origin[-1] if origin else np.zeros((0, 2), int)
    candidates = []
    for obs in eve_observations:
        if not obs or not len(origin):
            continue
        bits = _full_bits(feature_extract(obs, feature_mode), quantizer, block)
        candidates.append(bits[origin[:, 0], origin[:, 1]])
    eve_bdr = direction = None
    if candidates and ref.size:
        rates = [bit_disagreement_rate(c, ref) for c in candidates]
        direction = int(np.argmin(rates))
        eve_bdr = rates[direction]
    final = np.asarray(final_key, dtype=np.uint8)
    if final.size == 0:
        return EveReport(eve_bdr, None, direction)
    if direction is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        guess = rng.integers(0, 2, size=final.size, dtype=np.uint8)
        return EveReport(eve_bdr, float(np.mean(guess == final)), None)
    raw = candidates[direction]
    perm = transcript.of_kind("interleaver")
    if perm:
        raw = raw[perm[-1]]
    syn = transcript.of_kind("syndrome")
    accepted = transcript.of_kind("accepted_blocks")[-1]
    blocks = []
    for i in accepted:
        blk, _ = reconcile_block(raw[i * code.n:(i + 1) * code.n], syn[i], code)
        blocks.append(blk)
    seed = transcript.of_kind("pa_seed")[-1]
    guess = privacy_amplify(np.concatenate(blocks), seed)
    return EveReport(eve_bdr, float(np.mean(guess == final)), direction)


# ----------------------------------------------------------------- presets


def _distance_layout(bob_ris_m: float) -> NodeLayout:
    # Alice stays 0.5 m from the RIS; Bob slides along the same line
    y = 0.4
    if bob_ris_m <= y:
        raise DomainError(f"Bob-RIS distance must exceed {y} m")
    return NodeLayout(alice=(-0.3, y), bob=(math.sqrt(bob_ris_m ** 2 - y * y), y),
                      ris=(0.0, 0.0), eve=(0.0, 1.2))


def scenario_presets() -> dict:
    """The nine shipped scenarios DATA1..DATA9, read from the bundled preset files."""
    from .config import load_presets

    return load_presets()


def builtin_presets() -> dict:
    """The definitions the preset files were written from."""
    fad = FadingParams()
    out = {
        "DATA1": ScenarioConfig(
            name="DATA1", decimation=1, fading=replace(fad, rho=fad.static_rho),
            schedule=ScheduleConfig(legit_period_s=None, ris_present=False)),
        "DATA2": ScenarioConfig(name="DATA2", decimation=10,
                                schedule=ScheduleConfig(legit_period_s=0.1)),
        "DATA3": ScenarioConfig(name="DATA3", decimation=100,
                                schedule=ScheduleConfig(legit_period_s=1.0)),
    }
    for i, d in enumerate((0.5, 1.0, 1.5)):
        lay = _distance_layout(d)
        out[f"DATA{4 + i}"] = ScenarioConfig(name=f"DATA{4 + i}", decimation=10, layout=lay,
                                             schedule=ScheduleConfig(legit_period_s=0.1))
        out[f"DATA{7 + i}"] = ScenarioConfig(
            name=f"DATA{7 + i}", decimation=10, layout=lay,
            schedule=ScheduleConfig(legit_period_s=None, attacker_period_s=0.001))
    return dict(sorted(out.items(), key=lambda kv: int(kv[0][4:])))


def bob_ris_distance(config: ScenarioConfig) -> float:
    (bx, by), (rx, ry) = config.layout.bob, config.layout.ris
    return math.hypot(bx - rx, by - ry)


# ----------------------------------------------------------------- detector


@dataclass(frozen=True)
class DetectorCalibration:
    window: int
    mean: float
    std: float
    threshold: float
    false_alarm: float

    def __post_init__(self):
        if self.window < 2:
            raise DomainError("window must be >= 2")


def window_statistics(rss, window: int) -> np.ndarray:
    """Sample variance of RSS over consecutive non-overlapping windows."""
    x = np.asarray(rss, dtype=float)
    if window < 2:
        raise DomainError("window must be >= 2")
    n = x.size // window
    if n == 0:
        return np.zeros(0)
    return x[:n * window].reshape(n, window).var(axis=1, ddof=1)


def calibrate_detector(secure_rss, window: int = 30, false_alarm: float = 0.05) -> DetectorCalibration:
    """Threshold at the ``1 - false_alarm`` empirical quantile of secure-state window variances."""
    x = np.asarray(secure_rss, dtype=float)
    if window < 2:
        raise DomainError("window must be >= 2")
    if x.size < 10 * window:
        raise DomainError("calibration run must span at least 10 windows")
    if not 0 < false_alarm < 1:
        raise DomainError("false_alarm must lie in (0, 1)")
    stats = window_statistics(x, window)
    thr = float(np.quantile(stats, 1.0 - false_alarm))
    return DetectorCalibration(window, float(stats.mean()), float(stats.std()), thr, false_alarm)


def detect_attack(rss, calibration: DetectorCalibration) -> np.ndarray:
    """Per-window decisions: True where the RSS variance exceeds the threshold."""
    return window_statistics(rss, calibration.window) > calibration.threshold


def rss_stream(config: ScenarioConfig, observer: str = "bob") -> np.ndarray:
    log = simulate(config)
    obs = log.bob if observer == "bob" else log.alice
    return np.array([o.rss_db for o in obs])


def secure_state(config: ScenarioConfig) -> ScenarioConfig:
    """The same room with the RIS installed but idle: the detector's reference state."""
    return replace(config, schedule=ScheduleConfig(legit_period_s=None, ris_present=True))


# -------------------------------------------------------------------- sweep


AXIS_ALIASES = ("bob_ris_distance_m",)


def _numeric_fields(obj, prefix=""):
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        if is_dataclass(v):
            out.update(_numeric_fields(v, prefix + f.name + "."))
        elif f.name in ("legit_period_s", "attacker_period_s") or (
                isinstance(v, (int, float)) and not isinstance(v, bool)):
            out[prefix + f.name] = v
    return out


def sweep_axes(config: ScenarioConfig) -> list:
    names = [k for k in _numeric_fields(config) if k != "seed"]
    return sorted(names + list(AXIS_ALIASES))


def with_axis(config: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    if axis == "bob_ris_distance_m":
        return replace(config, layout=_distance_layout(float(value)))
    if axis not in sweep_axes(config):
        raise DomainError(f"unknown sweep axis {axis!r}; valid axes: {', '.join(sweep_axes(config))}")
    head, _, tail = axis.partition(".")
    if not tail:
        cur = getattr(config, head)
        return replace(config, **{head: type(cur)(value) if cur is not None else value})
    sub = getattr(config, head)
    cur = getattr(sub, tail)
    value = float(value) if cur is None or isinstance(cur, float) else type(cur)(value)
    return replace(config, **{head: replace(sub, **{tail: value})})


def point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def sweep_configs(base: ScenarioConfig, axis: str, values: Sequence) -> list:
    out = []
    for i, v in enumerate(values):
        cfg = with_axis(base, axis, v)
        out.append(replace(cfg, seed=point_seed(base.seed, i), name=f"{base.name}[{axis}={v}]"))
    return out


def sweep(base: ScenarioConfig, axis: str, values: Sequence, workers: int = 1) -> list:
    """One report per value, each point with its own derived seed, in input order."""
    configs = sweep_configs(base, axis, values)
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(run_scenario, configs))
    return [run_scenario(c) for c in configs]
