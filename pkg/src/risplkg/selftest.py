"""Fast invariant checks behind ``risplkg selftest``."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .channel import FadingParams, NodeLayout, RisGeometry, frequency_response, random_reflection, sample_initial_channels
from .codes import get_code
from .probing import FrameConfig, ls_estimate, transmit_frame
from .randomness import monobit, runs
from .reconcile import ToeplitzSeed, privacy_amplify, reconcile_block


def _hamming():
    code = get_code("hamming74")
    good = 0
    for word in code.codewords():
        for pos in range(-1, 7):
            b = word.copy()
            if pos >= 0:
                b[pos] ^= 1
            fixed, ok = reconcile_block(b, code.syndrome(word), code)
            good += ok and np.array_equal(fixed, word)
    return good == 128, f"{good}/128 blocks recovered"


def _bch(trials=300):
    code = get_code("bch127_64")
    rng = np.random.default_rng(1)
    good = 0
    for _ in range(trials):
        a = rng.integers(0, 2, code.n, dtype=np.uint8)
        e = np.zeros(code.n, np.uint8)
        e[rng.choice(code.n, rng.integers(0, code.t + 1), replace=False)] = 1
        fixed, ok = reconcile_block(a ^ e, code.syndrome(a), code)
        good += ok and np.array_equal(fixed, a)
    return good == trials, f"{good}/{trials} blocks recovered"


def _toeplitz():
    rng = np.random.default_rng(2)
    seed = ToeplitzSeed.random(300, 120, rng)
    x = rng.integers(0, 2, 300, dtype=np.uint8)
    ok = np.array_equal(privacy_amplify(x, seed), (seed.matrix().astype(int) @ x) % 2)
    return ok, "convolution matches the explicit matrix"


def _ls():
    geom, fad = RisGeometry(), FadingParams()
    cfg = FrameConfig(noise_floor_dbm=-np.inf, gain_jitter_db=0.0)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        snap = sample_initial_channels(NodeLayout(), geom, fad, rng)
        h = frequency_response(snap, random_reflection(geom, rng), "AB", cfg.subcarriers, geom)
        rf = transmit_frame(h, cfg, rng)
        est = ls_estimate(rf.pilots, rf.known_pilots)
        ref = h[cfg.pilot_index]
        worst = max(worst, float(np.max(np.abs(est - ref) / np.abs(ref))))
    return worst < 1e-12, f"max relative error {worst:.1e}"


def _nist():
    p1 = monobit([1, 0, 1, 1, 0, 1, 0, 1, 0, 1]).p_value
    p2 = runs([1, 0, 0, 1, 1, 0, 1, 0, 1, 1]).p_value
    ok = abs(p1 - 0.527) < 1e-3 and abs(p2 - 0.147) < 1e-3
    return ok, f"monobit p={p1:.4f}, runs p={p2:.4f}"


def _scenario():
    from .experiments import run_scenario, scenario_presets

    cfg = replace(scenario_presets()["DATA2"], n_frames=3000)
    a, b = run_scenario(cfg), run_scenario(cfg)
    same = a.to_dict() == b.to_dict()
    ok = (same and a.counts["final_keys_match"] and a.kgr_final <= a.kgr_raw
          and a.leakage_bits == a.transcript_sizes.get("syndrome", 0)
          + a.transcript_sizes.get("confirmation", 0))
    return ok, f"deterministic={same} kgr_raw={a.kgr_raw:.2f} kgr_final={a.kgr_final:.2f}"


CHECKS = [
    ("hamming74_exhaustive", _hamming),
    ("bch127_64_round_trip", _bch),
    ("toeplitz_oracle", _toeplitz),
    ("ls_noiseless_exact", _ls),
    ("nist_worked_examples", _nist),
]


def run_selftest(quick: bool = False) -> list:
    checks = CHECKS if quick else CHECKS + [("scenario_invariants", _scenario)]
    out = []
    for name, fn in checks:
        ok, detail = fn()
        out.append((name, bool(ok), detail))
    return out
