import math

import numpy as np
import pytest

from risplkg.channel import FadingParams, NodeLayout, RisGeometry, random_reflection, sample_initial_channels
from risplkg.errors import DomainError
from risplkg.probing import (
    Environment,
    FrameConfig,
    ProbeObservation,
    RisSchedule,
    active_state,
    ls_estimate,
    probing_round,
    read_trace_csv,
    rss_from_data,
    transmit_frame,
    write_trace_csv,
)

GEOM = RisGeometry()
NOISELESS = FrameConfig(noise_floor_dbm=-math.inf, gain_jitter_db=0.0)


def make_env(frame=FrameConfig(), legit=None, attacker=None, rho=0.9999, seed=0, ris=True):
    fad = FadingParams(rho=rho)
    crng = np.random.default_rng(seed)
    snap = sample_initial_channels(NodeLayout(), GEOM, fad, crng)
    return Environment(snap, GEOM, fad, frame, crng, np.random.default_rng(seed + 1),
                       legit, attacker, ris, NodeLayout())


def test_frame_defaults():
    cfg = FrameConfig()
    assert cfg.n_pilots == 200
    assert cfg.pilot_index[:3].tolist() == [0, 6, 12]


@pytest.mark.parametrize("kw", [dict(pilot_spacing=7), dict(probe_gap_s=0.0),
                                dict(probe_gap_s=0.01), dict(data_bits=0)])
def test_frame_invalid(kw):
    with pytest.raises(DomainError):
        FrameConfig(**kw)


# schedule

@pytest.mark.parametrize("t,k", [(0.05, 0), (0.25, 2), (0.0, 0)])
def test_schedule_index(t, k):
    assert RisSchedule(0.1, GEOM).index_at(t) == k


def test_schedule_state_matches_index():
    s = RisSchedule(0.1, GEOM, seed=4)
    assert active_state(s, 0.25) == s.state(2)
    assert active_state(s, 0.21) == active_state(s, 0.29)


def test_fast_schedule_differs_across_probe_gap():
    s = RisSchedule(0.001, GEOM)
    cfg = FrameConfig()
    for f in range(50):
        t = f * cfg.frame_period_s
        assert s.index_at(t) != s.index_at(t + cfg.probe_gap_s)


@pytest.mark.parametrize("period,T", [(0.1, 1.0), (0.001, 0.0375), (0.3, 1.0)])
def test_schedule_distinct_count(period, T):
    s = RisSchedule(period, GEOM)
    ts = np.arange(0, T, period / 7)
    assert len({s.index_at(t) for t in ts}) == math.ceil(T / period - 1e-12)


def test_schedule_invalid():
    with pytest.raises(DomainError):
        RisSchedule(0.0, GEOM)
    with pytest.raises(DomainError):
        RisSchedule(0.1, GEOM, owner="eve")
    with pytest.raises(DomainError):
        RisSchedule(0.1, GEOM).index_at(-1.0)


def test_schedule_skew_stretches_period():
    s = RisSchedule(0.1, GEOM, skew=0.01)
    assert s.index_at(0.1005) == 0 and s.index_at(0.1015) == 1


# transmit and estimate

def test_noiseless_received_equals_channel():
    h = np.random.default_rng(0).standard_normal(1200) + 1j
    rf = transmit_frame(h, NOISELESS, np.random.default_rng(1))
    assert np.array_equal(rf.pilots, h[NOISELESS.pilot_index])
    assert np.allclose(np.abs(rf.data), np.abs(h))


def test_zero_channel_noise_power():
    cfg = FrameConfig()
    rf = [transmit_frame(np.zeros(1200), cfg, np.random.default_rng(i)) for i in range(20)]
    p = np.mean([np.mean(np.abs(r.data) ** 2) for r in rf])
    assert p == pytest.approx(cfg.noise_variance, rel=0.05)


def test_transmit_deterministic():
    h = np.ones(1200)
    a = transmit_frame(h, FrameConfig(), np.random.default_rng(3))
    b = transmit_frame(h, FrameConfig(), np.random.default_rng(3))
    assert np.array_equal(a.pilots, b.pilots) and np.array_equal(a.data, b.data)


def test_transmit_wrong_length():
    with pytest.raises(DomainError):
        transmit_frame(np.ones(10), FrameConfig(), np.random.default_rng(0))


def test_ls_examples():
    assert ls_estimate([4 + 2j], [2 + 0j])[0] == 2 + 1j
    with pytest.raises(DomainError):
        ls_estimate([1, 2], [1, 0])
    with pytest.raises(DomainError):
        ls_estimate([1, 2], [1])


def test_ls_noiseless_exact():
    rng = np.random.default_rng(7)
    for _ in range(50):
        h = rng.standard_normal(1200) + 1j * rng.standard_normal(1200)
        rf = transmit_frame(h, NOISELESS, rng)
        est = ls_estimate(rf.pilots, rf.known_pilots)
        ref = h[NOISELESS.pilot_index]
        assert np.max(np.abs(est - ref) / np.abs(ref)) < 1e-12


def test_ls_error_variance():
    cfg = FrameConfig(gain_jitter_db=0.0)
    h = np.full(1200, 0.01 + 0.0j)
    rng = np.random.default_rng(8)
    err = np.concatenate([ls_estimate(r.pilots, r.known_pilots) - 0.01
                          for r in (transmit_frame(h, cfg, rng) for _ in range(50))])
    assert err.size >= 10_000
    assert np.mean(np.abs(err) ** 2) == pytest.approx(cfg.noise_variance, rel=0.05)


def test_mse_nonincreasing_in_snr():
    h = np.full(1200, 1.0 + 0j)
    mses = []
    for tx in np.linspace(-40, 10, 21):
        cfg = FrameConfig(tx_power_dbm=float(tx), gain_jitter_db=0.0)
        rng = np.random.default_rng(0)
        e = [ls_estimate(r.pilots, r.known_pilots) - 1 for r in (transmit_frame(h, cfg, rng) for _ in range(5))]
        mses.append(np.mean(np.abs(np.concatenate(e)) ** 2))
    assert all(b <= a for a, b in zip(mses, mses[1:]))


@pytest.mark.parametrize("mod,db", [(1.0, 0.0), (10.0, 20.0)])
def test_rss_examples(mod, db):
    x = mod * np.exp(1j * np.linspace(0, 6, 100))
    assert rss_from_data(x) == pytest.approx(db, abs=1e-12)


def test_rss_scaling_and_empty():
    x = np.random.default_rng(0).standard_normal(50) + 0j
    assert rss_from_data(2 * x) - rss_from_data(x) == pytest.approx(20 * math.log10(2), abs=1e-12)
    with pytest.raises(DomainError):
        rss_from_data([])


# probing rounds

def test_round_timing_and_directions():
    env = make_env()
    r = probing_round(env, 3)
    assert r.at_bob.direction == "A->B" and r.at_alice.direction == "B->A"
    assert r.eve_uplink.direction == "A->E" and r.eve_downlink.direction == "B->E"
    assert r.at_bob.time_s == pytest.approx(0.03)
    assert r.at_alice.time_s == pytest.approx(0.035)
    assert env.snapshot.time_s == pytest.approx(0.04)
    assert len(r.at_alice.csi_estimate) == 200


def test_noiseless_static_reciprocity_bit_exact():
    env = make_env(NOISELESS, legit=RisSchedule(0.1, GEOM, seed=1), rho=1.0)
    for f in range(5):
        r = probing_round(env, f)
        assert np.array_equal(r.at_alice.csi_estimate, r.at_bob.csi_estimate)


@pytest.mark.parametrize("frame,rho,slow_max,fast_min", [(NOISELESS, 1.0, 1e-12, 0.1),
                                                         (FrameConfig(), 0.9999, 0.35, 0.5)])
def test_slow_schedule_agrees_fast_attack_disagrees(frame, rho, slow_max, fast_min):
    slow = make_env(frame, legit=RisSchedule(0.1, GEOM, seed=1), rho=rho)
    fast = make_env(frame, attacker=RisSchedule(0.001, GEOM, seed=1, owner="attacker"), rho=rho)

    def mismatch(env):
        out = []
        for f in range(20):
            r = probing_round(env, f)
            a, b = np.abs(r.at_alice.csi_estimate), np.abs(r.at_bob.csi_estimate)
            out.append(np.mean(np.abs(a - b) / b))
        return np.median(out)

    m_slow, m_fast = mismatch(slow), mismatch(fast)
    assert m_slow < slow_max
    assert m_fast > fast_min


def test_eve_differs_from_legitimate():
    env = make_env(NOISELESS, legit=RisSchedule(0.1, GEOM), rho=1.0)
    r = probing_round(env, 0)
    for e in (r.eve_uplink, r.eve_downlink):
        assert not np.allclose(e.csi_estimate, r.at_bob.csi_estimate)
    assert not np.allclose(r.eve_uplink.csi_estimate, r.eve_downlink.csi_estimate)


def test_idle_and_absent_ris():
    assert make_env().state_at(0.3).group_phase_index == (0, 0, 0, 0)
    assert make_env(ris=False).state_at(0.3) is None


def test_trace_round_trip(tmp_path):
    env = make_env()
    obs = []
    for f in range(3):
        r = probing_round(env, f)
        obs += [r.at_bob, r.at_alice]
    p = tmp_path / "trace.csv"
    assert write_trace_csv(p, obs) == 6
    back = read_trace_csv(p)
    for a, b in zip(obs, back):
        assert (a.frame_index, a.direction, a.time_s, a.rss_db) == (b.frame_index, b.direction, b.time_s, b.rss_db)
        assert np.array_equal(a.csi_estimate, b.csi_estimate)
