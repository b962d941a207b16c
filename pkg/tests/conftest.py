import time
from dataclasses import replace
from functools import lru_cache

import pytest

from risplkg.experiments import run_all_modes, scenario_presets

PRESETS = scenario_presets()

# (criterion, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE = []
RUNTIMES = {}


@lru_cache(maxsize=None)
def preset_reports(name: str, seed: int, n_frames: int = 0) -> dict:
    """All four (feature, quantizer) reports for a preset run, cached for the session."""
    cfg = replace(PRESETS[name], seed=seed)
    if n_frames:
        cfg = replace(cfg, n_frames=n_frames)
    t0 = time.perf_counter()
    out = run_all_modes(cfg)
    RUNTIMES[(name, seed, n_frames)] = time.perf_counter() - t0
    return out


def default_report(name: str, seed: int, n_frames: int = 0):
    cfg = PRESETS[name]
    return preset_reports(name, seed, n_frames)[(cfg.feature_mode, cfg.quantizer)]


@pytest.fixture
def presets():
    return PRESETS


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
