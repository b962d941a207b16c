import json
import subprocess
import sys

import pytest

from risplkg.cli import main
from risplkg.config import (
    EXIT_MISSING,
    EXIT_RANGE,
    EXIT_SYNTAX,
    EXIT_UNKNOWN_KEY,
    ConfigError,
    dump_config,
    load_preset,
    parse_config,
    parse_config_text,
)
from risplkg.experiments import ScenarioConfig, builtin_presets


def test_empty_file_gives_defaults():
    assert parse_config_text("") == ScenarioConfig()


@pytest.mark.parametrize("name", list(builtin_presets()))
def test_dump_parse_round_trip(name):
    cfg = builtin_presets()[name]
    assert parse_config_text(dump_config(cfg)) == cfg
    assert load_preset(name) == cfg


def test_partial_override():
    cfg = parse_config_text("[scenario]\nseed = 9\n[fading]\nrho = 0.5\n[schedule]\nattacker_period_s = none\n")
    assert cfg.seed == 9 and cfg.fading.rho == 0.5 and cfg.schedule.attacker_period_s is None
    assert cfg.frame == ScenarioConfig().frame


@pytest.mark.parametrize("text, status, needle", [
    ("[schedule]\nlegit_period_s = 0\n", EXIT_RANGE, "legit_period_s"),
    ("[scenario]\nn_frames = -5\n", EXIT_RANGE, "n_frames"),
    ("[scenario]\nbogus = 1\n", EXIT_UNKNOWN_KEY, "bogus"),
    ("[weather]\nrain = 1\n", EXIT_UNKNOWN_KEY, "weather"),
    ("[scenario]\nseed = twelve\n", EXIT_SYNTAX, "scenario.seed"),
    ("[fading]\nrho = nan\n", EXIT_SYNTAX, "fading.rho"),
    ("[layout]\nalice = 1.0\n", EXIT_SYNTAX, "layout.alice"),
    ("seed = 1\n", EXIT_SYNTAX, "malformed"),
])
def test_config_errors(text, status, needle):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.status == status
    assert needle in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_config(tmp_path / "absent.ini")
    assert info.value.status == EXIT_MISSING


def _ini(tmp_path, text):
    p = tmp_path / "s.ini"
    p.write_text(text)
    return str(p)


def test_cli_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert main(["run", "--config", str(tmp_path / "nope.ini"), "--out", out]) == EXIT_MISSING
    assert main(["run", "--config", _ini(tmp_path, "[schedule]\nlegit_period_s = 0\n"),
                 "--out", out]) == EXIT_RANGE
    err = capsys.readouterr().err
    assert "legit_period_s" in err


def test_cli_unknown_preset_lists_names(capsys):
    assert main(["preset", "DATA10"]) != 0
    err = capsys.readouterr().err
    assert "DATA1" in err and "DATA9" in err


def test_cli_bad_sweep_axis(tmp_path):
    assert main(["sweep", "--preset", "DATA2", "--axis", "fading.colour",
                 "--values", "1", "--out", str(tmp_path)]) == 1


def test_cli_flip_preset_and_determinism(tmp_path, capsys):
    args = ["preset", "DATA7", "--frames", "4000", "--format", "json"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "DATA7_seed0.json").read_bytes()
    b = (tmp_path / "b" / "DATA7_seed0.json").read_bytes()
    assert a == b
    doc = json.loads(a)
    assert doc["header"]["command"] == "preset"
    assert doc["reports"][0]["kgr_final"] <= 1.0
    assert "DATA7 seed=0" in capsys.readouterr().out


def test_cli_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("RISPLKG_OUT", str(tmp_path / "env"))
    cfg = _ini(tmp_path, "[scenario]\nname = tiny\nn_frames = 400\n")
    assert main(["run", "--config", cfg, "--seed", "3", "--format", "csv"]) == 0
    assert (tmp_path / "env" / "s_seed3.csv").read_text().startswith("scenario,seed,")


def test_cli_all_modes(tmp_path):
    assert main(["preset", "DATA2", "--frames", "600", "--all-modes", "--format", "csv",
                 "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "DATA2_seed0.csv").read_text().splitlines()
    assert len(lines) == 5


def test_cli_dump_config(capsys):
    assert main(["dump-config", "DATA3"]) == 0
    assert parse_config_text(capsys.readouterr().out) == load_preset("DATA3")


def test_selftest_quick_subprocess():
    proc = subprocess.run([sys.executable, "-m", "risplkg.cli", "selftest", "--quick"],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "5/5 checks passed" in proc.stdout
