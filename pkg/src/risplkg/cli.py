"""Command-line front end.

    risplkg preset DATA2 --seed 7 --out results
    risplkg run --config my.ini --format json
    risplkg sweep --preset DATA4 --axis bob_ris_distance_m --values 0.5,1.0,1.5
    risplkg selftest

Reports go to ``--out``, else ``$RISPLKG_OUT``, else ``./risplkg-out``.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import ConfigError, dump_config, load_preset, parse_config, preset_names
from .errors import DomainError
from .experiments import (
    FEATURE_MODES,
    QUANTIZERS,
    MetricsReport,
    ScenarioConfig,
    process,
    reports_to_csv,
    reports_to_json,
    simulate,
    sweep_configs,
)

OUT_ENV = "RISPLKG_OUT"
DEFAULT_OUT = "risplkg-out"
EXIT_ERROR = 1


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit value")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, help="override the scenario seed (uint64)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--format", choices=("csv", "json", "both"), default="both")
    common.add_argument("--frames", type=_positive, help="override n_frames")
    common.add_argument("--all-modes", action="store_true",
                        help="report every feature mode and quantizer from one probing run")

    p = argparse.ArgumentParser(prog="risplkg", description="RIS-assisted key generation simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run a scenario file")
    run.add_argument("--config", required=True, help="scenario INI file")

    pre = sub.add_parser("preset", parents=[common], help="run a shipped preset")
    pre.add_argument("name", help="DATA1 .. DATA9")

    sw = sub.add_parser("sweep", parents=[common], help="vary one numeric field")
    src = sw.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="base scenario INI file")
    src.add_argument("--preset", help="base preset name")
    sw.add_argument("--axis", required=True, help="field path, e.g. fading.rho or bob_ris_distance_m")
    sw.add_argument("--values", required=True, help="comma-separated values")

    st = sub.add_parser("selftest", help="run the built-in invariant checks")
    st.add_argument("--quick", action="store_true", help="skip the scenario-level checks")

    sub.add_parser("presets", help="list preset names")
    dump = sub.add_parser("dump-config", help="print a resolved scenario file")
    dump.add_argument("name", nargs="?", help="preset name (defaults when omitted)")
    return p


def out_dir(arg: Optional[str]) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _label(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", text).strip("._") or "run"


def summary_line(r: MetricsReport) -> str:
    bdr = "n/a" if r.bdr_raw is None else f"{r.bdr_raw:.4f}"
    eve = "n/a" if r.eve_bdr is None else f"{r.eve_bdr:.4f}"
    return (f"{r.scenario} seed={r.seed} {r.feature_mode}/{r.quantizer} bdr={bdr} "
            f"kgr_raw={r.kgr_raw:.3f} kgr_final={r.kgr_final:.3f} eve_bdr={eve}")


def _execute(config: ScenarioConfig, all_modes: bool) -> list:
    log = simulate(config)
    if not all_modes:
        return [process(log, config)]
    return [process(log, config, m, q) for m in FEATURE_MODES for q in QUANTIZERS]


def _emit(reports, label: str, args, header: dict) -> list:
    d = out_dir(args.out)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    if args.format in ("csv", "both"):
        p = d / f"{label}.csv"
        p.write_text(reports_to_csv(reports))
        written.append(p)
    if args.format in ("json", "both"):
        p = d / f"{label}.json"
        p.write_text(reports_to_json(reports, header))
        written.append(p)
    return written


def _resolve(config: ScenarioConfig, args) -> ScenarioConfig:
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.frames is not None:
        config = replace(config, n_frames=args.frames)
    return config


def _header(command: str, configs) -> dict:
    return {"command": command, "version": __version__,
            "seeds": [c.seed for c in configs],
            "configs": [dump_config(c) for c in configs]}


def _run_configs(command, configs, label, args) -> int:
    reports = []
    for cfg in configs:
        for r in _execute(cfg, args.all_modes):
            print(summary_line(r))
            reports.append(r)
    for p in _emit(reports, label, args, _header(command, configs)):
        print(f"wrote {p}")
    return 0


def cmd_run(args) -> int:
    cfg = _resolve(parse_config(args.config), args)
    return _run_configs("run", [cfg], _label(f"{Path(args.config).stem}_seed{cfg.seed}"), args)


def cmd_preset(args) -> int:
    cfg = _resolve(load_preset(args.name), args)
    return _run_configs("preset", [cfg], _label(f"{args.name}_seed{cfg.seed}"), args)


def cmd_sweep(args) -> int:
    base = parse_config(args.config) if args.config else load_preset(args.preset)
    base = _resolve(base, args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise DomainError(f"--values must be comma-separated numbers, got {args.values!r}")
    if not values:
        raise DomainError("--values is empty")
    configs = sweep_configs(base, args.axis, values)
    label = _label(f"sweep_{base.name}_{args.axis}_seed{base.seed}")
    return _run_configs("sweep", configs, label, args)


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(quick=args.quick)
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
        failed += not ok
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else EXIT_ERROR


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "presets":
            print("\n".join(preset_names()))
            return 0
        if args.command == "dump-config":
            cfg = load_preset(args.name) if args.name else ScenarioConfig()
            sys.stdout.write(dump_config(cfg))
            return 0
        handler = {"run": cmd_run, "preset": cmd_preset, "sweep": cmd_sweep,
                   "selftest": cmd_selftest}[args.command]
        return handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.status
    except (DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
