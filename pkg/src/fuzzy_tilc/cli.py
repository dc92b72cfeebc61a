"""Command-line entry point: ``fuzzy-tilc <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .config import CASES, ConfigError, load_config
from .inverse import InversionError, invert_model
from .kriging import build_database, build_model, read_database_csv, write_database_csv
from .oven import Oven, ambient_drift
from .stats import CHI2_THRESHOLD_31_GROUPS, kruskal_wallis
from .tsk import TskModel

log = logging.getLogger("fuzzy_tilc")


def _config(args):
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "case", None):
        preset = CASES[args.case]
        cfg = replace(cfg, case=args.case, y_d=list(preset["y_d"]),
                      noise_levels=preset.get("noise_levels"),
                      modes=list(preset.get("modes", cfg.modes)), drift=preset.get("drift", cfg.drift))
    if getattr(args, "noise_sd", None) is not None:
        cfg = replace(cfg, noise_sd=args.noise_sd, noise_levels=None)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, design_seed=args.seed, runtime_seed=args.seed)
    if getattr(args, "repeats", None) is not None:
        cfg = replace(cfg, repeats=args.repeats)
    return cfg


def cmd_build_model(args) -> int:
    cfg = _config(args)
    parts = harness.partitions_for(cfg)
    if args.database:
        db = read_database_csv(args.database, parts)
    else:
        sd = cfg.noise_sd if args.noise_sd is not None else 0.0
        db = build_database(parts, None, repeats=cfg.repeats, noise_sd=sd,
                            seed=(harness.DESIGN_TAG, cfg.design_seed, 0), outputs=harness.design_outputs(cfg))
    if args.save_database:
        write_database_csv(db, args.save_database)
    model = build_model(db, parts)
    Path(args.out).write_text(model.to_json(), encoding="utf-8")
    print(f"wrote {args.out}: {model.n_cells} rules, {len(db)} experiments")
    return 0


def cmd_invert(args) -> int:
    model = TskModel.from_json(Path(args.model).read_text(encoding="utf-8"))
    inverse = invert_model(model)
    Path(args.out).write_text(inverse.to_json(), encoding="utf-8")
    print(f"wrote {args.out}: orientation {', '.join(inverse.orientation)}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if len(args.u) != 6:
        raise ConfigError("simulate needs six heater setpoints")
    oven = Oven(cfg.oven_params(args.mode))
    ambient = args.ambient if args.ambient is not None else float(ambient_drift(args.cycle, cfg.drift))
    T = oven.simulate_cycle(np.array(args.u, dtype=float), ambient)
    y = oven.read_sensors(T, cfg.noise_sd, cfg.runtime_seed, args.cycle)
    names = [f"top{z}" for z in oven.params.sensor_zones] + [f"bottom{z}" for z in oven.params.sensor_zones]
    for n, v in zip(names, y):
        print(f"{n}\t{v:.4f}")
    return 0


def cmd_run_case(args) -> int:
    cfg = _config(args)
    out = harness.run_case(cfg, args.out_dir)
    results = out.results if isinstance(out, harness.SweepResult) else [out]
    levels = out.levels if isinstance(out, harness.SweepResult) else [cfg.noise_sd]
    for sd, res in zip(levels, results):
        for mode in cfg.modes:
            sel = [r for r in res.rows if r.oven_mode == mode]
            noisy = [r.mu_e for r in sel if r.controller.startswith("n-f")]
            line = [f"sigma={sd:g}", mode]
            for r in sel:
                if r.controller in (harness.IDEAL, harness.CRISP):
                    line.append(f"{r.controller} mu_e={r.mu_e:.4f} sigma_e={r.sigma_e:.4f} e1={r.e1:.4f}")
            if noisy:
                line.append(f"n-f-TILC mean mu_e={np.mean(noisy):.4f}")
            kw = res.kruskal.get(mode)
            if kw is not None:
                line.append(f"KW H={kw.H:.4f}")
            print("  ".join(line))
    print(f"results in {args.out_dir}")
    return 0


def cmd_stats(args) -> int:
    groups: dict[str, list[float]] = {}
    with open(args.input, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"controller", "err_inf"} <= set(reader.fieldnames):
            raise ConfigError("input needs 'controller' and 'err_inf' columns")
        for row in reader:
            if args.mode and row.get("oven_mode") != args.mode:
                continue
            groups.setdefault((row.get("oven_mode", ""), row["controller"]), []).append(float(row["err_inf"]))
    res = kruskal_wallis(list(groups.values()))
    print(json.dumps({"H": res.H, "groups": res.groups, "n": res.n_total,
                      "threshold": CHI2_THRESHOLD_31_GROUPS, "rejects": res.rejects()}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fuzzy-tilc", description="Fuzzy terminal iterative learning control bench")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML or JSON scenario file")
        sp.add_argument("--seed", type=int, help="overrides both design and runtime seeds")

    sp = sub.add_parser("build-model", help="run the experiment design and fit the fuzzy model")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--noise-sd", type=float)
    sp.add_argument("--repeats", type=int)
    sp.add_argument("--database", help="fit from an existing database CSV instead of simulating")
    sp.add_argument("--save-database", help="also write the database CSV")
    sp.set_defaults(func=cmd_build_model)

    sp = sub.add_parser("invert", help="invert a fuzzy model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_invert)

    sp = sub.add_parser("simulate", help="simulate one heating cycle and print sensor readings")
    common(sp)
    sp.add_argument("--u", type=float, nargs=6, required=True, metavar="DEGC")
    sp.add_argument("--mode", choices=("nominal", "disturbed"), default="nominal")
    sp.add_argument("--ambient", type=float)
    sp.add_argument("--cycle", type=int, default=1)
    sp.add_argument("--noise-sd", type=float)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("run-case", help="run a scenario (or a noise sweep) and export results")
    common(sp)
    sp.add_argument("--case", choices=sorted(CASES))
    sp.add_argument("--noise-sd", type=float)
    sp.add_argument("--repeats", type=int)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_run_case)

    sp = sub.add_parser("stats", help="statistics on exported error samples")
    ssub = sp.add_subparsers(dest="test", required=True)
    kw = ssub.add_parser("kruskal-wallis")
    kw.add_argument("--input", required=True, help="CSV with controller and err_inf columns (boxplot.csv)")
    kw.add_argument("--mode", help="keep only rows of this oven mode")
    kw.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InversionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
