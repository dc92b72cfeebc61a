"""Scenario runner: model building, closed-loop runs and result export.

Seed policy
-----------
Two disjoint namespaces keep the randomness independent of scheduling:

* design noise of noisy controller ``j`` at experiment ``(i_1, ..., i_m)``
  draws from ``default_rng([DESIGN_TAG, design_seed, j, i_1, ..., i_m])``;
* measurement noise of cycle ``k`` draws from
  ``default_rng([runtime_seed, k])`` and the same vector is added to every
  controller and oven mode of a scenario.
"""

from __future__ import annotations

import csv
import functools
import json
import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .controller import CrispTilc, FuzzyTilc, TilcController, TilcRun, fit_affine
from .filters import FilterRuleTable
from .inverse import InverseModel, InversionError, invert_model
from .kriging import ExperimentDatabase, build_database, build_model
from .oven import Oven, OvenParams, ambient_drift
from .partition import uniform_partition
from .stats import CHI2_THRESHOLD_31_GROUPS, KwResult, gaussian_block, kruskal_wallis

log = logging.getLogger(__name__)

DESIGN_TAG = 0x44455349  # keeps design streams apart from runtime streams
ERROR_MARKERS = (5.0, 10.0)
IDEAL = "i-f-TILC"
CRISP = "crisp"


class InfeasibleTargetWarning(UserWarning):
    pass


def noisy_name(j: int) -> str:
    return f"n-f-TILC-{j:02d}"


def partitions_for(cfg: ScenarioConfig):
    return [uniform_partition(cfg.u_min, cfg.u_max, cfg.n_sets)] * 6


@functools.lru_cache(maxsize=8)
def _oracle_outputs(params: OvenParams, u_min: float, u_max: float, n_sets: int) -> np.ndarray:
    parts = [uniform_partition(u_min, u_max, n_sets)] * 6
    oven = Oven(params)
    log.info("simulating %d design experiments", (n_sets + 1) ** 6)
    db = build_database(parts, oven.terminal_outputs, batch=True)
    out = db.phi.reshape(-1, 6)
    out.flags.writeable = False
    return out


def design_outputs(cfg: ScenarioConfig) -> np.ndarray:
    """Noise-free oracle answers for every design tuple (nominal oven, cached)."""
    return _oracle_outputs(cfg.oven_params("nominal"), float(cfg.u_min), float(cfg.u_max), int(cfg.n_sets))


def build_ideal(cfg: ScenarioConfig) -> tuple[ExperimentDatabase, InverseModel]:
    """Noise-free database and inverse model; inversion errors propagate."""
    parts = partitions_for(cfg)
    db = build_database(parts, None, outputs=design_outputs(cfg))
    return db, invert_model(build_model(db, parts))


def build_noisy_controllers(cfg: ScenarioConfig, count: int | None = None,
                            noise_sd: float | None = None) -> list[InverseModel | InversionError]:
    """Inverse models from ``count`` independently perturbed databases.

    A failed inversion is returned in place of its model so that callers can
    report it by controller index.
    """
    count = cfg.noisy if count is None else count
    sd = cfg.design_sd() if noise_sd is None else noise_sd
    parts = partitions_for(cfg)
    outputs = design_outputs(cfg)
    models: list[InverseModel | InversionError] = []
    for j in range(1, count + 1):
        db = build_database(parts, None, repeats=cfg.repeats, noise_sd=sd,
                            seed=(DESIGN_TAG, cfg.design_seed, j), outputs=outputs)
        try:
            models.append(invert_model(build_model(db, parts)))
        except InversionError as exc:
            log.warning("%s: inversion failed: %s", noisy_name(j), exc)
            models.append(exc)
    return models


@dataclass
class ResultRow:
    oven_mode: str
    controller: str
    variant: str
    mu_e: float
    sigma_e: float
    e1: float
    outlier: bool = False


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    rows: list[ResultRow]
    runs: dict[tuple[str, str], TilcRun]
    kruskal: dict[str, KwResult | None]
    failures: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def row(self, controller: str, mode: str) -> ResultRow:
        for r in self.rows:
            if r.controller == controller and r.oven_mode == mode:
                return r
        raise KeyError((controller, mode))


def _make_controllers(cfg, inverse, noisy, G, g0) -> dict[str, TilcController]:
    table = FilterRuleTable(consequents=tuple(cfg.consequents))
    lo, hi = cfg.u_min, cfg.u_max
    ctrls: dict[str, TilcController] = {}
    for j, model in enumerate(noisy, start=1):
        if isinstance(model, InverseModel):
            ctrls[noisy_name(j)] = FuzzyTilc(model, cfg.y_d, lo, hi, cfg.k_n, cfg.k_d, table)
    if cfg.ideal:
        ctrls[IDEAL] = FuzzyTilc(inverse, cfg.y_d, lo, hi, cfg.k_n, cfg.k_d, table)
    if cfg.crisp:
        ctrls[CRISP] = CrispTilc(G, g0, cfg.y_d, lo, hi, cfg.alpha, u_first=np.full(6, cfg.crisp_u_first))
    return ctrls


def run_loop(ctrls: dict[str, TilcController], oven: Oven, y_d, cycles: int, noise_sd: float,
             runtime_seed: int, drift: bool, mode: str = "") -> dict[str, TilcRun]:
    """Close the loop for several controllers on one oven, batched per cycle."""
    names = list(ctrls)
    y_d = np.asarray(y_d, dtype=float)
    runs = {n: TilcRun(ctrls[n].variant, n, {"oven_mode": mode}) for n in names}
    y_prev: dict[str, np.ndarray | None] = {n: None for n in names}
    for k in range(1, cycles + 1):
        U = np.array([ctrls[n].next_input(y_prev[n]) for n in names])
        Y = oven.terminal_outputs(U, ambient_drift(k, drift))
        if noise_sd > 0:
            Y = Y + noise_sd * gaussian_block(runtime_seed, k, Y.shape[-1])
        for i, n in enumerate(names):
            runs[n].append(ctrls[n].sp, U[i], Y[i], y_d)
            y_prev[n] = Y[i]
    return runs


def _flag_outliers(rows: list[ResultRow]) -> None:
    fuzzy = [r for r in rows if r.variant == "fuzzy"]
    if len(fuzzy) < 4:
        return
    q1, q3 = np.percentile([r.mu_e for r in fuzzy], [25, 75])
    limit = q3 + 1.5 * (q3 - q1)
    for r in fuzzy:
        r.outlier = bool(r.mu_e > limit)


def run_scenario(cfg: ScenarioConfig, *, noisy: list | None = None,
                 ideal: tuple[ExperimentDatabase, InverseModel] | None = None) -> ScenarioResult:
    """Run every controller of ``cfg`` on every configured oven mode."""
    db, inverse = build_ideal(cfg) if ideal is None else ideal
    notes = []
    for k, (y, part) in enumerate(zip(cfg.y_d, inverse.model.partitions), start=1):
        if not part.u_min <= y <= part.u_max:
            msg = f"target y_d[{k}] = {y} outside the model output range [{part.u_min:.3f}, {part.u_max:.3f}]"
            warnings.warn(msg, InfeasibleTargetWarning, stacklevel=2)
            notes.append(msg)
    if noisy is None:
        noisy = build_noisy_controllers(cfg)
    failures = {noisy_name(j): str(m) for j, m in enumerate(noisy, start=1) if not isinstance(m, InverseModel)}
    G, g0 = fit_affine(db)
    rows: list[ResultRow] = []
    runs: dict[tuple[str, str], TilcRun] = {}
    kw: dict[str, KwResult | None] = {}
    first, last = cfg.window
    for mode in cfg.modes:
        ctrls = _make_controllers(cfg, inverse, noisy, G, g0)
        mode_runs = run_loop(ctrls, Oven(cfg.oven_params(mode)), cfg.y_d, cfg.cycles,
                             cfg.noise_sd, cfg.runtime_seed, cfg.drift, mode)
        mode_rows = []
        for name, run in mode_runs.items():
            win = run.window(first, last)
            sd = float(win.std(ddof=1)) if win.size > 1 else 0.0
            mode_rows.append(ResultRow(mode, name, run.variant, float(win.mean()) if win.size else float("nan"),
                                       sd, float(run.errors[0])))
            runs[(name, mode)] = run
        _flag_outliers(mode_rows)
        rows.extend(mode_rows)
        samples = [mode_runs[n].window(first, last) for n in mode_runs if mode_runs[n].variant == "fuzzy"]
        kw[mode] = kruskal_wallis(samples) if len(samples) >= 2 and all(s.size for s in samples) else None
    return ScenarioResult(cfg, rows, runs, kw, failures, notes)


def _fmt(x: float) -> str:
    return repr(float(x))


def _seed_policy(cfg: ScenarioConfig) -> dict:
    return {
        "design": {"entropy": [DESIGN_TAG, cfg.design_seed, "j", "i_1..i_m"],
                   "note": "noisy design j, experiment multi-index i; averaged over repeats"},
        "runtime": {"entropy": [cfg.runtime_seed, "k"],
                    "note": "one measurement-noise vector per cycle k, shared by every controller and oven mode"},
    }


def export_results(result: ScenarioResult, out_dir: str | Path) -> Path:
    """Write ``results.csv``, ``boxplot.csv``, ``runs/*.csv`` and ``summary.json``."""
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["oven_mode", "controller", "variant", "mu_e", "sigma_e", "e1", "outlier"])
        for r in result.rows:
            w.writerow([r.oven_mode, r.controller, r.variant, _fmt(r.mu_e), _fmt(r.sigma_e), _fmt(r.e1),
                        int(r.outlier)])
    first, last = result.config.window
    with open(out / "boxplot.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["oven_mode", "controller", "k", "err_inf"])
        for (name, mode), run in result.runs.items():
            if run.variant != "fuzzy":
                continue
            for k, e in enumerate(run.window(first, last), start=first):
                w.writerow([mode, name, k, _fmt(e)])
    for (name, mode), run in result.runs.items():
        run.to_csv(out / "runs" / f"{name}_{mode}.csv")
    summary = {
        "config": result.config.to_dict(),
        "seed_policy": _seed_policy(result.config),
        "oven_params": {mode: result.config.oven_params(mode).to_dict() for mode in result.config.modes},
        "error_markers": list(ERROR_MARKERS),
        "window": list(result.config.window),
        "kruskal_wallis": {
            mode: None if r is None else {"H": r.H, "groups": r.groups, "n": r.n_total,
                                          "threshold": CHI2_THRESHOLD_31_GROUPS, "rejects": r.rejects()}
            for mode, r in result.kruskal.items()
        },
        "inversion_failures": result.failures,
        "outliers": sorted(f"{r.controller}_{r.oven_mode}" for r in result.rows if r.outlier),
        "warnings": result.warnings,
    }
    with open(out / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


@dataclass
class SweepResult:
    levels: list[float]
    results: list[ScenarioResult]

    def mu_table(self) -> dict[tuple[str, str], list[float]]:
        """``(controller, mode) -> [mu_e at each level]``."""
        table: dict[tuple[str, str], list[float]] = {}
        for res in self.results:
            for r in res.rows:
                table.setdefault((r.controller, r.oven_mode), []).append(r.mu_e)
        return table


def run_sweep(cfg: ScenarioConfig, levels=None, models: dict | None = None) -> SweepResult:
    """Repeat the scenario at each noise level (design and runtime noise both follow it).

    ``models`` optionally caches the noisy inverse models per design noise
    level; missing entries are built and stored so that sweeps differing only
    in the runtime settings can share them.
    """
    levels = list(cfg.noise_levels if levels is None else levels)
    ideal = build_ideal(cfg)
    models = {} if models is None else models
    out = []
    for sd in levels:
        c = replace(cfg, noise_sd=float(sd), noise_levels=None)
        log.info("noise level %s", sd)
        key = c.design_sd()
        if key not in models:
            models[key] = build_noisy_controllers(c)
        out.append(run_scenario(c, ideal=ideal, noisy=models[key]))
    return SweepResult([float(s) for s in levels], out)


def export_sweep(sweep: SweepResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for sd, res in zip(sweep.levels, sweep.results):
        export_results(res, out / f"sigma_{sd:g}")
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["noise_sd", "oven_mode", "controller", "variant", "mu_e", "sigma_e", "e1", "outlier"])
        for sd, res in zip(sweep.levels, sweep.results):
            for r in res.rows:
                w.writerow([_fmt(sd), r.oven_mode, r.controller, r.variant, _fmt(r.mu_e), _fmt(r.sigma_e),
                            _fmt(r.e1), int(r.outlier)])
    return out


def run_case(cfg: ScenarioConfig, out_dir: str | Path | None = None):
    """Run a single scenario or, when ``noise_levels`` is set, a noise sweep."""
    if cfg.noise_levels:
        res = run_sweep(cfg)
        if out_dir is not None:
            export_sweep(res, out_dir)
        return res
    res = run_scenario(cfg)
    if out_dir is not None:
        export_results(res, out_dir)
    return res
