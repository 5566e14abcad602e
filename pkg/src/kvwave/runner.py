"""Scenario pipelines and artifact writing.

Artifacts are staged in a sibling temporary directory and moved into place
only when the whole pipeline succeeds, so a failed run leaves nothing behind.
Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 violated
modelling assumption.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import platform
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import scipy

from . import __version__
from .config import ScenarioConfig
from .constitutive import make_feedback, make_nonlinearity
from .decay_calculus import build_calculus, check_energy_recursion, construct_h, solve_envelope
from .energy import balance_residual
from .errors import (
    AssumptionViolated,
    ConfigInvalid,
    DampingAbsent,
    GeometryError,
    NonFiniteState,
    SolverDiverged,
    TrajectoryTooShort,
)
from .geometry import build_damping, build_grid, build_regions
from .observability import dirichlet_modes, estimate_constant, initial_ensemble, report_rows
from .state import SimState
from .stepper import StepParams, WaveModel, default_dt, simulate

__all__ = ["RunResult", "Scenario", "build_scenario", "run", "exit_code_for",
           "TIMESERIES_COLUMNS", "ENVELOPE_COLUMNS", "OBSERVABILITY_COLUMNS", "OUTPUT_ENV"]

log = logging.getLogger(__name__)

OUTPUT_ENV = "KVWAVE_OUTPUT"
TIMESERIES_COLUMNS = ("t", "E_total", "E_kin", "E_pot", "E_F", "D_kv_cum", "D_fric_cum",
                      "balance_residual")
ENVELOPE_COLUMNS = ("t", "S")
OBSERVABILITY_COLUMNS = ("sample_id", "E0", "functional", "ratio")
SWEEP_COLUMNS = ("name", "gcc_satisfied", "c_emp", "status")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConfigInvalid, GeometryError, TrajectoryTooShort)):
        return 2
    if isinstance(exc, (SolverDiverged, NonFiniteState)):
        return 3
    if isinstance(exc, (AssumptionViolated, DampingAbsent)):
        return 4
    raise exc


@dataclass
class Scenario:
    model: WaveModel
    params: StepParams
    initial: SimState


@dataclass
class RunResult:
    exit_code: int
    output_dir: Optional[Path]
    artifacts: List[str] = field(default_factory=list)
    error: Optional[str] = None
    constants: Dict[str, float] = field(default_factory=dict)


def _build_model(cfg: ScenarioConfig, A_spec=None) -> WaveModel:
    d, rg, dm, lw = cfg["domain"], cfg["regions"], cfg["damping"], cfg["laws"]
    grid = build_grid(d["dim"], d["extents"], d["counts"])
    masks = build_regions(grid, rg["A"] if A_spec is None else A_spec, rg["eps"])
    profile = build_damping(grid, masks, dm["a_shape"], dm["eta_shape"], a_max=dm["a_max"],
                            d_max=dm["d_max"], eta_0=dm["eta_0"], eta_value=dm["eta_value"],
                            eta_window=dm["eta_window"])
    f = make_nonlinearity(lw["f"], p=lw["p"], clip=lw["clip"],
                          ambient_dim=lw["ambient_dim"] or grid.dim)
    g = make_feedback(lw["g"], n=grid.dim, beta=lw["beta"])
    return WaveModel(grid, profile, f, g)


def _initial_state(cfg: ScenarioConfig, grid) -> SimState:
    ini = cfg["initial"]
    if ini["preset"] == "zero":
        zero = np.zeros(grid.n_nodes)
        return SimState(0.0, zero, zero)
    if ini["preset"] == "ensemble":
        return initial_ensemble(grid, 1, ini["radius_R"], ini["seed"])[0]
    n = max(len(ini["u_modes"]), len(ini["v_modes"]), 1)
    modes, _ = dirichlet_modes(grid, n)
    u = np.asarray(ini["u_modes"] + [0.0] * (n - len(ini["u_modes"]))) @ modes
    v = np.asarray(ini["v_modes"] + [0.0] * (n - len(ini["v_modes"]))) @ modes
    return SimState(0.0, u, v)


def build_scenario(cfg: ScenarioConfig, A_spec=None) -> Scenario:
    model = _build_model(cfg, A_spec)
    tm = cfg["time"]
    params = StepParams(tm["dt"] or default_dt(model.grid), tm["theta"], tm["solver_tol"],
                        tm["max_iters"], tm["solver"])
    return Scenario(model, params, _initial_state(cfg, model.grid))


def _decay_T(cfg: ScenarioConfig) -> float:
    return cfg["decay"]["T"] or cfg["time"]["T_sample"] or 1.0


def _observability(cfg, sc: Scenario, T):
    ob = cfg["observability"]
    return estimate_constant(sc.model, sc.params, ob["n_samples"], T, ob["radius_R"], ob["seed"])


def _constants(model: WaveModel, extra=None) -> dict:
    out = {"m": model.g.m, "M": model.g.M, "a_sup": model.profile.a_sup,
           "eta_0": model.profile.eta_0, "gcc_satisfied": model.profile.gcc_satisfied,
           "omega_measure": model.grid.volume}
    out.update(extra or {})
    return out


def _pipeline(cfg: ScenarioConfig, stage: Path) -> dict:
    """Run the configured task, writing artifacts into ``stage``; returns manifest extras."""
    if cfg.task == "sweep":
        return _sweep(cfg, stage)
    sc = build_scenario(cfg)
    model = sc.model
    extras: dict = {"constants": _constants(model)}

    if cfg.task == "observability":
        rep = _observability(cfg, sc, cfg["observability"]["T"])
        _write_csv(stage / "observability.csv", OBSERVABILITY_COLUMNS, report_rows(rep))
        extras["constants"]["C_obs"] = rep.c_emp
        extras["observability"] = {"T": rep.T, "c_emp": rep.c_emp, "n_samples": len(rep.samples)}
        return extras

    traj = simulate(model, sc.initial, sc.params, cfg["time"]["T_final"],
                    stride=cfg["output"]["stride"])
    bal = balance_residual(traj)
    _write_csv(stage / "timeseries.csv", TIMESERIES_COLUMNS,
               zip(traj.times, traj.e_series, traj.kinetic, traj.potential, traj.potential_F,
                   traj.d_kv_cum, traj.d_fric_cum, bal.series))
    extras["balance"] = {"max": bal.max, "normalized": bal.normalized}
    extras["time"] = {"dt_effective": traj.dt, "n_samples": len(traj)}

    if cfg.task == "decay":
        T = _decay_T(cfg)
        C_obs = cfg["decay"]["C_obs"]
        if C_obs is None:
            rep = _observability(cfg, sc, T)
            C_obs = rep.c_emp
            _write_csv(stage / "observability.csv", OBSERVABILITY_COLUMNS, report_rows(rep))
        hs = [construct_h(comp.func) for comp in model.g.components]
        calc = build_calculus(hs, model.grid.volume, T, C_obs, model.g.m, model.g.M,
                              model.profile.a_sup, r_form=cfg["decay"]["r_form"])
        # S(t / T) at each sample time, so the first row equals E_total(0)
        period = traj.dt * traj.stride
        sub = max(1, int(np.ceil(cfg["decay"]["steps_per_unit"] * period / T)))
        n = len(traj) - 1
        env = solve_envelope(calc, traj.e_series[0], traj.t_final / T, max(n, 1) * sub)
        S = env.S[::sub][: len(traj)]
        _write_csv(stage / "envelope.csv", ENVELOPE_COLUMNS, zip(traj.times, S))
        extras["constants"].update(calc.constants())
        try:
            rec = check_energy_recursion(traj, calc, T)
        except (TrajectoryTooShort, ValueError) as exc:
            extras["recursion"] = {"checked": False, "reason": str(exc)}
        else:
            extras["recursion"] = {
                "checked": True, "holds": rec.recursion_holds,
                "first_failure": rec.first_failure,
                "min_margin": float(np.min(rec.margins)),
                "envelope_dominated": rec.envelope_dominated,
                "worst_envelope_ratio": rec.worst_envelope_ratio,
            }
    return extras


def _sweep(cfg: ScenarioConfig, stage: Path) -> dict:
    sw = cfg["sweep"]
    names = sw["names"] or [f"geometry-{i}" for i in range(len(sw["geometries"]))]
    T = cfg["observability"]["T"]
    rows, per = [], {}
    for name, spec in zip(names, sw["geometries"]):
        sc = build_scenario(cfg, A_spec=spec)
        sub = stage / name
        sub.mkdir()
        try:
            rep = _observability(cfg, sc, T)
        except DampingAbsent:
            rows.append((name, sc.model.profile.gcc_satisfied, float("inf"), "DampingAbsent"))
        else:
            _write_csv(sub / "observability.csv", OBSERVABILITY_COLUMNS, report_rows(rep))
            rows.append((name, rep.gcc_satisfied, rep.c_emp, "ok"))
        per[name] = _constants(sc.model)
    _write_csv(stage / "sweep.csv", SWEEP_COLUMNS, rows)
    return {"constants": per}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def resolve_output_dir(cfg: ScenarioConfig, override=None) -> Path:
    return Path(override or os.environ.get(OUTPUT_ENV) or cfg["output"]["directory"])


def run(cfg: ScenarioConfig, output_dir=None) -> RunResult:
    """Execute ``cfg``; artifacts land in ``output_dir`` (or the env/config default)."""
    out = resolve_output_dir(cfg, output_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}-stage-", dir=out.parent))
    t0 = time.perf_counter()
    try:
        extras = _pipeline(cfg, stage)
    except Exception as exc:  # mapped to an exit code or re-raised
        shutil.rmtree(stage, ignore_errors=True)
        code = exit_code_for(exc)
        log.error("run failed (exit %d): %s", code, exc)
        return RunResult(code, None, [], f"{type(exc).__name__}: {exc}")

    manifest = {
        "config": cfg.to_dict(),
        "task": cfg.task,
        **extras,
        "versions": {"kvwave": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "platform": sys.platform,
        "wall_time_s": time.perf_counter() - t0,
        "exit_code": 0,
    }
    with open(stage / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")

    out.mkdir(parents=True, exist_ok=True)
    artifacts = sorted(p.name for p in stage.iterdir())
    for name in artifacts:
        target = out / name
        if target.is_dir():
            shutil.rmtree(target)
        os.replace(stage / name, target)
    stage.rmdir()
    return RunResult(0, out, artifacts, None, extras.get("constants", {}))
