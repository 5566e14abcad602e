"""Scenario configuration: a flat ``section.key = value`` format.

::

    # 1D, damping outside [0.3, 0.7]
    task = simulate
    domain.counts = [199]
    regions.A = [0.3, 0.7]
    laws.g = cubic-near-zero

Values are read as JSON when possible (numbers, lists, ``true``, ``null``)
and as bare strings otherwise. A JSON object ``{"section": {"key": value}}``
is accepted as an alias. Every violation is collected before
:class:`ConfigInvalid` is raised.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

from .constitutive import F_KINDS, G_KINDS
from .errors import ConfigInvalid

__all__ = ["ScenarioConfig", "parse_config", "load_config", "DEFAULTS", "TASKS"]

TASKS = ("simulate", "decay", "observability", "sweep")
A_SHAPES = ("bump", "constant", "zero")
ETA_SHAPES = ("collar", "constant", "zero", "window")
PRESETS = ("modes", "ensemble", "zero")
SOLVERS = ("newton", "fixed-point")
R_FORMS = ("I+z", "I-z")

_REQUIRED = object()

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "domain": {"dim": 1, "extents": None, "counts": None},
    "regions": {"A": "empty", "eps": 0.05},
    "damping": {"a_shape": "bump", "a_max": 1.0, "d_max": None, "eta_shape": "collar",
                "eta_0": 0.1, "eta_value": None, "eta_window": None},
    "laws": {"f": "zero", "p": 3.0, "clip": 1.0, "g": "linear", "beta": 0.5,
             "ambient_dim": None},
    "time": {"dt": None, "theta": 0.5, "T_final": 10.0, "T_sample": None,
             "solver_tol": 1e-10, "max_iters": 50, "solver": "newton"},
    "initial": {"preset": "modes", "u_modes": [1.0], "v_modes": [], "seed": 0,
                "radius_R": 1.0},
    "output": {"directory": "kvwave-out", "stride": 1},
    "observability": {"n_samples": 16, "T": 2.0, "radius_R": 1.0, "seed": 0},
    "decay": {"T": None, "C_obs": None, "r_form": "I+z", "steps_per_unit": 32},
    "sweep": {"geometries": [], "names": None},
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario; ``sections`` holds every key with defaults filled."""

    task: str
    sections: Dict[str, Dict[str, Any]] = field(repr=False)

    def __getitem__(self, section: str) -> Dict[str, Any]:
        return self.sections[section]

    def get(self, path: str):
        section, key = path.split(".", 1)
        return self.sections[section][key]

    def to_dict(self) -> dict:
        return {"task": self.task, **copy.deepcopy(self.sections)}

    def with_overrides(self, **paths) -> "ScenarioConfig":
        """New config with ``section__key=value`` overrides, revalidated."""
        raw = self.to_dict()
        for name, value in paths.items():
            section, key = name.split("__", 1)
            raw[section][key] = value
        return _validate(raw)


def _coerce(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except ValueError:
        return text


def _read_flat(text: str) -> Tuple[dict, List[tuple]]:
    raw: Dict[str, Any] = {}
    errors = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            errors.append((f"line {lineno}", f"expected 'section.key = value', got {stripped!r}"))
            continue
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key == "task":
            target, name = raw, "task"
        elif key.count(".") == 1 and all(key.split(".")):
            section, name = key.split(".")
            target = raw.setdefault(section, {})
            if not isinstance(target, dict):
                errors.append((key, "section used as a plain key"))
                continue
        else:
            errors.append((key or f"line {lineno}", "keys must be 'task' or 'section.key'"))
            continue
        if name in target:
            errors.append((key, f"duplicate key (line {lineno})"))
            continue
        target[name] = _coerce(value)
    return raw, errors


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _check_A(value, dim, key, errors):
    if value is None or value in ("empty", "none", "all"):
        return
    if dim == 1 and isinstance(value, list) and len(value) == 2 and all(map(_is_num, value)):
        return
    if (isinstance(value, list) and len(value) == dim
            and all(isinstance(r, list) and len(r) == 2 and all(map(_is_num, r)) for r in value)):
        return
    errors.append((key, f"expected 'empty', 'all' or a box ([lo, hi] per axis), got {value!r}"))


def _validate(raw: dict, errors=None) -> ScenarioConfig:
    errors = list(errors or [])
    if not isinstance(raw, dict):
        raise ConfigInvalid([("", "configuration must be a mapping")])
    task = raw.get("task", "simulate")
    if task not in TASKS:
        errors.append(("task", f"unknown task {task!r}; expected one of {', '.join(TASKS)}"))
    sections = {}
    for name, values in raw.items():
        if name == "task":
            continue
        if name not in DEFAULTS:
            errors.append((name, f"unknown section; expected one of {', '.join(DEFAULTS)}"))
            continue
        if not isinstance(values, dict):
            errors.append((name, "section must hold key/value pairs"))
            continue
        for key in values:
            if key not in DEFAULTS[name]:
                errors.append((f"{name}.{key}", f"unknown key; section '{name}' accepts "
                               f"{', '.join(DEFAULTS[name])}"))
    for name, defaults in DEFAULTS.items():
        given = raw.get(name, {}) if isinstance(raw.get(name, {}), dict) else {}
        sections[name] = {k: copy.deepcopy(given.get(k, v)) for k, v in defaults.items()}

    def need(cond, key, reason):
        if not cond:
            errors.append((key, reason))
        return cond

    def positive(sec, key, integer=False, allow_none=False):
        val = sections[sec][key]
        if val is None and allow_none:
            return
        ok = _is_int(val) if integer else _is_num(val)
        need(ok and val > 0, f"{sec}.{key}",
             f"must be a positive {'integer' if integer else 'number'}, got {val!r}")

    def choice(sec, key, options, catalog):
        val = sections[sec][key]
        need(val in options, f"{sec}.{key}",
             f"unknown {catalog} {val!r}; catalog: {', '.join(options)}")

    d = sections["domain"]
    dim = d["dim"]
    if need(dim in (1, 2) and _is_int(dim), "domain.dim", f"must be 1 or 2, got {dim!r}"):
        if d["extents"] is None:
            d["extents"] = [1.0] * dim
        if d["counts"] is None:
            d["counts"] = [199] if dim == 1 else [39, 39]
        for key, pred, kind in (("extents", lambda x: _is_num(x) and x > 0, "positive numbers"),
                                ("counts", lambda x: _is_int(x) and x >= 3, "integers >= 3")):
            val = d[key]
            if need(isinstance(val, list) and len(val) == dim, f"domain.{key}",
                    f"must be a list of {dim} {kind}, got {val!r}"):
                need(all(map(pred, val)), f"domain.{key}", f"entries must be {kind}, got {val!r}")
        _check_A(sections["regions"]["A"], dim, "regions.A", errors)
    positive("regions", "eps")

    choice("damping", "a_shape", A_SHAPES, "a_shape")
    choice("damping", "eta_shape", ETA_SHAPES, "eta_shape")
    for key in ("a_max", "eta_0"):
        val = sections["damping"][key]
        need(_is_num(val) and val >= 0, f"damping.{key}", f"must be a number >= 0, got {val!r}")
    positive("damping", "d_max", allow_none=True)
    val = sections["damping"]["eta_value"]
    need(val is None or (_is_num(val) and val >= 0), "damping.eta_value",
         f"must be null or a number >= 0, got {val!r}")
    if sections["damping"]["eta_shape"] == "window":
        need(isinstance(sections["damping"]["eta_window"], list), "damping.eta_window",
             "required as a box when eta_shape = window")

    lw = sections["laws"]
    choice("laws", "f", F_KINDS, "source law")
    g = lw["g"]
    g_list = g if isinstance(g, list) else [g]
    if need(len(g_list) >= 1, "laws.g", "needs at least one component"):
        for i, kind in enumerate(g_list):
            need(kind in G_KINDS, "laws.g" if not isinstance(g, list) else f"laws.g[{i}]",
                 f"unknown feedback law {kind!r}; catalog: {', '.join(G_KINDS)}")
        if isinstance(g, list) and _is_int(dim):
            need(len(g) == dim, "laws.g", f"needs {dim} components, got {len(g)}")
    positive("laws", "p")
    positive("laws", "clip")
    val = lw["beta"]
    need(_is_num(val) and 0 <= val < 1, "laws.beta", f"must lie in [0, 1), got {val!r}")
    positive("laws", "ambient_dim", integer=True, allow_none=True)

    tm = sections["time"]
    positive("time", "dt", allow_none=True)
    val = tm["theta"]
    need(_is_num(val) and 0.5 <= val <= 1, "time.theta", f"must lie in [0.5, 1], got {val!r}")
    positive("time", "T_final")
    positive("time", "T_sample", allow_none=True)
    positive("time", "solver_tol")
    positive("time", "max_iters", integer=True)
    choice("time", "solver", SOLVERS, "solver")

    ini = sections["initial"]
    choice("initial", "preset", PRESETS, "initial preset")
    for key in ("u_modes", "v_modes"):
        val = ini[key]
        need(isinstance(val, list) and all(map(_is_num, val)), f"initial.{key}",
             f"must be a list of numbers, got {val!r}")
    need(_is_int(ini["seed"]) and ini["seed"] >= 0, "initial.seed", "must be an integer >= 0")
    positive("initial", "radius_R")

    out = sections["output"]
    need(isinstance(out["directory"], str) and out["directory"], "output.directory",
         "must be a nonempty path")
    positive("output", "stride", integer=True)

    positive("observability", "n_samples", integer=True)
    positive("observability", "T")
    positive("observability", "radius_R")
    ob_seed = sections["observability"]["seed"]
    need(_is_int(ob_seed) and ob_seed >= 0, "observability.seed", "must be an integer >= 0")

    positive("decay", "T", allow_none=True)
    positive("decay", "C_obs", allow_none=True)
    choice("decay", "r_form", R_FORMS, "r_form")
    positive("decay", "steps_per_unit", integer=True)

    sw = sections["sweep"]
    if need(isinstance(sw["geometries"], list), "sweep.geometries", "must be a list of region specs"):
        for i, spec in enumerate(sw["geometries"]):
            _check_A(spec, dim if _is_int(dim) else 1, f"sweep.geometries[{i}]", errors)
        if task == "sweep":
            need(len(sw["geometries"]) > 0, "sweep.geometries", "sweep task needs geometries")
    names = sw["names"]
    if names is not None and isinstance(sw["geometries"], list):
        need(isinstance(names, list) and len(names) == len(sw["geometries"])
             and all(isinstance(n, str) for n in names), "sweep.names",
             "must list one string per geometry")

    if errors:
        raise ConfigInvalid(errors)
    return ScenarioConfig(task, sections)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate; a leading ``{`` selects the JSON alias."""
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except ValueError as exc:
            raise ConfigInvalid([("", f"invalid JSON: {exc}")]) from None
        return _validate(raw)
    raw, errors = _read_flat(text)
    return _validate(raw, errors)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
