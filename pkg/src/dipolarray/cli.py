"""Scenario-driven command line: config parsing, dispatch, persistence.

Scenarios come from one YAML (or JSON) file validated against the
schema published in docs/config-schema.json. Outputs are plain files:
CSV for grids and spectra, JSON for scalar summaries, JSON lines for
optimization logs and sweep checkpoints. Summaries are byte-stable for
a fixed config and seed, and every written file records the config
hash and the library version.

Exit codes: 0 success, 2 configuration rejected (nothing written),
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml
from jsonschema import Draft202012Validator

from . import __version__
from .errors import ConfigError, DipolarrayError, NumericalError
from .greenfn import build_interaction_matrix, collective_modes
from .idealized import (
    channel_rates,
    classify_eigenstructure,
    critical_lattice_constants,
    interlayer_matrix,
)
from .lattice import (
    VALIDITY_WINDOW,
    generate_patch,
    hex_atom_count,
    make_lattice,
    rings_for_count,
    stack_center,
    stack_layers,
)
from .memory import k_matrix, max_retrieval
from .modes import (
    gaussian_mode,
    plane_wave_mode,
    sample_mode,
    transverse_power,
    two_way_mode,
)
from .optimize import fit_power_law, optimize_memory, optimize_reflectance, scaling_study
from .response import max_reflectance, reflectance_spectrum

OUT_ENV = "DIPOLARRAY_OUT"
CSV_FMT = "%.12g"
GRID_KEYS = ("a", "d", "w", "phi")

_AXIS = {
    "type": "object",
    "additionalProperties": False,
    "required": ["lo", "hi", "points"],
    "properties": {
        "lo": {"type": "number"},
        "hi": {"type": "number"},
        "points": {"type": "integer", "minimum": 1},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dipolarray scenario",
    "description": (
        "One simulation scenario. Lengths are in units of the transition "
        "wavelength, rates and detunings in units of the single-atom decay "
        "rate. Lattice constants outside the single-shell validity window "
        "(square: 1..sqrt(2), triangular: 2/sqrt(3)..2) require "
        "override_validity for idealized-model and optimizer tasks; finite "
        "sweeps and spectra accept any positive value."
    ),
    "type": "object",
    "additionalProperties": False,
    "required": ["task"],
    "properties": {
        "task": {
            "enum": ["reflect", "memory", "idealized", "optimize", "scaling", "sweep"]
        },
        "lattice": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["triangular", "square"]},
                "a": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "rings": {"type": "integer", "minimum": 0},
        "n_per_layer": {"type": "integer", "minimum": 1},
        "layers": {"type": "integer", "minimum": 1},
        "spacing": {"type": "number", "exclusiveMinimum": 0},
        "shifts": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "number"},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "mode": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["gaussian", "two_way", "plane_wave"]},
                "w": {
                    "anyOf": [
                        {"type": "number", "exclusiveMinimum": 0},
                        {"const": "auto"},
                    ]
                },
                "phi": {"type": "number"},
                "focus": {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 3,
                    "maxItems": 3,
                },
                "direction": {"enum": [1, -1]},
            },
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lo": {"type": "number"},
                "hi": {"type": "number"},
                "points": {"type": "integer", "minimum": 2},
                "xtol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "minProperties": 1,
            "maxProperties": 2,
            "properties": {k: _AXIS for k in GRID_KEYS},
        },
        "objective": {"enum": ["reflectance", "memory", "idealized"]},
        "n_list": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "integer", "minimum": 1},
        },
        "x0": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "number"} for k in GRID_KEYS},
        },
        "bounds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                k: {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 2,
                    "maxItems": 2,
                }
                for k in GRID_KEYS
            },
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_evals": {"type": "integer", "minimum": 1},
                "restarts": {"type": "integer", "minimum": 0},
            },
        },
        "ell": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "override_validity": {"type": "boolean"},
    },
}


# ---------------------------------------------------------------- config


def load_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text()
    try:
        if p.suffix.lower() == ".json":
            cfg = json.loads(text)
        else:
            cfg = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"config does not parse: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    return cfg


def validate_config(cfg: dict) -> dict:
    """Schema check plus task-specific semantic checks.

    Returns the scenario with defaults filled in. Raises ConfigError on
    the first violation; nothing is written to disk before this passes.
    """
    validator = Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(x) for x in err.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {err.message}")
    sc = dict(cfg)
    sc.setdefault("layers", 1)
    sc.setdefault("seed", 0)
    sc.setdefault("override_validity", False)
    _check_semantics(sc)
    return sc


def _window_check(sc, a, context):
    if sc["override_validity"]:
        return
    kind = sc["lattice"]["kind"]
    lo, hi = VALIDITY_WINDOW[kind]
    if not (lo <= a <= hi):
        raise ConfigError(
            f"{context}: a = {a:.6g} outside the {kind} single-shell window "
            f"({lo:.6g}, {hi:.6g}); set override_validity to proceed"
        )


def _check_semantics(sc: dict) -> None:
    task = sc["task"]

    def require(key):
        if key not in sc:
            raise ConfigError(f"task {task!r} requires {key!r}")

    if task in ("reflect", "memory", "idealized", "sweep", "optimize", "scaling"):
        require("lattice")

    if task in ("reflect", "memory"):
        if "a" not in sc["lattice"]:
            raise ConfigError(f"task {task!r} requires lattice.a")
        _patch_size(sc)
        if sc["layers"] > 1:
            require("spacing")
        _window_check(sc, sc["lattice"]["a"], f"task {task}")

    elif task == "idealized":
        if "a" not in sc["lattice"]:
            raise ConfigError("task 'idealized' requires lattice.a")
        _window_check(sc, sc["lattice"]["a"], "idealized model")

    elif task in ("optimize", "scaling"):
        require("objective")
        if sc["objective"] == "idealized":
            raise ConfigError(f"task {task!r} optimizes reflectance or memory only")
        if task == "optimize":
            _patch_size(sc)
        else:
            require("n_list")
            ns = sc["n_list"]
            if any(b <= a for a, b in zip(ns, ns[1:])):
                raise ConfigError("n_list must be strictly increasing")
        for key, pair in (sc.get("bounds") or {}).items():
            if pair[0] >= pair[1]:
                raise ConfigError(f"bounds for {key!r} must be ordered")
            if key == "a":
                _window_check(sc, pair[0], "optimizer bounds")
                _window_check(sc, pair[1], "optimizer bounds")
        for key, val in (sc.get("x0") or {}).items():
            if key == "a":
                _window_check(sc, val, "optimizer start")

    elif task == "sweep":
        require("objective")
        require("grid")
        grid = sc["grid"]
        for key, axis in grid.items():
            if axis["points"] > 1 and axis["lo"] >= axis["hi"]:
                raise ConfigError(f"grid axis {key!r} must have lo < hi")
        if sc["objective"] == "idealized":
            if set(grid) - {"a"}:
                raise ConfigError("idealized sweeps support only the 'a' axis")
            axis = grid["a"]
            _window_check(sc, axis["lo"], "idealized sweep")
            _window_check(sc, axis["hi"], "idealized sweep")
        else:
            _patch_size(sc)
            if "a" not in grid and "a" not in sc["lattice"]:
                raise ConfigError("sweep needs lattice.a or an 'a' axis")
            if sc["layers"] > 1 and "d" not in grid and "spacing" not in sc:
                raise ConfigError("multilayer sweep needs spacing or a 'd' axis")

    if "shifts" in sc and len(sc["shifts"]) != sc["layers"]:
        raise ConfigError("shifts must list one in-plane pair per layer")


def _patch_size(sc: dict) -> int:
    """Patch size argument from rings / n_per_layer, kind-aware."""
    kind = sc["lattice"]["kind"]
    has_rings = "rings" in sc
    has_n = "n_per_layer" in sc
    if has_rings == has_n:
        raise ConfigError("give exactly one of rings / n_per_layer")
    if has_rings:
        return sc["rings"]
    n = sc["n_per_layer"]
    if kind == "triangular":
        return rings_for_count(n)
    side = round(math.sqrt(n))
    if side * side != n:
        raise ConfigError(f"square patches need a square atom count, got {n}")
    return side


# ---------------------------------------------------------------- output


def scenario_hash(sc: dict, seed: int) -> str:
    effective = {k: v for k, v in sc.items() if k != "out"}
    effective["seed"] = seed
    canon = json.dumps(effective, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _envelope(sc: dict, seed: int) -> dict:
    return {
        "task": sc["task"],
        "version": __version__,
        "config_hash": scenario_hash(sc, seed),
        "seed": seed,
    }


def _json_text(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(_json_text(payload))


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return CSV_FMT % value
    return value


def _write_csv(path: Path, envelope: dict, header, rows) -> None:
    with path.open("w", newline="") as fh:
        fh.write(f"# config_hash={envelope['config_hash']}\n")
        fh.write(f"# version={envelope['version']}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# ------------------------------------------------------------- builders


def _geometry_for(sc: dict, a: float, d: float | None = None):
    lat = make_lattice(sc["lattice"]["kind"], a)
    patch = generate_patch(lat, _patch_size(sc))
    layers = sc["layers"]
    spacing = d if d is not None else sc.get("spacing", 0.0)
    return stack_layers(
        patch,
        layers,
        spacing=spacing if layers > 1 else 0.0,
        shifts=sc.get("shifts"),
        lattice=lat,
    )


def _mode_for(sc: dict, geometry, named: dict, default_kind: str):
    mcfg = sc.get("mode", {})
    kind = mcfg.get("kind", default_kind)
    focus = mcfg.get("focus")
    if focus is None:
        focus = (0.0, 0.0, stack_center(geometry))
    direction = mcfg.get("direction", 1)
    if kind == "plane_wave":
        return plane_wave_mode(direction=direction, focus=focus)
    w = named.get("w", mcfg.get("w", "auto"))
    if w == "auto":
        a = geometry.lattice.a
        w = math.sqrt(geometry.atoms_per_layer) * a / 3.0
    phi = named.get("phi", mcfg.get("phi", 0.0))
    if kind == "two_way":
        return two_way_mode(float(w), focus=focus, phi=phi)
    return gaussian_mode(float(w), focus=focus, direction=direction)


# ------------------------------------------------------------- commands


def cmd_reflect(sc, out_dir: Path, seed: int, workers, resume) -> int:
    geometry = _geometry_for(sc, sc["lattice"]["a"])
    mode = _mode_for(sc, geometry, {}, "gaussian")
    scan = dict(sc.get("scan", {}))
    grid = np.linspace(
        scan.get("lo", -10.0), scan.get("hi", 10.0), scan.get("points", 401)
    )
    spectrum = reflectance_spectrum(geometry, mode, grid, workers=workers)
    best = max_reflectance(geometry, mode, scan=scan or None)
    env = _envelope(sc, seed)
    _write_csv(
        out_dir / "reflect_spectrum.csv",
        env,
        ["delta", "re_r", "im_r", "reflectance"],
        zip(
            grid.tolist(),
            spectrum.r.real.tolist(),
            spectrum.r.imag.tolist(),
            spectrum.reflectance.tolist(),
        ),
    )
    summary = dict(env)
    summary.update(
        n_atoms=geometry.n_atoms,
        params=best.params,
        r_max=best.r_max,
        delta_star=best.delta_star,
        eps=best.eps,
    )
    _write_json(out_dir / "reflect_summary.json", summary)
    print(f"reflect: R_max = {best.r_max:.6f} at delta = {best.delta_star:.6f}")
    return 0


def cmd_memory(sc, out_dir: Path, seed: int, workers, resume) -> int:
    geometry = _geometry_for(sc, sc["lattice"]["a"])
    mode = _mode_for(sc, geometry, {}, "two_way")
    interaction = build_interaction_matrix(geometry)
    modes = collective_modes(interaction)
    kernel = k_matrix(modes, sample_mode(mode, geometry))
    best = max_retrieval(
        kernel,
        params={
            "n": geometry.atoms_per_layer,
            "m": geometry.layer_count,
            "a": geometry.lattice.a,
            "w": mode.waist,
            "phi": mode.phi,
        },
    )
    env = _envelope(sc, seed)
    s = best.spinwave
    _write_csv(
        out_dir / "memory_spinwave.csv",
        env,
        ["atom", "x", "y", "z", "re_s", "im_s", "weight"],
        (
            (
                i,
                float(geometry.positions[i, 0]),
                float(geometry.positions[i, 1]),
                float(geometry.positions[i, 2]),
                float(s[i].real),
                float(s[i].imag),
                float(abs(s[i]) ** 2),
            )
            for i in range(geometry.n_atoms)
        ),
    )
    summary = dict(env)
    summary.update(
        n_atoms=geometry.n_atoms,
        params=best.params,
        eta_max=best.eta_max,
        eps=best.eps,
    )
    _write_json(out_dir / "memory_summary.json", summary)
    print(f"memory: eta_max = {best.eta_max:.6f} (eps = {best.eps:.6f})")
    return 0


def cmd_idealized(sc, out_dir: Path, seed: int, workers, resume) -> int:
    kind = sc["lattice"]["kind"]
    lat = make_lattice(kind, sc["lattice"]["a"])
    rates = channel_rates(lat)
    env = _envelope(sc, seed)
    _write_csv(
        out_dir / "idealized_orders.csv",
        env,
        ["m", "n", "g_norm", "k_z", "propagating", "rate"],
        (
            (
                o.m,
                o.n,
                float(o.g_norm),
                float(o.k_z.real),
                bool(o.propagating),
                float(r),
            )
            for o, r in zip(rates.orders, rates.rates)
        ),
    )
    branching = rates.gamma_det / (rates.gamma_det + rates.gamma_diff)
    summary = dict(env)
    summary.update(
        gamma00=rates.gamma00,
        gamma_det=rates.gamma_det,
        gamma_diff=rates.gamma_diff,
        diffraction_ratio=rates.gamma_diff / rates.gamma00,
        branching=branching,
        r_ideal=branching**2,
    )

    ell = sc.get("ell")
    spacing = sc.get("spacing")
    if ell is None and spacing is not None:
        two_d = 2.0 * spacing
        if abs(two_d - round(two_d)) < 1e-9:
            ell = int(round(two_d))
    if ell is not None:
        summary["ell"] = ell
        summary["critical_points"] = [
            {"a_star": d.a_star, "q": d.q, "parity": d.parity}
            for d in critical_lattice_constants(kind, ell)
        ]

    if spacing is not None and sc["layers"] > 1:
        layer_matrix = interlayer_matrix(
            lat, sc["layers"], spacing, shifts=sc.get("shifts")
        )
        try:
            report = classify_eigenstructure(layer_matrix)
        except NumericalError:
            summary["critical"] = False
        else:
            summary["critical"] = True
            summary["rank"] = report.rank
            summary["states"] = [
                {
                    "gamma_det": st.gamma_det,
                    "gamma_diff": st.gamma_diff,
                    "total": st.total,
                    "dark": st.is_dark,
                    "vector": list(st.vector),
                }
                for st in report.states
            ]
            bright = max(report.states, key=lambda st: st.total)
            b = bright.gamma_det / (bright.gamma_det + bright.gamma_diff)
            summary["stack_r_ideal"] = b**2

    _write_json(out_dir / "idealized_summary.json", summary)
    print(
        f"idealized: gamma00 = {rates.gamma00:.6f}, "
        f"diffracted/specular = {rates.gamma_diff / rates.gamma00:.6f}"
    )
    return 0


def _optimizer_kwargs(sc: dict, seed: int) -> dict:
    opts = sc.get("optimizer", {})
    kwargs = {
        "kind": sc["lattice"]["kind"],
        "seed": seed,
        "x0": sc.get("x0"),
    }
    bounds = sc.get("bounds")
    if bounds:
        kwargs["bounds"] = {k: tuple(v) for k, v in bounds.items()}
    if "max_evals" in opts:
        kwargs["max_evals"] = opts["max_evals"]
    if "restarts" in opts:
        kwargs["restarts"] = opts["restarts"]
    return kwargs


def _n_per_layer(sc: dict) -> int:
    if "n_per_layer" in sc:
        return sc["n_per_layer"]
    if sc["lattice"]["kind"] == "triangular":
        return hex_atom_count(sc["rings"])
    return sc["rings"] ** 2


def cmd_optimize(sc, out_dir: Path, seed: int, workers, resume) -> int:
    runner = optimize_reflectance if sc["objective"] == "reflectance" else optimize_memory
    run = runner(_n_per_layer(sc), sc["layers"], **_optimizer_kwargs(sc, seed))
    env = _envelope(sc, seed)
    names = list(run.params.keys())
    with (out_dir / "optimize_log.jsonl").open("w") as fh:
        fh.write(_jsonl(dict(env)))
        for rec in run.history:
            fh.write(
                _jsonl(
                    {
                        "restart": rec["restart"],
                        "eval": rec["eval"],
                        "params": dict(zip(names, rec["x"])),
                        "f": rec["f"],
                        "seed": seed,
                    }
                )
            )
    summary = dict(env)
    summary.update(
        objective=sc["objective"],
        layers=sc["layers"],
        n_per_layer=run.n_per_layer,
        params=run.params,
        eps=run.fun,
        value=1.0 - run.fun,
        n_evals=run.n_evals,
    )
    _write_json(out_dir / "optimize_summary.json", summary)
    print(
        f"optimize[{sc['objective']}]: eps = {run.fun:.6f} "
        f"at {_params_str(run.params)} ({run.n_evals} evaluations)"
    )
    return 0


def cmd_scaling(sc, out_dir: Path, seed: int, workers, resume) -> int:
    opts = sc.get("optimizer", {})
    env = _envelope(sc, seed)
    log_path = out_dir / "scaling_log.jsonl"
    with log_path.open("w") as fh:
        fh.write(_jsonl(dict(env)))

    def progress(n, run):
        with log_path.open("a") as fh:
            fh.write(
                _jsonl(
                    {
                        "n_per_layer": n,
                        "eps": run.fun,
                        "params": run.params,
                        "n_evals": run.n_evals,
                        "seed": seed,
                    }
                )
            )
        print(f"scaling: N = {n} -> eps = {run.fun:.6f}")

    series = scaling_study(
        sc["objective"],
        sc["layers"],
        sc["n_list"],
        kind=sc["lattice"]["kind"],
        max_evals=opts.get("max_evals", 400),
        restarts=opts.get("restarts", 3),
        seed=seed,
        progress=progress,
    )
    fit = fit_power_law(series) if len(series.n_values) >= 3 else None
    rows = []
    for i, n in enumerate(series.n_values):
        p = series.params[i]
        rows.append(
            (
                n,
                series.eps[i],
                p.get("a", float("nan")),
                p.get("d", float("nan")),
                p.get("w", float("nan")),
                p.get("phi", float("nan")),
                series.flagged[i],
            )
        )
    _write_csv(
        out_dir / "scaling_series.csv",
        env,
        ["n_per_layer", "eps", "a", "d", "w", "phi", "flagged"],
        rows,
    )
    summary = dict(env)
    summary.update(
        objective=sc["objective"],
        layers=sc["layers"],
        n_values=list(series.n_values),
        eps=list(series.eps),
        flagged=list(series.flagged),
    )
    if fit is not None:
        summary["fit"] = {"c": fit.c, "p": fit.p, "residual": fit.residual}
        print(f"scaling: eps ~ {fit.c:.3g} * N^{fit.p:.3f}")
    _write_json(out_dir / "scaling_summary.json", summary)
    return 0


# ---------------------------------------------------------------- sweep


def _grid_points(sc: dict):
    """Cartesian product of the grid axes, row-major in config order."""
    grid = sc["grid"]
    names = list(grid.keys())
    axes = [
        np.linspace(grid[k]["lo"], grid[k]["hi"], grid[k]["points"]).tolist()
        for k in names
    ]
    points = []
    if len(names) == 1:
        for v in axes[0]:
            points.append({names[0]: v})
    else:
        for v0 in axes[0]:
            for v1 in axes[1]:
                points.append({names[0]: v0, names[1]: v1})
    return names, points


def _sweep_value(sc: dict, named: dict) -> dict:
    objective = sc["objective"]
    if objective == "idealized":
        lat = make_lattice(sc["lattice"]["kind"], named["a"])
        rates = channel_rates(lat)
        b = rates.gamma_det / (rates.gamma_det + rates.gamma_diff)
        return {"value": b**2, "gamma_diff": rates.gamma_diff}
    a = named.get("a", sc["lattice"].get("a"))
    d = named.get("d")
    geometry = _geometry_for(sc, a, d)
    if objective == "reflectance":
        mode = _mode_for(sc, geometry, named, "gaussian")
        best = max_reflectance(geometry, mode, scan=sc.get("scan") or None)
        return {"value": best.r_max, "delta_star": best.delta_star}
    mode = _mode_for(sc, geometry, named, "two_way")
    interaction = build_interaction_matrix(geometry)
    modes = collective_modes(interaction)
    kernel = k_matrix(modes, sample_mode(mode, geometry))
    best = max_retrieval(kernel)
    return {"value": best.eta_max}


def _jsonl(record: dict) -> str:
    return json.dumps(record, sort_keys=True) + "\n"


def cmd_sweep(sc, out_dir: Path, seed: int, workers, resume) -> int:
    names, points = _grid_points(sc)
    env = _envelope(sc, seed)
    checkpoint = out_dir / "points.jsonl"

    done: dict[int, dict] = {}
    resuming = resume and checkpoint.exists()
    if resuming:
        for line in checkpoint.read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if "index" in rec:
                done[rec["index"]] = rec
    elif checkpoint.exists():
        checkpoint.unlink()

    lock = threading.Lock()
    fh = checkpoint.open("a")
    if not resuming:
        fh.write(_jsonl(dict(env)))
        fh.flush()

    def run_point(index: int) -> dict:
        named = points[index]
        try:
            result = _sweep_value(sc, named)
            rec = {"index": index, "params": named, "ok": True, **result}
        except (DipolarrayError, np.linalg.LinAlgError) as exc:
            rec = {
                "index": index,
                "params": named,
                "ok": False,
                "error": f"{type(exc).__name__}: {exc}",
            }
        with lock:
            fh.write(_jsonl(rec))
            fh.flush()
        return rec

    pending = [i for i in range(len(points)) if i not in done]
    n_workers = workers or os.cpu_count() or 1
    if n_workers > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            for rec in pool.map(run_point, pending):
                done[rec["index"]] = rec
    else:
        for i in pending:
            done[i] = run_point(i)
    fh.close()

    header = ["index", *names, "value", "ok", "error"]
    rows = []
    ok_records = []
    for i in range(len(points)):
        rec = done[i]
        value = rec.get("value")
        rows.append(
            (
                i,
                *(float(rec["params"][k]) for k in names),
                float(value) if value is not None else "",
                bool(rec["ok"]),
                rec.get("error", ""),
            )
        )
        if rec["ok"]:
            ok_records.append(rec)
    _write_csv(out_dir / "sweep_table.csv", env, header, rows)

    summary = dict(env)
    summary.update(
        objective=sc["objective"],
        axes=names,
        n_points=len(points),
        n_ok=len(ok_records),
        n_failed=len(points) - len(ok_records),
    )
    if ok_records:
        best = max(ok_records, key=lambda r: r["value"])
        summary["best"] = {"params": best["params"], "value": best["value"]}
    _write_json(out_dir / "sweep_summary.json", summary)
    print(
        f"sweep: {len(ok_records)}/{len(points)} points ok"
        + (f", best value = {summary['best']['value']:.6f}" if ok_records else "")
    )
    return 0


# ------------------------------------------------------------- validate


def cmd_validate(sc, out_dir, seed, workers, resume) -> int:
    """Self-tests for normalization, passivity, and retrieval bounds."""
    failures = 0

    def check(name, ok, detail):
        nonlocal failures
        status = "PASS" if ok else "FAIL"
        if not ok:
            failures += 1
        print(f"[validate] {name}: {status} ({detail})")

    mode = gaussian_mode(2.0, focus=(0.0, 0.0, 0.3))
    worst = max(
        abs(transverse_power(mode, z) - 1.0) for z in (-3.0, 0.0, 0.3, 2.5)
    )
    check("mode power normalization", worst < 1e-6, f"max deviation {worst:.2e}")

    lat = make_lattice("triangular", 1.5)
    geometry = stack_layers(generate_patch(lat, 2), 2, spacing=1.2, lattice=lat)
    interaction = build_interaction_matrix(geometry)
    asym = np.abs(interaction.matrix - interaction.matrix.T).max()
    check("coupling matrix symmetry", asym < 1e-12, f"max asymmetry {asym:.2e}")

    lowest = float(np.linalg.eigvalsh(interaction.matrix.imag).min())
    check("passivity (Im part PSD)", lowest > -1e-10, f"lowest eigenvalue {lowest:.2e}")

    modes = collective_modes(interaction)
    vec = sample_mode(two_way_mode(2.0, focus=(0.0, 0.0, 0.6)), geometry)
    kernel = k_matrix(modes, vec)
    herm = np.abs(kernel.matrix - kernel.matrix.conj().T).max()
    check("retrieval kernel Hermiticity", herm < 1e-10, f"max deviation {herm:.2e}")

    evals = np.linalg.eigvalsh(kernel.matrix) * (3.0 / (8.0 * math.pi))
    in_range = evals.min() > -1e-9 and evals.max() < 1.0 + 1e-9
    check(
        "retrieval efficiency bounds",
        in_range,
        f"eta range [{evals.min():.2e}, {evals.max():.6f}]",
    )

    single = stack_layers(np.zeros((1, 2)), 1)
    one_modes = collective_modes(build_interaction_matrix(single))
    one_vec = sample_mode(two_way_mode(1.0), single)
    eta = max_retrieval(k_matrix(one_modes, one_vec)).eta_max
    target = 3.0 / (2.0 * math.pi**2)
    check(
        "single-atom two-way retrieval",
        abs(eta - target) < 1e-9,
        f"eta = {eta:.12f}, expected {target:.12f}",
    )

    if failures:
        print(f"{failures} check(s) failed")
        return 3
    print("all checks passed")
    return 0


def _params_str(params: dict) -> str:
    return ", ".join(f"{k} = {v:.4f}" for k, v in params.items())


# ----------------------------------------------------------------- main


COMMANDS = {
    "reflect": cmd_reflect,
    "memory": cmd_memory,
    "idealized": cmd_idealized,
    "optimize": cmd_optimize,
    "scaling": cmd_scaling,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dipolarray",
        description="Coupled-dipole simulations of layered atomic arrays.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} task")
        p.add_argument(
            "--config",
            required=name != "validate",
            help="scenario file (YAML or JSON)",
        )
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or cwd)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--workers", type=int, help="worker threads for sweeps/spectra")
        p.add_argument(
            "--resume",
            action="store_true",
            help="continue a sweep from its checkpoint file",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            sc = validate_config(load_config(args.config))
        else:
            sc = {"task": args.command, "layers": 1, "seed": 0, "override_validity": False}
        if args.command != "validate" and sc["task"] != args.command:
            raise ConfigError(
                f"config task {sc['task']!r} does not match subcommand {args.command!r}"
            )
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must fit in 64 bits")
            seed = args.seed
        else:
            seed = sc["seed"]

        out_dir = None
        if args.command != "validate":
            out_dir = Path(
                args.out or sc.get("out") or os.environ.get(OUT_ENV) or "."
            )
            out_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](sc, out_dir, seed, args.workers, args.resume)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DipolarrayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
