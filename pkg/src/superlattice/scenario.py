"""
Scenario files: TOML with explicit unit suffixes on every physical quantity.

A scenario names the superlattice, the (lambda_s, theta_s) grid and an
ordered list of tasks. Quantities are written as strings such as
``"8.2 mm"``, ``"50.34 deg"`` or ``"1292 1/m"`` and are converted to SI base
units (m, rad, K, 1/m) on load. Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import tomli
import tomli_w

from .dispersion import CRYSTALS, GAP_MEDIA, ConstantIndex, GasModel, UniaxialMedium
from .interference import CrystalElement, GapElement, Grid, SuperlatticeConfig
from .perturb import DISTRIBUTIONS
from .phasematch import PumpSpec

SCHEMA_VERSION = 1

_UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6, "nm": 1e-9},
    "angle": {"rad": 1.0, "mrad": 1e-3, "urad": 1e-6, "deg": np.pi / 180},
    "temperature": {"K": 1.0},
    "absorption": {"1/m": 1.0, "1/cm": 1e2, "1/mm": 1e3},
}
_BASE_UNIT = {"length": "m", "angle": "rad", "temperature": "K", "absorption": "1/m"}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)?\s*$")

TASK_KINDS = ("pattern", "cross_section", "metrics", "width_ratio", "perturb", "gas_compare", "defect")

# key -> dimension ("length", "angle", ...) or a python type for plain values
_TASK_KEYS: dict[str, dict[str, Any]] = {
    "_common": {"kind": str, "id": str, "n_crystals": int, "disable": list, "gap_medium": str},
    "pattern": {"coherent": bool, "dense": bool},
    "cross_section": {"center_wavelength": "length", "bandwidth": "length"},
    "metrics": {"center_wavelength": "length", "bandwidth": "length",
                "window_min": "angle", "window_max": "angle"},
    "width_ratio": {"n_values": list, "center_wavelength": "length", "bandwidth": "length",
                    "window_min": "angle", "window_max": "angle"},
    "perturb": {"cut_angle_tolerance": "angle", "crystal_length_tolerance": "length",
                "gap_length_tolerance": "length", "distribution": str, "samples": int, "seed": int,
                "center_wavelength": "length", "bandwidth": "length", "compare_ideal": bool},
    "gas_compare": {"gas": str, "n_values": list, "center_wavelength": "length", "bandwidth": "length"},
    "defect": {},
}
_TASK_REQUIRED = {
    "cross_section": ("center_wavelength",),
    "metrics": ("center_wavelength",),
    "width_ratio": ("center_wavelength",),
    "perturb": ("samples", "seed"),
    "gas_compare": ("gas", "center_wavelength"),
}


class ScenarioError(ValueError):
    """Invalid scenario file: parse, unit or structural error."""


@dataclass(frozen=True)
class GridSpec:
    """Grid axes. Missing wavelength bounds default to the collinear signal +- 5 nm."""

    wavelength_min: float | None = None
    wavelength_max: float | None = None
    wavelength_points: int = 801
    max_angle: float = float(np.deg2rad(0.85))
    angle_points: int = 601

    def build(self, config: SuperlatticeConfig) -> Grid:
        if self.wavelength_min is None or self.wavelength_max is None:
            default = Grid.default_for(config)
            lo = self.wavelength_min if self.wavelength_min is not None else default.signal_wavelengths[0]
            hi = self.wavelength_max if self.wavelength_max is not None else default.signal_wavelengths[-1]
        else:
            lo, hi = self.wavelength_min, self.wavelength_max
        return Grid.uniform(lo, hi, self.wavelength_points, self.max_angle, self.angle_points)


@dataclass
class Task:
    kind: str
    id: str
    params: dict = field(default_factory=dict)


@dataclass
class Scenario:
    config: SuperlatticeConfig
    grid: GridSpec
    tasks: list[Task]
    output_dir: str = "out"
    emit_plots: bool = False
    name: str = "scenario"
    media: dict = field(default_factory=dict)

    @property
    def seeds(self) -> list[int]:
        return [t.params["seed"] for t in self.tasks if "seed" in t.params]


# --- units ------------------------------------------------------------------

def parse_quantity(value, dimension: str, key: str) -> float:
    """Convert ``"8.2 mm"``-style strings to SI base units."""
    if isinstance(value, bool) or not isinstance(value, str):
        raise ScenarioError(f"{key}: expected a quantity with a unit suffix (e.g. '1 {_example_unit(dimension)}'), "
                            f"got {value!r}")
    m = _QUANTITY.match(value)
    if not m:
        raise ScenarioError(f"{key}: cannot parse quantity {value!r}")
    number, unit = m.groups()
    if unit is None:
        raise ScenarioError(f"{key}: unit suffix missing in {value!r} "
                            f"(allowed: {', '.join(_UNITS[dimension])})")
    units = _UNITS[dimension]
    if unit not in units:
        raise ScenarioError(f"{key}: unit {unit!r} is not a {dimension} unit (allowed: {', '.join(units)})")
    return float(number) * units[unit]


def _example_unit(dimension):
    return {"length": "mm", "angle": "deg", "temperature": "K", "absorption": "1/m"}[dimension]


def format_quantity(value: float, dimension: str) -> str:
    return f"{float(value)!r} {_BASE_UNIT[dimension]}"


# --- helpers ----------------------------------------------------------------

def _check_keys(table: dict, allowed, where: str):
    unknown = set(table) - set(allowed)
    if unknown:
        raise ScenarioError(f"unknown key {where}.{sorted(unknown)[0]}" if where else
                            f"unknown key {sorted(unknown)[0]}")


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ScenarioError(f"missing required key {where}.{key}")
    return table[key]


def _plain(value, typ, key):
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"{key}: expected an integer, got {value!r}")
    elif typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"{key}: expected a number, got {value!r}")
        value = float(value)
    elif not isinstance(value, typ):
        raise ScenarioError(f"{key}: expected {typ.__name__}, got {value!r}")
    return value


# --- media ------------------------------------------------------------------

def _parse_medium(name: str, table: dict):
    where = f"media.{name}"
    kind = _require(table, "kind", where)
    if kind == "constant":
        _check_keys(table, ("kind", "index"), where)
        return ConstantIndex(_plain(_require(table, "index", where), float, f"{where}.index"), name)
    if kind == "lorentz_gas":
        keys = ("kind", "background_index", "resonance_wavelength", "linewidth", "peak_absorption",
                "reference_concentration", "concentration")
        _check_keys(table, keys, where)
        try:
            return GasModel(
                background_index=_plain(table.get("background_index", 1.0), float, f"{where}.background_index"),
                resonance_wavelength=parse_quantity(_require(table, "resonance_wavelength", where), "length",
                                                    f"{where}.resonance_wavelength"),
                linewidth=parse_quantity(_require(table, "linewidth", where), "length", f"{where}.linewidth"),
                peak_absorption=parse_quantity(_require(table, "peak_absorption", where), "absorption",
                                               f"{where}.peak_absorption"),
                reference_concentration=_plain(_require(table, "reference_concentration", where), float,
                                               f"{where}.reference_concentration"),
                concentration=_plain(_require(table, "concentration", where), float, f"{where}.concentration"),
                label=name,
            )
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"{where}: {exc}") from exc
    raise ScenarioError(f"{where}.kind: unknown medium kind {kind!r} (expected 'constant' or 'lorentz_gas')")


def _medium_table(medium) -> dict:
    if isinstance(medium, ConstantIndex):
        return {"kind": "constant", "index": float(medium.index)}
    if isinstance(medium, GasModel):
        return {
            "kind": "lorentz_gas",
            "background_index": float(medium.background_index),
            "resonance_wavelength": format_quantity(medium.resonance_wavelength, "length"),
            "linewidth": format_quantity(medium.linewidth, "length"),
            "peak_absorption": format_quantity(medium.peak_absorption, "absorption"),
            "reference_concentration": float(medium.reference_concentration),
            "concentration": float(medium.concentration),
        }
    raise ScenarioError(f"medium {medium!r} cannot be serialized")


def _lookup_medium(name, media, key):
    if not isinstance(name, str):
        raise ScenarioError(f"{key}: expected a medium name")
    if name in media:
        return media[name]
    if name in GAP_MEDIA:
        return GAP_MEDIA[name]
    raise ScenarioError(f"{key}: unknown medium {name!r} (define it under [media.{name}])")


def _crystal_from(table: dict) -> UniaxialMedium:
    where = "crystal"
    if "medium" in table:
        _check_keys(table, ("medium",), where)
        name = table["medium"]
        if name not in CRYSTALS:
            raise ScenarioError(f"crystal.medium: unknown crystal {name!r} (built-ins: {', '.join(CRYSTALS)})")
        return CRYSTALS[name]
    _check_keys(table, ("form", "sellmeier_ordinary", "sellmeier_extraordinary", "temperature", "label"), where)
    try:
        return UniaxialMedium(
            sellmeier_ordinary=tuple(_require(table, "sellmeier_ordinary", where)),
            sellmeier_extraordinary=tuple(_require(table, "sellmeier_extraordinary", where)),
            temperature=parse_quantity(table.get("temperature", "298.15 K"), "temperature", "crystal.temperature"),
            label=table.get("label", ""),
            form=_require(table, "form", where),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"crystal: {exc}") from exc


def _crystal_table(medium: UniaxialMedium) -> dict:
    for name, builtin in CRYSTALS.items():
        if builtin == medium:
            return {"medium": name}
    return {
        "form": medium.form,
        "sellmeier_ordinary": list(medium.sellmeier_ordinary),
        "sellmeier_extraordinary": list(medium.sellmeier_extraordinary),
        "temperature": format_quantity(medium.temperature, "temperature"),
        "label": medium.label,
    }


# --- lattice ----------------------------------------------------------------

def _lattice_from(table: dict, pump, crystal, media) -> SuperlatticeConfig:
    where = "lattice"
    explicit = "crystal" in table or "gap" in table
    if explicit:
        _check_keys(table, ("crystal", "gap"), where)
        crystals = []
        for k, c in enumerate(table.get("crystal", [])):
            w = f"lattice.crystal[{k}]"
            _check_keys(c, ("length", "cut_angle_offset", "enabled"), w)
            crystals.append(CrystalElement(
                length=parse_quantity(_require(c, "length", w), "length", f"{w}.length"),
                cut_angle_offset=parse_quantity(c.get("cut_angle_offset", "0 rad"), "angle", f"{w}.cut_angle_offset"),
                enabled=_plain(c.get("enabled", True), bool, f"{w}.enabled"),
            ))
        gaps = []
        for k, g in enumerate(table.get("gap", [])):
            w = f"lattice.gap[{k}]"
            _check_keys(g, ("length", "medium"), w)
            gaps.append(GapElement(
                length=parse_quantity(_require(g, "length", w), "length", f"{w}.length"),
                medium=_lookup_medium(g.get("medium", "air"), media, f"{w}.medium"),
            ))
        if len(crystals) < 1:
            raise ScenarioError("lattice.crystal: at least one crystal is required")
        if len(gaps) != len(crystals) - 1:
            raise ScenarioError(f"lattice.gap: {len(crystals)} crystals need exactly {len(crystals) - 1} gaps, "
                                f"got {len(gaps)} (crystals and gaps must alternate)")
        return SuperlatticeConfig(pump, tuple(crystals), tuple(gaps), crystal)

    _check_keys(table, ("n_crystals", "crystal_length", "gap_length", "gap_medium", "disabled"), where)
    n = _plain(_require(table, "n_crystals", where), int, "lattice.n_crystals")
    if n < 1:
        raise ScenarioError("lattice.n_crystals must be >= 1")
    disabled = _plain(table.get("disabled", []), list, "lattice.disabled")
    try:
        return SuperlatticeConfig.uniform(
            n,
            crystal_length=parse_quantity(_require(table, "crystal_length", where), "length", "lattice.crystal_length"),
            gap_length=parse_quantity(table.get("gap_length", "0 m"), "length", "lattice.gap_length"),
            pump=pump,
            crystal_medium=crystal,
            gap_medium=_lookup_medium(table.get("gap_medium", "air"), media, "lattice.gap_medium"),
            disabled=disabled,
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"lattice: {exc}") from exc


# --- tasks ------------------------------------------------------------------

def _task_from(k: int, table: dict, config: SuperlatticeConfig, media) -> Task:
    where = f"task[{k}]"
    kind = _require(table, "kind", where)
    if kind not in TASK_KINDS:
        raise ScenarioError(f"{where}.kind: unknown task kind {kind!r} (expected one of {', '.join(TASK_KINDS)})")
    schema = {**_TASK_KEYS["_common"], **_TASK_KEYS[kind]}
    _check_keys(table, schema, where)
    for key in _TASK_REQUIRED.get(kind, ()):
        _require(table, key, where)
    params = {}
    for key, value in table.items():
        if key in ("kind", "id"):
            continue
        spec = schema[key]
        if isinstance(spec, str):
            params[key] = parse_quantity(value, spec, f"{where}.{key}")
        else:
            params[key] = _plain(value, spec, f"{where}.{key}")

    n = params.get("n_crystals")
    if n is not None and not 1 <= n <= config.n_crystals:
        raise ScenarioError(f"{where}.n_crystals: {n} outside 1..{config.n_crystals}")
    n_eff = n or config.n_crystals
    for d in params.get("disable", []):
        if not isinstance(d, int) or not 1 <= d <= n_eff:
            raise ScenarioError(f"{where}.disable: crystal {d!r} outside 1..{n_eff}")
    for key in ("gap_medium", "gas"):
        if key in params:
            _lookup_medium(params[key], media, f"{where}.{key}")
    for key in ("n_values",):
        for v in params.get(key, []):
            if not isinstance(v, int) or not 1 <= v <= config.n_crystals:
                raise ScenarioError(f"{where}.{key}: crystal count {v!r} outside 1..{config.n_crystals}")
    if kind == "width_ratio" and 2 not in params.get("n_values", [2]):
        raise ScenarioError(f"{where}.n_values must include the N = 2 reference")
    if kind == "perturb":
        if params["samples"] < 1:
            raise ScenarioError(f"{where}.samples must be >= 1")
        if not 0 <= params["seed"] < 2 ** 64:
            raise ScenarioError(f"{where}.seed must be a 64-bit unsigned integer")
        if params.get("distribution", "uniform") not in DISTRIBUTIONS:
            raise ScenarioError(f"{where}.distribution must be one of {', '.join(DISTRIBUTIONS)}")
        for key in ("cut_angle_tolerance", "crystal_length_tolerance", "gap_length_tolerance"):
            if params.get(key, 0.0) < 0:
                raise ScenarioError(f"{where}.{key} must be non-negative")
    for key in ("bandwidth",):
        if params.get(key, 0.0) < 0:
            raise ScenarioError(f"{where}.{key} must be non-negative")
    task_id = table.get("id", f"{kind}_{k}")
    if not isinstance(task_id, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", task_id):
        raise ScenarioError(f"{where}.id: {task_id!r} is not a valid file stem")
    return Task(kind, task_id, params)


def _task_table(task: Task) -> dict:
    schema = {**_TASK_KEYS["_common"], **_TASK_KEYS[task.kind]}
    out = {"kind": task.kind, "id": task.id}
    for key, value in task.params.items():
        spec = schema[key]
        out[key] = format_quantity(value, spec) if isinstance(spec, str) else value
    return out


# --- top level --------------------------------------------------------------

_TOP_KEYS = ("schema_version", "name", "output_dir", "emit_plots", "pump", "crystal", "media", "lattice",
             "grid", "task")


def scenario_from_dict(doc: dict) -> Scenario:
    _check_keys(doc, _TOP_KEYS, "")
    version = _require(doc, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version {version!r} not supported (expected {SCHEMA_VERSION})")

    pump_t = _require(doc, "pump", "")
    _check_keys(pump_t, ("wavelength", "beam_diameter", "cut_angle"), "pump")
    try:
        pump = PumpSpec(
            wavelength=parse_quantity(_require(pump_t, "wavelength", "pump"), "length", "pump.wavelength"),
            beam_diameter=parse_quantity(pump_t.get("beam_diameter", "3 mm"), "length", "pump.beam_diameter"),
            cut_angle=parse_quantity(_require(pump_t, "cut_angle", "pump"), "angle", "pump.cut_angle"),
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"pump: {exc}") from exc

    crystal = _crystal_from(doc.get("crystal", {"medium": "cln_edwards1984"}))
    media = {name: _parse_medium(name, t) for name, t in doc.get("media", {}).items()}
    config = _lattice_from(_require(doc, "lattice", ""), pump, crystal, media)

    grid_t = doc.get("grid", {})
    _check_keys(grid_t, ("wavelength_min", "wavelength_max", "wavelength_points", "max_angle", "angle_points"), "grid")
    grid = GridSpec(
        wavelength_min=parse_quantity(grid_t["wavelength_min"], "length", "grid.wavelength_min")
        if "wavelength_min" in grid_t else None,
        wavelength_max=parse_quantity(grid_t["wavelength_max"], "length", "grid.wavelength_max")
        if "wavelength_max" in grid_t else None,
        wavelength_points=_plain(grid_t.get("wavelength_points", 801), int, "grid.wavelength_points"),
        max_angle=parse_quantity(grid_t["max_angle"], "angle", "grid.max_angle")
        if "max_angle" in grid_t else float(np.deg2rad(0.85)),
        angle_points=_plain(grid_t.get("angle_points", 601), int, "grid.angle_points"),
    )
    if grid.wavelength_points < 1 or grid.angle_points < 1:
        raise ScenarioError("grid: point counts must be >= 1")
    if (grid.wavelength_min is not None and grid.wavelength_max is not None
            and not grid.wavelength_min < grid.wavelength_max):
        raise ScenarioError("grid: wavelength_min must be below wavelength_max")
    if not 0 < grid.max_angle <= np.deg2rad(5.0):
        raise ScenarioError("grid.max_angle must lie in (0, 5 deg]")

    tasks = [_task_from(k, t, config, media) for k, t in enumerate(doc.get("task", []))]
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise ScenarioError("task ids must be unique")
    return Scenario(
        config=config,
        grid=grid,
        tasks=tasks,
        output_dir=_plain(doc.get("output_dir", "out"), str, "output_dir"),
        emit_plots=_plain(doc.get("emit_plots", False), bool, "emit_plots"),
        name=_plain(doc.get("name", "scenario"), str, "name"),
        media=media,
    )


def parse_scenario(path) -> Scenario:
    """Load and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: parse error: {exc}") from exc
    return scenario_from_dict(doc)


def _media_name(medium, media) -> str:
    for name, m in media.items():
        if m == medium:
            return name
    for name, m in GAP_MEDIA.items():
        if m == medium:
            return name
    raise ScenarioError(f"gap medium {medium!r} has no name; add it to Scenario.media")


def scenario_to_dict(scenario: Scenario) -> dict:
    cfg = scenario.config
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "output_dir": scenario.output_dir,
        "emit_plots": scenario.emit_plots,
        "pump": {
            "wavelength": format_quantity(cfg.pump.wavelength, "length"),
            "beam_diameter": format_quantity(cfg.pump.beam_diameter, "length"),
            "cut_angle": format_quantity(cfg.pump.cut_angle, "angle"),
        },
        "crystal": _crystal_table(cfg.crystal_medium),
    }
    if scenario.media:
        doc["media"] = {name: _medium_table(m) for name, m in scenario.media.items()}
    doc["lattice"] = {
        "crystal": [
            {"length": format_quantity(c.length, "length"),
             "cut_angle_offset": format_quantity(c.cut_angle_offset, "angle"),
             "enabled": c.enabled}
            for c in cfg.crystals
        ],
        "gap": [
            {"length": format_quantity(g.length, "length"), "medium": _media_name(g.medium, scenario.media)}
            for g in cfg.gaps
        ],
    }
    if not doc["lattice"]["gap"]:
        del doc["lattice"]["gap"]
    g = scenario.grid
    grid = {"wavelength_points": g.wavelength_points, "max_angle": format_quantity(g.max_angle, "angle"),
            "angle_points": g.angle_points}
    if g.wavelength_min is not None:
        grid["wavelength_min"] = format_quantity(g.wavelength_min, "length")
    if g.wavelength_max is not None:
        grid["wavelength_max"] = format_quantity(g.wavelength_max, "length")
    doc["grid"] = grid
    if scenario.tasks:
        doc["task"] = [_task_table(t) for t in scenario.tasks]
    return doc


def serialize_scenario(scenario: Scenario) -> str:
    """TOML text that parses back to an identical Scenario."""
    return tomli_w.dumps(scenario_to_dict(scenario))


def config_hash(scenario: Scenario) -> str:
    """SHA-256 over the physically meaningful content (not names, paths or plot flags)."""
    doc = scenario_to_dict(scenario)
    for key in ("name", "output_dir", "emit_plots"):
        doc.pop(key, None)
    for t in doc.get("task", []):
        t.pop("id", None)
    # media are hashed by content, not by the name they are filed under
    media = doc.pop("media", {})
    for gap in doc["lattice"].get("gap", []):
        name = gap["medium"]
        gap["medium"] = media.get(name, name)
    for t in doc.get("task", []):
        for key in ("gap_medium", "gas"):
            if key in t:
                t[key] = media.get(t[key], t[key])
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
