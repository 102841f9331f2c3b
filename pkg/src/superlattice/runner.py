"""
Execute the tasks of a scenario and write CSV, figures and a run manifest.

Every CSV is UTF-8, comma separated, with a header naming quantity and
unit and numbers in ``%.15e``. Long-format pattern files list wavelength
rows in ascending order with the angle varying fastest.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_WINDOW,
    cross_section,
    fringe_metrics,
    phase_shift,
    visibility,
    width_ratios,
)
from .interference import SuperlatticeConfig, defect_closed_form, pattern
from .perturb import PerturbationSpec, ensemble_pattern, sample_configs
from .phasematch import interaction_volume_check, kinematics
from .scenario import Scenario, Task, _lookup_medium, config_hash
from .dispersion import ConstantIndex

log = logging.getLogger(__name__)

FLOAT_FORMAT = "%.15e"


class ComputationError(RuntimeError):
    """A task failed after the scenario validated."""


# --- writers ----------------------------------------------------------------

def write_table(path: Path, header, columns) -> Path:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt=FLOAT_FORMAT,
               encoding="utf-8")
    return path


def write_pattern(path: Path, pat) -> Path:
    lam, theta = np.meshgrid(pat.signal_wavelengths * 1e9, np.rad2deg(pat.external_angles), indexing="ij")
    return write_table(path, ("lambda_s_nm", "theta_s_deg", "intensity"),
                       (lam.ravel(), theta.ravel(), pat.intensity.ravel()))


def write_pattern_matrix(path: Path, pat) -> Path:
    """Dense variant: one row per wavelength, one column per angle."""
    header = ["lambda_s_nm"] + [f"intensity_theta_s_deg={FLOAT_FORMAT % t}" for t in np.rad2deg(pat.external_angles)]
    return write_table(path, header, [pat.signal_wavelengths * 1e9] + list(pat.intensity.T))


def write_records(path: Path, rows) -> Path:
    """``quantity,value,unit`` records."""
    lines = ["quantity,value,unit"]
    lines += [f"{name},{FLOAT_FORMAT % value},{unit}" for name, value, unit in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --- task helpers -----------------------------------------------------------

def task_config(scenario: Scenario, task: Task) -> SuperlatticeConfig:
    cfg = scenario.config
    p = task.params
    if "n_crystals" in p:
        cfg = cfg.truncated(p["n_crystals"])
    if p.get("disable"):
        cfg = cfg.with_disabled(p["disable"])
    if "gap_medium" in p:
        cfg = cfg.with_gap_medium(_lookup_medium(p["gap_medium"], scenario.media, "gap_medium"))
    return cfg


def _window(p):
    return (p.get("window_min", DEFAULT_WINDOW[0]), p.get("window_max", DEFAULT_WINDOW[1]))


class _Run:
    def __init__(self, scenario: Scenario, out: Path, threads: int, plots: bool):
        self.scenario = scenario
        self.out = out
        self.threads = threads
        self.plots = plots
        self.grid = scenario.grid.build(scenario.config)
        self.files: list[Path] = []
        self.results: dict = {}

    def _emit(self, path):
        self.files.append(path)
        return path

    def _plot(self, fn, *args, **kwargs):
        if self.plots:
            from . import plotting  # matplotlib only when figures are requested
            self._emit(getattr(plotting, fn)(*args, **kwargs))

    def _fig(self, stem):
        from .plotting import FIGURE_FORMAT
        return self.out / f"{stem}.{FIGURE_FORMAT}"

    def _pattern(self, cfg, coherent=True):
        return pattern(cfg, self.grid, threads=self.threads, coherent=coherent)

    # one method per task kind

    def pattern(self, task: Task):
        cfg = task_config(self.scenario, task)
        pat = self._pattern(cfg, task.params.get("coherent", True))
        self._emit(write_pattern(self.out / f"{task.id}.csv", pat))
        if task.params.get("dense", False):
            self._emit(write_pattern_matrix(self.out / f"{task.id}_matrix.csv", pat))
        self._plot("plot_pattern", pat, self._fig(task.id), title=task.id,
                   pump_wavelength=cfg.pump.wavelength)
        self.results[task.id] = {"normalization": pat.normalization}

    def cross_section(self, task: Task):
        p = task.params
        cfg = task_config(self.scenario, task)
        sec = cross_section(self._pattern(cfg), p["center_wavelength"], p.get("bandwidth", 0.0))
        self._emit(write_table(self.out / f"{task.id}.csv", ("theta_s_deg", "intensity"),
                               (np.rad2deg(sec.angles), sec.intensity)))
        self._plot("plot_sections", {f"N = {cfg.n_enabled}": sec}, self._fig(task.id), title=task.id)

    def metrics(self, task: Task):
        p = task.params
        cfg = task_config(self.scenario, task)
        window = _window(p)
        sec = cross_section(self._pattern(cfg), p["center_wavelength"], p.get("bandwidth", 0.0))
        env = cross_section(self._pattern(cfg, coherent=False), p["center_wavelength"], p.get("bandwidth", 0.0))
        m = fringe_metrics(sec, window)
        vis_env = visibility(sec, window, envelope=env)
        self._emit(write_table(self.out / f"{task.id}_section.csv", ("theta_s_deg", "intensity"),
                               (np.rad2deg(sec.angles), sec.intensity)))
        self._emit(write_table(self.out / f"{task.id}_peaks.csv", ("peak_angle_deg", "width_deg"),
                               (np.rad2deg(m.peak_angles), np.rad2deg(m.widths))))
        self._emit(write_records(self.out / f"{task.id}.csv", [
            ("n_crystals", cfg.n_enabled, "1"),
            ("n_peaks", m.peak_angles.size, "1"),
            ("mean_width", np.rad2deg(m.mean_width), "deg"),
            ("visibility", m.visibility, "1"),
            ("visibility_envelope_normalized", vis_env, "1"),
        ]))
        self._plot("plot_sections", {f"N = {cfg.n_enabled}": sec}, self._fig(task.id), title=task.id)
        self.results[task.id] = {"mean_width_deg": float(np.rad2deg(m.mean_width)),
                                 "visibility": float(m.visibility),
                                 "visibility_envelope_normalized": float(vis_env)}

    def width_ratio(self, task: Task):
        p = task.params
        base = task_config(self.scenario, task)
        window = _window(p)
        sections = {}
        for n in p.get("n_values", list(range(2, base.n_crystals + 1))):
            pat = self._pattern(base.truncated(n))
            sections[n] = cross_section(pat, p["center_wavelength"], p.get("bandwidth", 0.0))
        ratios = width_ratios(sections, window)
        widths = [fringe_metrics(sections[n], window).mean_width for n, _ in ratios]
        n_vals = [n for n, _ in ratios]
        self._emit(write_table(self.out / f"{task.id}.csv", ("n_crystals", "mean_width_deg", "width_ratio"),
                               (n_vals, np.rad2deg(widths), [r for _, r in ratios])))
        angles = next(iter(sections.values())).angles
        self._emit(write_table(self.out / f"{task.id}_sections.csv",
                               ["theta_s_deg"] + [f"intensity_N{n}" for n in n_vals],
                               [np.rad2deg(angles)] + [sections[n].intensity for n in n_vals]))
        self._plot("plot_width_ratios", ratios, self._fig(task.id), title=task.id)
        self._plot("plot_sections", {f"N = {n}": sections[n] for n in n_vals}, self._fig(f"{task.id}_sections"))
        self.results[task.id] = {"width_ratios": {str(n): float(r) for n, r in ratios}}

    def perturb(self, task: Task):
        p = task.params
        cfg = task_config(self.scenario, task)
        spec = PerturbationSpec(
            cut_angle_tolerance=p.get("cut_angle_tolerance", 0.0),
            crystal_length_tolerance=p.get("crystal_length_tolerance", 0.0),
            gap_length_tolerance=p.get("gap_length_tolerance", 0.0),
            distribution=p.get("distribution", "uniform"),
            samples=p["samples"],
            seed=p["seed"],
        )
        ens = ensemble_pattern(sample_configs(cfg, spec), self.grid, threads=self.threads)
        self._emit(write_pattern(self.out / f"{task.id}.csv", ens))
        self._plot("plot_pattern", ens, self._fig(task.id), title=task.id, pump_wavelength=cfg.pump.wavelength)
        if "center_wavelength" in p:
            bw = p.get("bandwidth", 0.0)
            sec = cross_section(ens, p["center_wavelength"], bw)
            header, cols = ["theta_s_deg", "intensity_ensemble"], [np.rad2deg(sec.angles), sec.intensity]
            secs = {"ensemble": sec}
            if p.get("compare_ideal", True):
                ideal = cross_section(self._pattern(cfg), p["center_wavelength"], bw)
                header.append("intensity_ideal")
                cols.append(ideal.intensity)
                secs["ideal"] = ideal
            self._emit(write_table(self.out / f"{task.id}_section.csv", header, cols))
            self._plot("plot_sections", secs, self._fig(f"{task.id}_section"), title=task.id)
        self.results[task.id] = {"samples": spec.samples, "seed": spec.seed}

    def gas_compare(self, task: Task):
        p = task.params
        base = task_config(self.scenario, task)
        gas = _lookup_medium(p["gas"], self.scenario.media, "gas")
        bw = p.get("bandwidth", 0.0)
        rows, header, cols, secs = [], ["theta_s_deg"], [], {}
        for n in p.get("n_values", [base.n_crystals]):
            cfg = base.truncated(n)
            ref = cross_section(self._pattern(cfg), p["center_wavelength"], bw)
            smp = cross_section(self._pattern(cfg.with_gap_medium(gas)), p["center_wavelength"], bw)
            shift = phase_shift(ref, smp, n_crystals=cfg.n_enabled)
            rows.append((n, shift.value, shift.uncertainty, shift.value / np.pi))
            if not cols:
                cols.append(np.rad2deg(ref.angles))
            header += [f"intensity_reference_N{n}", f"intensity_gas_N{n}"]
            cols += [ref.intensity, smp.intensity]
            secs[f"N = {n} reference"] = ref
            secs[f"N = {n} gas"] = smp
        self._emit(write_table(self.out / f"{task.id}.csv",
                               ("n_crystals", "phase_shift_rad", "uncertainty_rad", "phase_shift_pi"),
                               list(zip(*rows))))
        self._emit(write_table(self.out / f"{task.id}_sections.csv", header, cols))
        self._plot("plot_sections", secs, self._fig(task.id), title=task.id)
        self.results[task.id] = {"phase_shift_pi": {str(r[0]): float(r[3]) for r in rows}}

    def defect(self, task: Task):
        p = dict(task.params)
        cfg = task_config(self.scenario, Task(task.kind, task.id, {**p, "disable": p.get("disable", [3])}))
        pat = self._pattern(cfg)
        self._emit(write_pattern(self.out / f"{task.id}.csv", pat))
        self._plot("plot_pattern", pat, self._fig(task.id), title=task.id, pump_wavelength=cfg.pump.wavelength)
        lengths = {c.length for c in cfg.crystals}
        gaps = {g.length for g in cfg.gaps}
        lossless = all(isinstance(g.medium, ConstantIndex) for g in cfg.gaps)
        disabled = [k + 1 for k, c in enumerate(cfg.crystals) if not c.enabled]
        if cfg.n_crystals == 5 and disabled == [3] and len(lengths) == 1 and len(gaps) == 1 and lossless \
                and all(c.cut_angle_offset == 0 for c in cfg.crystals) and len({g.medium for g in cfg.gaps}) == 1:
            lam, th = np.meshgrid(self.grid.signal_wavelengths, self.grid.external_angles, indexing="ij")
            kin = kinematics(cfg.pump, cfg.crystal_medium, cfg.gaps[0].medium, lam, th)
            closed = defect_closed_form(kin, lengths.pop(), gaps.pop())
            closed = np.where(kin.valid, closed, 0.0) / pat.normalization
            dev = float(np.max(np.abs(closed - pat.intensity)))
            self._emit(write_records(self.out / f"{task.id}_closed_form.csv",
                                     [("max_abs_deviation", dev, "1")]))
            self.results[task.id] = {"closed_form_max_abs_deviation": dev}


def run_scenario(scenario: Scenario, out_dir=None, threads: int = 1, plots: bool | None = None) -> dict:
    """Run every task; returns the manifest. On failure the manifest is still written."""
    out = Path(out_dir if out_dir is not None else scenario.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    plots = scenario.emit_plots if plots is None else plots
    t0 = time.perf_counter()
    manifest = {
        "tool": "superlattice",
        "version": __version__,
        "scenario": scenario.name,
        "config_hash": config_hash(scenario),
        "seeds": scenario.seeds,
        "threads": threads,
        "status": "running",
    }
    run = None
    try:
        iv = interaction_volume_check(scenario.config, scenario.grid.max_angle)
        manifest["interaction_volume"] = asdict(iv)
        run = _Run(scenario, out, threads, plots)
        manifest["grid"] = {"signal_wavelength_nm": [float(run.grid.signal_wavelengths[0] * 1e9),
                                                     float(run.grid.signal_wavelengths[-1] * 1e9)],
                            "shape": list(run.grid.shape)}
        for task in scenario.tasks:
            log.info("task %s (%s)", task.id, task.kind)
            getattr(run, task.kind)(task)
        manifest["status"] = "ok"
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        raise ComputationError(manifest["error"]) from exc
    finally:
        manifest["wall_time_s"] = time.perf_counter() - t0
        if run is not None:
            manifest["results"] = run.results
            manifest["files"] = {p.name: _sha256(p) for p in run.files}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
