"""Experiment runner: one subcommand per reproducible result.

    dwsyn <subcommand> --config <path> [--out <dir>] [--seed N] [--strict]

Exit codes: 0 success, 1 validation failure, 2 numerical failure. Every run
writes ``resolved_config.json`` and ``manifest.json`` (sha256 per file) next
to its outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .device import (DeviceConfig, ModelUnfitted, SynapseState, conductance_at,
                     full_switch_current)
from .dwall import (CompactModel, InsufficientData, PoorFitWarning, WallProfile,
                    fit_compact_model, init_bloch_wall, terminal_velocity, wall_position,
                    write_sweep_csv)
from .llg import (GAMMA, FieldTerms, IntegratorConfig, NonFiniteState, SpinTorqueDrive,
                  advance, max_stable_dt, micromagnetic_energy, run)
from .magcore import (ConfigError, DeviceGeometry, GridGeometry, MagnetizationGrid,
                      MaterialParams, geometry_from_dict, geometry_to_dict,
                      material_from_dict, material_to_dict)
from .stdp import (StdpConfig, fit_branch, invert_amplitudes, stdp_curve, write_curve_csv,
                   write_waveform_csv)
from .xbar import Crossbar, CrossbarNetwork, LifNeurons, PatternStimulus, run_learning

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


def _strict(cls, d, section):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError(f"section '{section}' must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"bad {section} section: {exc}") from exc


def _as_dict(obj):
    d = asdict(obj)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


# --------------------------------------------------------------------------
# config sections


@dataclass(frozen=True)
class SolverConfig:
    dt_s: float = None  # None picks the RK4 stability estimate
    renormalize_every: int = 1
    sample_interval_s: float = 0.1e-9
    she_sign: int = 1
    thin_film_demag: bool = True
    relax_s: float = 1e-9
    region: str = "magnet"  # or "mtj"

    def __post_init__(self):
        if self.dt_s is not None and not self.dt_s > 0:
            raise ConfigError("solver.dt_s must be > 0 or null")
        if self.region not in ("magnet", "mtj"):
            raise ConfigError("solver.region must be 'magnet' or 'mtj'")
        if self.relax_s < 0:
            raise ConfigError("solver.relax_s must be >= 0")


@dataclass(frozen=True)
class MacrospinConfig:
    field_A_per_m: float = 1e5
    dt_s: float = 0.1e-12
    n_periods: int = 20
    drift_steps: int = 1_000_000
    energy_grid: tuple = (16, 16)
    energy_steps: int = 20000
    energy_samples: int = 100
    renormalize_every: int = 1


@dataclass(frozen=True)
class CalibrationConfig:
    ferromagnet_dimensions_m: tuple = (600e-9, 200e-9, 1e-9)
    grid_size_m: tuple = (4e-9, 4e-9, 1e-9)
    current_density_A_per_m2: float = 3.5e10
    duration_s: float = 20e-9
    sample_interval_s: float = 0.1e-9
    transient_tolerance: float = 0.1


@dataclass(frozen=True)
class SweepConfig:
    current_densities_A_per_m2: tuple = (1e10, 2e10, 3e10, 4e10, 5e10)
    durations_s: tuple = (2e-9, 5e-9)
    min_r2: float = 0.98

    def __post_init__(self):
        if not self.current_densities_A_per_m2 or not self.durations_s:
            raise ConfigError("sweep needs current densities and durations")
        if any(t <= 0 for t in self.durations_s):
            raise ConfigError("sweep durations must be > 0")


@dataclass(frozen=True)
class StdpCurveConfig:
    n_points: int = 81
    tau_tolerance: float = 0.05

    def __post_init__(self):
        if self.n_points < 7:
            raise ConfigError("stdp_curve.n_points must be >= 7")


@dataclass(frozen=True)
class PatternConfig:
    group_a: tuple = (0, 1, 2, 3)
    group_b: tuple = (4, 5, 6, 7)
    pattern_rate_hz: float = 5.0
    burst_volleys: int = 3
    burst_interval_s: float = 3e-3
    jitter_s: float = 0.0
    background_rate_hz: float = 1.0

    def stimulus(self) -> PatternStimulus:
        return PatternStimulus(tuple(self.group_a), tuple(self.group_b),
                               self.pattern_rate_hz, self.burst_volleys,
                               self.burst_interval_s, self.jitter_s, self.background_rate_hz)


@dataclass(frozen=True)
class XbarConfig:
    n_pre: int = 8
    n_post: int = 2
    v_spike_V: float = 0.1
    t_spike_s: float = 1e-6
    dt_s: float = 1e-4
    duration_s: float = 5.0
    snapshot_interval_s: float = 0.5
    tau_mem_s: float = 20e-3
    v_thresh: float = 1.0
    t_refrac_s: float = 2e-3
    n_coincident: float = 12.0
    initial_bias: float = 0.15
    initial_jitter: float = 0.02
    pattern: PatternConfig = field(default_factory=PatternConfig)

    def __post_init__(self):
        if not 0 <= self.initial_bias < 0.5:
            raise ConfigError("xbar.initial_bias must lie in [0, 0.5)")
        if self.initial_jitter < 0:
            raise ConfigError("xbar.initial_jitter must be >= 0")
        rows = set(self.pattern.group_a) | set(self.pattern.group_b)
        if rows and (min(rows) < 0 or max(rows) >= self.n_pre):
            raise ConfigError("pattern groups reference rows outside the crossbar")


_SECTIONS = {
    "solver": SolverConfig,
    "macrospin": MacrospinConfig,
    "calibration": CalibrationConfig,
    "sweep": SweepConfig,
    "stdp_curve": StdpCurveConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "default"
    seed: int = 0
    output_dir: str = "out"
    material: MaterialParams = field(default_factory=MaterialParams)
    geometry: DeviceGeometry = field(default_factory=DeviceGeometry)
    device: DeviceConfig = field(default_factory=DeviceConfig)
    stdp: StdpConfig = field(default_factory=StdpConfig)
    compact_model: CompactModel = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    macrospin: MacrospinConfig = field(default_factory=MacrospinConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    stdp_curve: StdpCurveConfig = field(default_factory=StdpCurveConfig)
    xbar: XbarConfig = field(default_factory=XbarConfig)

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        kw = {}
        for k in ("experiment", "output_dir"):
            if k in d:
                kw[k] = str(d[k])
        if "seed" in d:
            if not isinstance(d["seed"], int) or d["seed"] < 0:
                raise ConfigError("seed must be a non-negative integer")
            kw["seed"] = d["seed"]
        if "material" in d:
            kw["material"] = material_from_dict(d["material"])
        if "geometry" in d:
            kw["geometry"] = geometry_from_dict(d["geometry"])
        if "device" in d:
            kw["device"] = DeviceConfig.from_dict(d["device"])
        if "stdp" in d:
            kw["stdp"] = StdpConfig.from_dict(d["stdp"])
        for k, sec in _SECTIONS.items():
            if k in d:
                kw[k] = _strict(sec, d[k], k)
        if "xbar" in d:
            x = dict(d["xbar"] or {})
            x["pattern"] = _strict(PatternConfig, x.pop("pattern", None), "xbar.pattern")
            kw["xbar"] = _strict(XbarConfig, x, "xbar")
        if d.get("compact_model") is not None:
            kw["compact_model"] = _load_compact(d["compact_model"], base_dir)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict:
        out = {
            "experiment": self.experiment,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "material": material_to_dict(self.material),
            "geometry": geometry_to_dict(self.geometry),
            "device": self.device.to_dict(),
            "stdp": self.stdp.to_dict(),
            "compact_model": None if self.compact_model is None
            else json.loads(self.compact_model.to_json()),
        }
        for k in _SECTIONS:
            out[k] = _as_dict(getattr(self, k))
        x = _as_dict(self.xbar)
        x["pattern"] = _as_dict(self.xbar.pattern)
        out["xbar"] = x
        return out


def _load_compact(spec, base_dir):
    if isinstance(spec, dict):
        return CompactModel.from_json(json.dumps(spec))
    p = Path(spec)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    if not p.exists():
        raise ConfigError(f"compact model file not found: {p}")
    return CompactModel.from_json(p)


# --------------------------------------------------------------------------
# experiments (library entry points, also used by the tests)


def macrospin_checks(mat: MaterialParams, cfg: MacrospinConfig, seed: int = 0) -> dict:
    """Precession period, norm drift and damping checks of the integrator."""
    out = {}
    # Larmor precession of an undamped single cell
    free = replace(mat, alpha=0.0)
    geo1 = GridGeometry(1, 1, 2e-9, 2e-9, 1e-9)
    terms = FieldTerms(free, exchange=False, anisotropy=False,
                       h_ext=(0.0, 0.0, cfg.field_A_per_m))
    tilt = math.radians(30)
    g = MagnetizationGrid(geo1, [math.sin(tilt), 0.0, math.cos(tilt)])
    icfg = IntegratorConfig(dt=cfg.dt_s)
    period = 2 * math.pi / (GAMMA * cfg.field_A_per_m)
    n_total = int(round(cfg.n_periods * period / cfg.dt_s))
    chunk = max(1, n_total // (cfg.n_periods * 16))
    t, phase = [0.0], [0.0]
    done = 0
    while done < n_total:
        n = min(chunk, n_total - done)
        advance(g, terms, None, icfg, n, step0=done)
        done += n
        t.append(done * cfg.dt_s)
        phase.append(math.atan2(g.m[0, 0, 1], g.m[0, 0, 0]))
    omega = float(abs(np.polyfit(t, np.unwrap(phase), 1)[0]))
    measured = 2 * math.pi / omega
    out["precession_period_s"] = measured
    out["larmor_period_s"] = period
    out["precession_rel_error"] = abs(measured - period) / period

    # norm drift of a damped single cell over many steps
    terms_d = FieldTerms(mat, exchange=False, anisotropy=True,
                         h_ext=(cfg.field_A_per_m, 0.0, 0.0))
    g = MagnetizationGrid(geo1, [0.6, 0.0, 0.8])
    drift = 0.0
    done = 0
    icfg = replace(icfg, renormalize_every=cfg.renormalize_every)
    step_chunk = 100_000
    while done < cfg.drift_steps:
        n = min(step_chunk, cfg.drift_steps - done)
        diag = advance(g, terms_d, None, icfg, n, step0=done)
        drift = max(drift, diag.max_norm_drift)
        done += n
    out["drift_steps"] = cfg.drift_steps
    out["max_norm_drift"] = drift

    # energy under damping, no drive
    nx, ny = cfg.energy_grid
    geo = GridGeometry(int(nx), int(ny), 2e-9, 2e-9, 1e-9)
    rng = np.random.default_rng(seed)
    g = init_bloch_wall(geo, mat)
    g = MagnetizationGrid(geo, g.m + 0.3 * rng.standard_normal(g.m.shape))
    terms_e = FieldTerms(mat)
    ecfg = IntegratorConfig.auto(geo, terms_e)
    energies = [micromagnetic_energy(g, terms_e)]
    per = max(1, cfg.energy_steps // cfg.energy_samples)
    for k in range(cfg.energy_samples):
        advance(g, terms_e, None, ecfg, per, step0=k * per)
        energies.append(micromagnetic_energy(g, terms_e))
    e = np.asarray(energies)
    rises = np.diff(e)
    scale = max(abs(e).max(), 1e-300)
    out["energy_first_J"] = float(e[0])
    out["energy_last_J"] = float(e[-1])
    out["energy_max_rise_rel"] = float(max(rises.max(), 0.0) / scale)
    out["energy_monotone"] = bool(np.all(rises <= 1e-12 * scale))
    out["checks"] = {
        "precession_period": bool(out["precession_rel_error"] < 1e-3),
        "norm_drift": bool(drift < 1e-6),
        "energy_monotone": out["energy_monotone"],
    }
    return out


def _terms(mat, geo: DeviceGeometry, solver: SolverConfig, field_sign: int = 1):
    return FieldTerms(mat, thin_film_demag=solver.thin_film_demag,
                      h_ext=(field_sign * geo.field_A_per_m, 0.0, 0.0))


def _region(geo: DeviceGeometry, solver: SolverConfig):
    return geo.mtj_region() if solver.region == "mtj" else None


def relaxed_wall(mat, geo: DeviceGeometry, solver: SolverConfig, field_sign: int = 1,
                 j_max: float = 0.0):
    """Centred Bloch wall relaxed under the in-plane field; returns (grid, terms, cfg)."""
    grid_geo = geo.grid()
    terms = _terms(mat, geo, solver, field_sign)
    drive = SpinTorqueDrive(j_max, mat, solver.she_sign) if j_max else None
    dt = solver.dt_s or max_stable_dt(grid_geo, terms, drive)
    cfg = IntegratorConfig(dt, solver.renormalize_every, solver.sample_interval_s)
    # seed the Bloch core along the in-plane field so it relaxes without a flip
    g = init_bloch_wall(grid_geo, mat, WallProfile(grid_geo.width / 2, mat.wall_delta,
                                                   core_axis=(field_sign or 1, 0.0, 0.0)))
    if solver.relax_s > 0:
        run(g, terms, None, solver.relax_s, replace(cfg, sample_interval=solver.relax_s))
    return g, terms, cfg


def pulse_sweep(mat, geo: DeviceGeometry, solver: SolverConfig, current_densities,
                durations, field_sign: int = 1):
    """Wall displacement along +y at the end of each (J, duration) pulse.

    Every pulse starts from the same relaxed wall; one run per J is sampled at
    all requested durations. Returns [(J, duration, displacement_m), ...].
    """
    js = [float(j) for j in current_densities]
    taus = sorted(float(t) for t in durations)
    g0, terms, cfg = relaxed_wall(mat, geo, solver, field_sign,
                                  j_max=max(abs(j) for j in js))
    region = _region(geo, solver)
    y0 = wall_position(g0, region=region)
    out = []
    for j in js:
        g = g0.copy()
        drive = SpinTorqueDrive(j, mat, solver.she_sign)
        traj = run(g, terms, drive, taus[-1], cfg, region=region, sample_times=taus)
        t = np.asarray(traj.time)
        y = np.asarray(traj.wall_pos)
        for tau in taus:
            k = int(np.argmin(np.abs(t - round(tau / cfg.dt) * cfg.dt)))
            out.append((j, tau, float(y[k] - y0)))
    order = {t: i for i, t in enumerate(float(x) for x in durations)}
    out.sort(key=lambda r: (order[r[1]], js.index(r[0])))
    return out


def calibration_run(mat, geo: DeviceGeometry, solver: SolverConfig, cal: CalibrationConfig,
                    sign: int = 1):
    """Wall trajectory on the calibration geometry; returns (trajectory, summary)."""
    cgeo = replace(geo, ferromagnet_m=tuple(cal.ferromagnet_dimensions_m),
                   grid_cell_m=tuple(cal.grid_size_m))
    g, terms, cfg = relaxed_wall(mat, cgeo, solver, j_max=cal.current_density_A_per_m2)
    cfg = replace(cfg, sample_interval=cal.sample_interval_s)
    drive = SpinTorqueDrive(sign * cal.current_density_A_per_m2, mat, solver.she_sign)
    traj = run(g, terms, drive, cal.duration_s, cfg)
    t = np.asarray(traj.time)
    y = np.asarray(traj.wall_pos) - traj.wall_pos[0]
    finite = np.all(np.isfinite(y))
    steps = np.diff(y)
    direction = np.sign(y[-1]) if finite and y[-1] != 0 else 0.0
    monotone = bool(finite and direction != 0 and np.all(steps * direction >= 0))
    if finite and len(t) > 3:
        v, spread = terminal_velocity(t, y, fraction=0.5)
    else:
        v, spread = float("nan"), float("inf")
    v_local = steps / np.diff(t)
    transient = float("nan")
    if math.isfinite(v) and v != 0:
        ok = np.abs(v_local - v) <= cal.transient_tolerance * abs(v)
        # first sample after which the local velocity stays within tolerance
        bad = np.nonzero(~ok)[0]
        idx = 0 if bad.size == 0 else bad[-1] + 1
        transient = float(t[min(idx, len(t) - 1)])
    summary = {
        "current_density_A_per_m2": sign * cal.current_density_A_per_m2,
        "dt_s": cfg.dt,
        "grid_cells": [g.geometry.nx, g.geometry.ny],
        "displacement_m": float(y[-1]),
        "terminal_velocity_m_per_s": v,
        "velocity_spread": spread,
        "transient_duration_s": transient,
        "monotone": monotone,
        "max_norm_drift": float(max(traj.max_norm_drift)),
    }
    return traj, summary


def xbar_demo(cfg: ExperimentConfig, seed: int):
    """Two-pattern learning run; returns (report, metrics)."""
    if cfg.compact_model is None:
        raise ModelUnfitted("xbar-demo needs a compact model (compact_model in config)")
    x = cfg.xbar
    dev = cfg.device
    W = dev.w_mtj_m
    rng = np.random.default_rng(seed)
    groups = (tuple(x.pattern.group_a), tuple(x.pattern.group_b))
    pref = [groups[j % 2] for j in range(x.n_post)]
    w = np.full((x.n_pre, x.n_post), 0.5 * W)
    for j in range(x.n_post):
        other = groups[(j + 1) % 2]
        w[list(pref[j]), j] += x.initial_bias * W
        w[list(other), j] -= x.initial_bias * W
    w += rng.normal(0.0, x.initial_jitter * W, w.shape)
    w = np.clip(w, 0.0, W)
    xb = Crossbar(x.n_pre, x.n_post, dev, cfg.compact_model, w, x.v_spike_V, x.t_spike_s)
    gain = LifNeurons.gain_for(x.v_thresh, x.n_coincident, x.v_spike_V,
                               conductance_at(0.5 * W, dev), x.dt_s)
    neurons = LifNeurons(x.n_post, x.tau_mem_s, x.v_thresh, x.t_refrac_s, gain)
    net = CrossbarNetwork(xb, neurons, cfg.stdp, x.dt_s)
    stim = x.pattern.stimulus().generate(x.n_pre, x.duration_s, rng)
    rep = run_learning(net, stim, x.duration_s, x.snapshot_interval_s)

    def split(G):
        within = np.concatenate([G[list(pref[j]), j] for j in range(x.n_post)])
        cross = np.concatenate([G[list(groups[(j + 1) % 2]), j] for j in range(x.n_post)])
        return float(within.mean()), float(cross.mean())

    w0, c0 = split(rep.conductance_snapshots[0])
    w1, c1 = split(rep.final_conductance)
    metrics = {
        "gain": gain,
        "within_mean_initial_S": w0,
        "cross_mean_initial_S": c0,
        "within_mean_final_S": w1,
        "cross_mean_final_S": c1,
        "selective": w1 > c1,
        "energy_event_sum_J": math.fsum(e.energy for e in rep.energy_log),
    }
    return rep, metrics


# --------------------------------------------------------------------------
# subcommands


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _finish(out: Path, cfg: ExperimentConfig):
    _write_json(out / "resolved_config.json", cfg.to_dict())
    manifest = {}
    for p in sorted(out.iterdir()):
        if p.is_file() and p.name != "manifest.json":
            manifest[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    _write_json(out / "manifest.json", {"version": __version__, "files": manifest})


def cmd_macrospin(cfg, out, args):
    res = macrospin_checks(cfg.material, cfg.macrospin, cfg.seed)
    _write_json(out / "macrospin.json", res)
    for name, ok in res["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(f"  precession error {res['precession_rel_error']:.3e}, "
          f"norm drift {res['max_norm_drift']:.3e}, "
          f"max energy rise {res['energy_max_rise_rel']:.3e}")
    if not all(res["checks"].values()):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_calibrate(cfg, out, args):
    traj, summary = calibration_run(cfg.material, cfg.geometry, cfg.solver, cfg.calibration)
    traj.to_csv(out / "trajectory.csv")
    _write_json(out / "calibration.json", summary)
    print(f"terminal velocity {summary['terminal_velocity_m_per_s']:.4g} m/s, "
          f"spread {summary['velocity_spread']:.3g}, monotone {summary['monotone']}")
    if args.strict and not (summary["monotone"] and summary["velocity_spread"] < 0.1):
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_dwsweep(cfg, out, args):
    sw = cfg.sweep
    data = pulse_sweep(cfg.material, cfg.geometry, cfg.solver,
                       sw.current_densities_A_per_m2, sw.durations_s)
    write_sweep_csv(out / "sweep.csv", data)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PoorFitWarning)
        model = fit_compact_model(data, min_r2=sw.min_r2)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    model.to_json(out / "compact_model.json")
    per = {}
    for tau in sw.durations_s:
        pts = [r for r in data if r[1] == tau]
        x = np.array([abs(r[0]) for r in pts])
        y = np.array([r[2] * math.copysign(1.0, r[0]) for r in pts])
        coef = np.polyfit(x, y, 1)
        yhat = np.polyval(coef, x)
        ss = float(np.sum((y - y.mean()) ** 2))
        per[repr(float(tau))] = {
            "slope_m_per_A_per_m2": float(coef[0]),
            "r_squared": 1.0 - float(np.sum((y - yhat) ** 2)) / ss if ss else 1.0,
        }
    summary = {"mobility": model.mobility, "J_th": model.J_th,
               "r_squared": model.r_squared, "poor_fit": model.poor_fit,
               "per_duration": per}
    if cfg.compact_model is None:
        summary["full_switch_current_10ns_A"] = full_switch_current(
            SynapseState.midrange(cfg.device, model), 10e-9)
    _write_json(out / "sweep_summary.json", summary)
    print(f"mobility {model.mobility:.4g} m/s per A/m^2, J_th {model.J_th:.4g} A/m^2, "
          f"R^2 {model.r_squared:.4f}")
    if args.strict and model.poor_fit:
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_stdp_curve(cfg, out, args):
    if cfg.compact_model is None:
        raise ModelUnfitted("stdp-curve needs a compact model (compact_model in config)")
    st = cfg.stdp
    syn = SynapseState.midrange(cfg.device, cfg.compact_model)
    amps = invert_amplitudes(st, cfg.compact_model, cfg.device)
    dts = np.linspace(-st.t_window, st.t_window, cfg.stdp_curve.n_points)
    curve = stdp_curve(st, syn, dts)
    write_curve_csv(out / "stdp_curve.csv", curve)
    write_waveform_csv(out / "v_pre_waveform.csv", st, amps)
    a_p, tau_p, r2_p = fit_branch(curve, +1)
    a_m, tau_m, r2_m = fit_branch(curve, -1)
    tol = cfg.stdp_curve.tau_tolerance
    summary = {
        "v_pot_V": amps.v_pot, "v_dep_V": amps.v_dep,
        "fit_plus": {"amplitude": a_p, "tau_s": tau_p, "r2_log": r2_p},
        "fit_minus": {"amplitude": a_m, "tau_s": tau_m, "r2_log": r2_m},
        "tau_plus_rel_error": abs(tau_p - st.tau_plus) / st.tau_plus,
        "tau_minus_rel_error": abs(tau_m - st.tau_minus) / st.tau_minus,
    }
    _write_json(out / "stdp_summary.json", summary)
    print(f"tau+ fit {tau_p * 1e3:.4g} ms, tau- fit {tau_m * 1e3:.4g} ms")
    if args.strict and max(summary["tau_plus_rel_error"], summary["tau_minus_rel_error"]) > tol:
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_xbar_demo(cfg, out, args):
    rep, metrics = xbar_demo(cfg, cfg.seed)
    rep.write_raster_csv(out / "raster.csv")
    rep.write_event_csv(out / "events.csv")
    rep.write_conductance_csv(out / "conductance.csv")
    rep.write_summary_json(out / "learning_report.json", metrics)
    print(f"within {metrics['within_mean_final_S'] * 1e6:.4f} uS, "
          f"cross {metrics['cross_mean_final_S'] * 1e6:.4f} uS, "
          f"total energy {rep.total_energy:.4g} J")
    if args.strict and not metrics["selective"]:
        return EXIT_VALIDATION
    return EXIT_OK


COMMANDS = {
    "macrospin": cmd_macrospin,
    "calibrate": cmd_calibrate,
    "dwsweep": cmd_dwsweep,
    "stdp-curve": cmd_stdp_curve,
    "xbar-demo": cmd_xbar_demo,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dwsyn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="experiment JSON file")
        s.add_argument("--out", default=None, help="output directory (overrides config)")
        s.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
        s.add_argument("--strict", action="store_true",
                       help="exit 1 when a result check fails")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be >= 0")
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, output_dir=args.out)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](cfg, out, args)
        _finish(out, cfg)
        return code
    except (NonFiniteState, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ModelUnfitted, InsufficientData, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
