"""Programming scheme: V_PRE waveform, delayed V_POST sampling and STDP curves.

After a pre-spike the pre-neuron drives a bipolar V_PRE waveform spanning two
learning windows. The post-neuron samples it with a short V_POST pulse fired
one window after its own spike, so the sampling offset measured from the
pre-spike is ``t_post + T_window - t_pre``. Offsets below one window map to
dt < 0 (depression), above it to dt >= 0 (potentiation).
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.optimize import curve_fit

from .device import (ModelUnfitted, ProgrammingPulse, SynapseState, apply_pulse,
                     conductance, programming_energy)
from .magcore import ConfigError


@dataclass(frozen=True)
class StdpConfig:
    a_plus: float = 0.5
    a_minus: float = 0.5
    tau_plus: float = 20e-3
    tau_minus: float = 20e-3
    t_window: float = 100e-3
    t_sample: float = 10e-9
    v_supply: float = 1.0
    # depress by flipping the local field instead of the current polarity
    field_reversal: bool = False
    # add the threshold current to the waveform so |dG| stays exponential
    threshold_compensation: bool = False

    def __post_init__(self):
        if not (self.tau_plus > 0 and self.tau_minus > 0):
            raise ConfigError("tau_plus and tau_minus must be > 0")
        if self.t_window < 3 * max(self.tau_plus, self.tau_minus):
            raise ConfigError("t_window must be at least 3*max(tau_plus, tau_minus)")
        for name in ("a_plus", "a_minus"):
            a = getattr(self, name)
            if not 0 < a <= 1:
                raise ConfigError(f"{name} must lie in (0, 1]")
        if not 0 < self.t_sample <= 1e-3 * self.t_window:
            raise ConfigError("t_sample must be positive and much shorter than t_window")
        if not self.v_supply > 0:
            raise ConfigError("v_supply must be > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "StdpConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown stdp keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Amplitudes:
    v_pot: float
    v_dep: float
    # threshold-equivalent voltage, only used with threshold_compensation
    v_th: float = 0.0


@dataclass(frozen=True)
class PlasticityEvent:
    t_pre: float
    t_post: float
    delta_t: float
    sampled_I: float
    delta_w: float
    clamped: bool = False
    energy: float = 0.0
    synapse: tuple = None


def invert_amplitudes(cfg: StdpConfig, compact, device_cfg) -> Amplitudes:
    """Peak voltages that move w by A_+/- * W_MTJ during one V_POST sample."""
    if compact is None:
        raise ModelUnfitted("invert_amplitudes needs a fitted compact model")
    scale = device_cfg.r_prog_ohm * device_cfg.hm_cross_section_m2
    drive = device_cfg.w_mtj_m / (compact.mobility * cfg.t_sample)
    return Amplitudes(v_pot=scale * (compact.J_th + cfg.a_plus * drive),
                      v_dep=scale * (compact.J_th + cfg.a_minus * drive),
                      v_th=scale * compact.J_th)


def v_pre_waveform(cfg: StdpConfig, offset, amps: Amplitudes):
    """V_PRE at ``offset`` seconds after the pre-spike (scalar or array).

    Outside [0, 2*t_window] the waveform is 0 V.
    """
    off = np.asarray(offset, dtype=float)
    T = cfg.t_window
    inside = (off >= 0) & (off <= 2 * T)
    dep = off < T
    with np.errstate(over="ignore"):
        grow_p = np.exp(-(off - T) / cfg.tau_plus)
        grow_d = np.exp(-(T - off) / cfg.tau_minus)
    if cfg.threshold_compensation:
        vp = amps.v_th + (amps.v_pot - amps.v_th) * grow_p
        vd = amps.v_th + (amps.v_dep - amps.v_th) * grow_d
    else:
        vp = amps.v_pot * grow_p
        vd = amps.v_dep * grow_d
    v = np.where(dep, -vd, vp)
    v = np.where(inside, v, 0.0)
    return float(v) if v.ndim == 0 else v


def sample_event(cfg: StdpConfig, synapse: SynapseState, t_pre: float, t_post: float,
                 amps: Amplitudes = None, synapse_id=None):
    """Apply one V_POST sample to ``synapse``; returns (event, new_synapse)."""
    dcfg = synapse.config
    if amps is None:
        amps = invert_amplitudes(cfg, synapse.compact, dcfg)
    dt = t_post - t_pre
    if abs(dt) > cfg.t_window:
        return PlasticityEvent(t_pre, t_post, dt, 0.0, 0.0, synapse=synapse_id), synapse
    # T + dt rather than t_post + T - t_pre: dt = 0 must land exactly on T
    v = v_pre_waveform(cfg, cfg.t_window + dt, amps)
    if v == 0.0:
        return PlasticityEvent(t_pre, t_post, dt, 0.0, 0.0, synapse=synapse_id), synapse
    if cfg.field_reversal:
        pulse = ProgrammingPulse(abs(v) / dcfg.r_prog_ohm, cfg.t_sample,
                                 field_dir=1 if v > 0 else -1,
                                 hm_cross_section=dcfg.hm_cross_section_m2)
    else:
        pulse = ProgrammingPulse(v / dcfg.r_prog_ohm, cfg.t_sample, field_dir=1,
                                 hm_cross_section=dcfg.hm_cross_section_m2)
    new, dw, clamped = apply_pulse(synapse, pulse)
    energy = programming_energy(pulse, cfg.v_supply)
    ev = PlasticityEvent(t_pre, t_post, dt, pulse.I if not cfg.field_reversal
                         else math.copysign(pulse.I, v),
                         dw, clamped, energy, synapse_id)
    return ev, new


def stdp_curve(cfg: StdpConfig, synapse_template: SynapseState, delta_ts):
    """Relative conductance change (dG / G_range) for each spike-time difference,
    every trial starting from a mid-range synapse."""
    start = replace(synapse_template, w=0.5 * synapse_template.W_MTJ, clamp_count=0)
    amps = invert_amplitudes(cfg, start.compact, start.config)
    g0 = conductance(start)
    rng = start.config.g_range
    out = []
    for dt in delta_ts:
        _, new = sample_event(cfg, start, 0.0, float(dt), amps)
        out.append((float(dt), (conductance(new) - g0) / rng))
    return out


def _decay(x, a, tau):
    return a * np.exp(-x / tau)


def fit_branch(curve, sign: int):
    """Exponential fit a*exp(-|dt|/tau) to one branch of an STDP curve.

    Returns (a, tau, r2_log) where r2_log is the R^2 of log|dG| vs |dt|.
    Only points with non-zero response enter the fit.
    """
    pts = np.array([(abs(dt), abs(g)) for dt, g in curve
                    if (dt > 0 if sign > 0 else dt < 0) and g != 0.0])
    if len(pts) < 3:
        raise ValueError("need at least three non-zero points on the branch")
    x, y = pts.T
    slope, icpt = np.polyfit(x, np.log(y), 1)
    p0 = (math.exp(icpt), -1.0 / slope if slope < 0 else x.max())
    (a, tau), _ = curve_fit(_decay, x, y, p0=p0, maxfev=20000)
    resid = np.log(y) - (icpt + slope * x)
    ss_tot = np.sum((np.log(y) - np.log(y).mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(tau), float(r2)


def write_curve_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta_t_s", "delta_g_over_range"])
        for dt, g in curve:
            w.writerow([repr(float(dt)), repr(float(g))])


def write_waveform_csv(path, cfg: StdpConfig, amps: Amplitudes, n: int = 2001):
    offsets = np.linspace(0.0, 2 * cfg.t_window, n)
    v = v_pre_waveform(cfg, offsets, amps)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["offset_s", "v_pre_V"])
        for o, vv in zip(offsets, v):
            w.writerow([repr(float(o)), repr(float(vv))])
