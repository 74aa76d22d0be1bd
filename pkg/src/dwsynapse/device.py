"""Four-terminal synapse: conductance from wall position, programming pulses,
spike transmission and energy bookkeeping.

Current convention: a positive programming current I flows from terminal C
to terminal D through the heavy metal, i.e. along -x. With the in-plane field
along +x this grows the +z (parallel) domain, so w increases.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .dwall import CompactModel
from .magcore import ConfigError


class ModelUnfitted(RuntimeError):
    """A compact wall-mobility model is required but none was supplied."""


@dataclass(frozen=True)
class DeviceConfig:
    g_p_max_S: float = 2e-6
    g_ap_max_S: float = 1e-6
    g_dw_S: float = 0.0
    w_mtj_m: float = 100e-9
    access_resistance_ohm: float = 0.0
    hm_cross_section_m2: float = 200e-9 * 10e-9
    v_supply_V: float = 1.0
    r_prog_ohm: float = 5e3
    hm_spike_fraction: float = 1.0

    def __post_init__(self):
        if not self.g_p_max_S > self.g_ap_max_S > 0:
            raise ConfigError("need g_p_max_S > g_ap_max_S > 0")
        if self.g_dw_S < 0:
            raise ConfigError("g_dw_S must be >= 0")
        for name in ("w_mtj_m", "hm_cross_section_m2", "r_prog_ohm"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.access_resistance_ohm < 0:
            raise ConfigError("access_resistance_ohm must be >= 0")
        if not 0 <= self.hm_spike_fraction <= 1:
            raise ConfigError("hm_spike_fraction must lie in [0, 1]")

    @property
    def g_range(self) -> float:
        return self.g_p_max_S - self.g_ap_max_S

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown device keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SynapseState:
    """Compact device state. ``w`` is the width of the domain parallel to the
    pinned layer; ``clamp_count`` counts pulses that hit a rail."""

    w: float
    config: DeviceConfig = DeviceConfig()
    compact: CompactModel = None
    clamp_count: int = 0

    def __post_init__(self):
        if not (0.0 <= self.w <= self.config.w_mtj_m):
            raise ValueError(f"w={self.w!r} outside [0, {self.config.w_mtj_m!r}]")

    @classmethod
    def midrange(cls, config: DeviceConfig = DeviceConfig(), compact=None):
        return cls(0.5 * config.w_mtj_m, config, compact)

    @property
    def W_MTJ(self) -> float:
        return self.config.w_mtj_m

    def conductance(self) -> float:
        return conductance(self)


def conductance_at(w, cfg: DeviceConfig):
    """Device conductance for parallel-domain width(s) ``w`` (scalar or array)."""
    f = np.asarray(w, dtype=float) / cfg.w_mtj_m
    g = cfg.g_ap_max_S * (1.0 - f) + cfg.g_p_max_S * f + cfg.g_dw_S
    return float(g) if np.ndim(g) == 0 else g


def conductance(s: SynapseState) -> float:
    """G_AP (1 - w/W) + G_P w/W + G_DW."""
    return conductance_at(s.w, s.config)


def conductance_columns(s: SynapseState, n_columns: int = 50) -> float:
    """Independent route: slice the MTJ into columns along y, each fully P or
    AP (one partial column at the wall), and add them in parallel."""
    cfg = s.config
    edges = np.linspace(0.0, cfg.w_mtj_m, n_columns + 1)
    width = np.diff(edges)
    p_part = np.clip(s.w - edges[:-1], 0.0, width)
    g = 0.0
    for wp, wc in zip(p_part, width):
        g += cfg.g_p_max_S * wp / cfg.w_mtj_m + cfg.g_ap_max_S * (wc - wp) / cfg.w_mtj_m
    return g + cfg.g_dw_S


@dataclass(frozen=True)
class ProgrammingPulse:
    I: float
    duration: float
    field_dir: int = 1
    hm_cross_section: float = DeviceConfig.hm_cross_section_m2

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("pulse duration must be > 0")
        if not self.hm_cross_section > 0:
            raise ValueError("cross-section must be > 0")
        if self.field_dir not in (1, -1):
            raise ValueError("field_dir must be +1 or -1")

    @property
    def J(self) -> float:
        return self.I / self.hm_cross_section


def pulse_delta_w(compact: CompactModel, p: ProgrammingPulse) -> float:
    """Unclamped change in w caused by ``p``."""
    if compact is None:
        raise ModelUnfitted("apply_pulse needs a fitted compact model")
    over = max(abs(p.J) - compact.J_th, 0.0)
    if over == 0.0 or p.I == 0:
        return 0.0
    return math.copysign(1.0, p.I) * p.field_dir * compact.mobility * over * p.duration


def apply_pulse(s: SynapseState, p: ProgrammingPulse):
    """Move the wall by the compact-model response to ``p``.

    Returns ``(new_state, delta_w, clamped)`` with w held to [0, W_MTJ].
    """
    dw = pulse_delta_w(s.compact, p)
    target = s.w + dw
    clamped = not (0.0 <= target <= s.W_MTJ)
    w = min(max(target, 0.0), s.W_MTJ)
    new = replace(s, w=w, clamp_count=s.clamp_count + int(clamped))
    return new, w - s.w, clamped


@dataclass(frozen=True)
class SpikeTransmission:
    current: float
    charge: float
    hm_current_density: float
    above_threshold: bool


def transmit_spike(s: SynapseState, v_spike: float, duration: float,
                   access_resistance: float = None) -> SpikeTransmission:
    """Read current through the MTJ for a spike of ``v_spike`` volts.

    ``above_threshold`` flags spikes whose heavy-metal share exceeds the
    wall-motion threshold; with a zero threshold any read current is flagged.
    """
    cfg = s.config
    r_acc = cfg.access_resistance_ohm if access_resistance is None else access_resistance
    g = conductance(s)
    current = v_spike / (1.0 / g + r_acc)
    j_hm = cfg.hm_spike_fraction * abs(current) / cfg.hm_cross_section_m2
    j_th = s.compact.J_th if s.compact is not None else 0.0
    flagged = j_hm > j_th
    return SpikeTransmission(current, current * duration, j_hm, bool(flagged))


def programming_energy(p: ProgrammingPulse, v_supply: float) -> float:
    """Supply energy V*|I|*t of one programming pulse."""
    return v_supply * abs(p.I) * p.duration


def full_switch_current(s: SynapseState, duration: float) -> float:
    """Current that sweeps the wall across the whole MTJ in ``duration``."""
    if s.compact is None:
        raise ModelUnfitted("full_switch_current needs a fitted compact model")
    c = s.compact
    return s.config.hm_cross_section_m2 * (c.J_th + s.W_MTJ / (c.mobility * duration))
