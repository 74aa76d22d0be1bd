"""Crossbar of domain-wall synapses driving leaky integrate-and-fire neurons
with online STDP.

Columns sum their currents into ideal virtual-ground amplifiers, so there are
no sneak paths. Learning runs on the millisecond tick; each programming pulse
is applied as an instantaneous state update.
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .device import DeviceConfig, ModelUnfitted, SynapseState, conductance_at
from .dwall import CompactModel
from .stdp import StdpConfig, invert_amplitudes, sample_event


class Crossbar:
    """n_pre x n_post array of synapses sharing one device configuration."""

    def __init__(self, n_pre: int, n_post: int, device: DeviceConfig = DeviceConfig(),
                 compact: CompactModel = None, w=None, v_spike: float = 0.1,
                 t_spike: float = 1e-6):
        if n_pre < 1 or n_post < 1:
            raise ValueError("crossbar needs at least one row and one column")
        self._shape = (int(n_pre), int(n_post))
        self.device = device
        self.compact = compact
        self.v_spike = float(v_spike)
        self.t_spike = float(t_spike)
        if w is None:
            w = np.full(self._shape, 0.5 * device.w_mtj_m)
        w = np.array(w, dtype=float)
        if w.shape != self._shape:
            raise ValueError(f"w has shape {w.shape}, expected {self._shape}")
        if np.any(w < 0) or np.any(w > device.w_mtj_m):
            raise ValueError("every w must lie in [0, W_MTJ]")
        self.w = w
        self.clamps = np.zeros(self._shape, dtype=int)

    @property
    def n_pre(self) -> int:
        return self._shape[0]

    @property
    def n_post(self) -> int:
        return self._shape[1]

    def conductances(self) -> np.ndarray:
        return conductance_at(self.w, self.device)

    def effective_conductances(self) -> np.ndarray:
        g = self.conductances()
        r = self.device.access_resistance_ohm
        return g if r == 0 else 1.0 / (1.0 / g + r)

    def synapse(self, i: int, j: int) -> SynapseState:
        return SynapseState(float(self.w[i, j]), self.device, self.compact,
                            int(self.clamps[i, j]))

    def set_synapse(self, i: int, j: int, s: SynapseState):
        self.w[i, j] = s.w
        self.clamps[i, j] = s.clamp_count


def weighted_sum(xb: Crossbar, active_pre) -> np.ndarray:
    """Column currents I_j = sum over active rows of v_spike * G_ij (A)."""
    rows = sorted(set(int(i) for i in active_pre))
    if not rows:
        return np.zeros(xb.n_post)
    g = xb.effective_conductances()
    return xb.v_spike * g[rows].sum(axis=0)


@dataclass
class LifNeurons:
    """Population of leaky integrate-and-fire neurons (one per column)."""

    n: int
    tau_mem: float = 20e-3
    v_thresh: float = 1.0
    t_refrac: float = 2e-3
    gain: float = 1.0
    v_mem: np.ndarray = None
    last_spike: np.ndarray = None

    def __post_init__(self):
        if not (self.tau_mem > 0 and self.v_thresh > 0 and self.t_refrac >= 0):
            raise ValueError("tau_mem and v_thresh must be > 0, t_refrac >= 0")
        if self.v_mem is None:
            self.v_mem = np.zeros(self.n)
        if self.last_spike is None:
            self.last_spike = np.full(self.n, -np.inf)

    @staticmethod
    def gain_for(v_thresh: float, n_coincident: float, v_spike: float, g_mid: float,
                 dt: float) -> float:
        """Gain at which ``n_coincident`` mid-range synapses reach threshold in one tick."""
        return v_thresh / (n_coincident * v_spike * g_mid * dt)

    def update(self, current: np.ndarray, t: float, dt: float) -> np.ndarray:
        """Leak, integrate and fire; returns indices of neurons spiking at ``t``."""
        refractory = (t - self.last_spike) < self.t_refrac - 1e-9 * dt
        v = self.v_mem * math.exp(-dt / self.tau_mem) + self.gain * current * dt
        v[refractory] = 0.0
        fired = np.nonzero(v >= self.v_thresh)[0]
        v[fired] = 0.0
        self.last_spike[fired] = t
        self.v_mem = v
        return fired


def lif_period(current: float, gain: float, tau: float, v_thresh: float, dt: float,
               t_refrac: float = 0.0) -> float:
    """Closed-form firing period of the discrete leaky integrator under a
    constant input (spike at the first tick where v >= v_thresh)."""
    a = math.exp(-dt / tau)
    u = gain * current * dt
    if u <= 0:
        return math.inf
    # v_n = u (1 - a^n) / (1 - a) after n integrating ticks from reset
    v_inf = u / (1 - a)
    if v_inf < v_thresh:
        return math.inf
    n = math.ceil(math.log(1 - v_thresh / v_inf) / math.log(a) - 1e-12)
    n_ref = math.ceil(t_refrac / dt - 1e-12) - 1 if t_refrac > 0 else 0
    return (n + max(n_ref, 0)) * dt


@dataclass
class SpikeRecord:
    time: float
    neuron: int
    kind: str


@dataclass
class EnergyEntry:
    time: float
    kind: str
    pre: int
    post: int
    energy: float


class CrossbarNetwork:
    """Stateful simulation: crossbar, post-neurons, spike history and logs."""

    def __init__(self, xb: Crossbar, neurons: LifNeurons, stdp: StdpConfig,
                 dt: float = 0.1e-3):
        if neurons.n != xb.n_post:
            raise ValueError("need one neuron per crossbar column")
        if not dt > 0:
            raise ValueError("dt must be > 0")
        if xb.compact is None:
            raise ModelUnfitted("crossbar learning needs a fitted compact model")
        self.xb = xb
        self.neurons = neurons
        self.stdp = stdp
        self.dt = dt
        self.step_index = 0
        self.amps = invert_amplitudes(stdp, xb.compact, xb.device)
        self.pre_history = [deque() for _ in range(xb.n_pre)]
        self.pending = deque()
        self.raster: list[SpikeRecord] = []
        self.events = []
        self.energy_log: list[EnergyEntry] = []

    @property
    def t(self) -> float:
        return self.step_index * self.dt

    def _nearest_pre(self, i: int, t_post: float):
        hist = self.pre_history[i]
        best = None
        for tp in hist:
            d = abs(t_post - tp)
            if d <= self.stdp.t_window and (best is None or d < abs(t_post - best)):
                best = tp
        return best

    def _program_due(self, t_now: float) -> set:
        programmed = set()
        while self.pending and self.pending[0][0] <= t_now + 0.5 * self.dt:
            _, j, t_post = self.pending.popleft()
            programmed.add(j)
            for i in range(self.xb.n_pre):
                t_pre = self._nearest_pre(i, t_post)
                if t_pre is None:
                    continue
                ev, new = sample_event(self.stdp, self.xb.synapse(i, j), t_pre, t_post,
                                       self.amps, synapse_id=(i, j))
                self.xb.set_synapse(i, j, new)
                self.events.append(ev)
                if ev.energy:
                    self.energy_log.append(EnergyEntry(t_now, "program", i, j, ev.energy))
        return programmed

    def tick(self, pre_spikes=()) -> np.ndarray:
        """Advance one tick; returns the indices of post-neurons that fired."""
        self.step_index += 1
        t = self.t
        horizon = t - 2 * self.stdp.t_window
        for hist in self.pre_history:
            while hist and hist[0] < horizon:
                hist.popleft()
        active = sorted(set(int(i) for i in pre_spikes))
        for i in active:
            self.pre_history[i].append(t)
            self.raster.append(SpikeRecord(t, i, "pre"))
        # transmission path is off for a column while it is being programmed
        programmed = self._program_due(t)
        current = weighted_sum(self.xb, active)
        if programmed:
            current[sorted(programmed)] = 0.0
        if active:
            g = self.xb.effective_conductances()
            for i in active:
                for j in range(self.xb.n_post):
                    if j in programmed:
                        continue
                    e = self.xb.v_spike ** 2 * g[i, j] * self.xb.t_spike
                    self.energy_log.append(EnergyEntry(t, "spike", i, j, e))
        fired = self.neurons.update(current, t, self.dt)
        for j in fired:
            self.raster.append(SpikeRecord(t, int(j), "post"))
            self.pending.append((t + self.stdp.t_window, int(j), t))
        return fired


@dataclass
class LearningReport:
    times: list = field(default_factory=list)
    conductance_snapshots: list = field(default_factory=list)
    raster: list = field(default_factory=list)
    events: list = field(default_factory=list)
    energy_log: list = field(default_factory=list)
    programming_energy: float = 0.0
    spike_energy: float = 0.0
    clamp_counts: np.ndarray = None
    pending_samples: int = 0

    @property
    def total_energy(self) -> float:
        # correctly rounded sum over the whole ledger
        return math.fsum(e.energy for e in self.energy_log)

    @property
    def final_conductance(self) -> np.ndarray:
        return self.conductance_snapshots[-1]

    def summary(self) -> dict:
        g = self.final_conductance
        return {
            "programming_energy_J": self.programming_energy,
            "spike_energy_J": self.spike_energy,
            "total_energy_J": self.total_energy,
            "n_programming_events": sum(1 for e in self.energy_log if e.kind == "program"),
            "n_pre_spikes": sum(1 for r in self.raster if r.kind == "pre"),
            "n_post_spikes": sum(1 for r in self.raster if r.kind == "post"),
            "final_conductance_mean_S": float(np.mean(g)),
            "final_conductance_min_S": float(np.min(g)),
            "final_conductance_max_S": float(np.max(g)),
            "clamp_count": int(np.sum(self.clamp_counts)),
            "pending_samples": self.pending_samples,
        }

    def write_raster_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "neuron_id", "kind"])
            for r in self.raster:
                w.writerow([repr(r.time), r.neuron, r.kind])

    def write_event_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "synapse_id", "pulse_I_A", "delta_w_m", "clamped",
                        "energy_J"])
            for e in self.events:
                w.writerow([repr(e.t_post), f"{e.synapse[0]}:{e.synapse[1]}",
                            repr(e.sampled_I), repr(e.delta_w), int(e.clamped),
                            repr(e.energy)])

    def write_conductance_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            n_pre, n_post = self.conductance_snapshots[0].shape
            w.writerow(["time_s"] + [f"G_{i}_{j}" for i in range(n_pre)
                                     for j in range(n_post)])
            for t, g in zip(self.times, self.conductance_snapshots):
                w.writerow([repr(t)] + [repr(float(v)) for v in g.ravel()])

    def write_summary_json(self, path, extra=None):
        d = self.summary()
        if extra:
            d.update(extra)
        with open(path, "w") as fh:
            json.dump(d, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_learning(net: CrossbarNetwork, stimulus, duration: float,
                 snapshot_interval: float = None) -> LearningReport:
    """Drive ``net`` with pre-spike trains (one sorted sequence of times per
    pre-neuron) for ``duration`` seconds."""
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if len(stimulus) != net.xb.n_pre:
        raise ValueError("need one spike train per pre-neuron")
    n_ticks = int(round(duration / net.dt))
    start = net.step_index
    by_tick = {}
    for i, train in enumerate(stimulus):
        for ts in train:
            k = int(round(ts / net.dt))
            if start < k <= start + n_ticks:
                by_tick.setdefault(k, set()).add(i)
    every = n_ticks + 1 if snapshot_interval is None else \
        max(1, int(round(snapshot_interval / net.dt)))
    rep = LearningReport()
    rep.times.append(net.t)
    rep.conductance_snapshots.append(net.xb.conductances().copy())
    for k in range(1, n_ticks + 1):
        net.tick(by_tick.get(start + k, ()))
        if k % every == 0 and k != n_ticks:
            rep.times.append(net.t)
            rep.conductance_snapshots.append(net.xb.conductances().copy())
    if n_ticks:
        rep.times.append(net.t)
        rep.conductance_snapshots.append(net.xb.conductances().copy())
    rep.raster = list(net.raster)
    rep.events = list(net.events)
    rep.energy_log = list(net.energy_log)
    rep.programming_energy = math.fsum(e.energy for e in rep.energy_log if e.kind == "program")
    rep.spike_energy = math.fsum(e.energy for e in rep.energy_log if e.kind == "spike")
    rep.clamp_counts = net.xb.clamps.copy()
    rep.pending_samples = len(net.pending)
    return rep


@dataclass(frozen=True)
class PatternStimulus:
    """Two-group correlated input: rows ``group_a`` fire together in short
    bursts at Poisson times, likewise ``group_b``, plus independent background."""

    group_a: tuple = (0, 1, 2, 3)
    group_b: tuple = (4, 5, 6, 7)
    pattern_rate_hz: float = 5.0
    burst_volleys: int = 3
    burst_interval: float = 3e-3
    jitter: float = 0.0
    background_rate_hz: float = 1.0

    def generate(self, n_pre: int, duration: float, rng: np.random.Generator):
        trains = [[] for _ in range(n_pre)]
        for group in (self.group_a, self.group_b):
            n = rng.poisson(self.pattern_rate_hz * duration)
            onsets = np.sort(rng.uniform(0.0, duration, n))
            for t0 in onsets:
                for v in range(self.burst_volleys):
                    for i in group:
                        t = t0 + v * self.burst_interval
                        if self.jitter:
                            t += rng.normal(0.0, self.jitter)
                        if 0 < t < duration:
                            trains[i].append(float(t))
        for i in range(n_pre):
            n = rng.poisson(self.background_rate_hz * duration)
            trains[i].extend(float(t) for t in rng.uniform(0.0, duration, n))
        return [sorted(tr) for tr in trains]
