"""Effective field and RK4 integration of the LLG equation with a
damping-like spin-orbit torque.

The Gilbert form

    dm/dt = -g m x H + a m x dm/dt + g b m x (mp x m)

is solved algebraically for dm/dt, giving

    (1 + a^2) dm/dt = -g m x H - a g m x (m x H)
                      + g b m x (mp x m) + a g b m x mp

with g the gyromagnetic ratio and b the spin-torque field magnitude in A/m.
The hot loop lives in numba kernels; ``effective_field`` and ``llg_rhs`` are
plain numpy versions of the same maths, used for inspection and as the
reference the kernels are tested against.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .magcore import (E_CHARGE, HBAR, MU0, GridGeometry, MagnetizationGrid,
                      MaterialParams, gamma_gyro)

GAMMA = gamma_gyro()

# imaginary-axis stability bound of classic RK4 is 2*sqrt(2); keep a margin
_RK4_MARGIN = 2.0


class NonFiniteState(FloatingPointError):
    """The integrator produced NaN/Inf, usually because dt is too large."""


@dataclass(frozen=True)
class FieldTerms:
    """Which effective-field contributions are active.

    ``thin_film_demag`` folds the local demagnetizing field into the
    anisotropy (K_eff = Ku - mu0 Ms^2 / 2) instead of using Ku directly.
    """

    material: MaterialParams
    exchange: bool = True
    anisotropy: bool = True
    thin_film_demag: bool = True
    h_ext: tuple = (0.0, 0.0, 0.0)

    @property
    def K(self) -> float:
        if not self.anisotropy:
            return 0.0
        return self.material.K_eff if self.thin_film_demag else self.material.Ku

    @property
    def h_ext_vec(self) -> np.ndarray:
        return np.asarray(self.h_ext, dtype=float)


def beta_field(J: float, mat: MaterialParams) -> float:
    """Spin-torque field magnitude hbar P theta |J| / (2 mu0 e t Ms), A/m."""
    return HBAR * mat.P * mat.theta_SH * abs(J) / (
        2.0 * MU0 * E_CHARGE * mat.t_FL * mat.Ms)


@dataclass(frozen=True)
class SpinTorqueDrive:
    """Charge current density J (A/m^2, positive along +x) in the heavy metal.

    ``she_sign`` fixes the spin-Hall convention: with the default (+1),
    current along -x accumulates +y spins at the interface.
    """

    J: float = 0.0
    material: MaterialParams = field(default_factory=MaterialParams)
    she_sign: int = 1

    def __post_init__(self):
        if not math.isfinite(self.J):
            raise ValueError("current density must be finite")
        if self.she_sign not in (1, -1):
            raise ValueError("she_sign must be +1 or -1")

    @property
    def m_p(self) -> np.ndarray:
        if self.J == 0:
            return np.array([0.0, 1.0, 0.0])
        return np.array([0.0, -self.she_sign * math.copysign(1.0, self.J), 0.0])

    @property
    def beta(self) -> float:
        return beta_field(self.J, self.material)


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 settings."""

    dt: float = 0.5e-12
    renormalize_every: int = 1
    sample_interval: float = 10e-12

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be > 0")
        if self.renormalize_every < 1:
            raise ValueError("renormalize_every must be >= 1")
        if not self.sample_interval > 0:
            raise ValueError("sample_interval must be > 0")

    @classmethod
    def auto(cls, geometry: GridGeometry, terms: FieldTerms, drive=None,
             sample_interval=10e-12, renormalize_every=1):
        return cls(max_stable_dt(geometry, terms, drive),
                   renormalize_every, sample_interval)


def max_stable_dt(geometry: GridGeometry, terms: FieldTerms, drive=None) -> float:
    """Upper bound on a safe RK4 step from the stiffest precession frequency."""
    mat = terms.material
    h = np.linalg.norm(terms.h_ext_vec) + 2 * abs(terms.K) / (MU0 * mat.Ms)
    if terms.exchange:
        lam = 0.0
        if geometry.nx > 1:
            lam += 4.0 / geometry.dx ** 2
        if geometry.ny > 1:
            lam += 4.0 / geometry.dy ** 2
        h += 2 * mat.A_ex / (MU0 * mat.Ms) * lam
    if drive is not None:
        h += drive.beta
    if h == 0:
        return 1e-9
    omega = GAMMA * h * math.sqrt(1 + mat.alpha ** 2) / (1 + mat.alpha ** 2)
    return _RK4_MARGIN / omega


def _coeffs(geometry: GridGeometry, terms: FieldTerms):
    mat = terms.material
    c = 2 * mat.A_ex / (MU0 * mat.Ms) if terms.exchange else 0.0
    cx = c / geometry.dx ** 2 if geometry.nx > 1 else 0.0
    cy = c / geometry.dy ** 2 if geometry.ny > 1 else 0.0
    hk = 2 * terms.K / (MU0 * mat.Ms)
    return cx, cy, hk


def _laplacian(m: np.ndarray, dx: float, dy: float) -> np.ndarray:
    # Neumann boundaries: the mirror ghost equals the edge cell
    p = np.pad(m, ((1, 1), (1, 1), (0, 0)), mode="edge")
    lap = (p[2:, 1:-1] - 2 * m + p[:-2, 1:-1]) / dx ** 2
    lap += (p[1:-1, 2:] - 2 * m + p[1:-1, :-2]) / dy ** 2
    return lap


def _heff(m, g: GridGeometry, terms: FieldTerms) -> np.ndarray:
    mat = terms.material
    h = np.zeros_like(m)
    if terms.exchange:
        h += 2 * mat.A_ex / (MU0 * mat.Ms) * _laplacian(m, g.dx, g.dy)
    if terms.anisotropy:
        h[..., 2] += 2 * terms.K / (MU0 * mat.Ms) * m[..., 2]
    h += terms.h_ext_vec
    return h


def _rhs(m, h, terms: FieldTerms, drive) -> np.ndarray:
    a = terms.material.alpha
    pre = GAMMA / (1 + a * a)
    mxh = np.cross(m, h)
    out = -pre * (mxh + a * np.cross(m, mxh))
    if drive is not None and drive.J != 0:
        mp = drive.m_p
        # m x (mp x m) = mp - (m.mp) m
        dl = mp - np.sum(m * mp, axis=-1)[..., None] * m
        out += pre * drive.beta * (dl + a * np.cross(m, mp))
    return out


def effective_field(grid: MagnetizationGrid, terms: FieldTerms) -> np.ndarray:
    """H_eff per cell in A/m: exchange + uniaxial (z) anisotropy + Zeeman."""
    return _heff(grid.m, grid.geometry, terms)


def llg_rhs(grid: MagnetizationGrid, terms: FieldTerms, drive=None,
            h_eff=None) -> np.ndarray:
    """dm/dt in 1/s for every cell (explicit Landau-Lifshitz form)."""
    h = effective_field(grid, terms) if h_eff is None else np.asarray(h_eff, dtype=float)
    return _rhs(grid.m, h, terms, drive)


def micromagnetic_energy(grid: MagnetizationGrid, terms: FieldTerms) -> float:
    """Exchange + anisotropy + Zeeman energy in J, discretised so that
    H_eff = -dE/dm / (mu0 Ms V)."""
    m = grid.m
    g = grid.geometry
    mat = terms.material
    v = g.cell_volume
    e = 0.0
    if terms.exchange:
        if g.nx > 1:
            e += mat.A_ex * v * np.sum((m[1:] - m[:-1]) ** 2) / g.dx ** 2
        if g.ny > 1:
            e += mat.A_ex * v * np.sum((m[:, 1:] - m[:, :-1]) ** 2) / g.dy ** 2
    if terms.anisotropy:
        e -= terms.K * v * np.sum(m[..., 2] ** 2)
    e -= MU0 * mat.Ms * v * np.sum(m @ terms.h_ext_vec)
    return float(e)


# --------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, fastmath=False)
def _rhs_kernel(m, out, cx, cy, hk, hx, hy, hz, pre, alpha, b, px, py, pz):
    nx, ny = m.shape[0], m.shape[1]
    for i in range(nx):
        im = i - 1 if i > 0 else 0
        ip = i + 1 if i < nx - 1 else nx - 1
        for j in range(ny):
            jm = j - 1 if j > 0 else 0
            jp = j + 1 if j < ny - 1 else ny - 1
            mx = m[i, j, 0]
            my = m[i, j, 1]
            mz = m[i, j, 2]
            Hx = hx + cx * (m[ip, j, 0] - 2 * mx + m[im, j, 0]) \
                + cy * (m[i, jp, 0] - 2 * mx + m[i, jm, 0])
            Hy = hy + cx * (m[ip, j, 1] - 2 * my + m[im, j, 1]) \
                + cy * (m[i, jp, 1] - 2 * my + m[i, jm, 1])
            Hz = hz + hk * mz + cx * (m[ip, j, 2] - 2 * mz + m[im, j, 2]) \
                + cy * (m[i, jp, 2] - 2 * mz + m[i, jm, 2])
            # m x H
            ax = my * Hz - mz * Hy
            ay = mz * Hx - mx * Hz
            az = mx * Hy - my * Hx
            # m x (m x H)
            bx = my * az - mz * ay
            by = mz * ax - mx * az
            bz = mx * ay - my * ax
            ox = -pre * (ax + alpha * bx)
            oy = -pre * (ay + alpha * by)
            oz = -pre * (az + alpha * bz)
            if b != 0.0:
                mdp = mx * px + my * py + mz * pz
                cxp = my * pz - mz * py
                cyp = mz * px - mx * pz
                czp = mx * py - my * px
                ox += pre * b * (px - mdp * mx + alpha * cxp)
                oy += pre * b * (py - mdp * my + alpha * cyp)
                oz += pre * b * (pz - mdp * mz + alpha * czp)
            out[i, j, 0] = ox
            out[i, j, 1] = oy
            out[i, j, 2] = oz


@numba.njit(cache=True)
def _renorm(m):
    nx, ny = m.shape[0], m.shape[1]
    for i in range(nx):
        for j in range(ny):
            n = math.sqrt(m[i, j, 0] ** 2 + m[i, j, 1] ** 2 + m[i, j, 2] ** 2)
            m[i, j, 0] /= n
            m[i, j, 1] /= n
            m[i, j, 2] /= n


@numba.njit(cache=True)
def _advance(m, n_steps, dt, renorm_every, step0, cx, cy, hk, hx, hy, hz,
             pre, alpha, b, px, py, pz):
    k1 = np.empty_like(m)
    k2 = np.empty_like(m)
    k3 = np.empty_like(m)
    k4 = np.empty_like(m)
    tmp = np.empty_like(m)
    for s in range(n_steps):
        _rhs_kernel(m, k1, cx, cy, hk, hx, hy, hz, pre, alpha, b, px, py, pz)
        tmp[:] = m + 0.5 * dt * k1
        _rhs_kernel(tmp, k2, cx, cy, hk, hx, hy, hz, pre, alpha, b, px, py, pz)
        tmp[:] = m + 0.5 * dt * k2
        _rhs_kernel(tmp, k3, cx, cy, hk, hx, hy, hz, pre, alpha, b, px, py, pz)
        tmp[:] = m + dt * k3
        _rhs_kernel(tmp, k4, cx, cy, hk, hx, hy, hz, pre, alpha, b, px, py, pz)
        m += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (step0 + s + 1) % renorm_every == 0:
            _renorm(m)


def _kernel_args(grid, terms, drive):
    cx, cy, hk = _coeffs(grid.geometry, terms)
    hx, hy, hz = terms.h_ext_vec
    a = terms.material.alpha
    pre = GAMMA / (1 + a * a)
    if drive is None or drive.J == 0:
        b, mp = 0.0, (0.0, 0.0, 0.0)
    else:
        b, mp = drive.beta, tuple(drive.m_p)
    return (cx, cy, hk, hx, hy, hz, pre, a, b) + tuple(float(v) for v in mp)


def rhs_compiled(grid: MagnetizationGrid, terms: FieldTerms, drive=None) -> np.ndarray:
    """Same quantity as ``llg_rhs`` evaluated by the compiled kernel."""
    out = np.empty_like(grid.m)
    _rhs_kernel(grid.m, out, *_kernel_args(grid, terms, drive))
    return out


@dataclass
class StepDiagnostics:
    steps: int
    max_norm_drift: float
    mean_mz: float


def _check_finite(grid):
    if not np.all(np.isfinite(grid.m)):
        raise NonFiniteState("magnetization became non-finite; reduce dt")


def advance(grid: MagnetizationGrid, terms: FieldTerms, drive, cfg: IntegratorConfig,
            n_steps: int, step0: int = 0) -> StepDiagnostics:
    """Take ``n_steps`` RK4 steps in place."""
    if n_steps > 0:
        _advance(grid.m, int(n_steps), cfg.dt, cfg.renormalize_every, int(step0),
                 *_kernel_args(grid, terms, drive))
    _check_finite(grid)
    return StepDiagnostics(n_steps, grid.max_norm_drift(), float(grid.m[..., 2].mean()))


def step(grid: MagnetizationGrid, terms: FieldTerms, drive=None,
         cfg: IntegratorConfig = IntegratorConfig()) -> StepDiagnostics:
    """One RK4 step of the LLG right-hand side; the grid is updated in place."""
    return advance(grid, terms, drive, cfg, 1)


def rk4_step_reference(grid: MagnetizationGrid, terms: FieldTerms, drive, dt: float):
    """Pure-numpy RK4 step without renormalization (testing aid)."""
    g = grid.geometry

    def f(m):
        return _rhs(m, _heff(m, g, terms), terms, drive)

    m0 = grid.m
    k1 = f(m0)
    k2 = f(m0 + 0.5 * dt * k1)
    k3 = f(m0 + 0.5 * dt * k2)
    k4 = f(m0 + dt * k3)
    grid.m = m0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return grid


@dataclass
class Trajectory:
    """Sampled run output."""

    time: list = field(default_factory=list)
    wall_pos: list = field(default_factory=list)
    mean_mz: list = field(default_factory=list)
    max_norm_drift: list = field(default_factory=list)
    mean_m: list = field(default_factory=list)

    def append(self, t, grid, wall):
        self.time.append(t)
        self.wall_pos.append(wall)
        self.mean_mz.append(float(grid.m[..., 2].mean()))
        self.max_norm_drift.append(grid.max_norm_drift())
        self.mean_m.append(grid.mean())

    def __len__(self):
        return len(self.time)

    def as_arrays(self):
        return (np.asarray(self.time), np.asarray(self.wall_pos),
                np.asarray(self.mean_mz), np.asarray(self.max_norm_drift))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "wall_pos_m", "mean_mz", "max_norm_drift"])
            for row in zip(self.time, self.wall_pos, self.mean_mz, self.max_norm_drift):
                w.writerow([repr(float(v)) for v in row])


def run(grid: MagnetizationGrid, terms: FieldTerms, drive, duration: float,
        cfg: IntegratorConfig, region=None, polarity: int = 1,
        sample_times=None) -> Trajectory:
    """Integrate for ``duration`` seconds, sampling every ``cfg.sample_interval``.

    Wall positions come from :func:`dwall.wall_position`; a saturated grid
    records NaN. ``sample_times`` optionally adds exact extra sample instants
    (they are rounded to the nearest step).
    """
    from .dwall import NoWall, wall_position

    if duration < 0:
        raise ValueError("duration must be >= 0")
    if cfg.dt > max_stable_dt(grid.geometry, terms, drive) * 1.5:
        warnings.warn(f"dt={cfg.dt:.3g} s exceeds the RK4 stability estimate "
                      f"{max_stable_dt(grid.geometry, terms, drive):.3g} s",
                      RuntimeWarning, stacklevel=2)

    def wall():
        try:
            return wall_position(grid, region=region, polarity=polarity)
        except NoWall:
            return float("nan")

    total = int(round(duration / cfg.dt))
    every = max(1, int(round(cfg.sample_interval / cfg.dt)))
    marks = set(range(every, total + 1, every))
    marks.add(total)
    if sample_times is not None:
        marks.update(int(round(t / cfg.dt)) for t in sample_times if 0 < t <= duration)
    marks.discard(0)
    traj = Trajectory()
    traj.append(0.0, grid, wall())
    done = 0
    for mark in sorted(marks):
        advance(grid, terms, drive, cfg, mark - done, step0=done)
        done = mark
        traj.append(done * cfg.dt, grid, wall())
    return traj
