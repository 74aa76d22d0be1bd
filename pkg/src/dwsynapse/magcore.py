"""Units, material parameters, grid geometry and the magnetization state.

Everything internal is SI. CGS quantities (Gauss, A/cm^2) are accepted only
through the conversion helpers below.

Coordinates: x runs along the magnet length, y along its width and z is the
film normal (easy axis). A longitudinal domain wall lies along x and moves
along y.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy import constants as sc

MU0 = sc.mu_0
HBAR = sc.hbar
E_CHARGE = sc.e
MU_B = sc.physical_constants["Bohr magneton"][0]

NORM_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid or unknown configuration value."""


def gamma_gyro(mu_b: float = MU_B) -> float:
    """Gyromagnetic ratio 2*mu_B*mu0/hbar in m/(A s)."""
    return 2.0 * mu_b * MU0 / HBAR


def oersted_field_from_gauss(h):
    """Convert a field given in Gauss (Oe in vacuum) to A/m."""
    return h * 1e3 / (4.0 * math.pi)


def gauss_from_field(h):
    return h * 4.0 * math.pi / 1e3


def current_density_from_cgs(j):
    """Convert A/cm^2 to A/m^2."""
    return j * 1e4


def current_density_to_cgs(j):
    return j / 1e4


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not n > 0 or not np.isfinite(n):
        raise ValueError("cannot normalize a zero or non-finite vector")
    return v / n


@dataclass(frozen=True)
class MaterialParams:
    """Free-layer material constants (SI)."""

    Ms: float = 8.0e5
    A_ex: float = 3.0e-11
    Ku: float = 6.0e5
    alpha: float = 0.024
    theta_SH: float = 0.08
    P: float = 1.0
    t_FL: float = 1.0e-9

    def __post_init__(self):
        for name in ("Ms", "A_ex", "Ku", "theta_SH", "t_FL"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ConfigError(f"{name} must be finite and > 0, got {val!r}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ConfigError(f"alpha must be >= 0, got {self.alpha!r}")
        if not (0 < self.P <= 1):
            raise ConfigError(f"P must lie in (0, 1], got {self.P!r}")
        if self.K_eff <= 0:
            raise ConfigError(
                f"K_eff = Ku - mu0*Ms^2/2 = {self.K_eff:.4g} J/m^3 is not positive; "
                "the film would lose perpendicular anisotropy")

    @property
    def K_eff(self) -> float:
        """Anisotropy after the thin-film demagnetizing correction."""
        return self.Ku - 0.5 * MU0 * self.Ms ** 2

    @property
    def wall_delta(self) -> float:
        """Wall width parameter sqrt(A/Ku); pi times this is the full width."""
        return math.sqrt(self.A_ex / self.Ku)

    @property
    def wall_delta_eff(self) -> float:
        """Equilibrium wall parameter once demag is folded into K_eff."""
        return math.sqrt(self.A_ex / self.K_eff)

    @property
    def exchange_length(self) -> float:
        return math.sqrt(2 * self.A_ex / (MU0 * self.Ms ** 2))


@dataclass(frozen=True)
class GridGeometry:
    """Single-layer rectangular lattice of nx*ny cells."""

    nx: int
    ny: int
    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ConfigError("grid needs at least one cell in x and y")
        for name in ("dx", "dy", "dz"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be > 0")

    @classmethod
    def from_dimensions(cls, lx, ly, lz, cell=(2e-9, 2e-9, 1e-9)):
        """Lattice covering an lx*ly*lz magnet; lz must equal one cell."""
        dx, dy, dz = cell
        nx = max(1, int(round(lx / dx)))
        ny = max(1, int(round(ly / dy)))
        if not math.isclose(lz, dz, rel_tol=1e-6):
            raise ConfigError("only a single cell layer in z is supported")
        return cls(nx, ny, dx, dy, dz)

    @property
    def length(self) -> float:
        return self.nx * self.dx

    @property
    def width(self) -> float:
        return self.ny * self.dy

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.dz

    def y_centers(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx


class MagnetizationGrid:
    """Unit-vector field m of shape (nx, ny, 3) over a GridGeometry."""

    def __init__(self, geometry: GridGeometry, m=None):
        self.geometry = geometry
        shape = (geometry.nx, geometry.ny, 3)
        if m is None:
            m = np.zeros(shape)
            m[..., 2] = 1.0
        m = np.array(m, dtype=float)
        if m.shape == (3,):
            m = np.broadcast_to(m, shape).copy()
        if m.shape != shape:
            raise ValueError(f"magnetization has shape {m.shape}, expected {shape}")
        norms = np.linalg.norm(m, axis=-1)
        if not np.all(np.isfinite(norms)) or np.any(norms == 0):
            raise ValueError("magnetization contains zero or non-finite vectors")
        self.m = m / norms[..., None]

    @classmethod
    def uniform(cls, geometry, direction):
        return cls(geometry, normalize(direction))

    def copy(self) -> "MagnetizationGrid":
        return MagnetizationGrid(self.geometry, self.m.copy())

    def renormalize(self):
        self.m /= np.linalg.norm(self.m, axis=-1)[..., None]

    def max_norm_drift(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.m, axis=-1) - 1.0)))

    def mean(self) -> np.ndarray:
        return self.m.reshape(-1, 3).mean(axis=0)


# JSON keys follow the rows of the simulation-parameter table.
_MATERIAL_KEYS = {
    "saturation_magnetization_A_per_m": "Ms",
    "exchange_J_per_m": "A_ex",
    "perpendicular_anisotropy_J_per_m3": "Ku",
    "gilbert_damping": "alpha",
    "spin_orbit_torque_efficiency": "theta_SH",
    "spin_polarization": "P",
    "free_layer_thickness_m": "t_FL",
}


@dataclass(frozen=True)
class DeviceGeometry:
    """Physical dimensions of the synapse stack (metres)."""

    ferromagnet_m: tuple = (200e-9, 100e-9, 1e-9)
    grid_cell_m: tuple = (2e-9, 2e-9, 1e-9)
    heavy_metal_m: tuple = (200e-9, 1000e-9, 10e-9)
    mtj_m: tuple = (120e-9, 100e-9, 1e-9)
    mgo_thickness_m: float = 1.2e-9
    domain_wall_width_m: float = 22e-9
    magnetic_field_G: float = 10.0

    def grid(self) -> GridGeometry:
        return GridGeometry.from_dimensions(*self.ferromagnet_m, cell=self.grid_cell_m)

    @property
    def field_A_per_m(self) -> float:
        return oersted_field_from_gauss(self.magnetic_field_G)

    def mtj_region(self):
        """(x0, x1, y0, y1) of the MTJ footprint, centred on the magnet."""
        lx, ly = self.ferromagnet_m[0], self.ferromagnet_m[1]
        mx, my = self.mtj_m[0], self.mtj_m[1]
        x0 = 0.5 * (lx - mx)
        y0 = 0.5 * (ly - my)
        return (x0, x0 + mx, y0, y0 + my)


_GEOMETRY_KEYS = {
    "ferromagnet_dimensions_m": "ferromagnet_m",
    "grid_size_m": "grid_cell_m",
    "heavy_metal_dimensions_m": "heavy_metal_m",
    "mtj_dimensions_m": "mtj_m",
    "mgo_thickness_m": "mgo_thickness_m",
    "domain_wall_width_m": "domain_wall_width_m",
    "magnetic_field_G": "magnetic_field_G",
}


def material_from_dict(d: dict) -> MaterialParams:
    unknown = set(d) - set(_MATERIAL_KEYS)
    if unknown:
        raise ConfigError(f"unknown material keys: {sorted(unknown)}")
    return MaterialParams(**{_MATERIAL_KEYS[k]: float(v) for k, v in d.items()})


def material_to_dict(mat: MaterialParams) -> dict:
    inv = {v: k for k, v in _MATERIAL_KEYS.items()}
    return {inv[f.name]: getattr(mat, f.name) for f in fields(mat)}


def geometry_from_dict(d: dict) -> DeviceGeometry:
    unknown = set(d) - set(_GEOMETRY_KEYS)
    if unknown:
        raise ConfigError(f"unknown geometry keys: {sorted(unknown)}")
    kw = {}
    for k, v in d.items():
        name = _GEOMETRY_KEYS[k]
        if isinstance(v, (list, tuple)):
            if len(v) != 3:
                raise ConfigError(f"{k} needs three values")
            kw[name] = tuple(float(x) for x in v)
        else:
            kw[name] = float(v)
    return DeviceGeometry(**kw)


def geometry_to_dict(geo: DeviceGeometry) -> dict:
    inv = {v: k for k, v in _GEOMETRY_KEYS.items()}
    out = {}
    for k, v in asdict(geo).items():
        out[inv[k]] = list(v) if isinstance(v, tuple) else v
    return out


def load_material_config(path):
    """Read material + geometry from a JSON file with the two sections
    ``material`` and ``geometry``; either may be omitted."""
    data = json.loads(Path(path).read_text())
    unknown = set(data) - {"material", "geometry"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    return (material_from_dict(data.get("material", {})),
            geometry_from_dict(data.get("geometry", {})))
