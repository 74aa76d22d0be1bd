"""Domain-wall initialisation, position extraction and the compact mobility fit."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .magcore import GridGeometry, MagnetizationGrid, MaterialParams, normalize

SATURATION_EPS = 1e-3


class ProfileOutOfBounds(ValueError):
    pass


class NoWall(ValueError):
    """Region is saturated; ``rail`` is +1 or -1."""

    def __init__(self, rail: int, mean_mz: float):
        super().__init__(f"no domain wall: <m_z> = {mean_mz:.6f} at the {rail:+d} rail")
        self.rail = rail
        self.mean_mz = mean_mz


class InsufficientData(ValueError):
    pass


class PoorFitWarning(UserWarning):
    pass


@dataclass(frozen=True)
class WallProfile:
    """Bloch wall centred at ``y0``; ``polarity`` +1 puts +z at y > y0."""

    y0: float
    delta: float
    core_axis: tuple = (1.0, 0.0, 0.0)
    polarity: int = 1

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("wall width parameter must be > 0")
        if self.polarity not in (1, -1):
            raise ValueError("polarity must be +1 or -1")
        c = normalize(self.core_axis)
        if abs(c[1]) > 1e-12 or abs(c[2]) > 1e-12:
            raise ValueError("Bloch core axis must be along +-x")


def init_bloch_wall(geom: GridGeometry, mat: MaterialParams, profile: WallProfile = None,
                    y0: float = None) -> MagnetizationGrid:
    """Magnetization of a straight Bloch wall running along x.

    Without a profile the wall is centred with delta = sqrt(A/Ku).
    """
    if profile is None:
        profile = WallProfile(y0=geom.width / 2 if y0 is None else y0,
                              delta=mat.wall_delta)
    if not 0 <= profile.y0 <= geom.width:
        raise ProfileOutOfBounds(
            f"y0={profile.y0:.3e} m outside [0, {geom.width:.3e}] m")
    u = (geom.y_centers() - profile.y0) / profile.delta
    mz = profile.polarity * np.tanh(u)
    s = 1.0 / np.cosh(u)
    core = normalize(profile.core_axis)
    m = np.empty((geom.nx, geom.ny, 3))
    m[..., 0] = core[0] * s
    m[..., 1] = 0.0
    m[..., 2] = mz
    return MagnetizationGrid(geom, m)


def _region_slices(geom: GridGeometry, region):
    if region is None:
        return slice(None), slice(None), 0.0, geom.width
    x0, x1, y0, y1 = region
    xc = geom.x_centers()
    yc = geom.y_centers()
    ix = np.nonzero((xc >= x0) & (xc <= x1))[0]
    iy = np.nonzero((yc >= y0) & (yc <= y1))[0]
    if ix.size == 0 or iy.size == 0:
        raise ValueError("region contains no cells")
    sx = slice(ix[0], ix[-1] + 1)
    sy = slice(iy[0], iy[-1] + 1)
    return sx, sy, iy[0] * geom.dy, (iy[-1] + 1) * geom.dy


def region_mean_mz(grid: MagnetizationGrid, region=None) -> float:
    sx, sy, _, _ = _region_slices(grid.geometry, region)
    return float(grid.m[sx, sy, 2].mean())


def parallel_width(grid: MagnetizationGrid, region=None, pl_sign: int = 1) -> float:
    """Width of the domain parallel to the pinned layer, W*(1 + pl*<m_z>)/2."""
    sx, sy, lo, hi = _region_slices(grid.geometry, region)
    mz = float(grid.m[sx, sy, 2].mean())
    return (hi - lo) * (1.0 + pl_sign * mz) / 2.0


def saturation_rail(mean_mz: float, eps: float = SATURATION_EPS) -> int:
    if mean_mz > 1 - eps:
        return 1
    if mean_mz < -(1 - eps):
        return -1
    return 0


def wall_position(grid: MagnetizationGrid, region=None, polarity: int = 1) -> float:
    """Wall centre along y from the integral of m_z over ``region``.

    Raises NoWall when the region is saturated at either rail.
    """
    sx, sy, lo, hi = _region_slices(grid.geometry, region)
    mz = float(grid.m[sx, sy, 2].mean())
    rail = saturation_rail(mz)
    if rail:
        raise NoWall(rail, mz)
    return lo + (hi - lo) * (1.0 - polarity * mz) / 2.0


def terminal_velocity(t, y, fraction: float = 0.5):
    """Mean velocity and relative spread of the local velocity over the last
    ``fraction`` of a trajectory."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = t >= t[-1] - fraction * (t[-1] - t[0])
    tt, yy = t[keep], y[keep]
    v_local = np.diff(yy) / np.diff(tt)
    slope = np.polyfit(tt, yy, 1)[0]
    spread = float(np.std(v_local) / abs(np.mean(v_local))) if np.mean(v_local) else math.inf
    return float(slope), spread


# --------------------------------------------------------------------------
# compact model


@dataclass
class CompactModel:
    """Piecewise-linear wall response: d = mobility*(|J|-J_th)*tau above threshold."""

    mobility: float
    J_th: float = 0.0
    valid_range: tuple = (0.0, math.inf)
    r_squared: float = 1.0
    residuals: list = field(default_factory=list)
    poor_fit: bool = False

    def __post_init__(self):
        if not self.mobility > 0:
            raise ValueError("mobility must be > 0")
        if self.J_th < 0:
            raise ValueError("threshold must be >= 0")

    def displacement(self, J: float, duration: float) -> float:
        """Signed displacement (sign of J) for a pulse of ``duration``."""
        over = max(abs(J) - self.J_th, 0.0)
        return math.copysign(self.mobility * over * duration, J) if over else 0.0

    def to_json(self, path=None) -> str:
        d = asdict(self)
        d["valid_range"] = list(self.valid_range)
        text = json.dumps(d, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "CompactModel":
        s = str(text_or_path)
        if not s.lstrip().startswith("{"):
            with open(s) as fh:
                s = fh.read()
        d = json.loads(s)
        d["valid_range"] = tuple(d.get("valid_range", (0.0, math.inf)))
        return cls(**d)


def _r_squared(y, yhat):
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return 1.0 - ss_res / ss_tot


def fit_compact_model(sweep, min_r2: float = 0.98) -> CompactModel:
    """Least-squares fit of (J, duration, displacement) triples.

    Displacements are taken along the sign of J, so sign-flipped entries
    contribute like their mirror images. The threshold is the x-intercept of
    the fitted line, clamped at zero (with the slope refitted through the
    origin when clamped).
    """
    data = np.asarray([(float(j), float(t), float(d)) for j, t, d in sweep])
    if data.size == 0:
        raise InsufficientData("empty sweep")
    J, tau, d = data.T
    aj = np.abs(J)
    if len(np.unique(aj[aj > 0])) < 4:
        raise InsufficientData("need at least four distinct non-zero |J| values")
    y = d * np.sign(J)
    X = np.column_stack([aj * tau, -tau])
    (mob, mob_jth), *_ = np.linalg.lstsq(X, y, rcond=None)
    jth = mob_jth / mob if mob != 0 else 0.0
    if jth < 0:
        mob = float(np.dot(aj * tau, y) / np.dot(aj * tau, aj * tau))
        jth = 0.0
    if not mob > 0:
        raise InsufficientData("fitted mobility is not positive; displacements "
                               "do not follow the current sign")
    yhat = mob * np.maximum(aj - jth, 0.0) * tau
    r2 = _r_squared(y, yhat)
    model = CompactModel(mobility=float(mob), J_th=float(jth),
                         valid_range=(float(aj.min()), float(aj.max())),
                         r_squared=r2, residuals=[float(v) for v in y - yhat],
                         poor_fit=r2 < min_r2)
    if model.poor_fit:
        warnings.warn(f"compact model fit R^2={r2:.4f} below {min_r2}", PoorFitWarning,
                      stacklevel=2)
    return model


def write_sweep_csv(path, sweep):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["J_A_per_m2", "duration_s", "displacement_m"])
        for j, t, d in sweep:
            w.writerow([repr(float(j)), repr(float(t)), repr(float(d))])


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        return [(float(row["J_A_per_m2"]), float(row["duration_s"]),
                 float(row["displacement_m"])) for row in r]
