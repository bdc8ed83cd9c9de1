"""Circular two-body constellation geometry and satellite-task visibility.

Inertial frame: z along the Earth's spin axis, x through longitude 0 at
t = 0. Earth is a uniformly rotating sphere; orbits are circular Keplerian
with evenly spaced planes (right ascension) and evenly phased slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "OCCLUDED",
    "ConstellationGeometry",
    "TaskSite",
    "baseline_benefit",
    "benefit_matrix",
    "off_nadir_angle",
    "off_nadir_angles",
    "random_tasks",
    "satellite_position",
    "satellite_positions",
    "task_position",
    "task_positions",
]

# reported angle for tasks hidden behind the Earth
OCCLUDED = 180.0


@dataclass(frozen=True)
class ConstellationGeometry:
    n_planes: int = 18
    sats_per_plane: int = 18
    altitude_km: float = 550.0
    inclination_deg: float = 58.0
    earth_radius_km: float = 6371.0
    mu_km3s2: float = 398600.4418
    earth_rotation_rad_s: float = 7.2921159e-5
    dt_seconds: float = 60.0

    def __post_init__(self):
        if self.altitude_km <= 0:
            raise ValueError("altitude must be positive")
        if not 0 <= self.inclination_deg <= 180:
            raise ValueError("inclination must lie in [0, 180] degrees")

    @property
    def n_sats(self) -> int:
        return self.n_planes * self.sats_per_plane

    @property
    def semi_major_axis_km(self) -> float:
        return self.earth_radius_km + self.altitude_km

    @property
    def mean_motion_rad_s(self) -> float:
        return float(np.sqrt(self.mu_km3s2 / self.semi_major_axis_km**3))

    @property
    def period_s(self) -> float:
        return 2 * np.pi / self.mean_motion_rad_s


@dataclass(frozen=True)
class TaskSite:
    latitude_deg: float
    longitude_deg: float
    priority: float = 1.0

    def __post_init__(self):
        if abs(self.latitude_deg) > 90:
            raise ValueError("latitude outside [-90, 90]")


def satellite_positions(geom: ConstellationGeometry, k) -> np.ndarray:
    """Positions of all satellites at step(s) ``k``.

    Returns shape ``(n_sats, 3)`` for scalar ``k`` or ``(len(k), n_sats, 3)``;
    satellite index is ``plane * sats_per_plane + slot``.
    """
    t = np.asarray(k, dtype=np.float64) * geom.dt_seconds
    plane = np.repeat(np.arange(geom.n_planes), geom.sats_per_plane)
    slot = np.tile(np.arange(geom.sats_per_plane), geom.n_planes)
    raan = 2 * np.pi * plane / geom.n_planes
    phase0 = 2 * np.pi * slot / geom.sats_per_plane
    u = phase0 + geom.mean_motion_rad_s * t[..., None]
    inc = np.radians(geom.inclination_deg)
    cu, su = np.cos(u), np.sin(u)
    co, so = np.cos(raan), np.sin(raan)
    pos = np.stack(
        [co * cu - so * su * np.cos(inc), so * cu + co * su * np.cos(inc), su * np.sin(inc)],
        axis=-1,
    )
    return geom.semi_major_axis_km * pos


def satellite_position(geom: ConstellationGeometry, plane: int, slot: int, k) -> np.ndarray:
    if not (0 <= plane < geom.n_planes and 0 <= slot < geom.sats_per_plane):
        raise IndexError("plane or slot out of range")
    return satellite_positions(geom, k)[..., plane * geom.sats_per_plane + slot, :]


def task_positions(lat_deg, lon_deg, k, geom: ConstellationGeometry) -> np.ndarray:
    """Earth-fixed sites rotated into the inertial frame at step(s) ``k``."""
    lat = np.radians(np.asarray(lat_deg, dtype=np.float64))
    lon = np.radians(np.asarray(lon_deg, dtype=np.float64))
    t = np.asarray(k, dtype=np.float64) * geom.dt_seconds
    ang = lon + geom.earth_rotation_rad_s * t[..., None]
    r = geom.earth_radius_km
    return r * np.stack(
        [np.cos(lat) * np.cos(ang), np.cos(lat) * np.sin(ang), np.broadcast_to(np.sin(lat), ang.shape)],
        axis=-1,
    )


def task_position(site: TaskSite, k, geom: ConstellationGeometry | None = None) -> np.ndarray:
    geom = geom or ConstellationGeometry()
    return task_positions([site.latitude_deg], [site.longitude_deg], k, geom)[..., 0, :]


def off_nadir_angles(sat_pos: np.ndarray, task_pos: np.ndarray) -> np.ndarray:
    """Off-nadir angle in degrees for every (satellite, task) pair.

    ``sat_pos`` ``(..., n, 3)`` and ``task_pos`` ``(..., m, 3)`` give
    ``(..., n, m)``: the angle at the satellite between straight down and the
    line of sight to the task. Tasks below the satellite's horizon (line of
    sight blocked by the Earth) get ``OCCLUDED``.
    """
    los = task_pos[..., None, :, :] - sat_pos[..., :, None, :]
    nadir = -sat_pos[..., :, None, :]
    cos = np.sum(los * nadir, axis=-1) / (
        np.linalg.norm(los, axis=-1) * np.linalg.norm(nadir, axis=-1)
    )
    theta = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    # elevation >= 0 <=> line of sight points away from the surface at the task
    above = np.sum(-los * task_pos[..., None, :, :], axis=-1) >= 0
    return np.where(above, theta, OCCLUDED)


def off_nadir_angle(sat_pos, task_pos) -> float:
    sat_pos = np.asarray(sat_pos, dtype=np.float64)
    task_pos = np.asarray(task_pos, dtype=np.float64)
    if not np.linalg.norm(sat_pos) > 0 or not np.linalg.norm(task_pos) > 0:
        raise ValueError("zero position vector")
    if np.allclose(sat_pos, task_pos):
        raise ValueError("satellite and task coincide")
    return float(off_nadir_angles(sat_pos[None], task_pos[None])[0, 0])


def baseline_benefit(theta_deg, priority, sigma_deg: float = 20.0, theta_fov_deg: float = 60.0):
    """Gaussian falloff in off-nadir angle, zero outside the field of view."""
    if not sigma_deg > 0:
        raise ValueError("sigma must be positive")
    theta = np.asarray(theta_deg, dtype=np.float64)
    value = priority * np.exp(-(theta**2) / (2 * sigma_deg**2))
    out = np.where(theta <= theta_fov_deg, value, 0.0)
    return float(out) if out.ndim == 0 else out


def benefit_matrix(
    geom: ConstellationGeometry,
    lat_deg,
    lon_deg,
    priority,
    k,
    sigma_deg: float = 20.0,
    theta_fov_deg: float = 60.0,
) -> np.ndarray:
    """Baseline benefits ``(..., n_sats, n_tasks)`` at step(s) ``k``."""
    sats = satellite_positions(geom, k)
    tasks = task_positions(lat_deg, lon_deg, k, geom)
    theta = off_nadir_angles(sats, tasks)
    return baseline_benefit(theta, np.asarray(priority)[None, :], sigma_deg, theta_fov_deg)


def random_tasks(n_tasks: int, rng: np.random.Generator, max_lat_deg: float = 70.0, priority_pool=(1, 1, 1, 5)):
    """Sites uniform in area between +-max_lat, priorities drawn from the pool."""
    s = np.sin(np.radians(max_lat_deg))
    lat = np.degrees(np.arcsin(rng.uniform(-s, s, n_tasks)))
    lon = rng.uniform(-180.0, 180.0, n_tasks)
    priority = rng.choice(np.asarray(priority_pool, dtype=np.float64), n_tasks)
    return lat, lon, priority
