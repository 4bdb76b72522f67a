"""Synthetic scenario generation: ground-truth trajectory, LiDAR scans of a
box-world environment, and GNSS observations with consistent correction
terms, injectable pseudorange biases and building occlusion.

Everything is deterministic under a fixed seed (per-epoch child seeds keep
rendering order-independent).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BadWaypoints
from .frames import (FrameTag, GeodeticCoord, Pose, enu_rotation,
                     geodetic_to_ecef)
from .ppp import Corrections, Epoch, GnssObservation, saastamoinen_zenith_delay
from .scan import PolarPoint, Scan, polar_direction


@dataclass
class LidarConfig:
    rate_hz: float = 1.0
    beams: int = 8
    rays_per_beam: int = 90
    max_range: float = 80.0
    sigma_d: float = 0.02
    sigma_omega: float = 0.001
    sigma_alpha: float = 0.001
    omega_min: float = -0.30
    omega_max: float = 0.15


@dataclass
class GnssConfig:
    rate_hz: float = 1.0
    n_sats: int = 10
    sigma_pr: float = 1.0
    sigma_phi: float = 0.01
    clock_m: float = 30.0
    clock_drift: float = 0.01        # m/s
    min_elevation: float = np.deg2rad(15.0)
    nlos_mode: str = "mask"          # "mask" or "bias"
    nlos_bias: float = 40.0
    outliers: list = field(default_factory=list)  # {"t0","t1","sat","bias"}


@dataclass
class ScenarioConfig:
    seed: int = 0
    duration: float = 60.0
    waypoints: list = field(default_factory=lambda: [[0.0, 0.0, 0.0],
                                                     [50.0, 0.0, 0.0]])
    speed: float = 5.0
    boxes: list = field(default_factory=list)  # [xmin,ymin,zmin,xmax,ymax,zmax]
    lidar: LidarConfig = field(default_factory=LidarConfig)
    gnss: GnssConfig = field(default_factory=GnssConfig)
    lever_arm: list = field(default_factory=lambda: [0.2, -0.5, 1.2])
    origin: GeodeticCoord = field(default_factory=lambda: GeodeticCoord(
        np.deg2rad(22.30), np.deg2rad(114.18), 10.0))
    turn_blend: float = 2.0          # meters of heading blending at corners


def config_from_dict(d) -> ScenarioConfig:
    cfg = ScenarioConfig()
    cfg.seed = int(d.get("seed", cfg.seed))
    cfg.duration = float(d.get("duration", cfg.duration))
    traj = d.get("trajectory", {})
    cfg.waypoints = traj.get("waypoints", cfg.waypoints)
    cfg.speed = float(traj.get("speed", cfg.speed))
    cfg.boxes = d.get("environment", {}).get("boxes", cfg.boxes)
    for key, value in d.get("lidar", {}).items():
        setattr(cfg.lidar, key, value)
    for key, value in d.get("gnss", {}).items():
        setattr(cfg.gnss, key, value)
    cfg.lever_arm = d.get("lever_arm_true", cfg.lever_arm)
    if "origin" in d:
        o = d["origin"]
        cfg.origin = GeodeticCoord(np.deg2rad(o["lat_deg"]),
                                   np.deg2rad(o["lon_deg"]),
                                   o.get("height", 0.0))
    return cfg


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


@dataclass
class GroundTruth:
    times: np.ndarray
    poses: list                   # Pose(LIDAR->ENU) per time
    antenna_positions: np.ndarray
    clock_series: np.ndarray
    lever_arm: np.ndarray
    origin: GeodeticCoord

    def pose_at(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-6:
            raise KeyError(f"no ground-truth sample at t={t}")
        return self.poses[k]


def _yaw_rotation(yaw):
    """LiDAR->ENU rotation for heading `yaw` (radians east of north);
    +y_L is forward, +z_L up, +x_L right."""
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


class _Path:
    """Arclength-parameterized polyline with heading blending at corners."""

    def __init__(self, waypoints, blend):
        wp = np.asarray(waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[0] < 2 or wp.shape[1] != 3:
            raise BadWaypoints("need at least two 3-d waypoints")
        seg = np.diff(wp, axis=0)
        lengths = np.linalg.norm(seg, axis=1)
        if np.any(lengths < 1e-9):
            raise BadWaypoints("repeated consecutive waypoints")
        self.wp = wp
        self.seg = seg
        self.lengths = lengths
        self.cum = np.concatenate([[0.0], np.cumsum(lengths)])
        self.total = float(self.cum[-1])
        self.blend = blend
        self.headings = np.arctan2(seg[:, 0], seg[:, 1])  # east of north

    def sample(self, s):
        s = np.clip(s, 0.0, self.total)
        k = min(int(np.searchsorted(self.cum, s, side="right")) - 1,
                len(self.seg) - 1)
        local = s - self.cum[k]
        pos = self.wp[k] + self.seg[k] * (local / self.lengths[k])
        yaw = self.headings[k]
        # blend heading across the upcoming / previous corner
        b = self.blend
        if b > 0:
            if k + 1 < len(self.seg) and self.lengths[k] - local < b:
                frac = 0.5 * (1.0 - (self.lengths[k] - local) / b)
                yaw = yaw + frac * _wrap(self.headings[k + 1] - yaw)
            elif k > 0 and local < b:
                prev = self.headings[k - 1]
                frac = 0.5 * (1.0 - local / b)
                yaw = yaw + frac * _wrap(prev - yaw)
        return pos, yaw


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def generate_trajectory(cfg: ScenarioConfig, times=None) -> GroundTruth:
    path = _Path(cfg.waypoints, cfg.turn_blend)
    if times is None:
        rate = max(cfg.lidar.rate_hz, cfg.gnss.rate_hz)
        n = int(np.floor(cfg.duration * rate)) + 1
        times = np.arange(n) / rate
    times = np.asarray(times, dtype=float)
    lever = np.asarray(cfg.lever_arm, dtype=float)
    poses = []
    antennas = np.zeros((len(times), 3))
    for k, t in enumerate(times):
        pos, yaw = path.sample(cfg.speed * t)
        R = _yaw_rotation(yaw)
        poses.append(Pose(R, pos, frm=FrameTag.LIDAR, to=FrameTag.ENU))
        antennas[k] = R @ lever + pos
    clock = cfg.gnss.clock_m + cfg.gnss.clock_drift * times
    return GroundTruth(times, poses, antennas, clock, lever, cfg.origin)


def _ray_box(origin, direction, box):
    """Slab intersection; returns the entry distance or None."""
    tmin, tmax = 0.0, np.inf
    for a in range(3):
        lo, hi = box[a], box[3 + a]
        if abs(direction[a]) < 1e-12:
            if origin[a] < lo or origin[a] > hi:
                return None
            continue
        t1 = (lo - origin[a]) / direction[a]
        t2 = (hi - origin[a]) / direction[a]
        if t1 > t2:
            t1, t2 = t2, t1
        tmin = max(tmin, t1)
        tmax = min(tmax, t2)
        if tmin > tmax:
            return None
    return tmin if tmin > 1e-9 else None


def cast_ray(origin, direction, boxes, max_range=np.inf):
    """Nearest box hit along the ray, or None."""
    best = None
    for box in boxes:
        d = _ray_box(origin, direction, box)
        if d is not None and d <= max_range and (best is None or d < best):
            best = d
    return best


def render_scans(cfg: ScenarioConfig, gt: GroundTruth, noisy=True):
    lc = cfg.lidar
    n_scans = int(np.floor(cfg.duration * lc.rate_hz)) + 1
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_scans)
    omegas = np.linspace(lc.omega_min, lc.omega_max, lc.beams)
    alphas = np.arange(lc.rays_per_beam) * (2 * np.pi / lc.rays_per_beam)
    boxes = [np.asarray(b, dtype=float) for b in cfg.boxes]
    scans = []
    for k in range(n_scans):
        t = k / lc.rate_hz
        pose = gt.pose_at(t)
        rng = np.random.default_rng(seeds[k])
        pts = []
        for w in omegas:
            for a in alphas:
                direction = pose.rotation @ polar_direction(w, a)
                d = cast_ray(pose.translation, direction, boxes, lc.max_range)
                if d is None:
                    continue
                if noisy:
                    d = d + rng.normal(0.0, lc.sigma_d)
                    w_obs = w + rng.normal(0.0, lc.sigma_omega)
                    a_obs = a + rng.normal(0.0, lc.sigma_alpha)
                else:
                    w_obs, a_obs = w, a
                if d <= 0:
                    continue
                pts.append(PolarPoint(d, w_obs, a_obs, lc.sigma_d,
                                      lc.sigma_omega, lc.sigma_alpha))
        scans.append(Scan(pts, timestamp=t))
    return scans


def _sky_grid(cfg: ScenarioConfig):
    """Deterministic satellite az/el layout for the whole run."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xA5]))
    n = cfg.gnss.n_sats
    az = (np.arange(n) * (2 * np.pi / n) + rng.uniform(0, 2 * np.pi / n, n))
    el = rng.uniform(cfg.gnss.min_elevation + 0.05, np.deg2rad(80.0), n)
    return az, el


def _sat_corrections(cfg, sat_idx, elevation):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5A, sat_idx]))
    trop = saastamoinen_zenith_delay(1013.25, 288.15, 0.5,
                                     cfg.origin.height, elevation)
    return Corrections(
        sat_clock=rng.uniform(-100.0, 100.0),
        orbit=rng.uniform(-2.0, 2.0),
        iono=rng.uniform(2.0, 8.0),
        tropo=trop,
        relativity=rng.uniform(-1.0, 1.0),
        windup=rng.uniform(-0.05, 0.05))


def render_gnss(cfg: ScenarioConfig, gt: GroundTruth, noisy=True):
    gc = cfg.gnss
    az, el = _sky_grid(cfg)
    enu2ecef = enu_rotation(cfg.origin)
    origin_ecef = geodetic_to_ecef(cfg.origin)
    sat_dirs = np.stack([np.cos(el) * np.sin(az),
                         np.cos(el) * np.cos(az),
                         np.sin(el)], axis=1)
    sat_pos = origin_ecef + (enu2ecef.rotation @ (sat_dirs * 2.2e7).T).T
    corrections = [_sat_corrections(cfg, k, el[k]) for k in range(gc.n_sats)]
    amb_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x77]))
    ambiguities = amb_rng.integers(-1_000_000, 1_000_000, gc.n_sats)
    boxes = [np.asarray(b, dtype=float) for b in cfg.boxes]

    n_epochs = int(np.floor(cfg.duration * gc.rate_hz)) + 1
    seeds = np.random.SeedSequence([cfg.seed, 0x33]).spawn(n_epochs)
    epochs = []
    for k in range(n_epochs):
        t = k / gc.rate_hz
        idx = int(np.argmin(np.abs(gt.times - t)))
        ant_enu = gt.antenna_positions[idx]
        clk = gt.clock_series[idx]
        rx_ecef = origin_ecef + enu2ecef.rotation @ ant_enu
        rng = np.random.default_rng(seeds[k])
        obs = []
        for s in range(gc.n_sats):
            bias = 0.0
            blocked = cast_ray(ant_enu, sat_dirs[s], boxes) is not None
            if blocked:
                if gc.nlos_mode == "mask":
                    continue
                bias += gc.nlos_bias
            for sched in gc.outliers:
                if sched["sat"] == f"S{s:02d}" and sched["t0"] <= t <= sched["t1"]:
                    bias += sched["bias"]
            rho = np.linalg.norm(rx_ecef - sat_pos[s])
            c = corrections[s]
            pr = rho + clk + c.code_sum() + bias
            lam = 0.1903
            phi = (rho + clk + c.phase_sum() + lam * ambiguities[s])
            if noisy:
                pr += rng.normal(0.0, gc.sigma_pr)
                phi += rng.normal(0.0, gc.sigma_phi)
            obs.append(GnssObservation(
                sat_id=f"S{s:02d}", epoch=t, pseudorange=pr, carrier=phi,
                sat_pos_ecef=sat_pos[s], corrections=c,
                sigma_pr=gc.sigma_pr, sigma_phi=gc.sigma_phi,
                wavelength=lam))
        epochs.append(Epoch(t, obs))
    return epochs


def truth_rows(gt: GroundTruth):
    rows = []
    for k, t in enumerate(gt.times):
        rows.append({"t": float(t), "enu": gt.poses[k].translation,
                     "R": gt.poses[k].rotation,
                     "ant": gt.antenna_positions[k],
                     "clk": float(gt.clock_series[k]), "src": "truth"})
    return rows
