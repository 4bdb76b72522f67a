"""Single-frequency PPP and pseudorange-only SPP weighted least squares.

Observation model per satellite (all terms in meters):
    Pr    = rho + c*dtr - c*dT_s + d_orb + d_ion + d_trop + d_rel
    Phi_L = rho + c*dtr - c*dT_s + d_orb - d_ion + d_trop + lam*N + d_rel + d_pw
Correction terms are carried on the observation record; only the Saastamoinen
tropospheric delay is computed here (used by the simulator to populate the
records).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (InsufficientSatellites, LowElevation, SingularGeometry)
from .frames import CovMatrix3, FrameTag

ELEVATION_MASK = np.deg2rad(10.0)


@dataclass
class Corrections:
    sat_clock: float = 0.0   # c*dT_s, meters
    orbit: float = 0.0
    iono: float = 0.0
    tropo: float = 0.0
    relativity: float = 0.0
    windup: float = 0.0

    def code_sum(self):
        return -self.sat_clock + self.orbit + self.iono + self.tropo + self.relativity

    def phase_sum(self):
        return (-self.sat_clock + self.orbit - self.iono + self.tropo
                + self.relativity + self.windup)


@dataclass
class GnssObservation:
    sat_id: str
    epoch: float
    pseudorange: float
    carrier: float                      # phase range in meters
    sat_pos_ecef: np.ndarray
    corrections: Corrections = field(default_factory=Corrections)
    sigma_pr: float = 1.0
    sigma_phi: float = 0.01
    wavelength: float = 0.1903          # GPS L1, meters

    def __post_init__(self):
        self.sat_pos_ecef = np.asarray(self.sat_pos_ecef, dtype=float).reshape(3)
        if self.pseudorange <= 1e7:
            raise ValueError(f"implausible pseudorange {self.pseudorange}")
        if self.sigma_pr <= 0 or self.sigma_phi <= 0 or self.wavelength <= 0:
            raise ValueError("sigmas and wavelength must be positive")


@dataclass
class Epoch:
    time: float
    observations: list

    def __post_init__(self):
        ids = [o.sat_id for o in self.observations]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate sat_ids in epoch")


@dataclass
class PppSolution:
    x_ecef: np.ndarray
    clock: float                        # c*dtr, meters
    ambiguities: dict                   # sat_id -> cycles
    cov_x: CovMatrix3
    variance_factor: float              # m0^2
    dop_diag: np.ndarray
    qx_pos: np.ndarray = None           # position cofactor block (unit weight)
    epoch: float = 0.0
    n_sats: int = 0


def saastamoinen_zenith_delay(pressure_hpa, temperature_k, humidity,
                              height=0.0, elevation=np.pi / 2):
    """Total tropospheric slant delay (m) from the Saastamoinen model."""
    if elevation < np.deg2rad(5.0):
        raise LowElevation(f"elevation {np.rad2deg(elevation):.2f} deg below mask")
    t_c = temperature_k - 273.15
    e_sat = 6.11 * 10.0 ** (7.5 * t_c / (237.3 + t_c))
    e = humidity * e_sat
    z = np.pi / 2 - elevation
    b = 1.156 - 1.66e-4 * height  # height factor for the tan^2 term
    delay = 0.002277 / np.cos(z) * (
        pressure_hpa + (1255.0 / temperature_k + 0.05) * e
        - b * np.tan(z) ** 2)
    return max(delay, 0.0)


def predicted_pseudorange(x, clock, obs: GnssObservation):
    rho = np.linalg.norm(np.asarray(x, dtype=float) - obs.sat_pos_ecef)
    return rho + clock + obs.corrections.code_sum()


def predicted_carrier(x, clock, ambiguity, obs: GnssObservation):
    rho = np.linalg.norm(np.asarray(x, dtype=float) - obs.sat_pos_ecef)
    return (rho + clock + obs.corrections.phase_sum()
            + obs.wavelength * ambiguity)


def line_of_sight(x, obs: GnssObservation):
    """Unit vector from satellite to receiver (the d rho / d x direction)."""
    d = np.asarray(x, dtype=float) - obs.sat_pos_ecef
    return d / np.linalg.norm(d)


def linearize_epoch(e: Epoch, x0, clock0, N0):
    """Stacked misclosures, design matrix and weight matrix at (x0, clock0, N0).

    Row order: carrier rows for all satellites, then code rows. State order:
    position (3), receiver clock (1), one ambiguity per satellite.
    """
    n = len(e.observations)
    m = 2 * n
    Z = np.zeros(m)
    Bmat = np.zeros((m, 4 + n))
    weights = np.zeros(m)
    for k, obs in enumerate(e.observations):
        los = line_of_sight(x0, obs)
        amb = N0.get(obs.sat_id, 0.0)
        # carrier row
        Z[k] = obs.carrier - predicted_carrier(x0, clock0, amb, obs)
        Bmat[k, :3] = los
        Bmat[k, 3] = 1.0
        Bmat[k, 4 + k] = obs.wavelength
        weights[k] = 1.0 / obs.sigma_phi**2
        # code row
        Z[n + k] = obs.pseudorange - predicted_pseudorange(x0, clock0, obs)
        Bmat[n + k, :3] = los
        Bmat[n + k, 3] = 1.0
        weights[n + k] = 1.0 / obs.sigma_pr**2
    return Z, Bmat, np.diag(weights)


def _wls_iterate(e, x0, clock0, N0, use_phase, max_iter=12, tol=1e-7):
    n = len(e.observations)
    n_amb = n if use_phase else 0
    x = np.asarray(x0, dtype=float).copy()
    clock = float(clock0)
    N = dict(N0)
    B = P = Z = None
    for _ in range(max_iter):
        Z, B, P = linearize_epoch(e, x, clock, N)
        if not use_phase:
            Z, B, P = Z[n:], B[n:, :4], P[n:, n:]
        normal = B.T @ P @ B
        if np.linalg.cond(normal) > 1e12:
            raise SingularGeometry("normal matrix condition number > 1e12")
        dx = np.linalg.solve(normal, B.T @ P @ Z)
        x += dx[:3]
        clock += dx[3]
        if use_phase:
            for k, obs in enumerate(e.observations):
                N[obs.sat_id] = N.get(obs.sat_id, 0.0) + dx[4 + k]
        if np.linalg.norm(dx[:3]) < tol:
            break
    # residuals and covariance at the converged state
    Z, B, P = linearize_epoch(e, x, clock, N)
    if not use_phase:
        Z, B, P = Z[n:], B[n:, :4], P[n:, n:]
    V = Z  # misclosure at the solution is the residual vector
    n_state = 4 + n_amb
    redundancy = V.shape[0] - n_state
    m0sq = float(V @ P @ V) / redundancy if redundancy > 0 else float(V @ P @ V)
    Qx = np.linalg.inv(B.T @ P @ B)
    cov = m0sq * Qx[:3, :3]
    return PppSolution(
        x_ecef=x, clock=clock,
        ambiguities=N if use_phase else {},
        cov_x=CovMatrix3(0.5 * (cov + cov.T), frame=FrameTag.ECEF),
        variance_factor=m0sq,
        dop_diag=np.diag(Qx).copy(),
        qx_pos=Qx[:3, :3].copy(),
        epoch=e.time, n_sats=n)


def _apply_elevation_mask(e: Epoch, x0):
    """Drop satellites below the elevation mask, judged at x0 when x0 is a
    plausible Earth-surface point."""
    x0 = np.asarray(x0, dtype=float)
    if np.linalg.norm(x0) < 6.3e6:
        return e
    up = x0 / np.linalg.norm(x0)
    kept = []
    for obs in e.observations:
        d = obs.sat_pos_ecef - x0
        el = np.arcsin(np.clip(np.dot(d / np.linalg.norm(d), up), -1.0, 1.0))
        if el >= ELEVATION_MASK:
            kept.append(obs)
    return Epoch(e.time, kept)


def ppp_solve_epoch(e: Epoch, prior_N=None, x0=None) -> PppSolution:
    """Iterated WLS on code+phase for position, clock and float ambiguities."""
    if x0 is not None:
        e = _apply_elevation_mask(e, x0)
    if len(e.observations) < 4:
        raise InsufficientSatellites(f"{len(e.observations)} < 4 satellites")
    x = np.zeros(3) if x0 is None else np.asarray(x0, dtype=float).copy()
    N = {}
    for obs in e.observations:
        if prior_N and obs.sat_id in prior_N:
            N[obs.sat_id] = prior_N[obs.sat_id]
        else:
            N[obs.sat_id] = (obs.carrier - obs.pseudorange) / obs.wavelength
    return _wls_iterate(e, x, 0.0, N, use_phase=True)


def spp_solve_epoch(e: Epoch, x0=None) -> PppSolution:
    """Pseudorange-only iterated WLS for position and receiver clock."""
    if x0 is not None:
        e = _apply_elevation_mask(e, x0)
    if len(e.observations) < 4:
        raise InsufficientSatellites(f"{len(e.observations)} < 4 satellites")
    x = np.zeros(3) if x0 is None else np.asarray(x0, dtype=float).copy()
    return _wls_iterate(e, x, 0.0, {}, use_phase=False)


class AmbiguityStore:
    """Float ambiguity carry-over across epochs.

    Ambiguities are kept per satellite and reset on loss of lock (satellite
    absent for at least one epoch) or when the satellite was flagged as a
    RAIM outlier.
    """

    def __init__(self):
        self._amb = {}
        self._last_seen = {}

    def priors_for(self, e: Epoch, outliers=()):
        priors = {}
        for obs in e.observations:
            sid = obs.sat_id
            if sid in outliers:
                self._amb.pop(sid, None)
                continue
            last = self._last_seen.get(sid)
            if last is not None and sid in self._amb and e.time - last <= 1.5 * self._gap(e):
                priors[sid] = self._amb[sid]
        return priors

    def _gap(self, e):
        # nominal epoch spacing; refreshed from observed times
        return getattr(self, "_nominal_gap", 1.0)

    def update(self, e: Epoch, solution: PppSolution):
        times = [self._last_seen.get(o.sat_id) for o in e.observations]
        prev = [t for t in times if t is not None]
        if prev:
            gaps = [e.time - t for t in prev if e.time > t]
            if gaps:
                self._nominal_gap = min(gaps)
        for obs in e.observations:
            self._last_seen[obs.sat_id] = e.time
        for sid, amb in solution.ambiguities.items():
            self._amb[sid] = amb
