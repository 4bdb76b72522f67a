"""Coordinate frames: ECEF, local ENU, LiDAR, map; WGS-84 conversions and
frame-tagged rigid transforms / covariance rotations."""

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import FrameMismatch, NearSingular

# WGS-84 ellipsoid
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_B = WGS84_A * (1.0 - WGS84_F)
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

_ORTHO_TOL = 1e-9


class FrameTag(enum.Enum):
    ECEF = "ecef"
    ENU = "enu"
    LIDAR = "lidar"
    MAP = "map"


@dataclass(frozen=True)
class GeodeticCoord:
    """Ellipsoidal latitude/longitude (rad) and height (m) on WGS-84."""

    lat: float
    lon: float
    height: float = 0.0

    def __post_init__(self):
        if abs(self.lat) > np.pi / 2 + 1e-12:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (-np.pi - 1e-12 < self.lon <= np.pi + 1e-12):
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass
class Pose:
    """Rigid transform taking coordinates in `frm` to coordinates in `to`."""

    rotation: np.ndarray
    translation: np.ndarray
    frm: FrameTag = FrameTag.LIDAR
    to: FrameTag = FrameTag.MAP

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        err = np.linalg.norm(self.rotation @ self.rotation.T - np.eye(3))
        if err > _ORTHO_TOL or np.linalg.det(self.rotation) < 0:
            raise ValueError(f"rotation not orthonormal (err={err:.2e})")

    def apply(self, p):
        return self.rotation @ np.asarray(p, dtype=float) + self.translation

    def inverse(self):
        return Pose(self.rotation.T, -self.rotation.T @ self.translation,
                    frm=self.to, to=self.frm)

    def compose(self, other):
        """self (B->C) composed with other (A->B) gives A->C."""
        if other.to != self.frm:
            raise FrameMismatch(f"cannot compose {other.frm}->{other.to} "
                                f"with {self.frm}->{self.to}")
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation,
                    frm=other.frm, to=self.to)

    def __matmul__(self, other):
        return self.compose(other)


@dataclass
class CovMatrix3:
    """3x3 symmetric PSD position covariance, tagged with its frame."""

    matrix: np.ndarray
    frame: FrameTag = FrameTag.ENU

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float).reshape(3, 3)
        if np.linalg.norm(self.matrix - self.matrix.T) > 1e-9 * max(
                1.0, np.linalg.norm(self.matrix)):
            raise ValueError("covariance not symmetric")
        self.matrix = 0.5 * (self.matrix + self.matrix.T)


def enu_rotation(origin: GeodeticCoord) -> Pose:
    """Rotation taking local ENU vectors at `origin` into ECEF.

    Columns are the east/north/up unit vectors expressed in ECEF; proper
    rotation (det +1).
    """
    sb, cb = np.sin(origin.lat), np.cos(origin.lat)
    sl, cl = np.sin(origin.lon), np.cos(origin.lon)
    east = np.array([-sl, cl, 0.0])
    north = np.array([-sb * cl, -sb * sl, cb])
    up = np.array([cb * cl, cb * sl, sb])
    R = np.column_stack([east, north, up])
    return Pose(R, np.zeros(3), frm=FrameTag.ENU, to=FrameTag.ECEF)


def geodetic_to_ecef(g: GeodeticCoord) -> np.ndarray:
    sb, cb = np.sin(g.lat), np.cos(g.lat)
    sl, cl = np.sin(g.lon), np.cos(g.lon)
    n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sb * sb)
    return np.array([
        (n + g.height) * cb * cl,
        (n + g.height) * cb * sl,
        (n * (1.0 - WGS84_E2) + g.height) * sb,
    ])


def ecef_to_geodetic(p) -> GeodeticCoord:
    """Iterative latitude solution; converges to < 1e-12 rad in a few steps."""
    p = np.asarray(p, dtype=float).reshape(3)
    r = np.linalg.norm(p)
    if r < 6.3e6:
        raise NearSingular(f"point too close to Earth's center: |p|={r:.3e}")
    x, y, z = p
    lon = np.arctan2(y, x)
    rho = np.hypot(x, y)
    if rho < 1e-6:
        lat = np.pi / 2 if z >= 0 else -np.pi / 2
        return GeodeticCoord(lat, lon, abs(z) - WGS84_B)
    lat = np.arctan2(z, rho * (1.0 - WGS84_E2))
    height = 0.0
    for _ in range(10):
        sb = np.sin(lat)
        n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sb * sb)
        height = rho / np.cos(lat) - n
        lat_new = np.arctan2(z, rho * (1.0 - WGS84_E2 * n / (n + height)))
        if abs(lat_new - lat) < 1e-12:
            lat = lat_new
            break
        lat = lat_new
    return GeodeticCoord(lat, lon, height)


def transform_cov(c: CovMatrix3, r: Pose) -> CovMatrix3:
    """Rotate a position covariance between frames: C' = R C R^T."""
    if c.frame != r.frm:
        raise FrameMismatch(f"covariance in {c.frame}, pose maps {r.frm}->{r.to}")
    m = r.rotation @ c.matrix @ r.rotation.T
    return CovMatrix3(0.5 * (m + m.T), frame=r.to)
