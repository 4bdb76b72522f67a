"""LiDAR scans in polar form and conversion to Cartesian with first-order
covariance of each point.

Polar convention (fixed by the anchor test in tests/test_scan.py):
    x = d * cos(omega) * sin(alpha)
    y = d * cos(omega) * cos(alpha)
    z = d * sin(omega)
so (d=1, omega=0, alpha=0) maps to (0, 1, 0): alpha is the horizontal angle
about the z axis measured from +y, omega the elevation out of the x-y plane.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyScan
from .frames import CovMatrix3, FrameTag

# defaults when an input file carries no per-point sigmas
DEFAULT_SIGMA_D = 0.02
DEFAULT_SIGMA_OMEGA = 0.001
DEFAULT_SIGMA_ALPHA = 0.001


@dataclass(frozen=True)
class PolarPoint:
    d: float
    omega: float
    alpha: float
    sigma_d: float = DEFAULT_SIGMA_D
    sigma_omega: float = DEFAULT_SIGMA_OMEGA
    sigma_alpha: float = DEFAULT_SIGMA_ALPHA

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError(f"range must be positive, got {self.d}")
        if min(self.sigma_d, self.sigma_omega, self.sigma_alpha) < 0:
            raise ValueError("sigmas must be non-negative")


@dataclass
class CartPoint:
    xyz: np.ndarray
    cov: CovMatrix3

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=float).reshape(3)


@dataclass
class Scan:
    points: list
    timestamp: float = 0.0


def polar_direction(omega, alpha):
    co = np.cos(omega)
    return np.array([co * np.sin(alpha), co * np.cos(alpha), np.sin(omega)])


def polar_jacobian(p: PolarPoint) -> np.ndarray:
    """Jacobian of (x, y, z) with respect to (d, omega, alpha)."""
    d, w, a = p.d, p.omega, p.alpha
    cw, sw = np.cos(w), np.sin(w)
    ca, sa = np.cos(a), np.sin(a)
    return np.array([
        [cw * sa, -d * sw * sa, d * cw * ca],
        [cw * ca, -d * sw * ca, -d * cw * sa],
        [sw, d * cw, 0.0],
    ])


def polar_to_cart(p: PolarPoint, frame: FrameTag = FrameTag.LIDAR) -> CartPoint:
    xyz = p.d * polar_direction(p.omega, p.alpha)
    J = polar_jacobian(p)
    S = np.diag([p.sigma_d**2, p.sigma_omega**2, p.sigma_alpha**2])
    cov = J @ S @ J.T
    return CartPoint(xyz, CovMatrix3(0.5 * (cov + cov.T), frame=frame))


def scan_to_cart(s: Scan, frame: FrameTag = FrameTag.LIDAR) -> list:
    if not s.points:
        raise EmptyScan("scan has no points")
    return [polar_to_cart(p, frame=frame) for p in s.points]
