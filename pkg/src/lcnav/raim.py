"""LiDAR-odometry assisted integrity monitoring of GNSS pseudoranges.

Per epoch: fuse the LiDAR-derived and GNSS-derived positions by inverse
covariance weighting, estimate the receiver clock robustly, compute
pseudorange residuals, and gate each satellite at alpha standard deviations
around the epoch mean residual. A flagged pseudorange also flags the same
satellite's carrier phase.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyEpoch, SingularCovariance, TooFewSatellites
from .frames import CovMatrix3
from .ppp import Epoch, predicted_pseudorange

DEFAULT_ALPHA = 2.0
MIN_SOLVABLE_SATS = 4


@dataclass
class RaimVerdict:
    epoch: float
    inliers: set
    outliers: set
    residuals: dict
    mean: float
    std: float
    alpha: float
    degraded: bool = False


def fuse_position_for_raim(x_lidar, cov_lidar: CovMatrix3,
                           x_gnss, cov_gnss: CovMatrix3):
    """Inverse-covariance weighted combination of the two position fixes."""
    try:
        wl = np.linalg.inv(cov_lidar.matrix)
        wg = np.linalg.inv(cov_gnss.matrix)
        total = np.linalg.inv(wl + wg)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from exc
    return total @ (wl @ np.asarray(x_lidar, dtype=float)
                    + wg @ np.asarray(x_gnss, dtype=float))


def estimate_clock(x_f, e: Epoch):
    """Median of the per-satellite implied receiver clocks.

    The median keeps a handful of biased satellites from leaking into every
    residual.
    """
    if not e.observations:
        raise EmptyEpoch("no observations")
    implied = [obs.pseudorange - predicted_pseudorange(x_f, 0.0, obs)
               for obs in e.observations]
    return float(np.median(implied))


def pseudorange_residuals(x_f, clock, e: Epoch):
    return {obs.sat_id: obs.pseudorange - predicted_pseudorange(x_f, clock, obs)
            for obs in e.observations}


def raim_gate(residuals, alpha=DEFAULT_ALPHA, epoch=0.0):
    """Flag satellites whose residual sits outside alpha*std of the epoch mean.

    Zero spread means no detectable anomaly: everything stays inlier. If
    flagging would leave fewer than four satellites, the smallest
    |residual - mean| satellites are kept and the verdict marked degraded.
    """
    if len(residuals) < 2:
        raise TooFewSatellites("need at least 2 satellites for a spread")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    sats = list(residuals)
    values = np.array([residuals[s] for s in sats])
    mean = float(values.mean())
    std = float(values.std())
    dev = np.abs(values - mean)
    if std == 0.0:
        flags = np.zeros(len(sats), dtype=bool)
    else:
        flags = dev > alpha * std
    degraded = False
    n_in = int((~flags).sum())
    if n_in < MIN_SOLVABLE_SATS:
        degraded = True
        keep = np.argsort(dev)[:min(MIN_SOLVABLE_SATS, len(sats))]
        flags = np.ones(len(sats), dtype=bool)
        flags[keep] = False
    inliers = {s for s, f in zip(sats, flags) if not f}
    outliers = {s for s, f in zip(sats, flags) if f}
    return RaimVerdict(epoch, inliers, outliers, dict(residuals),
                       mean, std, alpha, degraded)


def raim_epoch(x_lidar, cov_lidar, x_gnss, cov_gnss, e: Epoch,
               alpha=DEFAULT_ALPHA):
    """Full per-epoch chain: fuse -> clock -> residuals -> gate."""
    x_f = fuse_position_for_raim(x_lidar, cov_lidar, x_gnss, cov_gnss)
    clock = estimate_clock(x_f, e)
    residuals = pseudorange_residuals(x_f, clock, e)
    return raim_gate(residuals, alpha=alpha, epoch=e.time)
