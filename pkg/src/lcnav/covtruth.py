"""GNSS-assisted ground-truth construction for LiDAR odometry position
covariance, and the evaluation of estimated covariances against it.

The construction projects the true position onto the line through the GNSS
and LiDAR fixes; the ratio of the two sub-segments scales the (known) GNSS
covariance into a reference covariance for the LiDAR fix.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateBaseline, EpochMismatch, OptAtGnss,
                     ZeroCovariance)
from .frames import CovMatrix3

_BASELINE_EPS = 1e-9


@dataclass
class CovTruthSample:
    epoch: float
    x_gt: np.ndarray
    x_gnss: np.ndarray
    x_lidar: np.ndarray
    x_opt: np.ndarray
    cov_lidar_truth: CovMatrix3
    ratio: float
    perpendicular_residual: float = 0.0


def project_opt(x_gt, x_gnss, x_lidar):
    """Orthogonal projection of x_gt onto the line through x_gnss and x_lidar."""
    x_gt = np.asarray(x_gt, dtype=float)
    g = np.asarray(x_gnss, dtype=float)
    l = np.asarray(x_lidar, dtype=float)
    base = l - g
    norm2 = float(base @ base)
    if norm2 < _BASELINE_EPS**2:
        raise DegenerateBaseline("GNSS and LiDAR fixes coincide")
    return g + ((x_gt - g) @ base / norm2) * base


def cov_truth(x_opt, x_gnss, x_lidar, cov_gnss: CovMatrix3) -> CovMatrix3:
    """Reference LiDAR covariance: |x_opt->x_lidar| / |x_gnss->x_opt| times
    the GNSS covariance."""
    x_opt = np.asarray(x_opt, dtype=float)
    d_go = np.linalg.norm(x_opt - np.asarray(x_gnss, dtype=float))
    if d_go < _BASELINE_EPS:
        raise OptAtGnss("projection coincides with the GNSS fix")
    ratio = np.linalg.norm(np.asarray(x_lidar, dtype=float) - x_opt) / d_go
    return CovMatrix3(ratio * cov_gnss.matrix, frame=cov_gnss.frame)


def weighted_fusion_lambda(cov_lidar: CovMatrix3, cov_gnss: CovMatrix3):
    """Linear-weighting coefficient minimizing the fused variance,
    scalarized by the trace: lam = tr(Cg) / (tr(Cl) + tr(Cg))."""
    a = float(np.trace(cov_lidar.matrix))
    b = float(np.trace(cov_gnss.matrix))
    if a + b <= 0:
        raise ZeroCovariance("both covariance traces are zero")
    return b / (a + b)


def build_sample(epoch, x_gt, x_gnss, x_lidar, cov_gnss) -> CovTruthSample:
    x_opt = project_opt(x_gt, x_gnss, x_lidar)
    cov = cov_truth(x_opt, x_gnss, x_lidar, cov_gnss)
    base = np.asarray(x_lidar, dtype=float) - np.asarray(x_gnss, dtype=float)
    d_go = np.linalg.norm(x_opt - np.asarray(x_gnss, dtype=float))
    ratio = np.linalg.norm(np.asarray(x_lidar, dtype=float) - x_opt) / d_go
    perp = float(np.linalg.norm(np.asarray(x_gt, dtype=float) - x_opt))
    return CovTruthSample(epoch, np.asarray(x_gt, float),
                          np.asarray(x_gnss, float),
                          np.asarray(x_lidar, float), x_opt, cov, ratio,
                          perpendicular_residual=perp)


_COMPONENTS = [("dcov_xx", 0, 0), ("dcov_yy", 1, 1), ("dcov_zz", 2, 2),
               ("dcov_xy", 0, 1), ("dcov_yz", 1, 2), ("dcov_zx", 2, 0)]


def evaluate_cov_estimates(truth_samples, estimated_covs):
    """Per-component |difference| statistics between reference and estimated
    covariances, matched by epoch.

    `estimated_covs` maps epoch -> CovMatrix3 already expressed in the same
    frame as the truth samples (rotate with frames.transform_cov first if
    needed). Returns {component: {"mean": ..., "std": ...}} in m^2.
    """
    diffs = {name: [] for name, _, _ in _COMPONENTS}
    for sample in truth_samples:
        if sample.epoch not in estimated_covs:
            raise EpochMismatch(f"no estimate for epoch {sample.epoch}")
        est = estimated_covs[sample.epoch]
        if est.frame != sample.cov_lidar_truth.frame:
            raise EpochMismatch(
                f"estimate frame {est.frame} != truth frame "
                f"{sample.cov_lidar_truth.frame} at epoch {sample.epoch}")
        delta = np.abs(est.matrix - sample.cov_lidar_truth.matrix)
        for name, i, j in _COMPONENTS:
            diffs[name].append(delta[i, j])
    table = {}
    for name, values in diffs.items():
        arr = np.array(values)
        table[name] = {"mean": float(arr.mean()), "std": float(arr.std())}
    return table
