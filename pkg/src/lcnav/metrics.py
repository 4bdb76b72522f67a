"""Trajectory error metrics, availability and empirical CDF reporting."""

from dataclasses import dataclass, field

import numpy as np

from .errors import Empty, LengthMismatch, ZeroObservations


@dataclass
class MetricsReport:
    mae: float
    rmse: float
    max: float
    std: float
    availability: float
    cdf: list                  # (error m, cumulative fraction)
    per_axis: dict             # axis -> list of signed errors

    def rows(self):
        yield ("mae_m", self.mae)
        yield ("rmse_m", self.rmse)
        yield ("max_m", self.max)
        yield ("std_m", self.std)
        yield ("availability", self.availability)


def _error_norms(est, truth):
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise LengthMismatch(f"{est.shape} vs {truth.shape}")
    if est.size == 0:
        raise Empty("no samples")
    return np.linalg.norm(est - truth, axis=-1) if est.ndim > 1 else np.abs(est - truth)


def mae(est, truth):
    return float(_error_norms(est, truth).mean())


def rmse(est, truth):
    return float(np.sqrt((_error_norms(est, truth) ** 2).mean()))


def max_error(est, truth):
    return float(_error_norms(est, truth).max())


def error_std(est, truth):
    """Population standard deviation of the absolute-error series, centered
    on the MAE."""
    e = _error_norms(est, truth)
    return float(np.sqrt(((e - e.mean()) ** 2).mean()))


def availability(n_solutions, n_observations):
    if n_observations <= 0:
        raise ZeroObservations("no observation epochs")
    if n_solutions < 0:
        raise ValueError("negative solution count")
    return n_solutions / n_observations


def cdf(errors):
    """Empirical CDF sampled at the sorted unique error values."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise Empty("no errors")
    values = np.sort(np.unique(errors))
    n = errors.size
    return [(float(v), float(np.count_nonzero(errors <= v) / n)) for v in values]


def report(est, truth, n_solutions=None, n_observations=None) -> MetricsReport:
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    errors = _error_norms(est, truth)
    avail = 1.0
    if n_observations is not None:
        avail = availability(n_solutions if n_solutions is not None else len(est),
                             n_observations)
    per_axis = {}
    if est.ndim > 1 and est.shape[1] == 3:
        diff = est - truth
        per_axis = {"east": diff[:, 0].tolist(),
                    "north": diff[:, 1].tolist(),
                    "up": diff[:, 2].tolist()}
    return MetricsReport(
        mae=float(errors.mean()),
        rmse=float(np.sqrt((errors ** 2).mean())),
        max=float(errors.max()),
        std=float(np.sqrt(((errors - errors.mean()) ** 2).mean())),
        availability=avail,
        cdf=cdf(errors),
        per_axis=per_axis)
