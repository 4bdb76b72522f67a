"""Shared fixtures: the urban-canyon synthetic scenario used by the
pipeline-level tests and the acceptance suite."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lcnav.sim import ScenarioConfig, generate_trajectory, render_gnss, render_scans

settings.register_profile(
    "ci", derandomize=True, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


def canyon_boxes(seed=11):
    """Box world for the square course: scattered obstacles off the driving
    corridors, one tall-walled canyon block on the third leg, and low
    street-level clutter at the canyon wall feet (gives the planar scans
    cross-track structure inside the corridor)."""
    rng = np.random.default_rng(seed)
    boxes = []
    for _ in range(90):
        cx, cy = rng.uniform(-15, 45), rng.uniform(-15, 45)
        on_x_corridor = (-5 < cy < 5) or (25 < cy < 35)
        on_y_corridor = (-5 < cx < 5) or (25 < cx < 35)
        if on_x_corridor or on_y_corridor:
            continue
        w, h = rng.uniform(0.6, 4, size=2)
        boxes.append([cx - w / 2, cy - h / 2, 0,
                      cx + w / 2, cy + h / 2, float(rng.uniform(2, 12))])
    boxes.append([8, 36, 0, 24, 39, 35.0])    # canyon north wall
    boxes.append([8, 21, 0, 24, 24, 35.0])    # canyon south wall
    x = 8.0
    while x < 24:
        w = rng.uniform(0.4, 1.2)
        boxes.append([x, 35.9 - rng.uniform(0.4, 1.5), 0,
                      x + w, 35.9, rng.uniform(1, 3)])
        x += w + rng.uniform(0.8, 2.5)
    x = 8.5
    while x < 24:
        w = rng.uniform(0.4, 1.2)
        boxes.append([x, 24.1, 0,
                      x + w, 24.1 + rng.uniform(0.4, 1.5), rng.uniform(1, 3)])
        x += w + rng.uniform(0.8, 2.5)
    return boxes


def urban_config(duration, seed=4, outliers=()):
    """Square course at 1 m/s through the canyon leg, planar high-resolution
    scans, masked NLOS satellites plus any scheduled pseudorange biases."""
    square = [[0, 0, 0], [30, 0, 0], [30, 30, 0], [0, 30, 0]]
    n_wp = int(duration / 30) + 1
    waypoints = (square * ((n_wp + 3) // 4 + 1))[:n_wp]
    cfg = ScenarioConfig(seed=seed, duration=float(duration), speed=1.0,
                         waypoints=waypoints, boxes=canyon_boxes())
    cfg.lidar.rays_per_beam = 720
    cfg.lidar.beams = 1
    cfg.lidar.omega_min = 0.0
    cfg.lidar.omega_max = 0.0
    cfg.gnss.outliers = list(outliers)
    return cfg


@pytest.fixture(scope="session")
def urban_run_300s():
    """Seeded 300 s dataset with canyon masking and scheduled biases."""
    cfg = urban_config(300, outliers=[
        {"t0": 40.0, "t1": 55.0, "sat": "S02", "bias": 35.0},
        {"t0": 150.0, "t1": 165.0, "sat": "S07", "bias": 30.0},
        {"t0": 230.0, "t1": 245.0, "sat": "S04", "bias": 45.0},
    ])
    gt = generate_trajectory(cfg)
    scans = render_scans(cfg, gt)
    epochs = render_gnss(cfg, gt)
    return cfg, gt, scans, epochs
