"""Loosely coupled GNSS / LiDAR localization toolkit.

Modules:
    frames        geodetic <-> ECEF <-> ENU conversions, poses, frame tags
    scan          polar LiDAR points and their Cartesian covariances
    registration  SVD point-set registration with first-order covariance
    ppp           single-frequency PPP / SPP weighted least squares
    raim          odometry-assisted pseudorange integrity screening
    covtruth      geometric ground-truth construction for covariances
    graph         sliding-window GNSS/LiDAR fusion factor graph
    pipeline      end-to-end scans + epochs -> fused ENU trajectory
    sim           deterministic synthetic scenario generation
    metrics       trajectory error metrics and CDF reporting
    jsonl         versioned JSONL file formats
    plots         report figures
"""

__version__ = "0.1.0"
