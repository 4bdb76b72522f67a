"""Versioned JSONL file schemas.

scan file:        {"t": sec, "pts": [[d, omega, alpha], ...],
                   "sigma": [sd, so, sa], "v": 1}
observation file: {"t": sec, "obs": [{"sat", "pr", "phi", "satpos": [x,y,z],
                   "corr": {...}, "sig": [spr, sphi], "lam"}, ...], "v": 1}
trajectory file:  {"t": sec, "enu": [e,n,u], "cov": [6 upper-triangular],
                   "src": "fused|ppp|odom|truth|spp", "v": 1}
                  truth rows additionally carry "R" (row-major rotation),
                  "ant" (antenna ENU) and "clk" (receiver clock, m).
verdict file:     {"t": sec, "in": [...], "out": [...], "alpha": a, "v": 1}
"""

import json

import numpy as np

from .ppp import Corrections, Epoch, GnssObservation
from .scan import PolarPoint, Scan

SCHEMA_VERSION = 1


def _check_version(rec, path):
    v = rec.get("v", SCHEMA_VERSION)
    if v != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema version {v}")


def _dump(records, path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _load(path):
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                _check_version(rec, path)
                yield rec


def _round(x, nd=9):
    """Stable textual output: cut float noise below the schema resolution."""
    return round(float(x), nd)


def write_scans(scans, path):
    records = []
    for s in scans:
        sigma = [s.points[0].sigma_d, s.points[0].sigma_omega,
                 s.points[0].sigma_alpha] if s.points else [0.0, 0.0, 0.0]
        records.append({
            "t": _round(s.timestamp), "v": SCHEMA_VERSION,
            "sigma": [_round(x) for x in sigma],
            "pts": [[_round(p.d), _round(p.omega), _round(p.alpha)]
                    for p in s.points],
        })
    _dump(records, path)


def read_scans(path):
    scans = []
    for rec in _load(path):
        sd, so, sa = rec.get("sigma", [None, None, None])
        kwargs = {}
        if sd is not None:
            kwargs = {"sigma_d": sd, "sigma_omega": so, "sigma_alpha": sa}
        pts = [PolarPoint(d, w, a, **kwargs) for d, w, a in rec["pts"]]
        scans.append(Scan(pts, timestamp=rec["t"]))
    return scans


_CORR_KEYS = {"sat_clock": "dts", "orbit": "orb", "iono": "ion",
              "tropo": "trop", "relativity": "rel", "windup": "pw"}


def write_epochs(epochs, path):
    records = []
    for e in epochs:
        obs_list = []
        for o in e.observations:
            obs_list.append({
                "sat": o.sat_id,
                "pr": _round(o.pseudorange, 6),
                "phi": _round(o.carrier, 6),
                "satpos": [_round(x, 6) for x in o.sat_pos_ecef],
                "corr": {short: _round(getattr(o.corrections, name), 6)
                         for name, short in _CORR_KEYS.items()},
                "sig": [_round(o.sigma_pr), _round(o.sigma_phi)],
                "lam": _round(o.wavelength),
            })
        records.append({"t": _round(e.time), "obs": obs_list,
                        "v": SCHEMA_VERSION})
    _dump(records, path)


def read_epochs(path):
    epochs = []
    for rec in _load(path):
        obs = []
        for o in rec["obs"]:
            corr = Corrections(**{name: o.get("corr", {}).get(short, 0.0)
                                  for name, short in _CORR_KEYS.items()})
            obs.append(GnssObservation(
                sat_id=o["sat"], epoch=rec["t"],
                pseudorange=o["pr"], carrier=o["phi"],
                sat_pos_ecef=o["satpos"], corrections=corr,
                sigma_pr=o["sig"][0], sigma_phi=o["sig"][1],
                wavelength=o["lam"]))
        epochs.append(Epoch(rec["t"], obs))
    return epochs


def cov_to_triu(cov):
    c = np.asarray(cov, dtype=float)
    return [c[0, 0], c[0, 1], c[0, 2], c[1, 1], c[1, 2], c[2, 2]]


def triu_to_cov(vals):
    a, b, c, d, e, f = vals
    return np.array([[a, b, c], [b, d, e], [c, e, f]])


def write_trajectory(rows, path):
    """rows: dicts with t, enu, and optionally cov (3x3), src, R, ant, clk."""
    records = []
    for row in rows:
        rec = {"t": _round(row["t"]), "v": SCHEMA_VERSION,
               "enu": [_round(x, 6) for x in row["enu"]],
               "src": row.get("src", "fused")}
        if row.get("cov") is not None:
            rec["cov"] = [_round(x, 8) for x in cov_to_triu(row["cov"])]
        if row.get("R") is not None:
            rec["R"] = [_round(x, 9)
                        for x in np.asarray(row["R"]).reshape(9)]
        if row.get("ant") is not None:
            rec["ant"] = [_round(x, 6) for x in row["ant"]]
        if row.get("clk") is not None:
            rec["clk"] = _round(row["clk"], 6)
        records.append(rec)
    _dump(records, path)


def read_trajectory(path):
    rows = []
    for rec in _load(path):
        row = {"t": rec["t"], "enu": np.array(rec["enu"]),
               "src": rec.get("src", "fused")}
        if "cov" in rec:
            row["cov"] = triu_to_cov(rec["cov"])
        if "R" in rec:
            row["R"] = np.array(rec["R"]).reshape(3, 3)
        if "ant" in rec:
            row["ant"] = np.array(rec["ant"])
        if "clk" in rec:
            row["clk"] = rec["clk"]
        rows.append(row)
    return rows


def write_verdicts(verdicts, path):
    records = [{"t": _round(v.epoch), "in": sorted(v.inliers),
                "out": sorted(v.outliers), "alpha": v.alpha,
                "v": SCHEMA_VERSION} for v in verdicts]
    _dump(records, path)


def read_verdicts(path):
    return [{"t": rec["t"], "in": set(rec["in"]), "out": set(rec["out"]),
             "alpha": rec["alpha"]} for rec in _load(path)]
