"""Command line interface.

Subcommands:
    simulate  config -> scans.jsonl + epochs.jsonl + truth.jsonl
    icp-cov   scans.jsonl -> per-pair relative poses with covariances
    ppp       epochs.jsonl -> PPP trajectory (src=ppp)
    raim      epochs.jsonl -> per-epoch integrity verdicts
    fuse      scans + epochs -> fused / ppp / odom trajectories + verdicts
    eval      est vs truth trajectories -> metric,value report (+ figures)

Exit codes: 0 success, 1 usage error, 2 data error.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import __version__
from .errors import LcnavError, NoConvergence
from .frames import enu_rotation, geodetic_to_ecef
from .jsonl import (SCHEMA_VERSION, read_epochs, read_scans, read_trajectory,
                    write_epochs, write_scans, write_trajectory,
                    write_verdicts)
from .metrics import report
from .pipeline import PipelineConfig, run_pipeline
from .ppp import AmbiguityStore, ppp_solve_epoch, spp_solve_epoch
from .raim import DEFAULT_ALPHA, raim_epoch
from .registration import icp_register
from .scan import scan_to_cart
from .sim import (ScenarioConfig, generate_trajectory, load_config,
                  render_gnss, render_scans, truth_rows)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    p = _Parser(prog="lcnav", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version",
                   version=f"lcnav {__version__} (schema v{SCHEMA_VERSION})")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic dataset")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    s.add_argument("--out-dir", default=".")

    s = sub.add_parser("icp-cov", help="scan-to-scan registration report")
    s.add_argument("--scans", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--csv", default=None)

    s = sub.add_parser("ppp", help="per-epoch PPP trajectory")
    s.add_argument("--obs", required=True)
    s.add_argument("--config", required=True,
                   help="scenario config (for the ENU origin)")
    s.add_argument("--out", required=True)
    s.add_argument("--csv", default=None)

    s = sub.add_parser("raim", help="pseudorange integrity screening")
    s.add_argument("--obs", required=True)
    s.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    s.add_argument("--out", required=True)
    s.add_argument("--csv", default=None)

    s = sub.add_parser("fuse", help="full fusion pipeline")
    s.add_argument("--scans", required=True)
    s.add_argument("--obs", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    s.add_argument("--out-dir", default=".")
    s.add_argument("--plots", action="store_true",
                   help="also render trajectory figures")

    s = sub.add_parser("eval", help="error metrics report")
    s.add_argument("--truth", required=True)
    s.add_argument("--est", required=True)
    s.add_argument("--obs-epochs", type=int, default=None,
                   help="observation epoch count for availability")
    s.add_argument("--csv", default=None)
    s.add_argument("--plots", default=None, metavar="DIR",
                   help="render CDF and per-axis figures into DIR")
    return p


def _write_csv(rows, path, header):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _cmd_simulate(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    gt = generate_trajectory(cfg)
    scans = render_scans(cfg, gt)
    epochs = render_gnss(cfg, gt)
    os.makedirs(args.out_dir, exist_ok=True)
    write_scans(scans, os.path.join(args.out_dir, "scans.jsonl"))
    write_epochs(epochs, os.path.join(args.out_dir, "epochs.jsonl"))
    write_trajectory(truth_rows(gt), os.path.join(args.out_dir, "truth.jsonl"))
    print(f"wrote {len(scans)} scans, {len(epochs)} epochs to {args.out_dir}")
    return 0


def _cmd_icp_cov(args):
    import json
    scans = read_scans(args.scans)
    if len(scans) < 2:
        raise LcnavError("need at least two scans")
    rows = []
    prev = None
    for k in range(1, len(scans)):
        A = scan_to_cart(scans[k])
        B = scan_to_cart(scans[k - 1])
        try:
            res, _ = icp_register(A, B, max_iter=100, initial_pose=prev)
        except NoConvergence as exc:
            res = exc.best
        prev = res.pose
        rows.append({
            "i": k - 1, "j": k, "t": round(float(scans[k].timestamp), 9),
            "translation": [round(float(x), 9) for x in res.pose.translation],
            "rotation": [round(float(x), 9)
                         for x in res.pose.rotation.reshape(9)],
            "cov_t": [round(float(x), 12)
                      for x in res.cov_translation.matrix.reshape(9)],
            "cov_rot": [round(float(x), 12)
                        for x in res.cov_rotation.reshape(9)],
            "iterations": res.iterations, "v": SCHEMA_VERSION,
        })
    with open(args.out, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    if args.csv:
        _write_csv([[r["i"], r["j"], r["t"]] + r["translation"]
                    + [r["cov_t"][0], r["cov_t"][4], r["cov_t"][8]]
                    for r in rows], args.csv,
                   ["i", "j", "t", "tx", "ty", "tz",
                    "var_tx", "var_ty", "var_tz"])
    print(f"wrote {len(rows)} pair registrations to {args.out}")
    return 0


def _cmd_ppp(args):
    cfg = load_config(args.config)
    epochs = read_epochs(args.obs)
    R = enu_rotation(cfg.origin).rotation
    origin_ecef = geodetic_to_ecef(cfg.origin)
    store = AmbiguityStore()
    rows = []
    skipped = 0
    for e in epochs:
        try:
            sol = ppp_solve_epoch(e, store.priors_for(e), x0=origin_ecef)
        except LcnavError:
            skipped += 1
            continue
        store.update(e, sol)
        rows.append({"t": e.time,
                     "enu": R.T @ (sol.x_ecef - origin_ecef),
                     "cov": R.T @ sol.cov_x.matrix @ R,
                     "src": "ppp"})
    write_trajectory(rows, args.out)
    if args.csv:
        _write_csv([[r["t"]] + list(np.round(r["enu"], 6)) for r in rows],
                   args.csv, ["t", "east", "north", "up"])
    print(f"solved {len(rows)}/{len(epochs)} epochs "
          f"({skipped} unsolvable) -> {args.out}")
    return 0


def _cmd_raim(args):
    from .frames import CovMatrix3, FrameTag
    epochs = read_epochs(args.obs)
    verdicts = []
    skipped = 0
    for e in epochs:
        try:
            spp = spp_solve_epoch(e)
            v = raim_epoch(spp.x_ecef,
                           CovMatrix3(1e6 * np.eye(3), frame=FrameTag.ECEF),
                           spp.x_ecef,
                           CovMatrix3(spp.cov_x.matrix + 1e-2 * np.eye(3),
                                      frame=FrameTag.ECEF),
                           e, alpha=args.alpha)
        except LcnavError:
            skipped += 1
            continue
        verdicts.append(v)
    write_verdicts(verdicts, args.out)
    if args.csv:
        _write_csv([[v.epoch, len(v.inliers), len(v.outliers),
                     ";".join(sorted(v.outliers)), int(v.degraded)]
                    for v in verdicts], args.csv,
                   ["t", "n_inliers", "n_outliers", "outliers", "degraded"])
    n_flagged = sum(1 for v in verdicts if v.outliers)
    print(f"screened {len(verdicts)} epochs ({skipped} skipped), "
          f"{n_flagged} with outliers -> {args.out}")
    return 0


def _cmd_fuse(args):
    cfg = load_config(args.config)
    scans = read_scans(args.scans)
    epochs = read_epochs(args.obs)
    pcfg = PipelineConfig(origin=cfg.origin,
                          lever_arm=np.asarray(cfg.lever_arm, dtype=float),
                          alpha=args.alpha)
    result = run_pipeline(scans, epochs, pcfg)
    os.makedirs(args.out_dir, exist_ok=True)
    write_trajectory(result.fused, os.path.join(args.out_dir, "fused.jsonl"))
    write_trajectory(result.ppp, os.path.join(args.out_dir, "ppp.jsonl"))
    write_trajectory(result.odom, os.path.join(args.out_dir, "odom.jsonl"))
    write_verdicts(result.verdicts,
                   os.path.join(args.out_dir, "verdicts.jsonl"))
    if args.plots:
        from .plots import save_trajectory_figure
        tracks = {"fused": [r["enu"] for r in result.fused],
                  "ppp": [r["enu"] for r in result.ppp],
                  "odom": [r["enu"] for r in result.odom]}
        tracks = {k: v for k, v in tracks.items() if len(v) > 1}
        save_trajectory_figure(tracks,
                               os.path.join(args.out_dir, "trajectory.png"))
    print(f"fused {len(result.fused)} nodes, {len(result.ppp)} PPP epochs, "
          f"{len(result.degraded_epochs)} degraded -> {args.out_dir}")
    return 0


def _interp_rows(est_rows, truth_rows_):
    """Match estimate rows to truth samples at identical timestamps."""
    truth_by_t = {round(r["t"], 6): r for r in truth_rows_}
    est, truth, times = [], [], []
    for r in est_rows:
        tr = truth_by_t.get(round(r["t"], 6))
        if tr is None:
            continue
        est.append(r["enu"])
        truth.append(tr["enu"])
        times.append(r["t"])
    if not est:
        raise LcnavError("no common timestamps between est and truth")
    return np.array(est), np.array(truth), np.array(times)


def _cmd_eval(args):
    est_rows = read_trajectory(args.est)
    tru_rows = read_trajectory(args.truth)
    est, truth, times = _interp_rows(est_rows, tru_rows)
    n_obs = args.obs_epochs if args.obs_epochs is not None else len(tru_rows)
    rep = report(est, truth, n_solutions=len(est), n_observations=n_obs)
    lines = [(name, f"{value:.6f}") for name, value in rep.rows()]
    for name, value in lines:
        print(f"{name},{value}")
    if args.csv:
        _write_csv(lines, args.csv, ["metric", "value"])
        base = os.path.splitext(args.csv)[0]
        _write_csv([[t] + [rep.per_axis[a][k] for a in ("east", "north", "up")]
                    for k, t in enumerate(times)] if rep.per_axis else [],
                   base + "_axes.csv", ["t", "east", "north", "up"])
    if args.plots:
        from .plots import save_cdf_figure, save_error_axes_figure
        os.makedirs(args.plots, exist_ok=True)
        save_cdf_figure({"est": rep.cdf},
                        os.path.join(args.plots, "cdf.png"))
        if rep.per_axis:
            save_error_axes_figure(times, rep.per_axis,
                                   os.path.join(args.plots, "axes.png"))
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "icp-cov": _cmd_icp_cov,
    "ppp": _cmd_ppp,
    "raim": _cmd_raim,
    "fuse": _cmd_fuse,
    "eval": _cmd_eval,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (LcnavError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
