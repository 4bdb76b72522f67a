"""End-to-end loosely coupled localization: scan-to-scan odometry, RAIM-
screened PPP, and sliding-window graph fusion into an ENU trajectory.

The map frame is the first scan's sensor frame. Once enough GNSS fixes with
2-D spread have accumulated, the ENU<->map alignment and the antenna lever
arm are estimated in a bootstrap solve; afterwards they stay frozen and each
new node is refined in a sliding window anchored at its oldest node.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (Degenerate, InsufficientSatellites, LcnavError,
                     NoConvergence, NotObservable, SingularGeometry,
                     TooFewSatellites)
from .frames import (CovMatrix3, FrameTag, GeodeticCoord, Pose, enu_rotation,
                     geodetic_to_ecef)
from .graph import (FusionState, GnssFactor, LidarPriorFactor,
                    NodePriorFactor, optimize)
from .ppp import AmbiguityStore, Epoch, ppp_solve_epoch, spp_solve_epoch
from .raim import raim_epoch
from .registration import icp_register
from .scan import scan_to_cart


@dataclass
class PipelineConfig:
    origin: GeodeticCoord
    lever_arm: np.ndarray = field(default_factory=lambda: np.zeros(3))
    window: int = 30
    alpha: float = 2.0
    max_time_gap: float = 0.5
    # additive covariance floor on the odometry factors; absorbs the
    # surface-resampling bias that the sensor-noise propagation cannot see
    odom_sigma_floor_t: float = 0.02
    odom_sigma_floor_r: float = 0.002
    # minimum rms cross-track spread (m) of the GNSS fix cloud before the
    # alignment bootstrap is attempted; must exceed the GNSS noise level
    bootstrap_spread: float = 3.0

    def __post_init__(self):
        self.lever_arm = np.asarray(self.lever_arm, dtype=float).reshape(3)


@dataclass
class PipelineResult:
    fused: list                 # trajectory rows (t, enu, cov, src)
    ppp: list
    odom: list
    verdicts: list              # RaimVerdict per processed epoch
    degraded_epochs: list       # epoch times skipped or flagged
    lever_arm: np.ndarray = None
    alignment: Pose = None      # ENU -> map


def _odometry(scans):
    """Consecutive-pair ICP with constant-motion warm starts.

    Returns (poses, factors): poses[k] is L_k expressed in L_0; factors[k-1]
    carries the (k-1, k) relative pose and its 6x6 (t, rot) covariance.
    """
    poses = [Pose(np.eye(3), np.zeros(3), frm=FrameTag.LIDAR, to=FrameTag.LIDAR)]
    factors = []
    prev_rel = None
    for k in range(1, len(scans)):
        A = scan_to_cart(scans[k])
        B = scan_to_cart(scans[k - 1])
        try:
            res, _ = icp_register(A, B, max_iter=100, initial_pose=prev_rel)
        except NoConvergence as exc:
            res = exc.best
        prev_rel = res.pose
        cov = np.zeros((6, 6))
        cov[:3, :3] = res.cov_translation.matrix
        cov[3:, 3:] = res.cov_rotation
        factors.append((k - 1, k, res.pose, cov))
        poses.append(poses[-1] @ res.pose)
    return poses, factors


def _factor_cov(cov, cfg: PipelineConfig):
    out = np.array(cov, dtype=float)
    out[:3, :3] += cfg.odom_sigma_floor_t**2 * np.eye(3)
    out[3:, 3:] += cfg.odom_sigma_floor_r**2 * np.eye(3)
    return out


def _align_bootstrap(map_pts, enu_pts):
    """Yaw-plus-shift ENU->map fit from paired antenna fixes.

    A full 3-D Kabsch fit is ambiguous here: both point sets are nearly
    coplanar, so the plane-flipped rotation fits equally well and meter-level
    GNSS up-noise can select it. A ground platform shares the up axis between
    frames, which reduces the alignment to a horizontal Procrustes problem.
    """
    a = np.asarray(enu_pts, dtype=float)
    b = np.asarray(map_pts, dtype=float)
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    num = np.sum(ac[:, 0] * bc[:, 1] - ac[:, 1] * bc[:, 0])
    den = np.sum(ac[:, 0] * bc[:, 0] + ac[:, 1] * bc[:, 1])
    if abs(num) < 1e-12 and abs(den) < 1e-12:
        raise Degenerate("no horizontal spread in alignment fit")
    yaw = np.arctan2(num, den)
    c, s = np.cos(yaw), np.sin(yaw)
    R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    t = b.mean(axis=0) - R @ a.mean(axis=0)
    return R, t


def _spread_ok(enu_pts, threshold):
    pts = np.asarray(enu_pts, dtype=float)
    if len(pts) < 3:
        return False
    s = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    return s[1] / np.sqrt(len(pts)) > threshold


class _Graph:
    """Full node history plus sliding-window refinement."""

    def __init__(self, cfg, odom_poses, odom_factors):
        self.cfg = cfg
        self.node_R = [p.rotation.copy() for p in odom_poses]
        self.node_t = [p.translation.copy() for p in odom_poses]
        self.lidar_factors = [
            LidarPriorFactor(i, j, rel, _factor_cov(cov, cfg))
            for i, j, rel, cov in odom_factors]
        self.gnss_factors = []
        self.aligned = False
        self.rot_enu_map = np.eye(3)
        self.t_enu_map = np.zeros(3)
        self.lever = cfg.lever_arm.copy()
        self.node_cov = [None] * len(self.node_R)

    def state(self, lo, hi):
        return FusionState(self.rot_enu_map, self.t_enu_map,
                           [self.node_R[k] for k in range(lo, hi)],
                           [self.node_t[k] for k in range(lo, hi)],
                           self.lever)

    def _writeback(self, state, lo, hi):
        self.rot_enu_map = state.rot_enu_map
        self.t_enu_map = state.t_enu_map
        self.lever = state.lever_arm
        for k in range(lo, hi):
            self.node_R[k] = state.node_rotations[k - lo]
            self.node_t[k] = state.node_translations[k - lo]

    def _window_factors(self, lo, hi):
        g = [GnssFactor(f.epoch, f.node - lo, f.p_enu, f.cov)
             for f in self.gnss_factors if lo <= f.node < hi]
        l = [LidarPriorFactor(f.i - lo, f.j - lo, f.relative_pose, f.cov)
             for f in self.lidar_factors if lo <= f.i and f.j < hi]
        return g, l

    def add_gnss(self, epoch, node, p_enu, cov):
        self.gnss_factors.append(GnssFactor(epoch, node, p_enu, cov))

    def try_bootstrap(self):
        enu_pts = [f.p_enu for f in self.gnss_factors]
        if not _spread_ok(enu_pts, self.cfg.bootstrap_spread):
            return False
        hi = max(f.node for f in self.gnss_factors) + 1
        map_pts = [self.node_t[f.node] + self.node_R[f.node] @ self.lever
                   for f in self.gnss_factors]
        try:
            self.rot_enu_map, self.t_enu_map = _align_bootstrap(map_pts, enu_pts)
        except (Degenerate, LcnavError):
            return False
        g, l = self._window_factors(0, hi)
        # the fix cloud is nearly coplanar, so alignment roll/pitch is not
        # observable here; keep the whole alignment at the Procrustes fit
        try:
            state, covs = optimize(self.state(0, hi), g, l, fixed_nodes=(0,),
                                   fix_alignment=True)
        except NoConvergence as exc:
            state, covs = exc.best
        except NotObservable:
            return False
        self._writeback(state, 0, hi)
        for k in range(hi):
            if covs[k] is not None:
                self.node_cov[k] = covs[k]
        self.aligned = True
        return True

    def _oldest_prior(self, lo):
        nc = self.node_cov[lo]
        cov = np.zeros((6, 6))
        if nc is None:
            cov[:3, :3] = 1.0 * np.eye(3)
            cov[3:, 3:] = 0.01 * np.eye(3)
        else:
            # stored order is (theta, t); the prior factor wants (t, theta)
            cov[:3, :3] = nc[3:6, 3:6]
            cov[3:, 3:] = nc[0:3, 0:3]
            cov[:3, 3:] = nc[3:6, 0:3]
            cov[3:, :3] = nc[0:3, 3:6]
            cov += 1e-6 * np.eye(6)
        return NodePriorFactor(0, self.node_R[lo], self.node_t[lo], cov)

    def refine(self, node):
        """Sliding-window solve ending at `node`: alignment frozen, oldest
        window node held by a soft marginalization prior."""
        lo = max(0, node - self.cfg.window + 1)
        hi = node + 1
        if hi - lo < 2:
            return
        g, l = self._window_factors(lo, hi)
        if not l:
            return
        prior = self._oldest_prior(lo)
        try:
            state, covs = optimize(self.state(lo, hi), g, l, fixed_nodes=(),
                                   require_gnss_geometry=False,
                                   fix_alignment=True,
                                   prior_factors=(prior,))
        except NoConvergence as exc:
            state, covs = exc.best
        except NotObservable:
            return
        self._writeback(state, lo, hi)
        if covs[-1] is not None:
            self.node_cov[node] = covs[-1]

    def node_pose_enu(self, k):
        R_m_n = self.rot_enu_map.T
        from .so3 import project_rotation
        R = project_rotation(R_m_n @ self.node_R[k])
        t = R_m_n @ (self.node_t[k] - self.t_enu_map)
        return Pose(R, t, frm=FrameTag.LIDAR, to=FrameTag.ENU)

    def antenna_enu(self, k):
        pose = self.node_pose_enu(k)
        return pose.translation + pose.rotation @ self.lever


def _fill_covariances(graph: _Graph):
    """Dead-reckoning growth for nodes no window ever covered: the previous
    node's covariance plus the connecting odometry factor's."""
    factors = {f.j: f for f in graph.lidar_factors}
    base = 1e-4 * np.eye(6)
    for k in range(len(graph.node_R)):
        if graph.node_cov[k] is not None:
            continue
        if k == 0 or graph.node_cov[k - 1] is None:
            graph.node_cov[k] = base.copy()
            continue
        grow = np.zeros((6, 6))
        f = factors.get(k)
        if f is not None:
            # factor cov is (t, rot); node cov is (theta, t)
            grow[0:3, 0:3] = f.cov[3:, 3:]
            grow[3:6, 3:6] = f.cov[:3, :3]
        graph.node_cov[k] = graph.node_cov[k - 1] + grow


def _psd_floor(cov, eps):
    """Symmetrize and lift tiny eigenvalues; zero-redundancy epochs would
    otherwise report a singular covariance."""
    c = 0.5 * (np.asarray(cov, dtype=float) + np.asarray(cov, dtype=float).T)
    return c + eps * np.eye(c.shape[0])


def _enu_of_ecef(x_ecef, origin_ecef, R_enu):
    return R_enu.T @ (np.asarray(x_ecef, dtype=float) - origin_ecef)


def run_pipeline(scans, epochs, cfg: PipelineConfig) -> PipelineResult:
    """Process time-ordered scans and GNSS epochs into fused / PPP / odometry
    trajectories plus per-epoch RAIM verdicts."""
    R_enu = enu_rotation(cfg.origin).rotation
    origin_ecef = geodetic_to_ecef(cfg.origin)

    ppp_rows = []
    verdicts = []
    degraded = []
    amb_store = AmbiguityStore()

    if not scans:
        # single-source degenerate run: output follows PPP
        fused = []
        for e in epochs:
            try:
                sol = ppp_solve_epoch(e, amb_store.priors_for(e),
                                      x0=origin_ecef)
            except (InsufficientSatellites, SingularGeometry):
                degraded.append(e.time)
                continue
            amb_store.update(e, sol)
            p = _enu_of_ecef(sol.x_ecef, origin_ecef, R_enu)
            cov = R_enu.T @ sol.cov_x.matrix @ R_enu
            ppp_rows.append({"t": e.time, "enu": p, "cov": cov, "src": "ppp"})
            fused.append({"t": e.time, "enu": p, "cov": cov, "src": "fused"})
        return PipelineResult(fused, ppp_rows, [], verdicts, degraded,
                              lever_arm=cfg.lever_arm.copy())

    odom_poses, odom_factors = _odometry(scans)
    scan_times = np.array([s.timestamp for s in scans])
    graph = _Graph(cfg, odom_poses, odom_factors)

    for e in epochs:
        k = int(np.argmin(np.abs(scan_times - e.time)))
        node = k if abs(scan_times[k] - e.time) <= cfg.max_time_gap else None

        try:
            spp = spp_solve_epoch(e, x0=origin_ecef)
        except (InsufficientSatellites, SingularGeometry):
            degraded.append(e.time)
            continue

        if graph.aligned and node is not None:
            x_l = origin_ecef + R_enu @ graph.antenna_enu(node)
            nc = graph.node_cov[node]
            c_t = nc[3:6, 3:6] if nc is not None else 0.25 * np.eye(3)
            cov_l = R_enu @ (graph.rot_enu_map.T @ c_t @ graph.rot_enu_map
                             + 1e-4 * np.eye(3)) @ R_enu.T
        else:
            # no georeferenced odometry yet: screen GNSS against itself
            x_l = spp.x_ecef
            cov_l = 1e6 * np.eye(3)
        spp_cov = CovMatrix3(_psd_floor(spp.cov_x.matrix, 1e-2),
                             frame=FrameTag.ECEF)
        try:
            verdict = raim_epoch(x_l, CovMatrix3(cov_l, frame=FrameTag.ECEF),
                                 spp.x_ecef, spp_cov, e, alpha=cfg.alpha)
        except (TooFewSatellites, LcnavError):
            degraded.append(e.time)
            continue
        verdicts.append(verdict)
        if verdict.degraded:
            degraded.append(e.time)

        kept = Epoch(e.time, [o for o in e.observations
                              if o.sat_id in verdict.inliers])
        priors = amb_store.priors_for(kept, outliers=verdict.outliers)
        try:
            sol = ppp_solve_epoch(kept, priors, x0=spp.x_ecef)
        except (InsufficientSatellites, SingularGeometry):
            degraded.append(e.time)
            continue
        amb_store.update(kept, sol)
        p_enu = _enu_of_ecef(sol.x_ecef, origin_ecef, R_enu)
        cov_enu = R_enu.T @ sol.cov_x.matrix @ R_enu
        ppp_rows.append({"t": e.time, "enu": p_enu, "cov": cov_enu,
                         "src": "ppp"})

        if node is None:
            continue
        # never weight a fix tighter than its formal (m0^2 = 1) covariance:
        # zero-redundancy epochs report a near-zero variance factor, so the
        # factor weight comes from the cofactor matrix, not the scaled cov
        qx_enu = R_enu.T @ sol.qx_pos @ R_enu
        graph.add_gnss(e.time, node, p_enu,
                       _psd_floor(max(sol.variance_factor, 1.0) * qx_enu,
                                  1e-2))
        if not graph.aligned:
            graph.try_bootstrap()
        else:
            graph.refine(node)

    if graph.aligned:
        # second pass: revisit every node with the settled alignment so the
        # pre-bootstrap stretch benefits from it too
        nodes_with_gnss = sorted({f.node for f in graph.gnss_factors})
        for k in nodes_with_gnss:
            graph.refine(k)

    _fill_covariances(graph)
    R_m_n = graph.rot_enu_map.T
    fused = []
    odom_rows = []
    for k in range(len(scans)):
        pose = graph.node_pose_enu(k)
        cov = R_m_n @ graph.node_cov[k][3:6, 3:6] @ R_m_n.T
        fused.append({"t": float(scan_times[k]), "enu": pose.translation,
                      "cov": 0.5 * (cov + cov.T), "src": "fused"})
        od = R_m_n @ (odom_poses[k].translation - graph.t_enu_map)
        odom_rows.append({"t": float(scan_times[k]), "enu": od,
                          "src": "odom"})
    alignment = Pose(graph.rot_enu_map, graph.t_enu_map,
                     frm=FrameTag.ENU, to=FrameTag.MAP)
    return PipelineResult(fused, ppp_rows, odom_rows, verdicts, degraded,
                          lever_arm=graph.lever.copy(), alignment=alignment)
