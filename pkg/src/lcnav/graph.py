"""Loosely coupled fusion backend: a factor graph over the ENU<->map
alignment, per-node LiDAR poses and the GNSS antenna lever arm, solved by
Levenberg-Marquardt with analytic Jacobians.

Residuals (left-multiplicative perturbations throughout):
  GNSS factor:   r1 = R_M^N (R_L^M p + t_L^M - t_N^M) - p_G^N
  LiDAR prior:   r2 = [R_{M,i}^L (t_{L,j}^M - t_{L,i}^M) - t_meas;
                       log(R_meas^T R_{M,i}^L R_{L,j}^M)^vee]
The map frame is a pure gauge; the oldest node is held fixed to pin it.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence, NotObservable, StaleData
from .frames import FrameTag, Pose
from .so3 import exp_map, hat, left_jacobian_inv, log_map, project_rotation, vee

LM_LAMBDA0 = 1e-4
LM_MAX_ITER = 100
LM_COST_TOL = 1e-9
LM_GRAD_TOL = 1e-8
MAX_EXTRAPOLATION_GAP = 0.5
MAX_LEVER_ARM = 10.0


@dataclass
class GnssFactor:
    epoch: float
    node: int
    p_enu: np.ndarray       # antenna phase center in ENU
    cov: np.ndarray         # 3x3

    def __post_init__(self):
        self.p_enu = np.asarray(self.p_enu, dtype=float).reshape(3)
        self.cov = np.asarray(self.cov, dtype=float).reshape(3, 3)


@dataclass
class LidarPriorFactor:
    i: int
    j: int
    relative_pose: Pose     # pose of L_j expressed in L_i
    cov: np.ndarray         # 6x6, ordered (translation, rotation)

    def __post_init__(self):
        self.cov = np.asarray(self.cov, dtype=float).reshape(6, 6)


@dataclass
class NodePriorFactor:
    """Soft anchor from marginalization: ties node k to a previous estimate
    with the covariance it had when it left the optimization window."""
    k: int
    rotation: np.ndarray
    translation: np.ndarray
    cov: np.ndarray         # 6x6, ordered (translation, rotation)

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        self.cov = np.asarray(self.cov, dtype=float).reshape(6, 6)


@dataclass
class FusionState:
    rot_enu_map: np.ndarray          # R_N^M
    t_enu_map: np.ndarray            # t_N^M
    node_rotations: list             # R_L^M per node
    node_translations: list          # t_L^M per node
    lever_arm: np.ndarray            # P_G^L

    def __post_init__(self):
        self.rot_enu_map = np.asarray(self.rot_enu_map, dtype=float)
        self.t_enu_map = np.asarray(self.t_enu_map, dtype=float).reshape(3)
        self.lever_arm = np.asarray(self.lever_arm, dtype=float).reshape(3)
        if np.linalg.norm(self.lever_arm) >= MAX_LEVER_ARM:
            raise ValueError("lever arm implausibly large")

    @property
    def n_nodes(self):
        return len(self.node_rotations)

    def copy(self):
        return FusionState(self.rot_enu_map.copy(), self.t_enu_map.copy(),
                           [r.copy() for r in self.node_rotations],
                           [t.copy() for t in self.node_translations],
                           self.lever_arm.copy())

    def node_pose_enu(self, k):
        """Pose of node k's LiDAR frame in ENU."""
        R_m_n = self.rot_enu_map.T
        R = R_m_n @ self.node_rotations[k]
        t = R_m_n @ (self.node_translations[k] - self.t_enu_map)
        return Pose(project_rotation(R), t, frm=FrameTag.LIDAR, to=FrameTag.ENU)


def residual_gnss(state: FusionState, f: GnssFactor):
    R_m_n = state.rot_enu_map.T
    q = (state.node_rotations[f.node] @ state.lever_arm
         + state.node_translations[f.node] - state.t_enu_map)
    return R_m_n @ q - f.p_enu


def residual_lidar_prior(state: FusionState, f: LidarPriorFactor):
    Ri = state.node_rotations[f.i]
    Rj = state.node_rotations[f.j]
    dt = state.node_translations[f.j] - state.node_translations[f.i]
    r_t = Ri.T @ dt - f.relative_pose.translation
    r_rot = log_map(f.relative_pose.rotation.T @ Ri.T @ Rj)
    return np.concatenate([r_t, r_rot])


def gnss_jacobian_blocks(state: FusionState, f: GnssFactor):
    """Blocks of d r1 / d (theta_N, t_N, theta_Lk, t_Lk, lever)."""
    R_m_n = state.rot_enu_map.T
    Rk = state.node_rotations[f.node]
    q = Rk @ state.lever_arm + state.node_translations[f.node] - state.t_enu_map
    return {
        "theta_n": R_m_n @ hat(q),
        "t_n": -R_m_n,
        "theta_l": -R_m_n @ hat(Rk @ state.lever_arm),
        "t_l": R_m_n,
        "lever": R_m_n @ Rk,
    }


def lidar_jacobian_blocks(state: FusionState, f: LidarPriorFactor):
    """Blocks of d r2 / d (theta_Li, t_Li, theta_Lj, t_Lj), 6-row residual."""
    Ri = state.node_rotations[f.i]
    Rj = state.node_rotations[f.j]
    dt = state.node_translations[f.j] - state.node_translations[f.i]
    C = f.relative_pose.rotation.T @ Ri.T
    phi = log_map(C @ Rj)
    Jinv = left_jacobian_inv(phi)
    Z = np.zeros((3, 3))
    top = {"theta_i": Ri.T @ hat(dt), "t_i": -Ri.T,
           "theta_j": Z, "t_j": Ri.T}
    bot = {"theta_i": -Jinv @ C, "t_i": Z,
           "theta_j": Jinv @ C, "t_j": Z}
    return top, bot


def residual_node_prior(state: FusionState, f: NodePriorFactor):
    r_t = state.node_translations[f.k] - f.translation
    r_rot = log_map(f.rotation.T @ state.node_rotations[f.k])
    return np.concatenate([r_t, r_rot])


def node_prior_jacobian_blocks(state: FusionState, f: NodePriorFactor):
    C = f.rotation.T
    phi = log_map(C @ state.node_rotations[f.k])
    Z = np.zeros((3, 3))
    top = {"theta": Z, "t": np.eye(3)}
    bot = {"theta": left_jacobian_inv(phi) @ C, "t": Z}
    return top, bot


def _whitener(cov):
    """L^-1 with cov = L L^T, so that L^-1 r has unit covariance."""
    L = np.linalg.cholesky(cov)
    return np.linalg.inv(L)


def _state_dim(state):
    return 9 + 6 * state.n_nodes


def _free_mask(state, fixed_nodes, fix_alignment=False, fix_lever=False):
    mask = np.ones(_state_dim(state), dtype=bool)
    if fix_alignment:
        mask[0:9] = False
    if fix_lever:
        mask[6:9] = False
    for k in fixed_nodes:
        mask[9 + 6 * k: 9 + 6 * k + 6] = False
    return mask


def _assemble(state, gnss_factors, lidar_factors, prior_factors=()):
    dim = _state_dim(state)
    rows_r = []
    rows_j = []
    for f in prior_factors:
        r = residual_node_prior(state, f)
        top, bot = node_prior_jacobian_blocks(state, f)
        J = np.zeros((6, dim))
        base = 9 + 6 * f.k
        J[0:3, base:base + 3] = top["theta"]
        J[0:3, base + 3:base + 6] = top["t"]
        J[3:6, base:base + 3] = bot["theta"]
        J[3:6, base + 3:base + 6] = bot["t"]
        Wi = _whitener(f.cov)
        rows_r.append(Wi @ r)
        rows_j.append(Wi @ J)
    for f in gnss_factors:
        r = residual_gnss(state, f)
        blocks = gnss_jacobian_blocks(state, f)
        J = np.zeros((3, dim))
        J[:, 0:3] = blocks["theta_n"]
        J[:, 3:6] = blocks["t_n"]
        J[:, 6:9] = blocks["lever"]
        base = 9 + 6 * f.node
        J[:, base:base + 3] = blocks["theta_l"]
        J[:, base + 3:base + 6] = blocks["t_l"]
        Wi = _whitener(f.cov)
        rows_r.append(Wi @ r)
        rows_j.append(Wi @ J)
    for f in lidar_factors:
        r = residual_lidar_prior(state, f)
        top, bot = lidar_jacobian_blocks(state, f)
        J = np.zeros((6, dim))
        bi = 9 + 6 * f.i
        bj = 9 + 6 * f.j
        J[0:3, bi:bi + 3] = top["theta_i"]
        J[0:3, bi + 3:bi + 6] = top["t_i"]
        J[0:3, bj:bj + 3] = top["theta_j"]
        J[0:3, bj + 3:bj + 6] = top["t_j"]
        J[3:6, bi:bi + 3] = bot["theta_i"]
        J[3:6, bi + 3:bi + 6] = bot["t_i"]
        J[3:6, bj:bj + 3] = bot["theta_j"]
        J[3:6, bj + 3:bj + 6] = bot["t_j"]
        Wi = _whitener(f.cov)
        rows_r.append(Wi @ r)
        rows_j.append(Wi @ J)
    return np.concatenate(rows_r), np.vstack(rows_j)


def _apply_delta(state, delta):
    out = state.copy()
    out.rot_enu_map = project_rotation(exp_map(delta[0:3]) @ out.rot_enu_map)
    out.t_enu_map = out.t_enu_map + delta[3:6]
    out.lever_arm = out.lever_arm + delta[6:9]
    for k in range(out.n_nodes):
        base = 9 + 6 * k
        out.node_rotations[k] = project_rotation(
            exp_map(delta[base:base + 3]) @ out.node_rotations[k])
        out.node_translations[k] = out.node_translations[k] + delta[base + 3:base + 6]
    return out


def _check_gnss_geometry(gnss_factors):
    """Fewer than 3 non-collinear GNSS fixes cannot pin the alignment."""
    if len(gnss_factors) < 3:
        raise NotObservable("fewer than 3 GNSS factors")
    pts = np.array([f.p_enu for f in gnss_factors])
    centered = pts - pts.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[1] < 1e-9 * max(s[0], 1.0):
        raise NotObservable("GNSS factors are collinear")


def optimize(state: FusionState, gnss_factors, lidar_factors,
             fixed_nodes=(0,), max_iter=LM_MAX_ITER,
             require_gnss_geometry=True, fix_alignment=False,
             fix_lever=False, prior_factors=()):
    """Levenberg-Marquardt over the alignment, node poses and lever arm.

    The nodes in `fixed_nodes` are held at their current values (gauge /
    marginalization anchor). With fix_alignment the ENU<->map alignment and
    lever arm are also frozen (steady-state windows after calibration).
    Returns (state, node_covariances) where node_covariances[k] is the 6x6
    covariance of node k's (theta, t) in the map frame (None for fixed nodes).
    """
    if require_gnss_geometry:
        _check_gnss_geometry(gnss_factors)
    mask = _free_mask(state, fixed_nodes, fix_alignment, fix_lever)
    lam = LM_LAMBDA0
    r, J = _assemble(state, gnss_factors, lidar_factors, prior_factors)
    Jf = J[:, mask]
    cost = float(r @ r)
    converged = False
    for _ in range(max_iter):
        g = Jf.T @ r
        if np.linalg.norm(g) < LM_GRAD_TOL:
            converged = True
            break
        JtJ = Jf.T @ Jf
        accepted = False
        for _try in range(25):
            damped = JtJ + lam * np.diag(np.maximum(np.diag(JtJ), 1e-12))
            try:
                step = np.linalg.solve(damped, -g)
            except np.linalg.LinAlgError as exc:
                raise NotObservable(str(exc)) from exc
            delta = np.zeros(mask.size)
            delta[mask] = step
            candidate = _apply_delta(state, delta)
            rc, Jc = _assemble(candidate, gnss_factors, lidar_factors,
                               prior_factors)
            new_cost = float(rc @ rc)
            if new_cost < cost:
                rel = (cost - new_cost) / max(cost, 1e-300)
                state, r, J = candidate, rc, Jc
                Jf = J[:, mask]
                cost = new_cost
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                if rel < LM_COST_TOL:
                    converged = True
                break
            lam *= 10.0
        if not accepted or converged:
            if accepted or np.linalg.norm(g) < 1e-3:
                converged = True
            break
    node_covs = _node_covariances(state, Jf, mask, fixed_nodes)
    if not converged:
        raise NoConvergence("LM did not converge", best=(state, node_covs))
    return state, node_covs


def _node_covariances(state, Jf, mask, fixed_nodes):
    JtJ = Jf.T @ Jf
    eig_max = max(np.linalg.eigvalsh(JtJ).max(), 1e-300)
    try:
        cov_free = np.linalg.inv(JtJ + 1e-12 * eig_max * np.eye(JtJ.shape[0]))
    except np.linalg.LinAlgError:
        return [None] * state.n_nodes
    # map free-parameter indices back to full layout
    full_idx = np.nonzero(mask)[0]
    pos = {int(fi): k for k, fi in enumerate(full_idx)}
    covs = []
    for k in range(state.n_nodes):
        if k in fixed_nodes:
            covs.append(None)
            continue
        base = 9 + 6 * k
        sel = [pos[base + d] for d in range(6)]
        covs.append(cov_free[np.ix_(sel, sel)])
    return covs


def _se3_exp(xi):
    rho, phi = xi[:3], xi[3:]
    R = exp_map(phi)
    theta = np.linalg.norm(phi)
    K = hat(phi)
    if theta < 1e-8:
        V = np.eye(3) + 0.5 * K
    else:
        V = (np.eye(3) + (1 - np.cos(theta)) / theta**2 * K
             + (theta - np.sin(theta)) / theta**3 * K @ K)
    return R, V @ rho


def _se3_log(R, t):
    phi = log_map(R)
    theta = np.linalg.norm(phi)
    K = hat(phi)
    if theta < 1e-8:
        Vinv = np.eye(3) - 0.5 * K
    else:
        Vinv = (np.eye(3) - 0.5 * K
                + (1 / theta**2 - (1 + np.cos(theta)) /
                   (2 * theta * np.sin(theta))) * K @ K)
    return np.concatenate([Vinv @ t, phi])


def extrapolate_lidar_pose(pose_a: Pose, t_a, pose_b: Pose, t_b, t_query,
                           max_gap=MAX_EXTRAPOLATION_GAP) -> Pose:
    """Constant-twist extrapolation of the LiDAR pose to t_query.

    Exact for screw motion; reduces to linear translation on straight paths.
    t_query may also fall inside [t_a, t_b] (interpolation).
    """
    if not t_a < t_b:
        raise ValueError("t_a must precede t_b")
    if t_query < t_a or t_query > t_b + max_gap:
        raise StaleData(f"query {t_query} outside [{t_a}, {t_b + max_gap}]")
    delta = pose_a.inverse() @ pose_b
    xi = _se3_log(delta.rotation, delta.translation)
    s = (t_query - t_b) / (t_b - t_a)
    R, t = _se3_exp(s * xi)
    step = Pose(R, t, frm=pose_b.frm, to=pose_b.frm)
    return pose_b @ step
