"""Closed-form rigid registration via SVD and first-order covariance of the
result.

The registration solves R = U V^T (with the usual det-repair), t = B_c - R A_c
from the cross-covariance W of the demeaned point sets. Covariance of the
estimate follows from the derivative of the SVD factors with respect to W,
pushed through the map W -> R -> (small-angle vector, translation).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (Degenerate, EmptySet, LengthMismatch, NoConvergence,
                     RepeatedSingularValues)
from .frames import CovMatrix3, FrameTag, Pose
from .so3 import hat, vee, log_map

TOL_SEP_REL = 1e-8  # repeated-singular-value gate, relative to D_max
COLLINEAR_REL = 1e-9


@dataclass
class Correspondences:
    pairs: list  # (index into A, index into B)

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("correspondence set is empty")


@dataclass
class SvdTriple:
    U: np.ndarray
    D: np.ndarray  # singular values, descending
    V: np.ndarray


@dataclass
class RegistrationResult:
    pose: Pose
    cov_rotation: np.ndarray      # 3x3 over the left small-angle vector, rad^2
    cov_translation: CovMatrix3   # m^2
    correspondences: Correspondences = None
    iterations: int = 0
    residual_history: list = field(default_factory=list)


def centroids(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.size == 0 or B.size == 0:
        raise EmptySet("empty point set")
    if A.shape != B.shape:
        raise LengthMismatch(f"{A.shape} vs {B.shape}")
    return A.mean(axis=0), B.mean(axis=0)


def cross_covariance(A, B, A_c, B_c):
    """W = sum_i (B_i - B_c)(A_i - A_c)^T."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise LengthMismatch(f"{A.shape} vs {B.shape}")
    if A.size == 0:
        raise EmptySet("empty point set")
    return (B - B_c).T @ (A - A_c)


def svd3(W):
    U, D, Vt = np.linalg.svd(np.asarray(W, dtype=float))
    return SvdTriple(U, D, Vt.T)


def _check_well_posed(M):
    """Reject collinear configurations: the two smallest singular values of
    the demeaned scatter must carry signal."""
    s = np.linalg.svd(M.T @ M, compute_uv=False)
    if s[0] <= 0 or s[1] < COLLINEAR_REL * s[0]:
        raise Degenerate("correspondences are collinear")


def solve_rigid(A, B, corr: Correspondences, frm=FrameTag.LIDAR,
                to=FrameTag.LIDAR) -> Pose:
    """Least-squares rigid transform taking A onto B over the given pairs."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    ia = [p[0] for p in corr.pairs]
    ib = [p[1] for p in corr.pairs]
    if len(ia) < 3:
        raise Degenerate("need at least 3 correspondences")
    Ai, Bi = A[ia], B[ib]
    A_c, B_c = centroids(Ai, Bi)
    _check_well_posed(Ai - A_c)
    W = cross_covariance(Ai, Bi, A_c, B_c)
    t = svd3(W)
    s = np.sign(np.linalg.det(t.U @ t.V.T))
    R = t.U @ np.diag([1.0, 1.0, s]) @ t.V.T
    return Pose(R, B_c - R @ A_c, frm=frm, to=to)


def svd_jacobian(t: SvdTriple):
    """Derivatives of the SVD factors with respect to the decomposed matrix.

    Returns (dU, dD, dV) where dU[i, j] is the 3x3 derivative of U with
    respect to W_ij, dD[i, j] the 3-vector of singular-value derivatives and
    dV[i, j] the derivative of V. The off-diagonal generators come from the
    2x2 systems
        D_ll * OmU_kl + D_kk * OmV_kl =  U_ik V_jl
        D_kk * OmU_kl + D_ll * OmV_kl = -U_il V_jk
    with OmU, OmV antisymmetric.
    """
    U, D, V = t.U, t.D, t.V
    d_max = max(D[0], 1e-300)
    for k in range(3):
        for l in range(k + 1, 3):
            if abs(D[k] - D[l]) < TOL_SEP_REL * d_max:
                raise RepeatedSingularValues(
                    f"singular values {D[k]:.6e} and {D[l]:.6e} too close")
    dU = np.zeros((3, 3, 3, 3))
    dV = np.zeros((3, 3, 3, 3))
    dD = np.zeros((3, 3, 3))
    for i in range(3):
        for j in range(3):
            dD[i, j] = U[i, :] * V[j, :]
            om_u = np.zeros((3, 3))
            om_v = np.zeros((3, 3))
            for k in range(3):
                for l in range(k + 1, 3):
                    M = np.array([[D[l], D[k]], [D[k], D[l]]])
                    rhs = np.array([U[i, k] * V[j, l], -U[i, l] * V[j, k]])
                    x = np.linalg.solve(M, rhs)
                    om_u[k, l], om_v[k, l] = x
                    om_u[l, k] = -x[0]
                    om_v[l, k] = -x[1]
            dU[i, j] = U @ om_u
            dV[i, j] = -V @ om_v
    return dU, dD, dV


def _rotation_jacobian_wrt_w(t: SvdTriple):
    """3x9 map from vec(W) perturbations (row-major) to the left small-angle
    vector of R = U diag(1,1,s) V^T."""
    dU, _, dV = svd_jacobian(t)
    s = np.sign(np.linalg.det(t.U @ t.V.T))
    C = np.diag([1.0, 1.0, s])
    R = t.U @ C @ t.V.T
    J = np.zeros((3, 9))
    for i in range(3):
        for j in range(3):
            dR = dU[i, j] @ C @ t.V.T + t.U @ C @ dV[i, j].T
            J[:, 3 * i + j] = vee(dR @ R.T)
    return J, R


def propagate_cov(A, B, corr: Correspondences, pose: Pose, cov_A, cov_B):
    """First-order covariance of (rotation small-angle vector, translation).

    cov_A / cov_B are per-point 3x3 covariances, indexed like A and B. Point
    errors are treated as independent across points and between the two sets;
    the full Jacobian chain of W, the centroids, and t = B_c - R A_c is used,
    so cross terms between rotation and centroid noise are kept.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    ia = [p[0] for p in corr.pairs]
    ib = [p[1] for p in corr.pairs]
    n = len(ia)
    Ai, Bi = A[ia], B[ib]
    A_c, B_c = centroids(Ai, Bi)
    _check_well_posed(Ai - A_c)
    M = Ai - A_c
    N = Bi - B_c
    W = N.T @ M
    triple = svd3(W)
    J_theta_w, R = _rotation_jacobian_wrt_w(triple)

    H = hat(R @ A_c)
    eye = np.eye(3)
    cov_rot = np.zeros((3, 3))
    cov_t = np.zeros((3, 3))
    for k in range(n):
        # dW = N_k dA^T and dW = dB M_k^T, in row-major vec layout
        Jw_a = np.kron(N[k].reshape(3, 1), eye)
        Jw_b = np.kron(eye, M[k].reshape(3, 1))
        Jth_a = J_theta_w @ Jw_a
        Jth_b = J_theta_w @ Jw_b
        Jt_a = H @ Jth_a - R / n
        Jt_b = H @ Jth_b + eye / n
        ca = np.asarray(cov_A[ia[k]], dtype=float)
        cb = np.asarray(cov_B[ib[k]], dtype=float)
        cov_rot += Jth_a @ ca @ Jth_a.T + Jth_b @ cb @ Jth_b.T
        cov_t += Jt_a @ ca @ Jt_a.T + Jt_b @ cb @ Jt_b.T
    cov_rot = 0.5 * (cov_rot + cov_rot.T)
    cov_t = 0.5 * (cov_t + cov_t.T)
    return cov_rot, CovMatrix3(cov_t, frame=pose.to)


def _as_arrays(points):
    xyz = np.array([p.xyz for p in points])
    covs = np.array([p.cov.matrix for p in points])
    return xyz, covs


def icp_register(A, B, max_iter=50, tol=1e-10, gate_factor=3.0,
                 initial_pose=None):
    """Iterative nearest-neighbor registration of CartPoint lists A onto B.

    Alternates association (KD-tree nearest neighbor with a rejection gate at
    gate_factor times the median pair distance) and the closed-form solve.
    Returns (RegistrationResult, Correspondences); raises NoConvergence with
    the best-so-far result attached if the iteration budget runs out.
    """
    xa, ca = _as_arrays(A)
    xb, cb = _as_arrays(B)
    if len(xa) < 3 or len(xb) < 3:
        raise Degenerate("need at least 3 points in each set")
    tree = cKDTree(xb)
    pose = initial_pose if initial_pose is not None else Pose(np.eye(3), np.zeros(3))
    corr = None
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        moved = (pose.rotation @ xa.T).T + pose.translation
        dist, idx = tree.query(moved)
        gate = gate_factor * max(np.median(dist), 1e-12)
        keep = np.nonzero(dist <= gate)[0]
        if len(keep) < 3:
            raise Degenerate("association gate left fewer than 3 pairs")
        corr = Correspondences([(int(i), int(idx[i])) for i in keep])
        new_pose = solve_rigid(xa, xb, corr)
        history.append(float(np.mean(dist[keep])))
        delta_r = np.linalg.norm(log_map(new_pose.rotation @ pose.rotation.T))
        delta_t = np.linalg.norm(new_pose.translation - pose.translation)
        pose = new_pose
        if delta_r < tol and delta_t < tol:
            converged = True
            break
    cov_rot, cov_t = propagate_cov(xa, xb, corr, pose, ca, cb)
    result = RegistrationResult(pose, cov_rot, cov_t, correspondences=corr,
                                iterations=it, residual_history=history)
    if not converged:
        raise NoConvergence(f"ICP did not converge in {max_iter} iterations",
                            best=result)
    return result, corr
