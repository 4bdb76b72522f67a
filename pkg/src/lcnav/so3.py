"""SO(3) helpers: hat/vee, exponential and logarithm maps, left Jacobian inverse.

All perturbations in this package are left-multiplicative:
R' = exp(delta^) @ R.
"""

import numpy as np

from .errors import LogMapSingular

_EPS = 1e-10


def hat(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m):
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def exp_map(v):
    """Rodrigues formula; second-order Taylor branch near zero."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v)
    K = hat(v)
    if theta < 1e-8:
        return np.eye(3) + K + 0.5 * K @ K
    K = K / theta
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * K @ K


def log_map(R):
    """Axis-angle vector of R. Trace-based branch switch near angle pi.

    Raises LogMapSingular only within 1e-9 of exactly pi, where the axis
    sign is genuinely ambiguous.
    """
    R = np.asarray(R, dtype=float)
    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)
    if theta < 1e-8:
        # first order: R ~ I + theta^
        return vee(R - R.T) / 2.0
    if theta > 3.1:
        if np.pi - theta < 1e-9:
            raise LogMapSingular("rotation angle at pi; axis sign ambiguous")
        # the axis spans the null space of R - I; exact for any angle, unlike
        # the sin-scaled antisymmetric part which degrades as theta -> pi
        _, _, Vt = np.linalg.svd(R - np.eye(3))
        axis = Vt[2]
        # orient along the rotation direction (vee(R - R^T) = 2 sin(theta) a)
        if np.dot(vee(R - R.T), axis) < 0:
            axis = -axis
        return theta * axis
    return theta / (2.0 * np.sin(theta)) * vee(R - R.T)


def left_jacobian_inv(phi):
    """Inverse of the left Jacobian of SO(3) at rotation vector phi."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    K = hat(phi)
    if theta < 1e-6:
        return np.eye(3) - 0.5 * K + K @ K / 12.0
    coef = 1.0 / theta**2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) - 0.5 * K + coef * K @ K


def project_rotation(R):
    """Closest proper rotation in Frobenius norm (polar projection)."""
    U, _, Vt = np.linalg.svd(R)
    S = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ S @ Vt


def random_rotation(rng, max_angle=np.pi):
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-max_angle, max_angle)
    return exp_map(angle * axis)
