import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcnav.errors import LogMapSingular
from lcnav.so3 import (exp_map, hat, left_jacobian_inv, log_map,
                       project_rotation, random_rotation, vee)

vec_st = st.lists(st.floats(-3.0, 3.0), min_size=3, max_size=3)


def test_hat_vee_round_trip():
    v = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(vee(hat(v)), v)
    assert np.allclose(hat(v) + hat(v).T, 0)


@given(vec_st)
def test_exp_log_round_trip(v):
    v = np.array(v)
    theta = np.linalg.norm(v)
    if theta > np.pi - 1e-3:
        v = v * (np.pi - 1e-3) / theta
    np.testing.assert_allclose(log_map(exp_map(v)), v, atol=1e-9)


def test_exp_small_angle_branch():
    v = np.array([1e-10, 0, 0])
    np.testing.assert_allclose(exp_map(v), np.eye(3) + hat(v), atol=1e-15)


def test_log_near_pi_stable():
    for axis in (np.array([1.0, 0, 0]), np.array([0, 0.6, 0.8]),
                 np.array([-0.5, 0.5, 0.70710678])):
        axis = axis / np.linalg.norm(axis)
        v = (np.pi - 1e-6) * axis
        np.testing.assert_allclose(log_map(exp_map(v)), v, atol=1e-6)


def test_log_at_pi_raises():
    with pytest.raises(LogMapSingular):
        log_map(exp_map(np.pi * np.array([0.0, 0.0, 1.0])))


def test_left_jacobian_inverse_vs_numeric():
    # log(exp(d^) exp(phi^)) = phi + J_l(phi)^-1 d + O(|d|^2)
    rng = np.random.default_rng(3)
    for _ in range(20):
        phi = rng.uniform(-1.5, 1.5, 3)
        Jinv = left_jacobian_inv(phi)
        J_num = np.zeros((3, 3))
        h = 1e-7
        for k in range(3):
            d = np.zeros(3)
            d[k] = h
            J_num[:, k] = (log_map(exp_map(d) @ exp_map(phi))
                           - log_map(exp_map(-d) @ exp_map(phi))) / (2 * h)
        np.testing.assert_allclose(J_num, Jinv, atol=1e-6)


def test_project_rotation():
    rng = np.random.default_rng(4)
    R = random_rotation(rng)
    noisy = R + 1e-3 * rng.standard_normal((3, 3))
    P = project_rotation(noisy)
    assert np.linalg.norm(P @ P.T - np.eye(3)) < 1e-12
    assert np.linalg.det(P) > 0
    assert np.linalg.norm(P - R) < 5e-3
