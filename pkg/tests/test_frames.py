import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcnav.errors import FrameMismatch, NearSingular
from lcnav.frames import (WGS84_A, WGS84_B, CovMatrix3, FrameTag,
                          GeodeticCoord, Pose, ecef_to_geodetic, enu_rotation,
                          geodetic_to_ecef, transform_cov)

lat_st = st.floats(-np.pi / 2 + 1e-6, np.pi / 2 - 1e-6)
lon_st = st.floats(-np.pi + 1e-6, np.pi)


class TestEnuRotation:
    def test_equator_prime_meridian_anchor(self):
        R = enu_rotation(GeodeticCoord(0.0, 0.0)).rotation
        # columns are the east/north/up axes expressed in ECEF
        np.testing.assert_allclose(R[:, 0], [0, 1, 0], atol=1e-15)
        np.testing.assert_allclose(R[:, 1], [0, 0, 1], atol=1e-15)
        np.testing.assert_allclose(R[:, 2], [1, 0, 0], atol=1e-15)

    def test_north_pole_up_is_ecef_z(self):
        R = enu_rotation(GeodeticCoord(np.pi / 2, 0.0)).rotation
        np.testing.assert_allclose(R[:, 2], [0, 0, 1], atol=1e-12)

    def test_orthonormal_det_plus_one(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            g = GeodeticCoord(rng.uniform(-np.pi / 2, np.pi / 2),
                              rng.uniform(-np.pi, np.pi))
            R = enu_rotation(g).rotation
            assert np.linalg.norm(R @ R.T - np.eye(3)) < 1e-12
            assert abs(np.linalg.det(R) - 1.0) < 1e-9


class TestGeodeticEcef:
    def test_equator_anchor(self):
        np.testing.assert_allclose(geodetic_to_ecef(GeodeticCoord(0, 0, 0)),
                                   [WGS84_A, 0, 0], atol=1e-9)

    def test_quarter_turn_anchor(self):
        np.testing.assert_allclose(
            geodetic_to_ecef(GeodeticCoord(0, np.pi / 2, 0)),
            [0, WGS84_A, 0], atol=1e-6)

    def test_pole(self):
        g = ecef_to_geodetic([0, 0, WGS84_B])
        assert abs(g.lat - np.pi / 2) < 1e-9
        assert abs(g.height) < 1e-6

    def test_equator_inverse(self):
        g = ecef_to_geodetic([WGS84_A, 0, 0])
        assert abs(g.lat) < 1e-12 and abs(g.lon) < 1e-12
        assert abs(g.height) < 1e-6

    @given(lat_st, lon_st, st.floats(-1000, 9000))
    def test_round_trip(self, lat, lon, h):
        g = GeodeticCoord(lat, lon, h)
        p = geodetic_to_ecef(g)
        g2 = ecef_to_geodetic(p)
        np.testing.assert_allclose(geodetic_to_ecef(g2), p, atol=1e-6)

    def test_near_center_rejected(self):
        with pytest.raises(NearSingular):
            ecef_to_geodetic([1e5, 0, 0])


class TestTransformCov:
    def test_identity(self):
        c = CovMatrix3(np.diag([1.0, 2.0, 3.0]), frame=FrameTag.ENU)
        r = Pose(np.eye(3), np.zeros(3), frm=FrameTag.ENU, to=FrameTag.ECEF)
        np.testing.assert_allclose(transform_cov(c, r).matrix, c.matrix)

    def test_isotropic_invariance(self):
        c = CovMatrix3(4.0 * np.eye(3), frame=FrameTag.ENU)
        g = GeodeticCoord(0.4, -1.2)
        r = enu_rotation(g)
        np.testing.assert_allclose(transform_cov(c, r).matrix, 4.0 * np.eye(3),
                                   atol=1e-12)

    def test_quarter_turn_swaps_axes(self):
        Rz = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        c = CovMatrix3(np.diag([1.0, 4.0, 9.0]), frame=FrameTag.ENU)
        r = Pose(Rz, np.zeros(3), frm=FrameTag.ENU, to=FrameTag.MAP)
        np.testing.assert_allclose(transform_cov(c, r).matrix,
                                   np.diag([4.0, 1.0, 9.0]), atol=1e-12)

    def test_eigenvalues_preserved(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((3, 3))
        c = CovMatrix3(A @ A.T, frame=FrameTag.ENU)
        out = transform_cov(c, enu_rotation(GeodeticCoord(0.7, 0.3)))
        np.testing.assert_allclose(np.linalg.eigvalsh(out.matrix),
                                   np.linalg.eigvalsh(c.matrix), atol=1e-10)

    def test_frame_mismatch(self):
        c = CovMatrix3(np.eye(3), frame=FrameTag.ECEF)
        with pytest.raises(FrameMismatch):
            transform_cov(c, enu_rotation(GeodeticCoord(0, 0)))


class TestPose:
    def test_tag_algebra(self):
        a = Pose(np.eye(3), [1, 0, 0], frm=FrameTag.LIDAR, to=FrameTag.MAP)
        b = Pose(np.eye(3), [0, 1, 0], frm=FrameTag.MAP, to=FrameTag.ENU)
        c = b @ a
        assert c.frm == FrameTag.LIDAR and c.to == FrameTag.ENU
        np.testing.assert_allclose(c.translation, [1, 1, 0])

    def test_tag_mismatch_rejected(self):
        a = Pose(np.eye(3), [1, 0, 0], frm=FrameTag.LIDAR, to=FrameTag.MAP)
        b = Pose(np.eye(3), [0, 1, 0], frm=FrameTag.ENU, to=FrameTag.ECEF)
        with pytest.raises(FrameMismatch):
            b @ a

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(2)
        from lcnav.so3 import random_rotation
        p = Pose(random_rotation(rng), rng.standard_normal(3),
                 frm=FrameTag.LIDAR, to=FrameTag.MAP)
        q = p.inverse() @ p
        np.testing.assert_allclose(q.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(q.translation, 0, atol=1e-12)

    def test_non_orthonormal_rejected(self):
        with pytest.raises(ValueError):
            Pose(2 * np.eye(3), np.zeros(3))

    def test_geodetic_validation(self):
        with pytest.raises(ValueError):
            GeodeticCoord(2.0, 0.0)
        with pytest.raises(ValueError):
            GeodeticCoord(0.0, 4.0)
