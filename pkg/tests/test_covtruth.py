import numpy as np
import pytest

from lcnav.errors import (DegenerateBaseline, EpochMismatch, OptAtGnss,
                          ZeroCovariance)
from lcnav.covtruth import (build_sample, cov_truth, evaluate_cov_estimates,
                            project_opt, weighted_fusion_lambda)
from lcnav.frames import CovMatrix3, FrameTag


def _c(m):
    return CovMatrix3(np.asarray(m, dtype=float), frame=FrameTag.ENU)


class TestProjection:
    def test_hand_example(self):
        x_opt = project_opt([0.5, 3.0, 0.0], [0, 0, 0], [2, 0, 0])
        np.testing.assert_allclose(x_opt, [0.5, 0, 0], atol=1e-12)

    def test_gt_on_line_is_fixed_point(self):
        x_opt = project_opt([1.2, 0, 0], [0, 0, 0], [2, 0, 0])
        np.testing.assert_allclose(x_opt, [1.2, 0, 0], atol=1e-12)

    def test_result_on_baseline(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            g, l, gt = rng.standard_normal((3, 3)) * 5
            x_opt = project_opt(gt, g, l)
            # collinear with the baseline and orthogonal residual
            base = l - g
            assert np.linalg.norm(np.cross(x_opt - g, base)) < 1e-9
            assert abs((gt - x_opt) @ base) < 1e-9

    def test_coincident_fixes_rejected(self):
        with pytest.raises(DegenerateBaseline):
            project_opt([1, 1, 1], [0, 0, 0], [0, 0, 0])


class TestCovTruth:
    def test_hand_example_scales_identity(self):
        # segments 0.5 and 1.5 -> ratio 3, so truth = 3 * I exactly
        cov = cov_truth([0.5, 0, 0], [0, 0, 0], [2, 0, 0], _c(np.eye(3)))
        np.testing.assert_allclose(cov.matrix, 3.0 * np.eye(3), atol=1e-15)

    def test_frame_preserved(self):
        cov = cov_truth([1, 0, 0], [0, 0, 0], [2, 0, 0], _c(np.eye(3)))
        assert cov.frame == FrameTag.ENU

    def test_projection_at_gnss_rejected(self):
        with pytest.raises(OptAtGnss):
            cov_truth([0, 0, 0], [0, 0, 0], [2, 0, 0], _c(np.eye(3)))


class TestFusionLambda:
    def test_three_to_one(self):
        lam = weighted_fusion_lambda(_c(3 * np.eye(3)), _c(np.eye(3)))
        assert abs(lam - 0.25) < 1e-12

    def test_equal_traces_half(self):
        lam = weighted_fusion_lambda(_c(np.eye(3)), _c(np.eye(3)))
        assert abs(lam - 0.5) < 1e-12

    def test_zero_covariances_rejected(self):
        with pytest.raises(ZeroCovariance):
            weighted_fusion_lambda(_c(np.zeros((3, 3))), _c(np.zeros((3, 3))))


class TestChain:
    def test_hand_example_sample(self):
        s = build_sample(0.0, [0.5, 3.0, 0.0], [0, 0, 0], [2, 0, 0],
                         _c(np.eye(3)))
        np.testing.assert_allclose(s.x_opt, [0.5, 0, 0], atol=1e-12)
        np.testing.assert_allclose(s.cov_lidar_truth.matrix, 3 * np.eye(3),
                                   atol=1e-15)
        assert abs(s.ratio - 3.0) < 1e-12
        assert abs(s.perpendicular_residual - 3.0) < 1e-12

    def test_lambda_reproduces_projection(self):
        # with the truth covariance in hand, the trace-weighted blend of the
        # two fixes lands back on the projected point
        rng = np.random.default_rng(1)
        for _ in range(100):
            g, l = rng.standard_normal((2, 3)) * 5
            u = rng.uniform(0.05, 0.95)
            b = l - g
            w = rng.standard_normal(3)
            w -= (w @ b) / (b @ b) * b  # keep the projection between the fixes
            gt = g + u * b + w
            s = build_sample(0.0, gt, g, l, _c(np.eye(3)))
            lam = weighted_fusion_lambda(s.cov_lidar_truth, _c(np.eye(3)))
            fused = lam * s.x_lidar + (1 - lam) * s.x_gnss
            np.testing.assert_allclose(fused, s.x_opt, atol=1e-9)


class TestEvaluation:
    def test_perfect_estimates_zero_error(self):
        s = build_sample(0.0, [0.5, 3.0, 0.0], [0, 0, 0], [2, 0, 0],
                         _c(np.eye(3)))
        table = evaluate_cov_estimates([s], {0.0: s.cov_lidar_truth})
        for stats in table.values():
            assert stats["mean"] == 0.0
            assert stats["std"] == 0.0

    def test_component_differences(self):
        s = build_sample(0.0, [0.5, 3.0, 0.0], [0, 0, 0], [2, 0, 0],
                         _c(np.eye(3)))
        est = _c(3 * np.eye(3) + 0.5)
        table = evaluate_cov_estimates([s], {0.0: est})
        assert abs(table["dcov_xx"]["mean"] - 0.5) < 1e-12
        assert abs(table["dcov_xy"]["mean"] - 0.5) < 1e-12

    def test_missing_epoch_rejected(self):
        s = build_sample(0.0, [0.5, 3.0, 0.0], [0, 0, 0], [2, 0, 0],
                         _c(np.eye(3)))
        with pytest.raises(EpochMismatch):
            evaluate_cov_estimates([s], {})

    def test_frame_mismatch_rejected(self):
        s = build_sample(0.0, [0.5, 3.0, 0.0], [0, 0, 0], [2, 0, 0],
                         _c(np.eye(3)))
        est = CovMatrix3(3 * np.eye(3), frame=FrameTag.ECEF)
        with pytest.raises(EpochMismatch):
            evaluate_cov_estimates([s], {0.0: est})
