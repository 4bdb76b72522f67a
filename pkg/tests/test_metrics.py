import numpy as np
import pytest

from lcnav.errors import Empty, LengthMismatch, ZeroObservations
from lcnav.metrics import (availability, cdf, error_std, mae, max_error,
                           report, rmse)


class TestScalarSeries:
    def test_hand_example(self):
        # errors {1, 3}: MAE 2, RMSE sqrt(5), max 3, std 1 -- all exact
        est, truth = [1.0, 3.0], [0.0, 0.0]
        assert mae(est, truth) == 2.0
        assert rmse(est, truth) == np.sqrt(5.0)
        assert max_error(est, truth) == 3.0
        assert error_std(est, truth) == 1.0

    def test_zero_error(self):
        est = [1.0, 2.0, 3.0]
        assert mae(est, est) == 0.0
        assert rmse(est, est) == 0.0

    def test_rmse_dominates_mae(self):
        rng = np.random.default_rng(0)
        est = rng.normal(0, 1, 500)
        truth = np.zeros(500)
        assert rmse(est, truth) >= mae(est, truth)

    def test_errors(self):
        with pytest.raises(Empty):
            mae([], [])
        with pytest.raises(LengthMismatch):
            mae([1.0], [1.0, 2.0])


class TestVectorSeries:
    def test_norms(self):
        est = [[3.0, 4.0, 0.0], [0.0, 0.0, 0.0]]
        truth = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
        assert mae(est, truth) == 2.5
        assert max_error(est, truth) == 5.0


class TestAvailability:
    def test_hand_example(self):
        assert availability(214, 1000) == 0.214

    def test_full(self):
        assert availability(50, 50) == 1.0

    def test_zero_observations(self):
        with pytest.raises(ZeroObservations):
            availability(1, 0)

    def test_negative_solutions(self):
        with pytest.raises(ValueError):
            availability(-1, 10)


class TestCdf:
    def test_simple(self):
        c = cdf([1.0, 2.0, 2.0, 4.0])
        assert c == [(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]

    def test_monotone(self):
        rng = np.random.default_rng(1)
        c = cdf(rng.uniform(0, 5, 100))
        fracs = [f for _, f in c]
        assert fracs == sorted(fracs)
        assert fracs[-1] == 1.0

    def test_empty(self):
        with pytest.raises(Empty):
            cdf([])


class TestReport:
    def test_rows_schema(self):
        r = report([[1.0, 0, 0], [3.0, 0, 0]], [[0.0, 0, 0], [0.0, 0, 0]],
                   n_solutions=214, n_observations=1000)
        rows = dict(r.rows())
        assert list(dict(r.rows())) == ["mae_m", "rmse_m", "max_m", "std_m",
                                        "availability"]
        assert rows["mae_m"] == 2.0
        assert rows["rmse_m"] == np.sqrt(5.0)
        assert rows["std_m"] == 1.0
        assert rows["availability"] == 0.214

    def test_per_axis(self):
        r = report([[1.0, 2.0, 3.0]], [[0.0, 0.0, 0.0]])
        assert r.per_axis["east"] == [1.0]
        assert r.per_axis["north"] == [2.0]
        assert r.per_axis["up"] == [3.0]

    def test_default_availability(self):
        r = report([1.0], [0.0])
        assert r.availability == 1.0
