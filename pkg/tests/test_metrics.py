"""Weighted error measures, regret accumulation, and regularity series."""

import numpy as np
import pytest

from tvhsgt.metrics import (
    RoundMetrics,
    consensus_error,
    optimum_path_lengths,
    regret_accumulate,
    regularity,
    rows_to_csv,
    tracking_error,
    weighted_average,
)


class TestWeightedAverage:
    def test_consensus_case(self):
        xs = np.tile([1.0, -2.0], (4, 1))
        phi = np.array([0.1, 0.2, 0.3, 0.4])
        np.testing.assert_allclose(weighted_average(xs, phi), [1.0, -2.0])

    def test_vertex_weight(self):
        xs = np.array([[3.0], [5.0]])
        np.testing.assert_allclose(weighted_average(xs, np.array([1.0, 0.0])), [3.0])

    def test_midpoint(self):
        xs = np.array([[0.0], [2.0]])
        np.testing.assert_allclose(
            weighted_average(xs, np.array([0.5, 0.5])), [1.0]
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            weighted_average(np.zeros((3, 2)), np.array([0.5, 0.5]))


class TestConsensusError:
    def test_zero_when_equal(self):
        xs = np.tile([1.0, 2.0, 3.0], (5, 1))
        assert consensus_error(xs, np.full(5, 0.2)) == pytest.approx(0.0)

    def test_hand_case(self):
        xs = np.array([[0.0], [2.0]])
        assert consensus_error(xs, np.array([0.5, 0.5])) == pytest.approx(1.0)

    def test_variance_decomposition_identity(self):
        # weighted squared distance to any point splits into the distance
        # of the weighted mean plus the weighted spread
        rng = np.random.default_rng(0)
        for _ in range(30):
            xs = rng.normal(size=(6, 4))
            phi = rng.random(6)
            phi /= phi.sum()
            ref = rng.normal(size=4)
            lhs = float(phi @ np.sum((xs - ref) ** 2, axis=1))
            x_hat = weighted_average(xs, phi)
            rhs = float((x_hat - ref) @ (x_hat - ref)) + consensus_error(xs, phi)
            assert lhs == pytest.approx(rhs, abs=1e-12)


class TestTrackingError:
    def test_aligned_field_is_zero(self):
        pi = np.array([0.5, 0.3, 0.2])
        v = np.array([1.0, -1.0])
        ys = pi[:, None] * v
        assert tracking_error(ys, pi) == pytest.approx(0.0, abs=1e-25)

    def test_hand_case(self):
        ys = np.array([[1.0], [0.0]])
        assert tracking_error(ys, np.array([0.5, 0.5])) == pytest.approx(1.0)

    def test_inverse_weight_identity(self):
        # sum_i pi_i ||y_i/pi_i - S||^2 = sum_i ||y_i||^2/pi_i - ||S||^2
        rng = np.random.default_rng(1)
        for _ in range(30):
            pi = rng.random(5) + 0.1
            pi /= pi.sum()
            ys = rng.normal(size=(5, 3))
            total = ys.sum(axis=0)
            lhs = tracking_error(ys, pi)
            rhs = float(np.sum(ys * ys / pi[:, None]) - total @ total)
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_nonpositive_weights_rejected(self):
        with pytest.raises(ValueError):
            tracking_error(np.ones((2, 2)), np.array([1.0, 0.0]))


class TestRegret:
    def test_zero_when_at_optimum(self):
        total, avg = regret_accumulate(np.zeros(10))
        assert total == 0.0
        np.testing.assert_allclose(avg, 0.0)

    def test_running_average(self):
        total, avg = regret_accumulate(np.array([1.0, 0.0, 2.0]))
        assert total == pytest.approx(3.0)
        np.testing.assert_allclose(avg, [1.0, 0.5, 1.0])

    def test_path_lengths(self):
        optima = np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 4.0]])
        np.testing.assert_allclose(optimum_path_lengths(optima), [5.0, 0.0, 0.0])

    def test_regularity_alignment(self):
        optima = np.zeros((4, 2))
        p, q = regularity(optima, np.array([0.1, 0.2, 0.3, 0.0]))
        assert p.shape == q.shape == (4,)
        with pytest.raises(ValueError):
            regularity(optima, np.zeros(3))


class TestCsv:
    def test_column_order_pinned(self):
        row = RoundMetrics(
            t=0, regret_inc=0.5, regret_avg=0.5, consensus2=0.0, tracking2=0.0,
            opt2=1.0, gradest2=2.0, q_t=0.0, p_t=0.0, loss=0.25, accuracy=0.75,
        )
        text = rows_to_csv([row])
        header, line = text.strip().split("\n")
        assert header == (
            "t,regret_inc,regret_avg,consensus2,tracking2,opt2,gradest2,"
            "q_t,p_t,loss,accuracy"
        )
        assert line.startswith("0,0.5,0.5,0,0,1,2,0,0,0.25,0.75")

    def test_round_trip_precision(self):
        value = 0.1234567890123456789
        row = RoundMetrics(
            t=3, regret_inc=value, regret_avg=value, consensus2=value,
            tracking2=value, opt2=value, gradest2=value, q_t=value, p_t=value,
            loss=value, accuracy=value,
        )
        parsed = rows_to_csv([row]).strip().split("\n")[1].split(",")
        assert float(parsed[1]) == value
