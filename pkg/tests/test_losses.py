import numpy as np
import pytest

from fewnerf.errors import ConfigError
from fewnerf.losses import (LossWeights, gt_luminance, luminance_loss, mse_loss,
                            total_loss)

GRAY_LUM = 0.5**2.2  # 0.217637640824031


class TestGtLuminance:
    def test_white_is_exactly_one(self):
        assert gt_luminance(np.ones(3)) == 1.0

    def test_black_is_zero(self):
        assert gt_luminance(np.zeros(3)) == 0.0

    def test_mid_gray(self):
        assert gt_luminance(np.full(3, 0.5)) == pytest.approx(GRAY_LUM, abs=1e-12)

    def test_monotone_in_each_channel(self, rng):
        base = rng.uniform(0.1, 0.8, size=3)
        y0 = gt_luminance(base)
        for c in range(3):
            bumped = base.copy()
            bumped[c] += 0.1
            assert gt_luminance(bumped) > y0

    def test_bounded(self, rng):
        y = gt_luminance(rng.random((1000, 3)))
        assert np.all((y >= 0.0) & (y <= 1.0))

    def test_out_of_range_clamps_with_warning(self):
        with pytest.warns(UserWarning):
            y = gt_luminance(np.array([1.2, -0.1, 0.5]))
        assert y == pytest.approx(gt_luminance(np.array([1.0, 0.0, 0.5])))


class TestMseLoss:
    def test_perfect_prediction(self, rng):
        x = rng.random((16, 3))
        assert mse_loss(x, x) == 0.0

    def test_single_channel_error_uses_sum_of_squares(self):
        pred = np.array([[0.6, 0.2, 0.3]])
        gt = np.array([[0.5, 0.2, 0.3]])
        assert mse_loss(pred, gt) == pytest.approx(0.01, abs=1e-15)

    def test_permutation_invariant(self, rng):
        pred = rng.random((32, 3))
        gt = rng.random((32, 3))
        perm = rng.permutation(32)
        assert mse_loss(pred, gt) == pytest.approx(mse_loss(pred[perm], gt[perm]), rel=1e-12)

    def test_empty_batch_warns_and_returns_zero(self):
        with pytest.warns(UserWarning):
            assert mse_loss(np.zeros((0, 3)), np.zeros((0, 3))) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse_loss(np.zeros((2, 3)), np.zeros((3, 3)))


class TestLuminanceLoss:
    def test_perfect(self):
        y = np.array([0.1, 0.9])
        assert luminance_loss(y, y) == 0.0

    def test_known_value(self):
        # predicting 0.5 against mid-gray's true luminance
        err = luminance_loss(np.array([0.5]), np.array([GRAY_LUM]))
        assert err == pytest.approx((0.5 - GRAY_LUM) ** 2, abs=1e-15)
        assert err == pytest.approx(0.0797285018794189, abs=1e-12)

    def test_nonnegative(self, rng):
        assert luminance_loss(rng.random(64), rng.random(64)) >= 0.0


class TestLossWeights:
    def test_paper_defaults_for_luminance_terms(self):
        w = LossWeights()
        assert w.lum == pytest.approx(1e-3)
        assert w.lum_aug == pytest.approx(1e-4)
        assert w.photo_aug == 0.0  # surrogate stays off unless asked for

    def test_auxiliary_slots_default_zero(self):
        w = LossWeights()
        assert w.nll == w.nll_aug == w.ue == w.ue_aug == w.bfc == w.ori == 0.0

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError):
            LossWeights(lum=-1.0)


class TestTotalLoss:
    def test_reduces_to_mse_plus_luminance(self):
        w = LossWeights(mse=1.0, lum=1e-3, lum_aug=0.0)
        report = total_loss({"mse": 0.25, "lum": 0.5}, w)
        assert report.total == pytest.approx(0.25 + 1e-3 * 0.5, abs=1e-15)

    def test_doubling_weights_doubles_total(self):
        terms = {"mse": 0.2, "lum": 0.4, "lum_aug": 0.1, "photo_aug": 0.3}
        w1 = LossWeights(mse=1.0, lum=1e-3, lum_aug=1e-4, photo_aug=0.5)
        w2 = LossWeights(mse=2.0, lum=2e-3, lum_aug=2e-4, photo_aug=1.0)
        assert total_loss(terms, w2).total == pytest.approx(
            2.0 * total_loss(terms, w1).total, rel=1e-12)

    def test_hand_computed_three_pixel_sum(self):
        # three fixed pixels pushed through the definitions by hand
        pred = np.array([[0.2, 0.4, 0.6], [0.0, 1.0, 0.5], [0.9, 0.9, 0.1]])
        gt = np.array([[0.25, 0.4, 0.55], [0.1, 0.9, 0.5], [0.9, 0.8, 0.2]])
        pred_y = np.array([0.3, 0.6, 0.7])
        gt_y = gt_luminance(gt)
        mse = np.mean(np.sum((pred - gt) ** 2, axis=1))
        lum = np.mean((pred_y - gt_y) ** 2)
        w = LossWeights(mse=1.0, lum=1e-3, lum_aug=1e-4, photo_aug=0.0)
        report = total_loss({"mse": mse_loss(pred, gt),
                             "lum": luminance_loss(pred_y, gt_y)}, w)
        assert report.total == pytest.approx(mse + 1e-3 * lum, abs=1e-12)

    def test_report_total_matches_weighted_terms(self):
        w = LossWeights(mse=1.0, lum=1e-3, lum_aug=1e-4, photo_aug=0.5)
        report = total_loss({"mse": 0.3, "lum": 0.2, "lum_aug": 0.7, "photo_aug": 0.05}, w)
        recomputed = sum(report.weighted[name] for name in sorted(report.weighted))
        assert report.total == pytest.approx(recomputed, abs=1e-12)

    def test_plugin_terms_flow_through_auxiliary_slots(self):
        w = LossWeights(ori=0.1)
        report = total_loss({"mse": 0.5}, w, extra_terms={"ori": 2.0})
        assert report.total == pytest.approx(0.5 + 0.1 * 2.0, abs=1e-15)

    def test_unknown_term_rejected(self):
        with pytest.raises(ConfigError):
            total_loss({"mystery": 1.0}, LossWeights())
