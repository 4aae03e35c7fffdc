import math

import numpy as np
import pytest

from fewnerf.errors import ConfigError, DataError
from fewnerf.field import (FieldConfig, FieldParams, backward, forward,
                           init_params, load_checkpoint, param_count,
                           save_checkpoint)

TINY = FieldConfig(depth=2, width=16, pos_freqs=3, dir_freqs=2)


def tiny_inputs(rng, m=8, cfg=TINY):
    return (rng.normal(size=(m, cfg.pos_dim)), rng.normal(size=(m, cfg.dir_dim)))


class TestParams:
    def test_param_count_is_pure_function_of_config(self):
        assert param_count(TINY) == param_count(FieldConfig(depth=2, width=16,
                                                            pos_freqs=3, dir_freqs=2))
        assert param_count(TINY) != param_count(FieldConfig(depth=3, width=16,
                                                            pos_freqs=3, dir_freqs=2))

    def test_views_alias_flat_vector(self, rng):
        params = init_params(TINY, rng)
        params.flat[:] = 0.0
        assert np.all(params["trunk_w0"] == 0.0)
        params["trunk_w0"][0, 0] = 7.0
        assert params.flat[0] == 7.0

    def test_init_is_finite_and_density_bias_applied(self, rng):
        cfg = FieldConfig(depth=2, width=16, pos_freqs=3, dir_freqs=2, density_bias=-10.0)
        params = init_params(cfg, rng)
        assert np.all(np.isfinite(params.flat))
        assert params["density_b"][0] == -10.0


class TestForward:
    def test_zeroed_final_layers_give_neutral_outputs(self, rng):
        params = init_params(TINY, rng)
        for name in ("color_w", "color_b", "lum_w", "lum_b", "density_w", "density_b"):
            params[name][...] = 0.0
        out, _ = forward(params, *tiny_inputs(rng))
        np.testing.assert_allclose(out.color, 0.5, atol=1e-15)
        np.testing.assert_allclose(out.luminance, 0.5, atol=1e-15)
        np.testing.assert_allclose(out.density, math.log(2.0), atol=1e-15)

    def test_deterministic(self, rng):
        params = init_params(TINY, rng)
        pos, dirs = tiny_inputs(rng)
        a, _ = forward(params, pos, dirs)
        b, _ = forward(params, pos, dirs)
        np.testing.assert_array_equal(a.color, b.color)
        np.testing.assert_array_equal(a.density, b.density)

    def test_output_ranges_saturate(self, rng):
        params = init_params(TINY, rng)
        pos, dirs = tiny_inputs(rng, m=64)
        out, _ = forward(params, pos * 1e4, dirs * 1e4)
        assert np.all((out.color >= 0.0) & (out.color <= 1.0))
        assert np.all((out.luminance >= 0.0) & (out.luminance <= 1.0))
        assert np.all(out.density >= 0.0)
        np.testing.assert_allclose(np.linalg.norm(out.normal, axis=1), 1.0, atol=1e-6)

    def test_dimension_mismatch_rejected(self, rng):
        params = init_params(TINY, rng)
        pos, dirs = tiny_inputs(rng)
        with pytest.raises(ConfigError):
            forward(params, pos[:, :-1], dirs)
        with pytest.raises(ConfigError):
            forward(params, pos, dirs[:, :-1])

    def test_forward_perturbation_matches_tape_gradient(self, rng):
        # first-order check: perturbing one weight moves the outputs by
        # eps * d(out)/dw as reported through the tape
        params = init_params(TINY, rng)
        pos, dirs = tiny_inputs(rng, m=4)
        out0, tape = forward(params, pos, dirs, want_tape=True)
        # scalarize: sum of all outputs
        d_c = np.ones_like(out0.color)
        d_t = np.ones_like(out0.density)
        d_n = np.ones_like(out0.normal)
        d_y = np.ones_like(out0.luminance)
        grad = backward(tape, d_c, d_t, d_n, d_y)

        def scalar(p):
            o, _ = forward(p, pos, dirs)
            return o.color.sum() + o.density.sum() + o.normal.sum() + o.luminance.sum()

        eps = 1e-6
        idx = rng.integers(0, params.flat.size, size=24)
        for i in idx:
            p = params.copy()
            p.flat[i] += eps
            up = scalar(p)
            p.flat[i] -= 2 * eps
            down = scalar(p)
            fd = (up - down) / (2 * eps)
            assert grad[i] == pytest.approx(fd, rel=1e-4, abs=1e-8)


class TestBackward:
    def test_zero_cotangents_zero_gradient(self, rng):
        params = init_params(TINY, rng)
        pos, dirs = tiny_inputs(rng)
        _, tape = forward(params, pos, dirs, want_tape=True)
        grad = backward(tape, None, None, None, None)
        np.testing.assert_array_equal(grad, 0.0)
        assert grad.size == param_count(TINY)

    def test_linear_in_cotangents(self, rng):
        params = init_params(TINY, rng)
        pos, dirs = tiny_inputs(rng)
        _, tape = forward(params, pos, dirs, want_tape=True)
        m = pos.shape[0]
        u = [rng.normal(size=(m, 3)), rng.normal(size=m), rng.normal(size=(m, 3)), rng.normal(size=m)]
        v = [rng.normal(size=(m, 3)), rng.normal(size=m), rng.normal(size=(m, 3)), rng.normal(size=m)]
        a, b = 0.7, -1.3
        combo = backward(tape, *(a * x + b * y for x, y in zip(u, v)))
        parts = a * backward(tape, *u) + b * backward(tape, *v)
        np.testing.assert_allclose(combo, parts, rtol=1e-12, atol=1e-12)

    def test_full_gradient_matches_finite_differences(self, rng):
        # random scalarization of all four outputs, checked coordinate by
        # coordinate against central differences at 64-bit
        params = init_params(TINY, rng)
        pos, dirs = tiny_inputs(rng, m=6)
        out, tape = forward(params, pos, dirs, want_tape=True)
        m = pos.shape[0]
        cots = [rng.normal(size=(m, 3)), rng.normal(size=m),
                rng.normal(size=(m, 3)), rng.normal(size=m)]
        grad = backward(tape, *cots)

        def scalar(p):
            o, _ = forward(p, pos, dirs)
            return (np.sum(o.color * cots[0]) + np.sum(o.density * cots[1])
                    + np.sum(o.normal * cots[2]) + np.sum(o.luminance * cots[3]))

        h = 1e-5
        fd = np.zeros_like(grad)
        for i in range(grad.size):
            p = params.copy()
            p.flat[i] += h
            up = scalar(p)
            p.flat[i] -= 2 * h
            fd[i] = (up - scalar(p)) / (2 * h)
        rel = np.abs(grad - fd) / np.maximum(1.0, np.abs(fd))
        assert rel.max() < 1e-4

    def test_cotangent_shape_mismatch_rejected(self, rng):
        params = init_params(TINY, rng)
        pos, dirs = tiny_inputs(rng)
        _, tape = forward(params, pos, dirs, want_tape=True)
        with pytest.raises(ValueError):
            backward(tape, np.zeros((3, 3)), None, None, None)


class TestCheckpoint:
    def test_round_trip(self, rng, tmp_path):
        params = init_params(TINY, rng)
        path = tmp_path / "ckpt.bin"
        save_checkpoint(path, params, iteration=42)
        loaded, header = load_checkpoint(path)
        np.testing.assert_array_equal(loaded.flat, params.flat)
        assert header["iteration"] == 42
        assert header["config_hash"] == TINY.hash()
        assert header["param_count"] == param_count(TINY)

    def test_float32_params_round_trip_exactly(self, rng, tmp_path):
        params = init_params(TINY, rng, dtype=np.float32)
        path = tmp_path / "ckpt.bin"
        save_checkpoint(path, params, iteration=0)
        loaded, _ = load_checkpoint(path)
        np.testing.assert_array_equal(loaded.flat.astype(np.float32), params.flat)

    def test_rejects_corrupt_file(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"not a checkpoint\n\x00\x01")
        with pytest.raises(DataError):
            load_checkpoint(path)

    def test_rejects_truncated_payload(self, rng, tmp_path):
        params = init_params(TINY, rng)
        path = tmp_path / "ckpt.bin"
        save_checkpoint(path, params, iteration=0)
        blob = path.read_bytes()
        path.write_bytes(blob[:-16])
        with pytest.raises(DataError):
            load_checkpoint(path)
