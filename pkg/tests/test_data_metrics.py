"""Image pipeline and quality metrics against closed forms and direct
per-pixel reference implementations."""

import math

import numpy as np
import pytest

from earfa.data import (augment_pair, bicubic_resize, dihedral,
                        dihedral_inverse, load_png, make_pair, rgb_to_y,
                        sample_patch, save_png, scan_dataset)
from earfa.errors import ValidationError
from earfa.metrics import psnr, ssim, y_channel_scores


def _keys_kernel(t):
    # Independent copy of the a = -0.5 cubic for the oracle tests.
    t = abs(t)
    if t <= 1:
        return 1.5 * t**3 - 2.5 * t**2 + 1
    if t < 2:
        return -0.5 * t**3 + 2.5 * t**2 - 4 * t + 2
    return 0.0


class TestBicubic:
    def test_factor_one_is_identity(self, rng):
        x = rng.random((1, 3, 12, 17), dtype=np.float32)
        np.testing.assert_allclose(bicubic_resize(x, 1.0), x, atol=1e-6)

    def test_constant_stays_constant(self):
        x = np.full((1, 3, 10, 10), 0.42, dtype=np.float32)
        for factor in (0.5, 2.0, 1.5, 1 / 3):
            y = bicubic_resize(x, factor)
            np.testing.assert_allclose(y, 0.42, atol=1e-6)

    def test_upscale_of_ramp_matches_direct_kernel(self):
        # 1-D ramp along width; compute the expected interpolation by hand.
        w = 8
        ramp = np.arange(w, dtype=np.float64)[None, None, None, :] * np.ones((1, 1, 4, 1))
        out = bicubic_resize(ramp, 2.0)[0, 0, 0]
        for j in range(out.size):
            src = (j + 0.5) / 2.0 - 0.5
            lo = math.floor(src) - 1
            acc = wsum = 0.0
            for t in range(lo, lo + 4):
                wt = _keys_kernel(src - t)
                acc += wt * ramp[0, 0, 0, min(max(t, 0), w - 1)]
                wsum += wt
            assert out[j] == pytest.approx(acc / wsum, abs=1e-6)

    def test_downscale_by_two_matches_direct_reference(self, rng):
        # Antialiased half-size: kernel stretched by 2, weights normalized.
        w = 16
        row = rng.random(w)
        x = np.broadcast_to(row, (1, 1, 4, w)).copy()
        out = bicubic_resize(x, 0.5)[0, 0, 0]
        for j in range(out.size):
            src = (j + 0.5) * 2.0 - 0.5
            lo = math.floor(src - 4.0) + 1
            acc = wsum = 0.0
            for t in range(lo, lo + 10):
                wt = _keys_kernel((src - t) * 0.5) * 0.5
                acc += wt * row[min(max(t, 0), w - 1)]
                wsum += wt
            assert out[j] == pytest.approx(acc / wsum, abs=1e-6)

    def test_partition_of_unity_at_random_phases(self, rng):
        # Four interpolation taps around any phase sum to one.
        for _ in range(100):
            phase = rng.random()
            total = sum(_keys_kernel(phase - t) for t in range(-2, 3))
            assert abs(total - 1.0) < 1e-9

    def test_empty_output_rejected(self):
        with pytest.raises(ValidationError):
            bicubic_resize(np.zeros((1, 3, 4, 4)), 0.01)


class TestColor:
    def test_black_and_white_anchors(self):
        black = np.zeros((1, 3, 2, 2), dtype=np.float32)
        white = np.ones((1, 3, 2, 2), dtype=np.float32)
        np.testing.assert_allclose(rgb_to_y(black), 16.0 / 255.0, atol=1e-6)
        np.testing.assert_allclose(rgb_to_y(white), 235.0 / 255.0, atol=1e-6)

    def test_random_pixel_matches_scalar_formula(self, rng):
        x = rng.random((1, 3, 5, 5), dtype=np.float32)
        y = rgb_to_y(x)
        r, g, b = (float(x[0, i, 2, 3]) for i in range(3))
        expected = (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0
        assert y[0, 0, 2, 3] == pytest.approx(expected, abs=1e-6)


class TestPsnrSsim:
    def test_identical_images(self, rng):
        a = rng.random((1, 1, 16, 16))
        assert psnr(a, a) == math.inf
        assert ssim(a, a) == 1.0

    def test_closed_form_psnr(self):
        a = np.zeros((1, 1, 8, 8))
        b = np.full((1, 1, 8, 8), 1.0 / 255.0)
        assert psnr(a, b) == pytest.approx(20.0 * math.log10(255.0), abs=1e-9)

    def test_symmetry(self, rng):
        a, b = rng.random((1, 1, 12, 12)), rng.random((1, 1, 12, 12))
        assert psnr(a, b) == psnr(b, a)

    def test_psnr_matches_direct_formula(self, rng):
        a, b = rng.random((1, 1, 10, 10)), rng.random((1, 1, 10, 10))
        mse = float(np.mean((a - b) ** 2))
        assert psnr(a, b) == pytest.approx(10.0 * math.log10(1.0 / mse), abs=1e-12)

    def test_dihedral_invariance_of_psnr(self, rng):
        a, b = rng.random((1, 1, 9, 9)), rng.random((1, 1, 9, 9))
        base = psnr(a, b)
        for op in range(8):
            assert abs(psnr(dihedral(a, op), dihedral(b, op)) - base) < 1e-9

    def test_ssim_matches_direct_reference(self, rng):
        a = rng.random((18, 18))
        b = np.clip(a + 0.05 * rng.standard_normal((18, 18)), 0, 1)
        # Direct per-window reference, written from the definition.
        t = np.arange(11) - 5.0
        g1 = np.exp(-t * t / (2 * 1.5 * 1.5))
        kernel = np.outer(g1, g1)
        kernel /= kernel.sum()
        c1, c2 = 0.01 ** 2, 0.03 ** 2
        vals = []
        for i in range(18 - 10):
            for j in range(18 - 10):
                wa = a[i:i + 11, j:j + 11]
                wb = b[i:i + 11, j:j + 11]
                mu_a = (kernel * wa).sum()
                mu_b = (kernel * wb).sum()
                va = (kernel * (wa - mu_a) ** 2).sum()
                vb = (kernel * (wb - mu_b) ** 2).sum()
                cov = (kernel * (wa - mu_a) * (wb - mu_b)).sum()
                vals.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                            / ((mu_a ** 2 + mu_b ** 2 + c1) * (va + vb + c2)))
        assert ssim(a, b) == pytest.approx(float(np.mean(vals)), abs=1e-9)

    def test_shave_excludes_border(self, rng):
        a = rng.random((1, 1, 20, 20))
        b = a.copy()
        b[0, 0, 0, :] += 0.5  # corrupt only the border row
        assert psnr(a, b, shave=2) == math.inf
        assert psnr(a, b, shave=0) < math.inf

    def test_y_channel_scores(self, rng):
        a = rng.random((1, 3, 20, 20), dtype=np.float32)
        p, s = y_channel_scores(a, a, shave=2)
        assert p == math.inf and s == 1.0


class TestPatchesAndAugment:
    def test_identity_op(self, rng):
        x = rng.random((1, 3, 6, 6), dtype=np.float32)
        np.testing.assert_array_equal(dihedral(x, 0), x)

    def test_flip_twice_is_identity(self, rng):
        x = rng.random((1, 3, 6, 6), dtype=np.float32)
        np.testing.assert_array_equal(dihedral(dihedral(x, 4), 4), x)

    def test_inverse_cancels_forward(self, rng):
        x = rng.random((1, 3, 7, 5), dtype=np.float32)
        for op in range(8):
            np.testing.assert_array_equal(dihedral_inverse(dihedral(x, op), op), x)

    def test_all_ops_distinct(self, rng):
        x = rng.random((1, 1, 4, 4), dtype=np.float32)
        seen = {dihedral(x, op).tobytes() for op in range(8)}
        assert len(seen) == 8

    def test_patch_alignment_with_bicubic(self, rng):
        hr = rng.random((1, 3, 64, 64), dtype=np.float32)
        pair = make_pair(hr, scale=2)
        for _ in range(10):
            lr, hr_crop = sample_patch(pair, 16, rng)
            assert lr.shape == (1, 3, 16, 16)
            assert hr_crop.shape == (1, 3, 32, 32)
            down = bicubic_resize(hr_crop, 0.5)
            assert float(np.abs(down - lr).mean()) < 2.0 / 255.0

    def test_augment_keeps_pair_aligned(self, rng):
        hr = rng.random((1, 3, 32, 32), dtype=np.float32)
        pair = make_pair(hr, scale=2)
        lr, hr_crop = sample_patch(pair, 8, rng)
        for op in range(8):
            alr, ahr = augment_pair(lr, hr_crop, op)
            np.testing.assert_array_equal(alr, dihedral(lr, op))
            np.testing.assert_array_equal(ahr, dihedral(hr_crop, op))

    def test_too_small_image_rejected(self, rng):
        pair = make_pair(rng.random((1, 3, 8, 8), dtype=np.float32), scale=2)
        with pytest.raises(ValidationError):
            sample_patch(pair, 32, rng)


class TestPngDataset:
    def test_png_roundtrip_8bit_exact(self, rng, tmp_path):
        quantized = rng.integers(0, 256, (1, 3, 9, 11)).astype(np.float32) / 255.0
        path = tmp_path / "img.png"
        save_png(quantized, path)
        again = load_png(path)
        np.testing.assert_allclose(again, quantized, atol=1e-7)

    def test_scan_skips_cached_lr_files(self, rng, tmp_path):
        for name in ("alpha", "beta"):
            save_png(rng.random((1, 3, 16, 16), dtype=np.float32), tmp_path / f"{name}.png")
        pairs = scan_dataset(tmp_path, scale=2, cache_lr=True)
        assert [p.name for p in pairs] == ["alpha", "beta"]
        assert (tmp_path / "alpha_x2.png").exists()
        again = scan_dataset(tmp_path, scale=2)
        assert [p.name for p in again] == ["alpha", "beta"]

    def test_pair_shapes(self, rng, tmp_path):
        save_png(rng.random((1, 3, 17, 19), dtype=np.float32), tmp_path / "odd.png")
        (pair,) = scan_dataset(tmp_path, scale=2)
        assert pair.hr.shape == (1, 3, 16, 18)
        assert pair.lr.shape == (1, 3, 8, 9)
