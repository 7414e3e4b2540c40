import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import volume
from gliakit.errors import EmptyMaskError, GeometryMismatchError, ValidationError
from gliakit.metrics_image import ImageMetricConfig, mse, psnr, ssim
from oracles import naive_ssim


def test_mse_identity_and_offset():
    a = np.full((6, 6, 6), 0.5)
    assert mse(volume(a), volume(a)) == 0.0
    # 0.1 is not representable in float32 storage, so only ~1e-8 agreement
    assert mse(volume(a), volume(a + 0.1)) == pytest.approx(0.01, rel=1e-6)
    # a dyadic offset survives storage and the closed form is exact
    assert mse(volume(a), volume(a + 0.125)) == 0.015625


def test_mse_exact_summation(rng):
    a, b = rng.random((8, 8, 8)), rng.random((8, 8, 8))
    va, vb = volume(a), volume(b)
    # re-sum in exact rational arithmetic on the stored float32 values
    xa, xb = va.data.astype(np.float64).ravel(), vb.data.astype(np.float64).ravel()
    exact = sum((Fraction(float(x)) - Fraction(float(y))) ** 2 for x, y in zip(xa, xb)) / xa.size
    assert mse(va, vb) == pytest.approx(float(exact), abs=1e-12)
    assert mse(va, vb) == mse(vb, va)


def test_mse_full_mask_equals_unmasked(rng):
    a, b = volume(rng.random((5, 6, 7))), volume(rng.random((5, 6, 7)))
    assert mse(a, b, np.ones((5, 6, 7), bool)) == mse(a, b)


def test_mask_errors(rng):
    a = volume(rng.random((4, 4, 4)))
    with pytest.raises(EmptyMaskError):
        mse(a, a, np.zeros((4, 4, 4), bool))
    with pytest.raises(ValidationError):
        mse(a, a, np.ones((4, 4, 3), bool))
    with pytest.raises(GeometryMismatchError):
        mse(a, volume(np.zeros((4, 4, 5))))


def test_psnr_values():
    a = np.zeros((4, 4, 4))
    a[0, 0, 0] = 1.0
    assert psnr(volume(a), volume(a)) == math.inf
    assert psnr(volume(a), volume(a + 0.1), ImageMetricConfig(data_range=1.0)) == pytest.approx(20.0, abs=1e-5)


@pytest.mark.parametrize("data_range", [0.5, 1.0, 2.0, 255.0])
def test_psnr_formula(data_range):
    # offset c gives mse c^2 exactly in float64 for these powers of two
    a = np.zeros((4, 4, 4))
    a[0, 0, 0] = 1.0
    c = 2.0**-6
    got = psnr(volume(a), volume(a + c), ImageMetricConfig(data_range=data_range))
    assert got == pytest.approx(10 * math.log10(data_range**2 / c**2), rel=1e-6)


def test_psnr_small_mse():
    assert 10 * math.log10(1 / 0.0002) == pytest.approx(36.9897, abs=1e-4)
    a = np.zeros((10, 10, 10))
    b = a.copy()
    b.ravel()[:2] = 0.1  # mse = 2 * 0.01 / 1000 = 2e-5
    got = psnr(volume(a), volume(b), ImageMetricConfig(data_range=1.0))
    assert got == pytest.approx(10 * math.log10(1 / 2e-5), abs=1e-4)


def test_psnr_decreasing_in_mse(rng):
    a = rng.random((6, 6, 6))
    cfg = ImageMetricConfig(data_range=1.0)
    vals = [psnr(volume(a), volume(a + s), cfg) for s in (0.01, 0.02, 0.05, 0.1)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_constant_reference_needs_range():
    a = volume(np.full((12, 12, 12), 0.5))
    with pytest.raises(ValidationError):
        ssim(a, a)
    assert ssim(a, a, ImageMetricConfig(data_range=1.0)) == 1.0


def test_ssim_identity(rng):
    a = volume(rng.random((12, 13, 14)))
    assert ssim(a, a) == 1.0


def test_ssim_window_too_large(rng):
    a = volume(rng.random((10, 12, 12)))
    with pytest.raises(ValidationError, match="window"):
        ssim(a, a)
    assert ssim(a, a, ImageMetricConfig(window_size=7)) == 1.0


def test_ssim_matches_naive_window(rng):
    for _ in range(3):
        a = rng.random((16, 16, 16))
        b = np.clip(a + rng.normal(0, 0.2, a.shape), 0, 1)
        va, vb = volume(a), volume(b)
        L = float(va.data.max() - va.data.min())
        ref = naive_ssim(va.data.astype(np.float64), vb.data.astype(np.float64), L)
        assert ssim(va, vb) == pytest.approx(ref, abs=1e-6)


def test_ssim_mask(rng):
    a, b = volume(rng.random((14, 14, 14))), volume(rng.random((14, 14, 14)))
    assert ssim(a, b, mask=np.ones((14, 14, 14), bool)) == ssim(a, b)
    edge = np.zeros((14, 14, 14), bool)
    edge[0] = True
    with pytest.raises(EmptyMaskError):
        ssim(a, b, mask=edge)


def test_slice_mode(rng):
    a = volume(rng.random((12, 12, 3)))
    b = volume(rng.random((12, 12, 3)))
    cfg = ImageMetricConfig(slice_mode=True)
    assert ssim(a, a, cfg) == 1.0
    assert -1 <= ssim(a, b, cfg) < 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ssim_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((11, 11, 12))
    b = rng.random((11, 11, 12))
    cfg = ImageMetricConfig(data_range=1.0)
    s = ssim(volume(a), volume(b), cfg)
    assert s == pytest.approx(ssim(volume(b), volume(a), cfg), abs=1e-12)
    assert -1 <= s <= 1
