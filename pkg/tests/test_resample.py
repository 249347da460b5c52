import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsisr.resample import (
    KERNELS,
    ResamplePlan,
    bicubic,
    degrade_pair,
    resample_band,
    resample_cube,
    resample_weights,
    tap_weights,
)

KERNEL_NAMES = sorted(KERNELS)


def direct_resize_1d(x, n_out, kernel, antialias=True):
    """Loop-based reference: every source pixel within reach, edge clamped."""
    k = KERNELS[kernel]
    n_in = len(x)
    ratio = n_in / n_out
    stretch = ratio if antialias and ratio > 1 else 1.0
    reach = k.support * stretch
    out = np.empty(n_out)
    for i in range(n_out):
        c = (i + 0.5) * ratio - 0.5
        js = np.arange(math.floor(c - reach) - 1, math.ceil(c + reach) + 2)
        w = k.func((js - c) / stretch)
        out[i] = np.dot(w / w.sum(), x[np.clip(js, 0, n_in - 1)])
    return out


def direct_resize_2d(img, oh, ow, kernel):
    rows = np.stack([direct_resize_1d(r, ow, kernel) for r in img])
    return np.stack([direct_resize_1d(c, oh, kernel) for c in rows.T]).T


def test_half_pel_cubic_taps():
    w = tap_weights("cubic", 0.5)
    np.testing.assert_allclose(w, [-0.0625, 0.5625, 0.5625, -0.0625], rtol=0, atol=1e-9)


def test_upscale_by_two_uses_quarter_phases():
    idx, w = resample_weights(8, 16, "cubic")
    # output 5 sits at 2.25 in source coordinates
    row = dict(zip(idx[5].tolist(), w[5].tolist()))
    expected = tap_weights("cubic", 0.25)
    for j, e in zip(range(1, 5), expected):
        assert row[j] == pytest.approx(e, abs=1e-12)


def test_box_block_mean():
    out = resample_band(np.array([[1.0, 3.0], [5.0, 7.0]]), ResamplePlan(0.5, "box"))
    np.testing.assert_allclose(out, [[4.0]], atol=1e-12)


def test_box_downscale_is_block_average(rng):
    img = rng.random((12, 8))
    out = resample_band(img, ResamplePlan(0.25, "box"))
    ref = img.reshape(3, 4, 2, 4).mean(axis=(1, 3))
    np.testing.assert_allclose(out, ref, atol=1e-12)


@pytest.mark.parametrize("kernel", KERNEL_NAMES)
@pytest.mark.parametrize("shape,scale", [((16, 12), 0.25), ((8, 6), 2), ((10, 10), 0.5), ((5, 7), 4), ((9, 6), 1 / 3)])
def test_matches_direct_loops(kernel, shape, scale, rng):
    img = rng.random(shape)
    plan = ResamplePlan(scale, kernel)
    out = resample_band(img, plan)
    ref = direct_resize_2d(img, plan.output_size(shape[0]), plan.output_size(shape[1]), kernel)
    np.testing.assert_allclose(out, ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("kernel", KERNEL_NAMES)
def test_weights_normalised(kernel):
    for n_in in range(1, 40):
        for n_out in {max(1, n_in // 4), max(1, n_in // 2), n_in * 2, n_in * 3, n_in + 1}:
            _, w = resample_weights(n_in, n_out, kernel)
            assert np.all(np.abs(w.sum(axis=1) - 1) < 1e-12)


@pytest.mark.parametrize("kernel", KERNEL_NAMES)
@pytest.mark.parametrize("scale", [0.25, 0.5, 2, 4])
def test_constant_preserved(kernel, scale):
    c = np.float32(0.3712)
    cube = np.full((3, 16, 8), c, np.float32)
    out = resample_cube(cube, ResamplePlan(scale, kernel))
    assert np.abs(out - c).max() <= 1e-7


def test_constant_roundtrip_exact():
    cube = np.full((2, 8, 8), 0.5, np.float32)
    back = bicubic(bicubic(cube, 0.5), 2)
    np.testing.assert_array_equal(back, cube)


def test_scale_one_identity(rng):
    cube = rng.random((4, 9, 7)).astype(np.float32)
    np.testing.assert_array_equal(resample_cube(cube, ResamplePlan(1.0)), cube)


def test_dimension_law():
    for s in (2, 3, 4, 8):
        for h in range(s, 6 * s + 1, s):
            lr, _ = degrade_pair(np.zeros((5, h, 2 * s), np.float32), s)
            assert lr.shape == (5, h // s, 2)
    lr, hr = degrade_pair(np.zeros((31, 32, 32), np.float32), 4)
    assert lr.shape == (31, 8, 8) and hr.shape == (31, 32, 32)


@pytest.mark.parametrize("kernel", KERNEL_NAMES)
def test_degrade_pair_uses_kernel(kernel, rng):
    hr = rng.random((3, 16, 16)).astype(np.float32)
    lr, hr_out = degrade_pair(hr, 4, kernel)
    np.testing.assert_array_equal(hr_out, hr)
    np.testing.assert_array_equal(lr, resample_cube(hr, ResamplePlan(0.25, kernel, True)))


@settings(max_examples=40, deadline=None)
@given(
    h=st.integers(2, 24),
    w=st.integers(2, 24),
    factor=st.sampled_from([0.5, 2, 3]),
    kernel=st.sampled_from(KERNEL_NAMES),
    seed=st.integers(0, 2**31 - 1),
)
def test_flip_equivariance(h, w, factor, kernel, seed):
    if factor == 0.5:
        h, w = 2 * h, 2 * w
    img = np.random.default_rng(seed).random((h, w)).astype(np.float32)
    plan = ResamplePlan(factor, kernel)
    out = resample_band(img, plan)
    np.testing.assert_array_equal(resample_band(img[:, ::-1], plan), out[:, ::-1])
    np.testing.assert_array_equal(resample_band(img[::-1], plan), out[::-1])


@settings(max_examples=40, deadline=None)
@given(
    lo=st.floats(-1, 1),
    span=st.floats(0, 1),
    kernel=st.sampled_from(KERNEL_NAMES),
    seed=st.integers(0, 2**31 - 1),
)
def test_output_finite_and_shape(lo, span, kernel, seed):
    img = lo + span * np.random.default_rng(seed).random((8, 12))
    out = resample_band(img, ResamplePlan(0.5, kernel))
    assert out.shape == (4, 6) and np.isfinite(out).all()
    if kernel in ("box", "linear"):
        # non-negative kernels cannot overshoot
        assert out.min() >= img.min() - 1e-12 and out.max() <= img.max() + 1e-12


def test_errors():
    with pytest.raises(ValueError, match="divisible"):
        degrade_pair(np.zeros((2, 34, 32), np.float32), 4)
    with pytest.raises(ValueError, match="divisible"):
        resample_band(np.zeros((10, 10)), ResamplePlan(0.25))
    with pytest.raises(ValueError, match="empty"):
        resample_band(np.zeros((0, 4)), ResamplePlan(2))
    with pytest.raises(ValueError, match="non-finite"):
        resample_band(np.array([[np.nan, 0.0]]), ResamplePlan(2))
    with pytest.raises(ValueError, match="unknown kernel"):
        ResamplePlan(2, "gauss")
    with pytest.raises(ValueError):
        ResamplePlan(0)


def test_bicubic_signed_residuals():
    z = np.array([[[-1.0, 1.0], [1.0, -1.0]]], np.float32)
    up = bicubic(z, 2)
    assert up.shape == (1, 4, 4) and up.min() < 0 < up.max()
    np.testing.assert_allclose(up.sum(), 0.0, atol=1e-6)
