import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsisr import autodiff as ad
from hsisr.autodiff import Tensor

from gradcheck import check_op, numeric_grad, rel_error


def test_conv2d_delta_kernel_is_identity(rng):
    x = rng.random((3, 5, 6))
    w = np.zeros((3, 3, 3, 3))
    for c in range(3):
        w[c, c, 1, 1] = 1.0
    out = ad.conv2d(Tensor(x), Tensor(w), Tensor(np.zeros(3)))
    np.testing.assert_array_equal(out.data, x)


def test_conv2d_pointwise_channel_sum():
    x = np.array([[[1.0, 2.0], [3.0, 4.0]], [[10.0, 20.0], [30.0, 40.0]]])
    w = np.ones((1, 2, 1, 1))
    out = ad.conv2d(Tensor(x), Tensor(w))
    np.testing.assert_array_equal(out.data, [[[11.0, 22.0], [33.0, 44.0]]])


def test_conv2d_matches_direct_loops(rng):
    x = rng.standard_normal((2, 3, 5, 4))
    w = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(4)
    out = ad.conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros((2, 4, 5, 4))
    for n in range(2):
        for o in range(4):
            for i in range(5):
                for j in range(4):
                    ref[n, o, i, j] = np.sum(xp[n, :, i : i + 3, j : j + 3] * w[o]) + b[o]
    np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)


def test_conv2d_rejects_channel_mismatch():
    with pytest.raises(ValueError, match="channel mismatch"):
        ad.conv2d(Tensor(np.zeros((2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))


def test_conv2d_gradients(rng):
    err = check_op(
        lambda x, w, b: ad.conv2d(x, w, b),
        [rng.standard_normal((2, 3, 6, 5)), rng.standard_normal((4, 3, 3, 3)), rng.standard_normal(4)],
        rng,
    )
    assert err < 1e-4


def test_conv3d_spectral_identity(rng):
    x = rng.random((2, 3, 4, 4))
    sw = np.zeros((2, 2, 3, 1, 1))
    sw[0, 0, 1] = sw[1, 1, 1] = 1.0
    pw = np.zeros((2, 2, 1, 3, 3))
    spec, _ = ad.conv3d_separable(Tensor(x), Tensor(sw), Tensor(pw))
    np.testing.assert_array_equal(spec.data, x)


def test_conv3d_depth_neighbourhood_sums():
    x = np.array([1.0, 2.0, 4.0]).reshape(1, 3, 1, 1)
    sw = np.ones((1, 1, 3, 1, 1))
    spec, _ = ad.conv3d_separable(Tensor(x), Tensor(sw), Tensor(np.zeros((1, 1, 1, 3, 3))))
    np.testing.assert_array_equal(spec.data.ravel(), [3.0, 7.0, 6.0])


def test_conv3d_gradients(rng):
    arrays = [rng.standard_normal((2, 2, 3, 4, 4)), rng.standard_normal((2, 2, 3, 1, 1)), rng.standard_normal((2, 2, 1, 3, 3))]

    def build(x, sw, pw):
        a, b = ad.conv3d_separable(x, sw, pw)
        return ad.add(a, b)

    assert check_op(build, arrays, rng) < 1e-4


def test_conv3d_rejects_full_kernel():
    with pytest.raises(ValueError, match="separable"):
        ad.conv3d(Tensor(np.zeros((1, 3, 4, 4))), Tensor(np.zeros((1, 1, 3, 3, 3))))


def test_pixel_shuffle_layout():
    x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(4, 1, 1)
    out = ad.pixel_shuffle(Tensor(x), 2)
    np.testing.assert_array_equal(out.data, [[[1.0, 2.0], [3.0, 4.0]]])


def test_pixel_shuffle_inverse(rng):
    x = rng.standard_normal((2, 8, 3, 5))
    y = ad.pixel_unshuffle(ad.pixel_shuffle(Tensor(x), 2), 2)
    np.testing.assert_array_equal(y.data, x)


def test_pixel_shuffle_gradient_is_unshuffle(rng):
    x = Tensor(rng.standard_normal((1, 8, 3, 3)), requires_grad=True)
    g = rng.standard_normal((1, 2, 6, 6))
    ad.pixel_shuffle(x, 2).backward(g)
    np.testing.assert_array_equal(x.grad, ad.pixel_unshuffle(Tensor(g), 2).data)
    assert check_op(lambda t: ad.pixel_shuffle(t, 2), [x.data], rng) < 1e-4


def test_pixel_shuffle_divisibility():
    with pytest.raises(ValueError, match="divisible"):
        ad.pixel_shuffle(Tensor(np.zeros((3, 2, 2))), 2)


def test_relu_values_and_subgradient():
    x = Tensor(np.array([-1.0, 0.0, 2.0]), requires_grad=True)
    y = ad.relu(x)
    np.testing.assert_array_equal(y.data, [0.0, 0.0, 2.0])
    y.backward(np.ones(3))
    np.testing.assert_array_equal(x.grad, [0.0, 0.0, 1.0])


def test_scalar_mul_zero_and_weight_gradient(rng):
    x = rng.standard_normal((2, 3, 4))
    out = ad.scalar_mul(Tensor(np.zeros(1)), Tensor(x))
    np.testing.assert_array_equal(out.data, np.zeros_like(x))
    w = Tensor(np.array([0.7]), requires_grad=True)
    up = rng.standard_normal(x.shape)
    ad.scalar_mul(w, Tensor(x)).backward(up)
    np.testing.assert_allclose(w.grad, [np.sum(x * up)], rtol=1e-12)
    assert check_op(ad.scalar_mul, [np.array([0.7]), x], rng) < 1e-4


def test_concat_shapes():
    out = ad.concat_channels([Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 4, 4)))])
    assert out.shape == (1, 5, 4, 4)
    with pytest.raises(ValueError):
        ad.concat_channels([Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 4, 5)))])


def test_add_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        ad.add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))


def test_l1_loss_values():
    assert float(ad.l1_loss(Tensor(np.array([0.0, 1.0])), Tensor(np.array([1.0, 1.0]))).data) == 0.5
    assert float(ad.l1_loss(Tensor(np.ones(3)), Tensor(np.ones(3))).data) == 0.0


def test_l1_loss_gradient_and_ties():
    p = Tensor(np.array([0.0, 1.0, 3.0]), requires_grad=True)
    ad.l1_loss(p, Tensor(np.array([1.0, 1.0, 2.0]))).backward()
    np.testing.assert_allclose(p.grad, [-1 / 3, 0.0, 1 / 3])


def test_gradient_accumulates_on_reuse(rng):
    x = Tensor(rng.standard_normal((1, 2, 3, 3)), requires_grad=True)
    y = ad.add(x, ad.relu(x))
    g = rng.standard_normal(y.shape)
    y.backward(g)
    np.testing.assert_allclose(x.grad, g + g * (x.data > 0))
    # a second backward adds on top of the first
    first = x.grad.copy()
    ad.add(x, x).backward(g)
    np.testing.assert_allclose(x.grad, first + 2 * g)


def test_no_grad_records_nothing(rng):
    w = Tensor(rng.standard_normal((2, 1, 3, 3)), requires_grad=True)
    with ad.no_grad():
        out = ad.conv2d(Tensor(rng.standard_normal((1, 4, 4))), w)
    assert not out.requires_grad


shapes = st.tuples(st.integers(1, 4), st.integers(1, 8), st.integers(1, 8))


@settings(max_examples=25, deadline=None)
@given(shape=shapes, seed=st.integers(0, 2**31 - 1))
def test_elementwise_gradients_property(shape, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((1, *shape))
    x[np.abs(x) < 1e-2] = 0.5  # keep finite differences off the relu kink
    y = rng.standard_normal((1, *shape))
    assert check_op(ad.relu, [x], rng) < 1e-4
    assert check_op(ad.add, [x, y], rng) < 1e-4
    assert check_op(lambda a, b: ad.concat_channels([a, b]), [x, y], rng) < 1e-4
    assert check_op(lambda a: ad.transpose(a, (0, 2, 3, 1)), [x], rng) < 1e-4


@settings(max_examples=15, deadline=None)
@given(shape=shapes, k=st.sampled_from([(1, 1), (3, 3), (3, 1), (1, 3)]), seed=st.integers(0, 2**31 - 1))
def test_conv2d_gradient_property(shape, k, seed):
    rng = np.random.default_rng(seed)
    c, h, w = shape
    arrays = [rng.standard_normal((1, c, h, w)), rng.standard_normal((2, c, *k)), rng.standard_normal(2)]
    assert check_op(ad.conv2d, arrays, rng) < 1e-4


@settings(max_examples=30, deadline=None)
@given(shape=shapes, seed=st.integers(0, 2**31 - 1))
def test_ops_stay_finite(shape, seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.standard_normal((1, *shape)) * 1e3, requires_grad=True)
    w = Tensor(rng.standard_normal((2, shape[0], 3, 3)), requires_grad=True)
    out = ad.relu(ad.conv2d(x, w))
    loss = ad.l1_loss(out, Tensor(np.zeros(out.shape)))
    loss.backward()
    assert np.isfinite(loss.data).all() and np.isfinite(x.grad).all() and np.isfinite(w.grad).all()


def test_adam_first_step_closed_form():
    p = np.zeros(5, dtype=np.float64)
    state = ad.AdamState()
    ad.adam_step([p], [np.ones(5)], state)
    assert np.all(np.abs(p + 1e-4) < 1e-8)
    assert state.t == 1


def test_adam_zero_gradient_is_noop():
    p = np.arange(4, dtype=np.float32)
    before = p.copy()
    state = ad.AdamState()
    for _ in range(3):
        ad.adam_step([p], [np.zeros(4, np.float32)], state)
    np.testing.assert_array_equal(p, before)
    assert state.t == 3


def test_adam_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        ad.adam_step([np.zeros(2)], [np.array([1.0, np.nan])], ad.AdamState())


def test_adam_deterministic(rng):
    grads = [rng.standard_normal(6).astype(np.float32) for _ in range(10)]

    def run():
        p = np.linspace(-1, 1, 6, dtype=np.float32)
        state = ad.AdamState()
        for g in grads:
            ad.adam_step([p], [g], state)
        return p

    np.testing.assert_array_equal(run(), run())


@pytest.mark.parametrize("epoch,expected", [(0, 1e-4), (29, 1e-4), (30, 5e-5), (90, 1.25e-5)])
def test_lr_schedule(epoch, expected):
    assert ad.lr_schedule(epoch) == pytest.approx(expected, rel=1e-12)


def test_checkpoint_roundtrip(tmp_path, rng):
    params = {"a.weight": rng.standard_normal((2, 3, 3, 3)).astype(np.float32), "b": np.float32([0.5])}
    ad.save_checkpoint(tmp_path / "m.ckpt", params, {"scale": 4})
    loaded, cfg = ad.load_checkpoint(tmp_path / "m.ckpt")
    assert cfg == {"scale": "4"}
    assert list(loaded) == list(params)
    for k in params:
        np.testing.assert_array_equal(loaded[k], params[k])
    assert (tmp_path / "m.ckpt").stat().st_size == 4 * (54 + 1)


def test_checkpoint_truncated(tmp_path):
    ad.save_checkpoint(tmp_path / "m.ckpt", {"w": np.zeros(4, np.float32)})
    raw = (tmp_path / "m.ckpt").read_bytes()
    (tmp_path / "m.ckpt").write_bytes(raw[:-4])
    with pytest.raises(ValueError, match="size mismatch"):
        ad.load_checkpoint(tmp_path / "m.ckpt")


def test_numeric_grad_oracle_on_quadratic():
    a = np.array([1.0, -2.0, 3.0])
    g = numeric_grad(lambda: float(np.sum(a**2)), a)
    assert rel_error(g, 2 * np.array([1.0, -2.0, 3.0])) < 1e-9
