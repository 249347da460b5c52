"""Differentiable operators.

Feature maps are batched ``(N, C, H, W)``; unbatched ``(C, H, W)`` inputs to
:func:`conv2d` and :func:`pixel_shuffle` are accepted and returned unbatched.
The set is deliberately closed: convolutions (2-D and separable 3-D),
sub-pixel shuffle, ReLU, addition, scalar weighting, channel concatenation,
reshape/transpose and the L1 loss.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, as_tensor

__all__ = [
    "conv2d",
    "conv3d",
    "conv3d_separable",
    "pixel_shuffle",
    "pixel_unshuffle",
    "relu",
    "add",
    "scalar_mul",
    "concat_channels",
    "reshape",
    "transpose",
    "l1_loss",
]


def _batched(x, ndim):
    if x.ndim == ndim - 1:
        return reshape(x, (1,) + x.shape), True
    if x.ndim != ndim:
        raise ValueError(f"expected a {ndim - 1}-D or {ndim}-D tensor, got shape {x.shape}")
    return x, False


def conv2d(x, weight, bias=None):
    """Zero-padded 'same' cross-correlation with an odd ``kh x kw`` kernel."""
    x, w = as_tensor(x), as_tensor(weight)
    x, squeeze = _batched(x, 4)
    n, c, h, wd = x.shape
    if w.ndim != 4:
        raise ValueError(f"weight must be (C_out, C_in, kh, kw), got {w.shape}")
    o, ci, kh, kw = w.shape
    if ci != c:
        raise ValueError(f"channel mismatch: input has {c} channels, weight expects {ci}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel must be odd-sized, got {kh}x{kw}")
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (o,):
            raise ValueError(f"bias must have shape ({o},), got {bias.shape}")
    ph, pw = kh // 2, kw // 2

    # channels-last columns ordered (kh, kw, C): the copy stays contiguous in C
    xh = x.data.transpose(0, 2, 3, 1)
    if kh == 1 and kw == 1:
        cols = np.ascontiguousarray(xh).reshape(-1, c)
    else:
        padded = np.pad(xh, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
        win = sliding_window_view(padded, (kh, kw), axis=(1, 2))
        cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(-1, kh * kw * c)
    wmat = w.data.transpose(0, 2, 3, 1).reshape(o, -1)
    out = cols @ wmat.T
    if bias is not None:
        out += bias.data
    out = np.ascontiguousarray(out.reshape(n, h, wd, o).transpose(0, 3, 1, 2))

    def backward(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, o)
        gw = None
        if w.requires_grad:
            gw = np.ascontiguousarray((g2.T @ cols).reshape(o, kh, kw, c).transpose(0, 3, 1, 2))
        gb = g2.sum(axis=0) if bias is not None and bias.requires_grad else None
        gx = None
        if x.requires_grad:
            dcols = g2 @ wmat
            if kh == 1 and kw == 1:
                gx = dcols.reshape(n, h, wd, c)
            else:
                dcols = dcols.reshape(n, h, wd, kh, kw, c)
                gpad = np.zeros((n, h + 2 * ph, wd + 2 * pw, c), dtype=g.dtype)
                for a in range(kh):
                    for b in range(kw):
                        gpad[:, a : a + h, b : b + wd] += dcols[:, :, :, a, b]
                gx = gpad[:, ph : ph + h, pw : pw + wd]
            gx = np.ascontiguousarray(gx.transpose(0, 3, 1, 2))
        return gx, gw, gb

    parents = (x, w) if bias is None else (x, w, bias)
    result = Tensor._make(out, parents, backward)
    return reshape(result, result.shape[1:]) if squeeze else result


def conv3d(x, weight, bias=None):
    """'Same' 3-D convolution over ``(N, C, D, H, W)`` with a factorised kernel.

    Only ``kd x 1 x 1`` (spectral) and ``1 x kh x kw`` (spatial) kernels are
    supported; both reduce to :func:`conv2d` on a reshaped view.
    """
    x, w = as_tensor(x), as_tensor(weight)
    x, squeeze = _batched(x, 5)
    if w.ndim != 5:
        raise ValueError(f"weight must be (C_out, C_in, kd, kh, kw), got {w.shape}")
    n, c, d, h, wd = x.shape
    o, ci, kd, kh, kw = w.shape
    if ci != c:
        raise ValueError(f"channel mismatch: input has {c} channels, weight expects {ci}")
    if kd == 1:
        # fold depth into the batch: (N*D, C, H, W)
        xs = reshape(transpose(x, (0, 2, 1, 3, 4)), (n * d, c, h, wd))
        y = conv2d(xs, reshape(w, (o, c, kh, kw)), bias)
        y = transpose(reshape(y, (n, d, o, h, wd)), (0, 2, 1, 3, 4))
    elif kh == 1 and kw == 1:
        # fold space into the batch and convolve along depth: (N*H*W, C, D, 1)
        xs = reshape(transpose(x, (0, 3, 4, 1, 2)), (n * h * wd, c, d, 1))
        y = conv2d(xs, reshape(w, (o, c, kd, 1)), bias)
        y = transpose(reshape(y, (n, h, wd, o, d)), (0, 3, 4, 1, 2))
    else:
        raise ValueError(f"only separable 3-D kernels are supported, got {kd}x{kh}x{kw}")
    return reshape(y, y.shape[1:]) if squeeze else y


def conv3d_separable(x, spectral_weight, spatial_weight, spectral_bias=None, spatial_bias=None):
    """Parallel ``3x1x1`` and ``1x3x3`` convolutions of the same volume."""
    sw, pw = as_tensor(spectral_weight), as_tensor(spatial_weight)
    if sw.ndim != 5 or sw.shape[3:] != (1, 1):
        raise ValueError(f"spectral kernel must be (O, C, kd, 1, 1), got {sw.shape}")
    if pw.ndim != 5 or pw.shape[2] != 1:
        raise ValueError(f"spatial kernel must be (O, C, 1, kh, kw), got {pw.shape}")
    return conv3d(x, sw, spectral_bias), conv3d(x, pw, spatial_bias)


def pixel_shuffle(x, r):
    """``(N, C*r*r, H, W) -> (N, C, H*r, W*r)``; channel ``c*r*r + i*r + j`` lands at offset ``(i, j)``."""
    x = as_tensor(x)
    x, squeeze = _batched(x, 4)
    n, cr, h, w = x.shape
    if r < 1 or cr % (r * r):
        raise ValueError(f"channel count {cr} is not divisible by r^2 = {r * r}")
    c = cr // (r * r)
    y = reshape(x, (n, c, r, r, h, w))
    y = transpose(y, (0, 1, 4, 2, 5, 3))
    y = reshape(y, (n, c, h * r, w * r))
    return reshape(y, y.shape[1:]) if squeeze else y


def pixel_unshuffle(x, r):
    """Inverse of :func:`pixel_shuffle`."""
    x = as_tensor(x)
    x, squeeze = _batched(x, 4)
    n, c, hr, wr = x.shape
    if r < 1 or hr % r or wr % r:
        raise ValueError(f"spatial size {hr}x{wr} is not divisible by r = {r}")
    h, w = hr // r, wr // r
    y = reshape(x, (n, c, h, r, w, r))
    y = transpose(y, (0, 1, 3, 5, 2, 4))
    y = reshape(y, (n, c * r * r, h, w))
    return reshape(y, y.shape[1:]) if squeeze else y


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor._make(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def add(x, y):
    x, y = as_tensor(x), as_tensor(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch in add: {x.shape} vs {y.shape}")
    return Tensor._make(x.data + y.data, (x, y), lambda g: (g, g))


def scalar_mul(w, x):
    """``w * x`` for a single-element tensor ``w``."""
    w, x = as_tensor(w), as_tensor(x)
    if w.data.size != 1:
        raise ValueError(f"scalar_mul expects a single-element weight, got shape {w.shape}")
    wv = w.data.reshape(())

    def backward(g):
        gw = np.sum(g * x.data).reshape(w.shape) if w.requires_grad else None
        return gw, g * wv

    return Tensor._make(wv * x.data, (w, x), backward)


def concat_channels(xs):
    """Concatenate along axis 1 (the channel axis of batched maps)."""
    xs = [as_tensor(x) for x in xs]
    if not xs:
        raise ValueError("nothing to concatenate")
    ref = xs[0].shape
    for x in xs[1:]:
        if x.ndim != len(ref) or x.shape[:1] + x.shape[2:] != ref[:1] + ref[2:]:
            raise ValueError(f"shape mismatch in concat: {ref} vs {x.shape}")
    sizes = [x.shape[1] for x in xs]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(g[:, bounds[k] : bounds[k + 1]] for k in range(len(xs)))

    return Tensor._make(np.concatenate([x.data for x in xs], axis=1), tuple(xs), backward)


def reshape(x, shape):
    x = as_tensor(x)
    shape = tuple(int(s) for s in shape)
    old = x.shape
    return Tensor._make(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x, axes):
    x = as_tensor(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return Tensor._make(
        np.ascontiguousarray(x.data.transpose(axes)),
        (x,),
        lambda g: (np.ascontiguousarray(g.transpose(inverse)),),
    )


def l1_loss(pred, target):
    """Mean absolute error; the subgradient at ties is 0."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch in l1_loss: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    count = diff.size

    def backward(g):
        s = np.sign(diff) * (g / count)
        return s, -s

    return Tensor._make(np.asarray(np.abs(diff).mean(), dtype=pred.dtype), (pred, target), backward)
