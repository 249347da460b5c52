"""Recurrent band-by-band coarse super-resolution network.

Band ``i`` is reconstructed from the three neighbouring-band groups of
:mod:`hsisr.nbp`:

1. one 3x3 entry convolution per group (1, 3 and 3 input bands),
2. intra-group fusion: a residual unit per branch, then each branch is
   concatenated with the other two and reduced by a 1x1 convolution,
3. inter-group fusion: the branches are stacked along a depth axis, passed
   through parallel 3x1x1 / 1x3x3 convolutions that are summed, refined by
   another 1x3x3 convolution, and folded back to 2-D with a 1x1 convolution,
4. feature context fusion with the previous band's features,
5. a cascade of x2 sub-pixel stages and a 1-channel projection, plus a
   bicubic global residual.

The cascade makes every power-of-two scale up to the trained one available
from a single forward pass; the fine stage uses the ``s`` and ``s/2`` taps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nbp import gather_groups, partition
from .resample import bicubic
from .validation import check_cube, check_cube_batch, check_scale

__all__ = [
    "CoarseConfig",
    "FcfState",
    "CoarseModel",
    "intra_group_fusion",
    "inter_group_fusion",
    "fcf",
    "upsample_head",
    "sr_band",
    "sr_cube",
    "sr_cube_multi",
    "train",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoarseConfig:
    channels: int = 64
    intra_stages: int = 1
    scale: int = 4
    global_residual: bool = True

    def __post_init__(self):
        check_scale(self.scale, power_of_two=True)
        if self.channels < 1 or self.intra_stages < 0:
            raise ValueError("channels must be >= 1 and intra_stages >= 0")

    @property
    def n_up(self):
        return int(math.log2(self.scale))

    def to_dict(self):
        return {k: int(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(
            channels=int(d["channels"]),
            intra_stages=int(d["intra_stages"]),
            scale=int(d["scale"]),
            global_residual=bool(int(d["global_residual"])),
        )


@dataclass
class FcfState:
    """Features of the previously reconstructed band, carried along the band loop."""

    prev: Tensor | None = None
    band: int = 0


class CoarseModel:
    """Parameter container for the coarse network; ``params`` maps name to tensor."""

    def __init__(self, config=None, seed=0, dtype=np.float32):
        self.config = config if config is not None else CoarseConfig()
        self.dtype = np.dtype(dtype)
        self.params = {}
        rng = np.random.default_rng(seed)
        self._build(rng)

    def _conv(self, rng, name, c_out, c_in, *kernel):
        fan_in = c_in * int(np.prod(kernel))
        bound = math.sqrt(1.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(c_out, c_in, *kernel)).astype(self.dtype)
        self.params[name + ".weight"] = Tensor(w, requires_grad=True, name=name + ".weight")
        self.params[name + ".bias"] = Tensor(np.zeros(c_out, self.dtype), requires_grad=True, name=name + ".bias")

    def _scalar(self, name, value):
        self.params[name] = Tensor(np.full((1,), value, self.dtype), requires_grad=True, name=name)

    def _build(self, rng):
        c = self.config.channels
        for k, c_in in enumerate((1, 3, 3), 1):
            self._conv(rng, f"entry{k}", c, c_in, 3, 3)
        for s in range(self.config.intra_stages):
            for k in range(1, 4):
                for b in range(2):
                    self._conv(rng, f"intra{s}.branch{k}.block{b}.conv1", c, c, 3, 3)
                    self._conv(rng, f"intra{s}.branch{k}.block{b}.conv2", c, c, 3, 3)
                self._conv(rng, f"intra{s}.branch{k}.fuse", c, 3 * c, 1, 1)
        self._conv(rng, "inter.spectral", c, c, 3, 1, 1)
        self._conv(rng, "inter.spatial", c, c, 1, 3, 3)
        self._conv(rng, "inter.post", c, c, 1, 3, 3)
        self._conv(rng, "inter.fold", c, 3 * c, 1, 1)
        self._scalar("fcf.w1", 0.5)
        self._scalar("fcf.w2", 0.5)
        self._conv(rng, "fcf.reduce", c, 2 * c, 1, 1)
        for u in range(self.config.n_up):
            self._conv(rng, f"up{u}", 4 * c, c, 3, 3)
        self._conv(rng, "proj", 1, c, 3, 3)

    def parameters(self):
        return list(self.params.values())

    def conv(self, x, name):
        return ad.conv2d(x, self.params[name + ".weight"], self.params[name + ".bias"])

    def conv3(self, x, name):
        return ad.conv3d(x, self.params[name + ".weight"], self.params[name + ".bias"])

    def state_dict(self):
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state):
        missing = set(self.params) ^ set(state)
        if missing:
            raise ValueError(f"parameter names differ: {sorted(missing)}")
        for k, arr in state.items():
            if arr.shape != self.params[k].shape:
                raise ValueError(f"shape mismatch for {k}: {arr.shape} vs {self.params[k].shape}")
            self.params[k].data = np.array(arr, dtype=self.dtype)

    def save(self, path):
        ad.save_checkpoint(path, self.state_dict(), self.config.to_dict())

    @classmethod
    def load(cls, path):
        state, cfg = ad.load_checkpoint(path)
        model = cls(CoarseConfig.from_dict(cfg))
        model.load_state_dict(state)
        return model

    def astype(self, dtype):
        """Copy of the model with parameters cast (e.g. to float64 for gradient checks)."""
        other = CoarseModel.__new__(CoarseModel)
        other.config = self.config
        other.dtype = np.dtype(dtype)
        other.params = {
            k: Tensor(v.data.astype(dtype), requires_grad=True, name=k) for k, v in self.params.items()
        }
        return other


def _residual_unit(model, x, prefix):
    for b in range(2):
        y = model.conv(x, f"{prefix}.block{b}.conv1")
        y = model.conv(ad.relu(y), f"{prefix}.block{b}.conv2")
        x = ad.add(x, y)
    return x


def intra_group_fusion(model, f1, f2, f3, stage=0):
    feats = (f1, f2, f3)
    shape = f1.shape
    if f2.shape != shape or f3.shape != shape:
        raise ValueError(f"branch shapes differ: {f1.shape}, {f2.shape}, {f3.shape}")
    deep = [_residual_unit(model, f, f"intra{stage}.branch{k}") for k, f in enumerate(feats, 1)]
    out = []
    for k in range(3):
        others = [deep[j] for j in range(3) if j != k]
        out.append(model.conv(ad.concat_channels([deep[k], *others]), f"intra{stage}.branch{k + 1}.fuse"))
    return tuple(out)


def inter_group_fusion(model, b1, b2, b3):
    shape = b1.shape
    if b2.shape != shape or b3.shape != shape:
        raise ValueError(f"branch shapes differ: {b1.shape}, {b2.shape}, {b3.shape}")
    n, c, h, w = shape
    vol = ad.reshape(ad.concat_channels([b1, b2, b3]), (n, 3, c, h, w))
    vol = ad.transpose(vol, (0, 2, 1, 3, 4))
    p = model.params
    spectral, spatial = ad.conv3d_separable(
        vol, p["inter.spectral.weight"], p["inter.spatial.weight"], p["inter.spectral.bias"], p["inter.spatial.bias"]
    )
    vol = model.conv3(ad.add(spectral, spatial), "inter.post")
    flat = ad.reshape(ad.transpose(vol, (0, 2, 1, 3, 4)), (n, 3 * c, h, w))
    return model.conv(flat, "inter.fold")


def fcf(model, current, state, band):
    """Fuse the current band's features with the cached previous-band features.

    Band 1 passes through unchanged. The state always ends up holding
    ``current`` for the next band.
    """
    if band == 1:
        out = current
    else:
        if state.prev is None:
            raise ValueError(f"band {band} needs the previous band's features")
        if state.prev.shape != current.shape:
            raise ValueError(f"cached features {state.prev.shape} do not match {current.shape}")
        p = model.params
        mixed = ad.concat_channels([ad.scalar_mul(p["fcf.w1"], current), ad.scalar_mul(p["fcf.w2"], state.prev)])
        out = model.conv(mixed, "fcf.reduce")
    state.prev = current
    state.band = band
    return out


def _n_stages(model, scale):
    scale = check_scale(scale, power_of_two=True)
    n = int(math.log2(scale))
    if n > model.config.n_up:
        raise ValueError(f"model trained for x{model.config.scale} cannot produce x{scale}")
    return n


def upsample_head(model, f, scales, lr_band):
    """Project features to one output band at each requested power-of-two scale.

    Returns ``{scale: Tensor(N, 1, s*h, s*w)}``. All scales share the
    sub-pixel cascade; scale ``2**k`` taps it after ``k`` stages.
    """
    stages = {s: _n_stages(model, s) for s in scales}
    lr_band = np.asarray(lr_band)
    out = {}
    x = f
    for k in range(max(stages.values()) + 1):
        for s, n in stages.items():
            if n != k:
                continue
            y = model.conv(x, "proj")
            if model.config.global_residual:
                up = lr_band if s == 1 else bicubic(lr_band, s)
                y = ad.add(y, up.astype(model.dtype, copy=False)[:, None])
            out[s] = y
        if k < max(stages.values()):
            x = ad.pixel_shuffle(model.conv(x, f"up{k}"), 2)
    return out


def _forward_band(model, lr, band, state, scales):
    """Batched forward for band ``band`` (1-based) of ``lr`` with shape ``(N, L, h, w)``."""
    L = lr.shape[1]
    groups = partition(band, L)
    slabs = gather_groups(lr, groups)
    feats = [model.conv(Tensor(s.astype(model.dtype, copy=False)), f"entry{k}") for k, s in enumerate(slabs, 1)]
    for stage in range(model.config.intra_stages):
        feats = intra_group_fusion(model, *feats, stage=stage)
    fd = inter_group_fusion(model, *feats)
    fused = fcf(model, fd, state, band)
    return upsample_head(model, fused, scales, lr[:, band - 1])


def sr_band(model, cube, band, state, scale=None):
    """Super-resolve one band (1-based) of a cube; returns a 2-D array.

    ``state`` must have seen bands ``1 .. band-1`` in order.
    """
    arr = check_cube(cube, min_bands=5)
    scale = model.config.scale if scale is None else scale
    with ad.no_grad():
        out = _forward_band(model, arr[None], band, state, (scale,))[scale]
    return out.data[0, 0]


def sr_cube_multi(model, lr, scales):
    """Run the band loop once and return ``{scale: cube}`` for each tap, clamped to [0, 1].

    ``lr`` may be one cube ``(L, h, w)`` or a batch ``(N, L, h, w)``.
    """
    single = np.asarray(lr).ndim == 3
    batch = check_cube_batch(lr, name="lr", min_bands=5)
    n, L, h, w = batch.shape
    scales = tuple(dict.fromkeys(scales))
    outs = {s: np.empty((n, L, s * h, s * w), dtype=np.float32) for s in scales}
    state = FcfState()
    with ad.no_grad():
        for band in range(1, L + 1):
            res = _forward_band(model, batch, band, state, scales)
            for s in scales:
                outs[s][:, band - 1] = res[s].data[:, 0]
    for s in scales:
        np.clip(outs[s], 0.0, 1.0, out=outs[s])
    if single:
        return {s: v[0] for s, v in outs.items()}
    return outs


def sr_cube(model, lr, scale=None):
    """Reconstruct all bands sequentially; output is clamped to [0, 1]."""
    scale = model.config.scale if scale is None else scale
    return sr_cube_multi(model, lr, (scale,))[scale]


def band_loss(model, lr, hr, band, state):
    """L1 loss of one band for a batch; the graph is left attached to ``state``."""
    s = model.config.scale
    pred = _forward_band(model, lr, band, state, (s,))[s]
    target = hr[:, band - 1 : band].astype(model.dtype, copy=False)
    return ad.l1_loss(pred, target)


def total_loss(model, lr, hr):
    """Sum of per-band L1 losses with the band recurrence differentiated end to end."""
    state = FcfState()
    total = None
    for band in range(1, lr.shape[1] + 1):
        loss = band_loss(model, lr, hr, band, state)
        total = loss if total is None else ad.add(total, loss)
    return total


def _check_pairs(pairs, scale):
    if not pairs:
        raise ValueError("dataset is empty")
    lrs = check_cube_batch([p[0] for p in pairs], name="lr", min_bands=5)
    hrs = check_cube_batch([p[1] for p in pairs], name="hr", min_bands=5)
    n, L, h, w = lrs.shape
    if hrs.shape != (n, L, h * scale, w * scale):
        raise ValueError(f"HR shape {hrs.shape[1:]} is not x{scale} of LR shape {lrs.shape[1:]}")
    return lrs, hrs


def train(
    model,
    dataset,
    epochs,
    batch=64,
    seed=0,
    base_lr=1e-4,
    lr_step=30,
    on_epoch: Callable[[int, float], None] | None = None,
):
    """Fit ``model`` in place on ``(lr, hr)`` pairs and return the per-epoch mean losses.

    Each mini-batch walks the bands in order and takes one ADAM step per
    band. The previous band's features are carried forward as constants, so
    a step never differentiates through an earlier band's graph.
    """
    lrs, hrs = _check_pairs(list(dataset), model.config.scale)
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    rng = np.random.default_rng(seed)
    opt = ad.Adam(model.parameters(), lr=base_lr)
    n, L = lrs.shape[:2]
    history = []
    for epoch in range(epochs):
        opt.lr = ad.lr_schedule(epoch, base_lr=base_lr, step=lr_step)
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch):
            idx = np.sort(order[start : start + batch])
            lr_b, hr_b = lrs[idx], hrs[idx]
            state = FcfState()
            for band in range(1, L + 1):
                opt.zero_grad()
                loss = band_loss(model, lr_b, hr_b, band, state)
                value = float(loss.data)
                if not math.isfinite(value):
                    raise FloatingPointError(f"non-finite loss at epoch {epoch}, band {band}")
                loss.backward()
                opt.step()
                state.prev = state.prev.detach()
                losses.append(value)
        mean = float(np.mean(losses))
        history.append(mean)
        logger.info("epoch %d lr %.3g mean L1 %.6f", epoch + 1, opt.lr, mean)
        if on_epoch is not None:
            on_epoch(epoch, mean)
    return history
