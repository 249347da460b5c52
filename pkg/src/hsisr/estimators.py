"""scikit-learn style estimators wrapping the coarse network and the refiner.

``X`` is a batch of LR cubes ``(n, L, h, w)`` (or one ``(L, h, w)`` cube)
and ``y`` the matching HR cubes ``(n, L, s*h, s*w)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import coarse_net
from .backprojection import SAM_MODES, refine_from_cubes
from .metrics import psnr
from .validation import check_cube_batch, check_scale

__all__ = ["CoarSR", "DualSR", "BackProjectionRefiner"]


def _as_batch(X, min_bands=1):
    single = np.asarray(X).ndim == 3
    return check_cube_batch(X, min_bands=min_bands), single


class CoarSR(BaseEstimator):
    """Band-by-band coarse super-resolution network.

    Parameters mirror the network configuration and the training schedule;
    ``learning_rate`` is halved every ``lr_step`` epochs.
    """

    def __init__(
        self,
        scale=4,
        channels=64,
        intra_stages=1,
        global_residual=True,
        epochs=30,
        batch_size=64,
        learning_rate=1e-4,
        lr_step=30,
        seed=0,
    ):
        self.scale = scale
        self.channels = channels
        self.intra_stages = intra_stages
        self.global_residual = global_residual
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_step = lr_step
        self.seed = seed

    def _config(self):
        return coarse_net.CoarseConfig(
            channels=self.channels,
            intra_stages=self.intra_stages,
            scale=check_scale(self.scale, power_of_two=True),
            global_residual=bool(self.global_residual),
        )

    def _init_model(self):
        # separate streams for initialisation and shuffling
        init_seed, shuffle_seed = np.random.SeedSequence(self.seed).spawn(2)
        self.model_ = coarse_net.CoarseModel(self._config(), seed=np.random.default_rng(init_seed))
        self._shuffle_seed = shuffle_seed

    def fit(self, X, y, on_epoch=None):
        lr, _ = _as_batch(X, min_bands=5)
        hr, _ = _as_batch(y, min_bands=5)
        if len(lr) != len(hr):
            raise ValueError(f"X has {len(lr)} cubes but y has {len(hr)}")
        self._init_model()
        self.loss_history_ = coarse_net.train(
            self.model_,
            list(zip(lr, hr)),
            self.epochs,
            batch=self.batch_size,
            seed=np.random.default_rng(self._shuffle_seed),
            base_lr=self.learning_rate,
            lr_step=self.lr_step,
            on_epoch=on_epoch,
        )
        self.n_bands_in_ = lr.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("CoarSR instance is not fitted yet; call fit or load a checkpoint")

    def predict(self, X, scale=None):
        """SR cubes at ``scale`` (default: the trained scale), clamped to [0, 1]."""
        self._check_fitted()
        batch, single = _as_batch(X, min_bands=5)
        out = coarse_net.sr_cube(self.model_, batch, scale)
        return out[0] if single else out

    def predict_scales(self, X, scales):
        """``{scale: cubes}`` from one recurrent pass."""
        self._check_fitted()
        batch, single = _as_batch(X, min_bands=5)
        out = coarse_net.sr_cube_multi(self.model_, batch, scales)
        return {s: (v[0] if single else v) for s, v in out.items()}

    def upscale(self, scale, cube):
        """Coarse-upscaler protocol used by :func:`hsisr.backprojection.refine`."""
        return self.predict(cube, scale=scale)

    def score(self, X, y):
        """Mean PSNR (dB) of the predictions against ``y``."""
        pred = self.predict(X)
        batch, _ = _as_batch(y)
        pred = pred.reshape(batch.shape)
        return float(np.mean([psnr(t, p) for t, p in zip(batch, pred)]))

    def save(self, path):
        self._check_fitted()
        self.model_.save(path)

    @classmethod
    def load(cls, path):
        model = coarse_net.CoarseModel.load(path)
        cfg = model.config
        est = cls(scale=cfg.scale, channels=cfg.channels, intra_stages=cfg.intra_stages, global_residual=cfg.global_residual)
        est.model_ = model
        return est


class BackProjectionRefiner(TransformerMixin, BaseEstimator):
    """Stateless refiner: ``transform(U, V)`` improves ``U`` using the half-scale estimate ``V``."""

    def __init__(self, sam_mode="pixel", clip=True):
        self.sam_mode = sam_mode
        self.clip = clip

    def fit(self, X=None, y=None):
        if self.sam_mode not in SAM_MODES:
            raise ValueError(f"sam_mode must be one of {SAM_MODES}, got {self.sam_mode!r}")
        return self

    def transform(self, U, V):
        U_b, single = _as_batch(U)
        V_b, _ = _as_batch(V)
        if len(U_b) != len(V_b):
            raise ValueError(f"U has {len(U_b)} cubes but V has {len(V_b)}")
        out = np.stack([refine_from_cubes(u, v, self.sam_mode, self.clip) for u, v in zip(U_b, V_b)])
        return out[0] if single else out

    def fit_transform(self, U, V):
        return self.fit().transform(U, V)


class DualSR(BaseEstimator):
    """Coarse network followed by back-projection refinement.

    ``coarse`` is a :class:`CoarSR` (cloned on fit); the refinement is
    training-free and needs the coarse scale to be even.
    """

    def __init__(self, coarse=None, sam_mode="pixel"):
        self.coarse = coarse
        self.sam_mode = sam_mode

    def fit(self, X, y, on_epoch=None):
        from sklearn.base import clone

        base = self.coarse if self.coarse is not None else CoarSR()
        check_scale(base.scale, even=True)
        self.coarse_ = clone(base).fit(X, y, on_epoch=on_epoch)
        self.refiner_ = BackProjectionRefiner(self.sam_mode).fit()
        return self

    @classmethod
    def from_coarse(cls, coarse, sam_mode="pixel"):
        """Wrap an already fitted :class:`CoarSR`."""
        coarse._check_fitted()
        check_scale(coarse.scale, even=True)
        est = cls(coarse=coarse, sam_mode=sam_mode)
        est.coarse_ = coarse
        est.refiner_ = BackProjectionRefiner(sam_mode).fit()
        return est

    def predict(self, X, return_coarse=False):
        if not hasattr(self, "coarse_"):
            raise NotFittedError("DualSR instance is not fitted yet")
        s = self.coarse_.scale
        taps = self.coarse_.predict_scales(X, (s, s // 2))
        fine = self.refiner_.transform(taps[s], taps[s // 2])
        return (fine, taps[s]) if return_coarse else fine

    def score(self, X, y):
        pred = self.predict(X)
        batch, _ = _as_batch(y)
        pred = pred.reshape(batch.shape)
        return float(np.mean([psnr(t, p) for t, p in zip(batch, pred)]))
