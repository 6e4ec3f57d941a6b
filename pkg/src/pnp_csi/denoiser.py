"""Convolutional denoiser shared by all reconstruction tasks.

A complex (rows, cols) CSI matrix enters as two real channels plus a constant
noise-level channel valued sqrt(sigma2).  The stack is pixel-unshuffled by 2,
passed through a first 3x3 convolution, eight 48-kernel mid convolutions with
ReLUs, a last convolution producing 2*r^2 channels, and pixel-shuffled back to
a two-channel (rows, cols) output read as real/imag.  No normalization layers.

Also provides the training loop (Adam, plateau-halved learning rate, best
validation weights kept) and a soft-threshold fallback denoiser that needs no
training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fileformats import load_tensors, save_tensors
from .nn import Adam, Conv2d, PixelShuffle, PixelUnshuffle, ReLU, Sequential

_ARCH_KEY = "meta.arch"


@dataclass(frozen=True)
class DenoiserSpec:
    shuffle_r: int = 2
    width: int = 48
    n_mid: int = 8
    residual: bool = False


class CnnDenoiser:
    """Fixed-topology CNN over unshuffled CSI channels.

    With spec.residual the convolutional stack predicts the noise and the
    denoised output is input minus prediction; the parameter count and layer
    shapes are identical either way.  Residual prediction starts training at
    identity quality, which a plain stack of this depth takes many epochs to
    reach, so small training budgets favor it.
    """

    def __init__(self, spec: DenoiserSpec = DenoiserSpec(), rng=None,
                 dtype=np.float32):
        if rng is None:
            rng = np.random.default_rng()
        r = spec.shuffle_r
        layers = [PixelUnshuffle(r),
                  Conv2d(3 * r * r, spec.width, rng=rng, dtype=dtype),
                  ReLU()]
        for _ in range(spec.n_mid):
            layers += [Conv2d(spec.width, spec.width, rng=rng, dtype=dtype),
                       ReLU()]
        layers += [Conv2d(spec.width, 2 * r * r, rng=rng, dtype=dtype),
                   PixelShuffle(r)]
        if spec.residual:
            # start as the exact identity map (predicted noise 0) so training
            # never has to undo the random output head first
            layers[-2].w[:] = 0.0
        self.spec = spec
        self.net = Sequential(layers)

    def param_count(self) -> int:
        return self.net.param_count()

    def _to_channels(self, hbar, sigma2):
        hbar = np.asarray(hbar)
        s2 = np.asarray(sigma2, dtype=float)
        if hbar.ndim == 2:
            hbar = hbar[None]
            s2 = s2.reshape(1)
        if np.any(s2 < 0):
            raise ValueError("sigma2 must be >= 0")
        n, rows, cols = hbar.shape
        x = np.empty((n, 3, rows, cols), dtype=np.float32)
        x[:, 0] = hbar.real
        x[:, 1] = hbar.imag
        x[:, 2] = np.sqrt(s2)[:, None, None]
        return x

    def denoise_batch(self, hbars, sigma2s):
        """Denoise (n, rows, cols) complex inputs at per-sample noise levels."""
        x = self._to_channels(hbars, sigma2s)
        r = self.spec.shuffle_r
        if x.shape[2] % r or x.shape[3] % r:
            raise ValueError(f"input dims {x.shape[2:]} not divisible by "
                             f"shuffle factor {r}")
        y = self.net.forward(x)
        out = (y[:, 0] + 1j * y[:, 1]).astype(np.complex128)
        if self.spec.residual:
            return np.asarray(hbars).reshape(out.shape) - out
        return out

    def denoise(self, hbar, sigma2):
        """Denoise one complex (rows, cols) matrix at noise variance sigma2."""
        return self.denoise_batch(hbar, sigma2)[0]

    def to_tensors(self):
        spec = self.spec
        out = {_ARCH_KEY: np.array(
            [spec.shuffle_r, spec.width, spec.n_mid, int(spec.residual)],
            dtype=np.float32)}
        for name, p, _ in self.net.param_triples():
            out[name] = p
        return out

    @classmethod
    def from_tensors(cls, tensors):
        if _ARCH_KEY not in tensors:
            raise ValueError("missing architecture descriptor tensor")
        arch = [int(v) for v in tensors[_ARCH_KEY]]
        if len(arch) == 3:
            arch.append(0)
        r, width, n_mid, residual = arch
        den = cls(DenoiserSpec(shuffle_r=r, width=width, n_mid=n_mid,
                               residual=bool(residual)),
                  rng=np.random.default_rng(0))
        for name, p, _ in den.net.param_triples():
            if name not in tensors:
                raise ValueError(f"missing tensor {name}")
            src = tensors[name]
            if src.shape != p.shape:
                raise ValueError(f"tensor {name} has shape {src.shape}, "
                                 f"expected {p.shape}")
            p[:] = src
        return den

    def save(self, path):
        save_tensors(path, self.to_tensors())

    @classmethod
    def load(cls, path):
        return cls.from_tensors(load_tensors(path))


def shrink_denoise(hbar, sigma2, kappa=1.5):
    """Complex soft threshold at t = kappa*sqrt(sigma2), entrywise.

    Returns y * max(0, 1 - t/|y|): magnitudes shrink by t, phases are kept,
    entries below the threshold go to zero.  sigma2 = 0 is the identity.
    """
    hbar = np.asarray(hbar)
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    t = kappa * np.sqrt(sigma2)
    mag = np.abs(hbar)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag > 0, np.maximum(0.0, 1.0 - t / mag), 0.0)
    return hbar * scale


class PlateauLr:
    """Halve the learning rate after `patience` epochs without a new best
    validation loss, never below `floor`."""

    def __init__(self, lr, patience=20, floor=1e-7, factor=0.5):
        self.lr = lr
        self.patience = patience
        self.floor = floor
        self.factor = factor
        self.best = np.inf
        self.stale = 0

    def update(self, val_loss):
        if val_loss < self.best:
            self.best = val_loss
            self.stale = 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.lr = max(self.floor, self.lr * self.factor)
                self.stale = 0
        return self.lr


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 128
    lr: float = 1e-4
    lr_floor: float = 1e-7
    lr_patience: int = 20
    seed: int = 0


def _normalized_loss_and_grad(pred, target, denom):
    """mean_j ||target_j - pred_j||_F^2 / denom_j over the two real channels,
    plus its gradient with respect to pred.  denom_j is the squared Frobenius
    norm of the clean sample, so the value is the per-sample normalized error
    whether the net predicts the clean image or the noise."""
    diff = pred - target
    num = np.sum(diff * diff, axis=(1, 2, 3))
    loss = float(np.mean(num / denom))
    grad = (2.0 / pred.shape[0]) * diff / denom[:, None, None, None]
    return loss, grad.astype(pred.dtype, copy=False)


def _targets(split, idx, residual):
    clean = split.hbar_clean[idx]
    ref = split.hbar_noisy[idx] - clean if residual else clean
    t = np.empty((idx.size, 2) + ref.shape[1:], dtype=np.float32)
    t[:, 0] = ref.real
    t[:, 1] = ref.imag
    denom = np.sum((clean * clean.conj()).real, axis=(1, 2))
    return t, denom.astype(np.float32)


def train_denoiser(train, val, cfg: TrainConfig, spec=None, init=None):
    """Train on (noisy, sigma2) -> clean pairs from the angular-delay split.

    Returns (denoiser, history); the returned weights are the best-validation
    snapshot, and history carries per-epoch train/val losses and the learning
    rate.  Deterministic for a fixed cfg.seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xD0)))
    if init is not None:
        den = init
    else:
        den = CnnDenoiser(spec or DenoiserSpec(), rng=rng)
    triples = den.net.param_triples()
    opt = Adam([p for _, p, _ in triples], lr=cfg.lr)
    sched = PlateauLr(cfg.lr, patience=cfg.lr_patience, floor=cfg.lr_floor)

    n = len(train.hbar_clean)
    n_val = len(val.hbar_clean)
    history = {"train_loss": [], "val_loss": [], "lr": []}
    best_val = np.inf
    best_params = [p.copy() for _, p, _ in triples]

    residual = den.spec.residual

    def run_val():
        total = 0.0
        for s in range(0, n_val, cfg.batch_size):
            idx = np.arange(s, min(s + cfg.batch_size, n_val))
            x = den._to_channels(val.hbar_noisy[idx], val.sigma2[idx])
            target, denom = _targets(val, idx, residual)
            loss, _ = _normalized_loss_and_grad(den.net.forward(x),
                                                target, denom)
            total += loss * idx.size
        return total / n_val

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            x = den._to_channels(train.hbar_noisy[idx], train.sigma2[idx])
            pred = den.net.forward(x)
            target, denom = _targets(train, idx, residual)
            loss, grad = _normalized_loss_and_grad(pred, target, denom)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch}, "
                    f"batch {s // cfg.batch_size}")
            den.net.backward(grad)
            opt.step([g for _, _, g in den.net.param_triples()])
            epoch_loss += loss * idx.size
        val_loss = run_val()
        if val_loss < best_val:
            best_val = val_loss
            best_params = [p.copy() for _, p, _ in triples]
        opt.lr = sched.update(val_loss)
        history["train_loss"].append(epoch_loss / n)
        history["val_loss"].append(val_loss)
        history["lr"].append(opt.lr)

    for (_, p, _), snap in zip(triples, best_params):
        p[:] = snap
    return den, history
