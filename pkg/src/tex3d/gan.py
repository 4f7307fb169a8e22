"""Patch discriminator, logistic GAN losses and Adam."""

from __future__ import annotations

import math

import numpy as np

from .layers import NumericError, lrelu, lrelu_backward

DISC_LAYERS = 3


def disc_patches(size: int) -> list[int]:
    """Patch size (== stride) per layer: 4, or the whole remaining extent when smaller."""
    out, sp = [], size
    for _ in range(DISC_LAYERS):
        p = min(4, sp)
        if sp % p:
            raise ValueError(f"image size {size} is not compatible with stride-4 patches")
        out.append(p)
        sp //= p
    if sp != 1:
        raise ValueError(f"image size {size} too large for {DISC_LAYERS} stride-4 layers")
    return out


def init_discriminator(size: int, channels=(32, 64, 64), seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    wts = {}
    cin = 3
    for i, (p, c) in enumerate(zip(disc_patches(size), channels)):
        fan = p * p * cin
        wts[f"disc.{i}.W"] = rng.standard_normal((fan, c)) * math.sqrt(2.0 / fan)
        wts[f"disc.{i}.b"] = np.zeros(c)
        cin = c
    wts["disc.fc.W"] = rng.standard_normal((cin, 1)) / math.sqrt(cin)
    wts["disc.fc.b"] = np.zeros(1)
    return wts


def _to_patches(x, p):
    B, H, W, C = x.shape
    x = x.reshape(B, H // p, p, W // p, p, C).transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(B * (H // p) * (W // p), p * p * C)


def _from_patches(dp, shape, p):
    B, H, W, C = shape
    d = dp.reshape(B, H // p, W // p, p, p, C).transpose(0, 1, 3, 2, 4, 5)
    return d.reshape(B, H, W, C)


def discriminator_forward(images, wts):
    """Logits (B,) for images (B, S, S, 3) in [0, 1]."""
    x = 2.0 * np.asarray(images, dtype=np.float64) - 1.0
    if x.ndim == 3:
        x = x[None]
    B, S = x.shape[0], x.shape[1]
    cache = []
    for i, p in enumerate(disc_patches(S)):
        W, b = wts[f"disc.{i}.W"], wts[f"disc.{i}.b"]
        cols = _to_patches(x, p)
        a = cols @ W + b
        cache.append((x.shape, p, cols, a))
        sp = x.shape[1] // p
        x = lrelu(a).reshape(B, sp, sp, W.shape[1])
    flat = x.reshape(B, -1)
    logits = (flat @ wts["disc.fc.W"] + wts["disc.fc.b"])[:, 0]
    return logits, (cache, flat)


def discriminator_backward(dlogits, cache, wts):
    """Returns ``(dimages, grads)`` for the cotangent on the logits."""
    layers, flat = cache
    dlogits = np.asarray(dlogits, dtype=np.float64).reshape(-1, 1)
    g = {"disc.fc.W": flat.T @ dlogits, "disc.fc.b": dlogits.sum(axis=0)}
    dx = dlogits @ wts["disc.fc.W"].T
    for i in range(len(layers) - 1, -1, -1):
        shape, p, cols, a = layers[i]
        W = wts[f"disc.{i}.W"]
        da = lrelu_backward(dx.reshape(a.shape), a)
        g[f"disc.{i}.W"] = cols.T @ da
        g[f"disc.{i}.b"] = da.sum(axis=0)
        dx = _from_patches(da @ W.T, shape, p)
    return 2.0 * dx, g


def softplus(x):
    return np.logaddexp(0.0, x)


def gan_losses(real_logits, fake_logits) -> tuple[float, float]:
    """Logistic GAN losses.

    ``d_loss = mean softplus(-real) + mean softplus(fake)`` (the minimax value
    written with logits) and the non-saturating ``g_loss = mean softplus(-fake)``.
    """
    r = np.asarray(real_logits, dtype=np.float64)
    f = np.asarray(fake_logits, dtype=np.float64)
    if r.size == 0 or f.size == 0:
        raise ValueError("logit lists must be nonempty")
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(f))):
        raise NumericError("non-finite discriminator logits")
    return float(softplus(-r).mean() + softplus(f).mean()), float(softplus(-f).mean())


def _sig(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def d_loss_grads(real_logits, fake_logits):
    r = np.asarray(real_logits, dtype=np.float64)
    f = np.asarray(fake_logits, dtype=np.float64)
    return -_sig(-r) / r.size, _sig(f) / f.size


def g_loss_grad(fake_logits):
    f = np.asarray(fake_logits, dtype=np.float64)
    return -_sig(-f) / f.size


class Adam:
    """Adam over a dict of arrays, updated in place in sorted key order."""

    def __init__(self, params: dict, lr=2e-4, beta1=0.0, beta2=0.99, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k in sorted(grads):
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
