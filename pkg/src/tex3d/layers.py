"""Forward/backward pairs for the generator's layers.

Each ``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
takes the output cotangent and the cache and returns gradients for every
input and parameter. Everything is float64 numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

LRELU_SLOPE = 0.2
ADAIN_EPS = 1e-8
DEMOD_EPS = 1e-8


class NumericError(FloatingPointError):
    """Non-finite values appeared in a forward or backward pass."""


def check_finite(x, where: str):
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {where}")
    return x


def lrelu(x, slope=LRELU_SLOPE):
    return np.where(x >= 0, x, slope * x)


def lrelu_backward(dy, x, slope=LRELU_SLOPE):
    return np.where(x >= 0, dy, slope * dy)


# ------------------------------------------------------------------ mapping


def mapping_forward(z, layers):
    """Normalize ``z`` to unit norm, then ``h <- lrelu(h @ W + b)`` per layer.

    ``layers`` is a sequence of ``(W, b)`` pairs.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape[0] != layers[0][0].shape[0]:
        raise ValueError(f"z has dim {z.shape[0]}, mapping expects {layers[0][0].shape[0]}")
    nz = np.linalg.norm(z)
    if nz == 0:
        raise ValueError("cannot normalize a zero latent vector")
    h = z / nz
    pre = []
    for W, b in layers:
        a = h @ W + b
        pre.append((h, a))
        h = lrelu(a)
    return h, (z, nz, pre)


def mapping_backward(dw, cache, layers):
    z, nz, pre = cache
    grads = [None] * len(layers)
    dh = dw
    for i in range(len(layers) - 1, -1, -1):
        h_in, a = pre[i]
        da = lrelu_backward(dh, a)
        grads[i] = (np.outer(h_in, da), da)
        dh = layers[i][0] @ da
    zhat = z / nz
    dz = (dh - zhat * (zhat @ dh)) / nz
    return dz, grads


# -------------------------------------------------------------------- style


def affine_style(w, W, offset: float = 0.0):
    """``w @ W + offset``; scales use ``offset=1`` so zero weights give identity."""
    return w @ W + offset


def affine_style_backward(dy, w, W):
    return W @ dy, np.outer(w, dy)


def adain_forward(x, y_s, y_b, eps=ADAIN_EPS):
    """Standardize each channel over the nodes, then scale by ``y_s`` and shift by ``y_b``."""
    mu = x.mean(axis=0)
    xc = x - mu
    var = (xc * xc).mean(axis=0)
    sigma = np.sqrt(var + eps)
    xhat = xc / sigma
    return y_s * xhat + y_b, (xhat, sigma, y_s)


def adain_backward(dout, cache):
    xhat, sigma, y_s = cache
    dys = (dout * xhat).sum(axis=0)
    dyb = dout.sum(axis=0)
    dxh = dout * y_s
    dx = (dxh - dxh.mean(axis=0) - xhat * (dxh * xhat).mean(axis=0)) / sigma
    return dx, dys, dyb


# ---------------------------------------------------------------- attention


@dataclass(frozen=True, eq=False)
class AttentionSupport:
    """Per-node attention support ``{v} | N(v)`` as sorted (dst, src) pairs."""

    n: int
    dst: np.ndarray
    src: np.ndarray
    starts: np.ndarray      # segment starts in dst order
    by_src: np.ndarray      # permutation grouping pairs by src
    src_starts: np.ndarray  # segment starts in by_src order


def attention_support(adjacency) -> AttentionSupport:
    a = sparse.csr_matrix(adjacency, dtype=np.int8)
    n = a.shape[0]
    a = (a + sparse.identity(n, dtype=np.int8, format="csr")).tocsr()
    a.data[:] = 1
    a.sort_indices()
    counts = np.diff(a.indptr)
    dst = np.repeat(np.arange(n), counts)
    src = a.indices.astype(np.int64)
    by_src = np.lexsort((dst, src))
    src_counts = np.bincount(src, minlength=n)
    return AttentionSupport(
        n=n,
        dst=dst,
        src=src,
        starts=a.indptr[:-1].astype(np.int64),
        by_src=by_src,
        src_starts=np.concatenate([[0], np.cumsum(src_counts)[:-1]]).astype(np.int64),
    )


def _scatter_src(vals, sup: AttentionSupport):
    return np.add.reduceat(vals[sup.by_src], sup.src_starts, axis=0)


def sparse_attention(q, k, v, sup: AttentionSupport):
    """Multi-head attention with each node's softmax restricted to its support.

    ``q``, ``k``, ``v`` are (N, H, d). Returns (N, H, d) and a cache.
    """
    d = q.shape[-1]
    scale = 1.0 / np.sqrt(d)
    logits = np.einsum("ehd,ehd->eh", q[sup.dst], k[sup.src]) * scale
    m = np.maximum.reduceat(logits, sup.starts, axis=0)
    ex = np.exp(logits - m[sup.dst])
    alpha = ex / np.add.reduceat(ex, sup.starts, axis=0)[sup.dst]
    out = np.add.reduceat(alpha[..., None] * v[sup.src], sup.starts, axis=0)
    return out, (q, k, v, alpha, scale)


def sparse_attention_weights(q, k, sup: AttentionSupport):
    """Attention weights per support pair, shape (E, H)."""
    _, cache = sparse_attention(q, k, np.zeros_like(q), sup)
    return cache[3]


def sparse_attention_backward(dout, cache, sup: AttentionSupport):
    q, k, v, alpha, scale = cache
    do_e = dout[sup.dst]
    dalpha = np.einsum("ehd,ehd->eh", do_e, v[sup.src])
    dv = _scatter_src(alpha[..., None] * do_e, sup)
    dlog = alpha * (dalpha - np.add.reduceat(alpha * dalpha, sup.starts, axis=0)[sup.dst])
    dlog *= scale
    dq = np.add.reduceat(dlog[..., None] * k[sup.src], sup.starts, axis=0)
    dk = _scatter_src(dlog[..., None] * q[sup.dst], sup)
    return dq, dk, dv


def attention_forward(x, p, sup: AttentionSupport, heads: int):
    """Project to Q/K/V, attend over the support, project the concatenated heads.

    ``p`` holds ``Wq``, ``Wk``, ``Wv`` (D, H*d), ``Wo`` (H*d, C) and ``bo`` (C,).
    """
    n = x.shape[0]
    hd = p["Wq"].shape[1]
    d = hd // heads
    q = (x @ p["Wq"]).reshape(n, heads, d)
    k = (x @ p["Wk"]).reshape(n, heads, d)
    v = (x @ p["Wv"]).reshape(n, heads, d)
    o, acache = sparse_attention(q, k, v, sup)
    o = o.reshape(n, hd)
    return o @ p["Wo"] + p["bo"], (x, o, acache)


def attention_backward(dy, cache, p, sup: AttentionSupport):
    x, o, acache = cache
    n = x.shape[0]
    g = {"Wo": o.T @ dy, "bo": dy.sum(axis=0)}
    do = (dy @ p["Wo"].T).reshape(acache[0].shape)
    dq, dk, dv = sparse_attention_backward(do, acache, sup)
    dq, dk, dv = dq.reshape(n, -1), dk.reshape(n, -1), dv.reshape(n, -1)
    g["Wq"] = x.T @ dq
    g["Wk"] = x.T @ dk
    g["Wv"] = x.T @ dv
    dx = dq @ p["Wq"].T + dk @ p["Wk"].T + dv @ p["Wv"].T
    return dx, g


# ---------------------------------------------------- modulation / toRGB


def modulate(W, s):
    """Scale row ``i`` (input channel) of ``W`` by ``s[i]``."""
    return s[:, None] * W


def modulate_backward(dWm, W, s):
    return s[:, None] * dWm, (dWm * W).sum(axis=1)


def demodulate(Wm, eps=DEMOD_EPS):
    """Divide each output column by its Euclidean norm plus ``eps``."""
    nrm = np.sqrt((Wm * Wm).sum(axis=0))
    return Wm / (nrm + eps), nrm


def demodulate_backward(dWd, Wm, nrm, eps=DEMOD_EPS):
    den = nrm + eps
    inner = (dWd * Wm).sum(axis=0)
    safe = np.where(nrm > 0, nrm, 1.0)
    corr = np.where(nrm > 0, inner / (den * den * safe), 0.0)
    return dWd / den - Wm * corr


def torgb_forward(x, w, p):
    """Modulated/demodulated linear map to RGB.

    ``p`` holds ``W`` (C, 3), ``Ws`` (W_dim, C) and ``b`` (3,).
    """
    s = affine_style(w, p["Ws"], 1.0)
    Wm = modulate(p["W"], s)
    Wd, nrm = demodulate(Wm)
    return x @ Wd + p["b"], (x, w, s, Wm, Wd, nrm)


def torgb_backward(dy, cache, p):
    x, w, s, Wm, Wd, nrm = cache
    dx = dy @ Wd.T
    dWd = x.T @ dy
    dWm = demodulate_backward(dWd, Wm, nrm)
    dW, ds = modulate_backward(dWm, p["W"], s)
    dw, dWs = affine_style_backward(ds, w, p["Ws"])
    return dx, dw, {"W": dW, "Ws": dWs, "b": dy.sum(axis=0)}


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))
