"""Deliberately naive reference implementations used only by the tests."""

import math

import numpy as np


def shared_edge_pairs(faces):
    """All face pairs sharing two vertices, by O(F^2) scan."""
    faces = [set(map(int, f)) for f in faces]
    out = set()
    for i in range(len(faces)):
        for j in range(i + 1, len(faces)):
            if len(faces[i] & faces[j]) == 2:
                out.add((i, j))
    return out


def fps(points, m, start):
    pts = [tuple(map(float, p)) for p in points]
    sel = [start]
    while len(sel) < m:
        best, best_d = None, -1.0
        for i, p in enumerate(pts):
            d = min(math.dist(p, pts[s]) for s in sel)
            if d > best_d:
                best, best_d = i, d
        sel.append(best)
    return sel


def knn(query, ref, k):
    out = []
    for q in query:
        order = sorted(range(len(ref)), key=lambda j: (float(np.sum((q - ref[j]) ** 2)), j))
        out.append(order[:k])
    return np.array(out)


def interpolate(coarse_feats, fine_pos, coarse_pos, k, eps=1e-8):
    out = np.zeros((len(fine_pos), coarse_feats.shape[1]))
    for i, y in enumerate(fine_pos):
        nb = knn([y], coarse_pos, k)[0]
        d = [math.dist(y, coarse_pos[j]) for j in nb]
        if min(d) < 1e-12:
            out[i] = coarse_feats[nb[int(np.argmin(d))]]
            continue
        w = [1.0 / (di * di + eps) for di in d]
        out[i] = sum(wi * coarse_feats[j] for wi, j in zip(w, nb)) / sum(w)
    return out


def dense_attention(x, p, adj_dense, heads):
    """Dense masked attention: non-support logits set to -inf."""
    n = len(x)
    hd = p["Wq"].shape[1]
    d = hd // heads
    mask = adj_dense.astype(bool) | np.eye(n, dtype=bool)
    outs = []
    for h in range(heads):
        sl = slice(h * d, (h + 1) * d)
        q, k, v = x @ p["Wq"][:, sl], x @ p["Wk"][:, sl], x @ p["Wv"][:, sl]
        logits = q @ k.T / math.sqrt(d)
        logits = np.where(mask, logits, -np.inf)
        logits -= logits.max(axis=1, keepdims=True)
        a = np.exp(logits)
        a /= a.sum(axis=1, keepdims=True)
        outs.append(a @ v)
    return np.concatenate(outs, axis=1) @ p["Wo"] + p["bo"]


def coarsen_dense(adj_dense, parent, m):
    n = len(parent)
    C = np.zeros((n, m), dtype=np.int64)
    for i, c in enumerate(parent):
        C[i, c] = 1
    out = (C.T @ adj_dense.astype(np.int64) @ C) > 0
    np.fill_diagonal(out, False)
    return out


def max_pool(x, parent, m):
    out = np.full((m, x.shape[1]), -np.inf)
    for i, c in enumerate(parent):
        if c >= 0:
            for ch in range(x.shape[1]):
                out[c, ch] = max(out[c, ch], x[i, ch])
    return out


def adain(x, ys, yb, eps=1e-8):
    n, c = x.shape
    out = np.empty_like(x)
    for j in range(c):
        col = [float(v) for v in x[:, j]]
        mu = sum(col) / n
        var = sum((v - mu) ** 2 for v in col) / n
        sd = math.sqrt(var + eps)
        out[:, j] = [ys[j] * (v - mu) / sd + yb[j] for v in col]
    return out


def greedy_matching(n, edges, scores):
    order = sorted(range(len(edges)), key=lambda e: (-scores[e], edges[e][0], edges[e][1]))
    used, match = set(), []
    for e in order:
        i, j = edges[e]
        if i not in used and j not in used:
            used |= {i, j}
            match.append((i, j))
    return match
