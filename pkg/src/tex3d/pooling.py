"""Node-drop graph pooling: score, select, coarsen.

Four strategies share one level representation (:class:`PoolingLevel`):

* ``fps``   farthest point sampling, max pool over nearest-selected cells,
            inverse-distance-squared kNN unpooling
* ``voxel`` regular-grid cells, max pool, copy-back unpooling
* ``edge``  greedy edge contraction by a linear edge score
* ``topk``  learnable projection score, sigmoid gate, scatter-back unpooling

Every level stores a fine->coarse ``parent`` map (``-1`` marks a node dropped
by top-k) that drives both max pooling and adjacency coarsening, plus a fixed
``(N, k)`` interpolation table for unpooling.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse

METHODS = ("fps", "voxel", "edge", "topk")
INTERP_EPS = 1e-8
COINCIDENT = 1e-12
HIERARCHY_VERSION = 1


@dataclass(frozen=True, eq=False)
class PoolingLevel:
    """One coarsening step from ``n_fine`` to ``n_coarse`` nodes."""

    method: str
    selected: np.ndarray          # (M,) representative fine index per coarse node
    parent: np.ndarray            # (N,) coarse id per fine node, -1 if dropped
    unpool_index: np.ndarray      # (N, k) coarse ids
    unpool_weight: np.ndarray     # (N, k) interpolation weights (rows sum to 1, or 0 if dropped)
    coarse_positions: np.ndarray  # (M, 3)
    coarse_adjacency: sparse.csr_matrix

    @property
    def n_fine(self) -> int:
        return len(self.parent)

    @property
    def n_coarse(self) -> int:
        return len(self.selected)

    @property
    def dropped(self) -> np.ndarray:
        return np.flatnonzero(self.parent < 0)

    def check(self) -> None:
        """Raise ``AssertionError`` if a structural invariant is broken."""
        assert len(np.unique(self.selected)) == len(self.selected)
        assert ((self.selected >= 0) & (self.selected < self.n_fine)).all()
        assert self.parent.max() == self.n_coarse - 1
        if self.method != "topk":
            assert (self.parent >= 0).all(), "orphan fine node"
        covered = np.zeros(self.n_coarse, dtype=bool)
        covered[self.parent[self.parent >= 0]] = True
        assert covered.all(), "empty source set"
        a = self.coarse_adjacency
        assert (a != a.T).nnz == 0
        assert a.diagonal().sum() == 0


@dataclass(frozen=True, eq=False)
class PoolingHierarchy:
    levels: list[PoolingLevel]
    level_sizes: list[int]
    method: str
    positions: list[np.ndarray]
    adjacencies: list[sparse.csr_matrix]

    @property
    def depth(self) -> int:
        return len(self.level_sizes)


# ---------------------------------------------------------------- selection


def fps_select(positions, m: int, seed=None, start: int | None = None) -> np.ndarray:
    """Farthest point sampling.

    The first index is ``start`` if given, otherwise drawn uniformly with
    ``numpy.random.default_rng(seed)``. Ties go to the lowest index.
    """
    p = np.asarray(positions, dtype=np.float64)
    n = len(p)
    if not 1 <= m <= n:
        raise ValueError(f"cannot select {m} of {n} points")
    if start is None:
        start = int(np.random.default_rng(seed).integers(n))
    sel = np.empty(m, dtype=np.int64)
    sel[0] = start
    dist = np.sum((p - p[start]) ** 2, axis=1)
    for i in range(1, m):
        nxt = int(np.argmax(dist))  # first occurrence == lowest index
        sel[i] = nxt
        dist = np.minimum(dist, np.sum((p - p[nxt]) ** 2, axis=1))
    return sel


def knn(query, ref, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k nearest ``ref`` rows for each ``query`` row.

    Returns ``(indices, sq_distances)``, both (M, k), ascending by distance
    with ties broken by the lower reference index.
    """
    q = np.asarray(query, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    if not 1 <= k <= len(r):
        raise ValueError(f"k={k} must be in [1, {len(r)}]")
    d2 = np.sum((q[:, None, :] - r[None, :, :]) ** 2, axis=2)
    idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return idx, np.take_along_axis(d2, idx, axis=1)


def interpolation_weights(d2: np.ndarray) -> np.ndarray:
    """Normalized inverse-squared-distance weights, one-hot on coincident points."""
    w = 1.0 / (d2 + INTERP_EPS)
    w /= w.sum(axis=1, keepdims=True)
    hit = np.sqrt(d2) < COINCIDENT
    rows = hit.any(axis=1)
    if rows.any():
        first = np.argmax(hit[rows], axis=1)
        w[rows] = 0.0
        w[np.flatnonzero(rows), first] = 1.0
    return w


def unpool_interpolate(coarse_features, fine_positions, coarse_positions, k: int = 3) -> np.ndarray:
    """Inverse-distance-squared interpolation from the k nearest coarse nodes."""
    idx, d2 = knn(fine_positions, coarse_positions, k)
    w = interpolation_weights(d2)
    order = np.argsort(idx, axis=1, kind="stable")
    idx = np.take_along_axis(idx, order, axis=1)
    w = np.take_along_axis(w, order, axis=1)
    return apply_unpool(np.asarray(coarse_features, dtype=np.float64), idx, w)


def apply_unpool(coarse, index, weight) -> np.ndarray:
    # columns summed in stored order (ascending coarse index)
    out = weight[:, 0, None] * coarse[index[:, 0]]
    for j in range(1, index.shape[1]):
        out = out + weight[:, j, None] * coarse[index[:, j]]
    return out


def apply_unpool_backward(dfine, index, weight, n_coarse: int) -> np.ndarray:
    dc = np.zeros((n_coarse, dfine.shape[1]))
    for j in range(index.shape[1]):
        np.add.at(dc, index[:, j], weight[:, j, None] * dfine)
    return dc


# ----------------------------------------------------------------- pooling


def pool_max(fine_features, parent, n_coarse: int | None = None):
    """Per-channel max over each coarse node's source set.

    ``parent[i]`` is the coarse id of fine node ``i`` (negative = not pooled).
    Returns ``(coarse, argmax)`` where ``argmax`` holds the winning fine index
    per coarse entry (lowest index on ties), for the backward pass.
    """
    x = np.asarray(fine_features, dtype=np.float64)
    parent = np.asarray(parent)
    if n_coarse is None:
        n_coarse = int(parent.max()) + 1
    live = np.flatnonzero(parent >= 0)
    counts = np.bincount(parent[live], minlength=n_coarse)
    if (counts == 0).any():
        raise ValueError(f"coarse node {int(np.argmin(counts))} has an empty source set")
    order = live[np.lexsort((live, parent[live]))]
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    xs = x[order]
    coarse = np.maximum.reduceat(xs, starts, axis=0)
    seg = np.repeat(np.arange(n_coarse), counts)
    cand = np.where(xs == coarse[seg], order[:, None], np.iinfo(np.int64).max)
    argmax = np.minimum.reduceat(cand, starts, axis=0)
    return coarse, argmax


def pool_max_backward(dcoarse, argmax, n_fine: int) -> np.ndarray:
    dx = np.zeros((n_fine, dcoarse.shape[1]))
    cols = np.broadcast_to(np.arange(dcoarse.shape[1]), argmax.shape)
    np.add.at(dx, (argmax, cols), dcoarse)
    return dx


def edge_score(n_i, n_j, W, b) -> float:
    """Linear contraction score on concatenated node features."""
    return float(np.concatenate([np.ravel(n_i), np.ravel(n_j)]) @ np.ravel(W) + b)


def edge_scores(features, adjacency, W, b) -> tuple[np.ndarray, np.ndarray]:
    """Scores for every undirected edge ``i < j``; returns ``(edges, scores)``."""
    a = sparse.triu(adjacency, k=1).tocoo()
    edges = np.stack([a.row, a.col], axis=1).astype(np.int64)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]
    W = np.ravel(W)
    F = features.shape[1]
    s = features[edges[:, 0]] @ W[:F] + features[edges[:, 1]] @ W[F:] + b
    return edges, s


# ---------------------------------------------------------------- coarsening


def coarsen_adjacency(fine_adjacency, parent, n_coarse: int | None = None) -> sparse.csr_matrix:
    """Coarse adjacency induced by a fine->coarse map.

    Coarse ``i ~ j`` if a fine edge joins their source sets, or if a fine
    node mapped to ``i`` and one mapped to ``j`` share a dropped neighbor
    (``parent == -1``).
    """
    A = sparse.csr_matrix(fine_adjacency, dtype=np.int64)
    parent = np.asarray(parent)
    if n_coarse is None:
        n_coarse = int(parent.max()) + 1
    n = len(parent)
    live = np.flatnonzero(parent >= 0)
    C = sparse.csr_matrix((np.ones(len(live), dtype=np.int64), (live, parent[live])), shape=(n, n_coarse))
    out = C.T @ A @ C
    dropped = np.flatnonzero(parent < 0)
    if len(dropped):
        D = sparse.csr_matrix((np.ones(len(dropped), dtype=np.int64), (dropped, dropped)), shape=(n, n))
        out = out + C.T @ A @ D @ A @ C
    out = sparse.csr_matrix(out)
    out.setdiag(0)
    out.eliminate_zeros()
    out.data[:] = 1
    out = out.astype(np.int8)
    out.sort_indices()
    return out


def _nearest_parent(positions, selected) -> np.ndarray:
    idx, _ = knn(positions, positions[selected], 1)
    parent = idx[:, 0].copy()
    parent[selected] = np.arange(len(selected))
    return parent


def _knn_unpool_table(fine_pos, coarse_pos, k):
    k = min(k, len(coarse_pos))
    idx, d2 = knn(fine_pos, coarse_pos, k)
    w = interpolation_weights(d2)
    order = np.argsort(idx, axis=1, kind="stable")
    return np.take_along_axis(idx, order, axis=1), np.take_along_axis(w, order, axis=1)


def _copy_unpool_table(parent):
    idx = np.maximum(parent, 0)[:, None].astype(np.int64)
    w = (parent >= 0).astype(np.float64)[:, None]
    return idx, w


def _freeze(level: PoolingLevel) -> PoolingLevel:
    for name in ("selected", "parent", "unpool_index", "unpool_weight", "coarse_positions"):
        getattr(level, name).setflags(write=False)
    return level


def fps_level(positions, adjacency, m: int, seed=None, start=None, k: int = 3) -> PoolingLevel:
    positions = np.asarray(positions, dtype=np.float64)
    sel = fps_select(positions, m, seed=seed, start=start)
    parent = _nearest_parent(positions, sel)
    cpos = positions[sel].copy()
    idx, w = _knn_unpool_table(positions, cpos, k)
    return _freeze(PoolingLevel("fps", sel, parent, idx, w, cpos,
                                coarsen_adjacency(adjacency, parent, m)))


def voxel_keys(positions, voxel_size: float) -> np.ndarray:
    p = np.asarray(positions, dtype=np.float64)
    return np.floor((p - p.min(axis=0)) / voxel_size).astype(np.int64)


def voxel_pool(positions, features, adjacency, voxel_size: float):
    """Voxel-grid pooling level plus max-pooled features.

    Coarse nodes are the nonempty voxels, ordered by their lowest member
    index, placed at the mean position of their members.
    """
    if not voxel_size > 0:
        raise ValueError("voxel_size must be positive")
    positions = np.asarray(positions, dtype=np.float64)
    keys = voxel_keys(positions, voxel_size)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    parent = rank[inverse]
    m = len(first)
    sel = np.sort(first)
    counts = np.bincount(parent, minlength=m)
    cpos = np.zeros((m, 3))
    np.add.at(cpos, parent, positions)
    cpos /= counts[:, None]
    idx, w = _copy_unpool_table(parent)
    level = _freeze(PoolingLevel("voxel", sel, parent, idx, w, cpos,
                                 coarsen_adjacency(adjacency, parent, m)))
    coarse = None if features is None else pool_max(features, parent, m)[0]
    return level, coarse


def edge_pool(positions, adjacency, edges, scores, max_merges: int | None = None) -> PoolingLevel:
    """Greedy maximal matching by descending score, merging matched pairs.

    Ties are broken by lexicographic ``(i, j)``. Merged nodes sit at the
    midpoint; unmatched nodes pass through. ``max_merges`` stops early.
    """
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    scores = np.asarray(scores, dtype=np.float64)
    if len(edges) == 0:
        warnings.warn("edge pooling on a graph without edges: identity level")
    order = np.lexsort((edges[:, 1], edges[:, 0], -scores)) if len(edges) else []
    matched = np.full(n, -1, dtype=np.int64)
    merges = 0
    for e in order:
        if max_merges is not None and merges >= max_merges:
            break
        i, j = edges[e]
        if matched[i] < 0 and matched[j] < 0:
            matched[i], matched[j] = j, i
            merges += 1
    rep = np.where(matched >= 0, np.minimum(np.arange(n), matched), np.arange(n))
    sel, parent = np.unique(rep, return_inverse=True)
    parent = parent.ravel()
    cpos = 0.5 * (positions[sel] + positions[np.where(matched[sel] >= 0, matched[sel], sel)])
    idx, w = _copy_unpool_table(parent)
    return _freeze(PoolingLevel("edge", sel, parent, idx, w, cpos,
                                coarsen_adjacency(adjacency, parent, len(sel))))


def topk_scores(features, score_weights) -> np.ndarray:
    p = np.asarray(score_weights, dtype=np.float64)
    nrm = np.linalg.norm(p)
    if nrm == 0:
        raise ValueError("score_weights must be nonzero")
    return np.asarray(features, dtype=np.float64) @ p / nrm


def topk_select(scores, m: int) -> np.ndarray:
    """Indices of the ``m`` largest scores, descending, ties to the lowest index."""
    return np.lexsort((np.arange(len(scores)), -np.asarray(scores)))[:m]


def topk_pool(features, positions, adjacency, score_weights, ratio: float | None = None,
              m: int | None = None):
    """Graph U-Net style top-k pooling. Returns ``(level, gated_features)``."""
    features = np.asarray(features, dtype=np.float64)
    n = len(features)
    if m is None:
        if not 0 < ratio <= 1:
            raise ValueError("ratio must be in (0, 1]")
        m = int(math.ceil(ratio * n))
    s = topk_scores(features, score_weights)
    sel = topk_select(s, m)
    parent = np.full(n, -1, dtype=np.int64)
    parent[sel] = np.arange(m)
    gated = features[sel] * (1.0 / (1.0 + np.exp(-s[sel])))[:, None]
    idx, w = _copy_unpool_table(parent)
    level = _freeze(PoolingLevel("topk", sel, parent, idx, w,
                                 np.asarray(positions, dtype=np.float64)[sel].copy(),
                                 coarsen_adjacency(adjacency, parent, m)))
    return level, gated


def identity_level(positions, adjacency, method: str) -> PoolingLevel:
    n = len(positions)
    ar = np.arange(n)
    idx, w = _copy_unpool_table(ar)
    return _freeze(PoolingLevel(method, ar.copy(), ar.copy(), idx, w,
                                np.array(positions, dtype=np.float64),
                                sparse.csr_matrix(adjacency, dtype=np.int8)))


def compose_levels(a: PoolingLevel, b: PoolingLevel, positions_fine, method: str) -> PoolingLevel:
    """Fold two successive partition levels into one (copy unpooling)."""
    parent = np.where(a.parent >= 0, b.parent[np.maximum(a.parent, 0)], -1)
    sel = a.selected[b.selected]
    idx, w = _copy_unpool_table(parent)
    return _freeze(PoolingLevel(method, sel, parent, idx, w, b.coarse_positions.copy(),
                                b.coarse_adjacency))


# ---------------------------------------------------------------- hierarchy


def level_sizes_from_ratios(n: int, ratios) -> list[int]:
    """``ceil(n * r)`` per level, raised where needed so every level can still shrink by one."""
    L = len(ratios)
    if n < L:
        raise ValueError(f"{n} nodes cannot form a {L}-level hierarchy")
    sizes = [max(1, int(math.ceil(n * r - 1e-9))) for r in ratios]
    sizes[0] = n
    for l in range(1, L):
        sizes[l] = max(sizes[l], L - l)
        sizes[l] = min(sizes[l], sizes[l - 1] - 1)
    return sizes


def _standardize(x):
    x = np.asarray(x, dtype=np.float64)
    sd = x.std(axis=0)
    return (x - x.mean(axis=0)) / np.where(sd > 1e-12, sd, 1.0)


def _voxel_for_target(positions, adjacency, target: int, current: int, floor: int = 1):
    p = np.asarray(positions)
    span = float(np.max(p.max(axis=0) - p.min(axis=0)))
    lo, hi = max(span, 1e-9) * 1e-4, max(span, 1e-9) * 2.0 + 1.0
    best = None
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        cnt = len(np.unique(voxel_keys(p, mid), axis=0))
        if floor <= cnt < current and (best is None or abs(cnt - target) < abs(best[1] - target)
                              or (abs(cnt - target) == abs(best[1] - target) and mid < best[0])):
            best = (mid, cnt)
        if cnt > target:
            lo = mid
        elif cnt < target:
            hi = mid
        else:
            break
    if best is None:
        best = (hi, len(np.unique(voxel_keys(p, hi), axis=0)))
    return best[0]


def build_hierarchy(positions, features, adjacency, method: str = "fps", sizes=None,
                    ratios=None, seed: int = 0, k: int = 3, fps_start: int | None = None,
                    ) -> PoolingHierarchy:
    """Coarsen a graph repeatedly.

    Args:
        positions: (N, 3) node positions.
        features: (N, F) node features used by the edge and top-k scorers.
        adjacency: symmetric sparse adjacency.
        method: one of ``fps``, ``voxel``, ``edge``, ``topk``.
        sizes: target node counts, ``sizes[0] == N``, strictly decreasing.
        ratios: alternative to ``sizes``, fractions of N.
        seed: drives FPS start points and the fixed structural scorers.
        fps_start: overrides the first FPS pick at level 0.

    Voxel sizes are found by bisection, so voxel levels hit their targets only
    approximately. Edge levels contract repeatedly until the target is met or
    no edge remains; a level that cannot shrink becomes an identity level.
    """
    if method not in METHODS:
        raise ValueError(f"unknown pooling method {method!r}; valid: {', '.join(METHODS)}")
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    if sizes is None:
        sizes = level_sizes_from_ratios(n, ratios)
    sizes = [int(s) for s in sizes]
    if sizes[0] != n:
        raise ValueError(f"level 0 size {sizes[0]} != node count {n}")
    for a, b in zip(sizes, sizes[1:]):
        if b >= a:
            raise ValueError(f"level sizes must be strictly decreasing, got {sizes}")
        if b < 1:
            raise ValueError("level sizes must be positive")
    rng = np.random.default_rng(seed)
    pos = positions
    adj = sparse.csr_matrix(adjacency, dtype=np.int8)
    feats = _standardize(features) if features is not None else np.zeros((n, 1))
    levels: list[PoolingLevel] = []
    all_pos, all_adj, actual = [pos], [adj], [n]
    for l, target in enumerate(sizes[1:]):
        cur = len(pos)
        # voxel and edge levels only approximate their targets
        target = min(target, cur - 1)
        floor = len(sizes) - 1 - l  # later levels must still be able to shrink
        if method == "fps":
            start = fps_start if (l == 0 and fps_start is not None) else int(rng.integers(cur))
            level = fps_level(pos, adj, target, start=start, k=k)
            feats = pool_max(feats, level.parent, level.n_coarse)[0]
        elif method == "voxel":
            if target < 1:
                level = None
            else:
                vs = _voxel_for_target(pos, adj, target, cur, floor)
                level, feats = voxel_pool(pos, feats, adj, vs)
            if level is None or level.n_coarse >= cur:
                warnings.warn(f"voxel level {l + 1} could not shrink; identity level")
                level = identity_level(pos, adj, "voxel")
        elif method == "edge":
            W = rng.standard_normal(2 * feats.shape[1]) / math.sqrt(2 * feats.shape[1])
            level = None
            cur_pos, cur_adj, cur_feats = pos, adj, feats
            while True:
                e, s = edge_scores(cur_feats, cur_adj, W, 0.0)
                m_now = len(cur_pos)
                step = edge_pool(cur_pos, cur_adj, e, s, max_merges=m_now - target)
                if step.n_coarse == m_now:
                    if level is None:
                        level = identity_level(pos, adj, "edge")
                    break
                cur_feats = pool_max(cur_feats, step.parent, step.n_coarse)[0]
                level = step if level is None else compose_levels(level, step, pos, "edge")
                cur_pos, cur_adj = step.coarse_positions, step.coarse_adjacency
                if step.n_coarse <= target:
                    break
            feats = cur_feats
            if level.n_coarse > target:
                warnings.warn(f"edge level {l + 1}: reached {level.n_coarse} nodes, target {target}")
        else:
            p = rng.standard_normal(feats.shape[1])
            level, feats = topk_pool(feats, pos, adj, p, m=target)
        levels.append(level)
        pos, adj = level.coarse_positions, level.coarse_adjacency
        all_pos.append(pos)
        all_adj.append(adj)
        actual.append(level.n_coarse)
    return PoolingHierarchy(levels, actual, method, all_pos, all_adj)


# ------------------------------------------------------------ serialization


def _adj_edges(adj) -> list[list[int]]:
    a = sparse.triu(adj, k=1).tocoo()
    e = sorted(zip(a.row.tolist(), a.col.tolist()))
    return [list(x) for x in e]


def hierarchy_to_dict(h: PoolingHierarchy) -> dict:
    return {
        "version": HIERARCHY_VERSION,
        "method": h.method,
        "level_sizes": list(h.level_sizes),
        "positions0": h.positions[0].tolist(),
        "adjacency0": _adj_edges(h.adjacencies[0]),
        "levels": [
            {
                "method": lv.method,
                "selected": lv.selected.tolist(),
                "parent": lv.parent.tolist(),
                "unpool_index": lv.unpool_index.tolist(),
                "unpool_weight": lv.unpool_weight.tolist(),
                "coarse_positions": lv.coarse_positions.tolist(),
                "coarse_adjacency": _adj_edges(lv.coarse_adjacency),
            }
            for lv in h.levels
        ],
    }


def _adj_from_edges(edges, n):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    r = np.concatenate([e[:, 0], e[:, 1]])
    c = np.concatenate([e[:, 1], e[:, 0]])
    a = sparse.csr_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(n, n))
    a.sort_indices()
    return a


def hierarchy_from_dict(d: dict) -> PoolingHierarchy:
    if d.get("version") != HIERARCHY_VERSION:
        raise ValueError(f"unsupported hierarchy version {d.get('version')}")
    pos0 = np.array(d["positions0"], dtype=np.float64).reshape(-1, 3)
    levels, positions, adjs = [], [pos0], [_adj_from_edges(d["adjacency0"], len(pos0))]
    for lv in d["levels"]:
        cpos = np.array(lv["coarse_positions"], dtype=np.float64).reshape(-1, 3)
        level = _freeze(PoolingLevel(
            lv["method"],
            np.array(lv["selected"], dtype=np.int64),
            np.array(lv["parent"], dtype=np.int64),
            np.array(lv["unpool_index"], dtype=np.int64),
            np.array(lv["unpool_weight"], dtype=np.float64),
            cpos,
            _adj_from_edges(lv["coarse_adjacency"], len(cpos)),
        ))
        levels.append(level)
        positions.append(cpos)
        adjs.append(level.coarse_adjacency)
    return PoolingHierarchy(levels, list(d["level_sizes"]), d["method"], positions, adjs)


def save_hierarchy(h: PoolingHierarchy, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(hierarchy_to_dict(h), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_hierarchy(path) -> PoolingHierarchy:
    with open(path, encoding="utf-8") as fh:
        return hierarchy_from_dict(json.load(fh))
