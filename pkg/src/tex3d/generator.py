"""Geometry encoder and style-modulated sparse-attention texture decoder.

The encoder projects standardized face features and pools them down the
hierarchy. The decoder starts from a learned constant at the coarsest level,
runs attention/AdaIN blocks at every level, unpools towards the faces and
concatenates the encoder features of each level on the way (U-Net skips).
Per-level toRGB outputs are unpooled and summed; a final sigmoid gives
per-face colors.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import layers as L
from .mesh import FaceGraph, TriMesh, build_face_graph
from .pooling import (
    METHODS,
    PoolingHierarchy,
    apply_unpool,
    apply_unpool_backward,
    build_hierarchy,
    level_sizes_from_ratios,
    pool_max,
    pool_max_backward,
)


@dataclass
class GeneratorConfig:
    """Architecture hyperparameters. Level 0 is the face level."""

    depth: int = 4
    widths: list[int] = field(default_factory=lambda: [32, 32, 32, 32])
    encoder_width: int = 16
    method: str = "fps"
    ratios: list[float] = field(default_factory=lambda: [1.0, 0.25, 0.0625, 0.015625])
    z_dim: int = 64
    w_dim: int = 64
    mapping_layers: int = 4
    heads: int = 4
    head_dim: int = 8
    blocks_per_level: int = 2
    knn_k: int = 3
    seed: int = 0

    def validate(self) -> list[str]:
        errs = []
        if self.depth < 1:
            errs.append("depth must be >= 1")
        if len(self.widths) != self.depth:
            errs.append(f"widths has {len(self.widths)} entries, depth is {self.depth}")
        if len(self.ratios) != self.depth:
            errs.append(f"ratios has {len(self.ratios)} entries, depth is {self.depth}")
        elif any(not 0 < r <= 1 for r in self.ratios):
            errs.append("ratios must lie in (0, 1]")
        if self.method not in METHODS:
            errs.append(f"method must be one of {', '.join(METHODS)}")
        for name in ("encoder_width", "z_dim", "w_dim", "mapping_layers", "heads",
                     "head_dim", "blocks_per_level", "knn_k"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be >= 1")
        if any(w < 1 for w in self.widths):
            errs.append("widths must be positive")
        return errs

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class MeshContext:
    """Everything about one mesh that stays fixed during training."""

    mesh: TriMesh
    graph: FaceGraph
    hierarchy: PoolingHierarchy
    features: np.ndarray        # standardized (F, 8)
    supports: list[L.AttentionSupport]


def standardize_features(x) -> np.ndarray:
    """Zero mean, unit variance per channel over faces; constant channels become 0."""
    x = np.asarray(x, dtype=np.float64)
    sd = x.std(axis=0)
    return (x - x.mean(axis=0)) / np.where(sd > 1e-12, sd, 1.0)


def prepare_mesh(mesh: TriMesh, config: GeneratorConfig, graph: FaceGraph | None = None,
                 hierarchy: PoolingHierarchy | None = None) -> MeshContext:
    graph = graph or build_face_graph(mesh)
    if hierarchy is None:
        sizes = level_sizes_from_ratios(graph.n_nodes, config.ratios)
        hierarchy = build_hierarchy(graph.node_positions, graph.node_features, graph.adjacency,
                                    method=config.method, sizes=sizes, seed=config.seed,
                                    k=config.knn_k)
    if hierarchy.level_sizes[0] != graph.n_nodes:
        raise ValueError(
            f"hierarchy level 0 has {hierarchy.level_sizes[0]} nodes, graph has {graph.n_nodes}"
        )
    if hierarchy.depth != config.depth:
        raise ValueError(f"hierarchy depth {hierarchy.depth} != config depth {config.depth}")
    supports = [L.attention_support(a) for a in hierarchy.adjacencies]
    return MeshContext(mesh, graph, hierarchy, standardize_features(graph.node_features), supports)


# ------------------------------------------------------------------ weights


def _normal(rng, shape, fan_in, gain=1.0):
    return rng.standard_normal(shape) * (gain / math.sqrt(fan_in))


def init_weights(config: GeneratorConfig, seed: int | None = None) -> dict[str, np.ndarray]:
    """Random generator weights, keyed by dotted names."""
    errs = config.validate()
    if errs:
        raise ValueError("; ".join(errs))
    rng = np.random.default_rng(config.seed if seed is None else seed)
    c = config
    wts: dict[str, np.ndarray] = {}
    lrelu_gain = math.sqrt(2.0 / (1.0 + L.LRELU_SLOPE ** 2))
    d_in = c.z_dim
    for i in range(c.mapping_layers):
        wts[f"mapping.{i}.W"] = _normal(rng, (d_in, c.w_dim), d_in, lrelu_gain)
        wts[f"mapping.{i}.b"] = np.zeros(c.w_dim)
        d_in = c.w_dim
    E = c.encoder_width
    for l in range(c.depth):
        fin = 8 if l == 0 else E
        wts[f"enc.{l}.W"] = _normal(rng, (fin, E), fin)
        wts[f"enc.{l}.b"] = np.zeros(E)
        if l > 0 and c.method == "topk":
            wts[f"enc.{l}.score"] = rng.standard_normal(E)
    wts["dec.const"] = rng.standard_normal(c.widths[-1])
    hd = c.heads * c.head_dim
    for l in range(c.depth - 1, -1, -1):
        C = c.widths[l]
        din = (c.widths[l + 1] if l < c.depth - 1 else c.widths[-1]) + E
        for b in range(c.blocks_per_level):
            pre = f"dec.{l}.{b}."
            wts[pre + "Wq"] = _normal(rng, (din, hd), din)
            wts[pre + "Wk"] = _normal(rng, (din, hd), din)
            wts[pre + "Wv"] = _normal(rng, (din, hd), din)
            wts[pre + "Wo"] = _normal(rng, (hd, C), hd)
            wts[pre + "bo"] = np.zeros(C)
            wts[pre + "Ws"] = _normal(rng, (c.w_dim, C), c.w_dim)
            wts[pre + "Wb"] = _normal(rng, (c.w_dim, C), c.w_dim)
            din = C
        wts[f"rgb.{l}.W"] = _normal(rng, (C, 3), C)
        wts[f"rgb.{l}.Ws"] = _normal(rng, (c.w_dim, C), c.w_dim)
        wts[f"rgb.{l}.b"] = np.zeros(3)
    return wts


def _sub(wts, prefix):
    n = len(prefix)
    return {k[n:]: v for k, v in wts.items() if k.startswith(prefix)}


# ------------------------------------------------------------------ encoder


def encode(ctx: MeshContext, wts, config: GeneratorConfig, record: bool = False):
    """Per-level encoder features, finest first. With ``record`` also returns a tape."""
    h = ctx.hierarchy
    if h.level_sizes[0] != len(ctx.features):
        raise ValueError("hierarchy/graph node count mismatch")
    x = ctx.features
    e = x @ wts["enc.0.W"] + wts["enc.0.b"]
    feats = [e]
    tape = [("proj0", x)]
    for l in range(1, config.depth):
        level = h.levels[l - 1]
        a = e @ wts[f"enc.{l}.W"] + wts[f"enc.{l}.b"]
        hh = L.lrelu(a)
        if level.method == "topk" and f"enc.{l}.score" in wts:
            p = wts[f"enc.{l}.score"]
            kept = hh[level.selected]
            s = kept @ p / np.linalg.norm(p)
            g = L.sigmoid(s)
            e = kept * g[:, None]
            tape.append(("topk", feats[-1], a, kept, s, g))
        else:
            e, argmax = pool_max(hh, level.parent, level.n_coarse)
            tape.append(("max", feats[-1], a, argmax))
        feats.append(e)
    return (feats, tape) if record else feats


def encode_backward(dfeats, tape, ctx: MeshContext, wts, config: GeneratorConfig, grads):
    h = ctx.hierarchy
    de = dfeats[-1]
    for l in range(config.depth - 1, 0, -1):
        level = h.levels[l - 1]
        rec = tape[l]
        if rec[0] == "topk":
            _, e_prev, a, kept, s, g = rec
            p = wts[f"enc.{l}.score"]
            pn = np.linalg.norm(p)
            dg = (de * kept).sum(axis=1)
            ds = dg * g * (1.0 - g)
            dkept = de * g[:, None] + np.outer(ds, p / pn)
            grads[f"enc.{l}.score"] += kept.T @ ds / pn - p * (ds @ (kept @ p)) / pn ** 3
            dh = np.zeros((level.n_fine, kept.shape[1]))
            dh[level.selected] = dkept
        else:
            _, e_prev, a, argmax = rec
            dh = pool_max_backward(de, argmax, level.n_fine)
        da = L.lrelu_backward(dh, a)
        grads[f"enc.{l}.W"] += e_prev.T @ da
        grads[f"enc.{l}.b"] += da.sum(axis=0)
        de = dfeats[l - 1] + da @ wts[f"enc.{l}.W"].T
    x = tape[0][1]
    grads["enc.0.W"] += x.T @ de
    grads["enc.0.b"] += de.sum(axis=0)


# ------------------------------------------------------------------ decoder


@dataclass
class Tape:
    z: np.ndarray
    map_cache: tuple
    w: np.ndarray
    enc: list
    enc_tape: list
    blocks: dict = field(default_factory=dict)
    rgb: dict = field(default_factory=dict)
    out: np.ndarray | None = None


def generate(ctx: MeshContext, enc_feats, z, wts, config: GeneratorConfig,
             record: bool = False, enc_tape=None):
    """Per-face RGB in [0, 1], shape (faces, 3).

    With ``record=True`` returns ``(rgb, tape)`` for :func:`generator_backward`.
    """
    c = config
    h = ctx.hierarchy
    layers = [(wts[f"mapping.{i}.W"], wts[f"mapping.{i}.b"]) for i in range(c.mapping_layers)]
    w, map_cache = L.mapping_forward(z, layers)
    tape = Tape(np.asarray(z, dtype=np.float64), map_cache, w, enc_feats, enc_tape)
    top = c.depth - 1
    n_top = h.level_sizes[top]
    x = np.concatenate([np.broadcast_to(wts["dec.const"], (n_top, c.widths[-1])),
                        enc_feats[top]], axis=1)
    acc = None
    for l in range(top, -1, -1):
        sup = ctx.supports[l]
        for b in range(c.blocks_per_level):
            pre = f"dec.{l}.{b}."
            p = _sub(wts, pre)
            a, acache = L.attention_forward(x, p, sup, c.heads)
            ys = L.affine_style(w, p["Ws"], 1.0)
            yb = L.affine_style(w, p["Wb"])
            nrm, ncache = L.adain_forward(a, ys, yb)
            x_in = x
            x = L.lrelu(nrm)
            if record:
                tape.blocks[(l, b)] = (x_in, acache, ncache, nrm)
        rgb, rcache = L.torgb_forward(x, w, _sub(wts, f"rgb.{l}."))
        if record:
            tape.rgb[l] = rcache
        if acc is None:
            acc = rgb
        else:
            lv = h.levels[l]
            acc = apply_unpool(acc, lv.unpool_index, lv.unpool_weight) + rgb
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(acc))):
            raise L.NumericError(f"non-finite activations at level {l}")
        if l > 0:
            lv = h.levels[l - 1]
            x = np.concatenate([apply_unpool(x, lv.unpool_index, lv.unpool_weight),
                                enc_feats[l - 1]], axis=1)
    out = L.sigmoid(acc)
    if record:
        tape.out = out
        return out, tape
    return out


def zero_grads(wts) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in wts.items()}


def generator_backward(drgb, tape: Tape, ctx: MeshContext, wts, config: GeneratorConfig,
                       grads=None):
    """Accumulate gradients of ``sum(drgb * rgb)`` into ``grads``; returns ``(grads, dz)``."""
    if tape is None or tape.out is None:
        raise ValueError("generator_backward needs a tape recorded with record=True")
    c = config
    h = ctx.hierarchy
    if grads is None:
        grads = zero_grads(wts)
    out = tape.out
    dacc = drgb * out * (1.0 - out)
    dw = np.zeros_like(tape.w)
    denc = [np.zeros_like(e) for e in tape.enc]
    top = c.depth - 1
    dx = None
    for l in range(0, top + 1):
        # the last activation of level l feeds toRGB and, below, the unpooling to l-1
        p_rgb = _sub(wts, f"rgb.{l}.")
        dx_rgb, dw_rgb, g = L.torgb_backward(dacc, tape.rgb[l], p_rgb)
        dw += dw_rgb
        for k, v in g.items():
            grads[f"rgb.{l}.{k}"] += v
        dx_l = dx_rgb if dx is None else dx + dx_rgb
        for b in range(c.blocks_per_level - 1, -1, -1):
            pre = f"dec.{l}.{b}."
            p = _sub(wts, pre)
            x_in, acache, ncache, nrm = tape.blocks[(l, b)]
            dn = L.lrelu_backward(dx_l, nrm)
            da, dys, dyb = L.adain_backward(dn, ncache)
            dw_s, dWs = L.affine_style_backward(dys, tape.w, p["Ws"])
            dw_b, dWb = L.affine_style_backward(dyb, tape.w, p["Wb"])
            dw += dw_s + dw_b
            grads[pre + "Ws"] += dWs
            grads[pre + "Wb"] += dWb
            dx_l, g = L.attention_backward(da, acache, p, ctx.supports[l])
            for k, v in g.items():
                grads[pre + k] += v
        # dx_l is now the gradient of this level's input
        if l < top:
            cw = c.widths[l + 1]
            denc[l] += dx_l[:, cw:]
            lv = h.levels[l]
            dx = apply_unpool_backward(dx_l[:, :cw], lv.unpool_index, lv.unpool_weight, lv.n_coarse)
            dacc = apply_unpool_backward(dacc, lv.unpool_index, lv.unpool_weight, lv.n_coarse)
        else:
            cw = c.widths[-1]
            grads["dec.const"] += dx_l[:, :cw].sum(axis=0)
            denc[top] += dx_l[:, cw:]
    layers = [(wts[f"mapping.{i}.W"], wts[f"mapping.{i}.b"]) for i in range(c.mapping_layers)]
    dz, mg = L.mapping_backward(dw, tape.map_cache, layers)
    for i, (dW, db) in enumerate(mg):
        grads[f"mapping.{i}.W"] += dW
        grads[f"mapping.{i}.b"] += db
    if tape.enc_tape is not None:
        encode_backward(denc, tape.enc_tape, ctx, wts, config, grads)
    return grads, dz


def forward(ctx: MeshContext, z, wts, config: GeneratorConfig, record: bool = False):
    """Encode then generate. With ``record`` returns ``(rgb, tape)``."""
    if record:
        feats, etape = encode(ctx, wts, config, record=True)
        return generate(ctx, feats, z, wts, config, record=True, enc_tape=etape)
    return generate(ctx, encode(ctx, wts, config), z, wts, config)
