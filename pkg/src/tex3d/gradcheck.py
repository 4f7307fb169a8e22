"""Central finite-difference checks of every hand-written backward pass.

Each registered op builds a small random instance: a dict of float arrays
(inputs and parameters alike), a forward returning one array, and a backward
mapping an output cotangent to gradients for every entry of the dict.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse

from . import gan, generator, layers as L, render, shapes

STEP = 1e-5
TOLERANCE = 1e-4


@dataclass
class Instance:
    params: dict[str, np.ndarray]
    forward: Callable[[dict], np.ndarray]
    backward: Callable[[dict, np.ndarray], dict]


def _random_graph(rng, n, p=0.3):
    a = np.triu(rng.random((n, n)) < p, 1)
    a = a | a.T
    return sparse.csr_matrix(a.astype(np.int8))


def _mapping(rng):
    prm = {"z": rng.standard_normal(8)}
    for i in range(2):
        prm[f"W{i}"] = rng.standard_normal((8, 8)) / np.sqrt(8)
        prm[f"b{i}"] = 0.1 * rng.standard_normal(8)

    def layers(p):
        return [(p["W0"], p["b0"]), (p["W1"], p["b1"])]

    def fwd(p):
        return L.mapping_forward(p["z"], layers(p))[0]

    def bwd(p, cot):
        _, cache = L.mapping_forward(p["z"], layers(p))
        dz, g = L.mapping_backward(cot, cache, layers(p))
        return {"z": dz, "W0": g[0][0], "b0": g[0][1], "W1": g[1][0], "b1": g[1][1]}

    return Instance(prm, fwd, bwd)


def _affine(rng):
    prm = {"w": rng.standard_normal(6), "W": rng.standard_normal((6, 5))}

    def bwd(p, cot):
        dw, dW = L.affine_style_backward(cot, p["w"], p["W"])
        return {"w": dw, "W": dW}

    return Instance(prm, lambda p: L.affine_style(p["w"], p["W"], 1.0), bwd)


def _adain(rng):
    prm = {"x": rng.standard_normal((7, 4)), "ys": 1 + 0.3 * rng.standard_normal(4),
           "yb": rng.standard_normal(4)}

    def bwd(p, cot):
        _, cache = L.adain_forward(p["x"], p["ys"], p["yb"])
        dx, dys, dyb = L.adain_backward(cot, cache)
        return {"x": dx, "ys": dys, "yb": dyb}

    return Instance(prm, lambda p: L.adain_forward(p["x"], p["ys"], p["yb"])[0], bwd)


def _attention(rng):
    n, D, H, d, C = 9, 5, 2, 4, 6
    sup = L.attention_support(_random_graph(rng, n))
    prm = {
        "x": rng.standard_normal((n, D)),
        "Wq": rng.standard_normal((D, H * d)) / np.sqrt(D),
        "Wk": rng.standard_normal((D, H * d)) / np.sqrt(D),
        "Wv": rng.standard_normal((D, H * d)) / np.sqrt(D),
        "Wo": rng.standard_normal((H * d, C)) / np.sqrt(H * d),
        "bo": rng.standard_normal(C),
    }

    def fwd(p):
        return L.attention_forward(p["x"], p, sup, H)[0]

    def bwd(p, cot):
        _, cache = L.attention_forward(p["x"], p, sup, H)
        dx, g = L.attention_backward(cot, cache, p, sup)
        return {"x": dx, **g}

    return Instance(prm, fwd, bwd)


def _moddemod(rng):
    prm = {"W": rng.standard_normal((6, 5)), "s": 1 + 0.5 * rng.standard_normal(6)}

    def fwd(p):
        return L.demodulate(L.modulate(p["W"], p["s"]))[0]

    def bwd(p, cot):
        Wm = L.modulate(p["W"], p["s"])
        _, nrm = L.demodulate(Wm)
        dWm = L.demodulate_backward(cot, Wm, nrm)
        dW, ds = L.modulate_backward(dWm, p["W"], p["s"])
        return {"W": dW, "s": ds}

    return Instance(prm, fwd, bwd)


def _torgb(rng):
    C, Wd = 5, 4
    prm = {"x": rng.standard_normal((6, C)), "w": rng.standard_normal(Wd),
           "W": rng.standard_normal((C, 3)), "Ws": 0.3 * rng.standard_normal((Wd, C)),
           "b": rng.standard_normal(3)}

    def fwd(p):
        return L.torgb_forward(p["x"], p["w"], p)[0]

    def bwd(p, cot):
        _, cache = L.torgb_forward(p["x"], p["w"], p)
        dx, dw, g = L.torgb_backward(cot, cache, p)
        return {"x": dx, "w": dw, **g}

    return Instance(prm, fwd, bwd)


def _discriminator(rng):
    wts = gan.init_discriminator(16, channels=(4, 5, 3), seed=int(rng.integers(1 << 30)))
    prm = {"images": rng.random((2, 16, 16, 3)), **wts}

    def fwd(p):
        return gan.discriminator_forward(p["images"], p)[0]

    def bwd(p, cot):
        _, cache = gan.discriminator_forward(p["images"], p)
        dimg, g = gan.discriminator_backward(cot, cache, p)
        return {"images": dimg, **g}

    return Instance(prm, fwd, bwd)


def _rasterizer(rng):
    mesh = shapes.icosphere(1)
    cam = render.sample_cameras(int(rng.integers(1 << 30)), 1, size=16)[0]
    cov = render.rasterize(mesh, cam)
    prm = {"colors": rng.random((mesh.n_faces, 3))}

    def fwd(p):
        return render.render(mesh, p["colors"], cam, coverage=cov).image

    def bwd(p, cot):
        return {"colors": render.render_backward(cot, cov, mesh.n_faces)}

    return Instance(prm, fwd, bwd)


def tiny_config(method: str = "fps", depth: int = 2) -> generator.GeneratorConfig:
    return generator.GeneratorConfig(
        depth=depth, widths=[4] * depth, encoder_width=3, method=method,
        ratios=[1.0, 0.75, 0.5, 0.25][:depth], z_dim=5, w_dim=4, mapping_layers=2,
        heads=2, head_dim=2, blocks_per_level=2,
    )


def _generator(rng, method="fps"):
    cfg = tiny_config(method)
    seed = int(rng.integers(1 << 30))
    ctx = generator.prepare_mesh(shapes.tetrahedron(), cfg)
    wts = generator.init_weights(cfg, seed)
    prm = {"z": rng.standard_normal(cfg.z_dim), **wts}

    def fwd(p):
        return generator.forward(ctx, p["z"], p, cfg)

    def bwd(p, cot):
        _, tape = generator.forward(ctx, p["z"], p, cfg, record=True)
        g, dz = generator.generator_backward(cot, tape, ctx, p, cfg)
        return {**g, "z": dz}

    return Instance(prm, fwd, bwd)


REGISTRY: dict[str, Callable[[np.random.Generator], Instance]] = {
    "mapping": _mapping,
    "affine": _affine,
    "adain": _adain,
    "attention": _attention,
    "modulate_demodulate": _moddemod,
    "torgb": _torgb,
    "discriminator": _discriminator,
    "rasterizer": _rasterizer,
    "generator": _generator,
    "generator_topk": lambda rng: _generator(rng, "topk"),
}


def grad_check(op_id: str, seed: int = 0, step: float = STEP, registry=None) -> float:
    """Max over all entries of ``|analytic - numeric| / max(1, |numeric|)``.

    The scalar loss is ``sum(forward * cotangent)`` with a fixed random
    cotangent; numeric gradients are central differences.
    """
    registry = REGISTRY if registry is None else registry
    if op_id not in registry:
        raise KeyError(f"unknown op {op_id!r}; available: {', '.join(registry)}")
    rng = np.random.default_rng(seed)
    inst = registry[op_id](rng)
    p = {k: np.array(v, dtype=np.float64) for k, v in inst.params.items()}
    out = L.check_finite(inst.forward(p), f"{op_id} forward")
    cot = rng.standard_normal(out.shape)
    analytic = inst.backward(p, cot)
    worst = 0.0
    for name in sorted(p):
        arr = p[name]
        ga = L.check_finite(np.asarray(analytic[name], dtype=np.float64).reshape(arr.shape),
                            f"{op_id} gradient {name}")
        flat = arr.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            lp = float(np.sum(inst.forward(p) * cot))
            flat[i] = old - step
            lm = float(np.sum(inst.forward(p) * cot))
            flat[i] = old
            num = (lp - lm) / (2 * step)
            if not np.isfinite(num):
                raise L.NumericError(f"non-finite numeric gradient for {op_id}:{name}")
            worst = max(worst, abs(gflat[i] - num) / max(1.0, abs(num)))
    return worst
