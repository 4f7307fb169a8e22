"""Toy "real" image distribution and the adversarial training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import gan, generator as G, render
from .layers import NumericError
from .mesh import TriMesh, face_centroids

log = logging.getLogger(__name__)

PALETTE = ((0.85, 0.25, 0.15), (0.15, 0.35, 0.85))
RULES = ("two_tone", "constant")


@dataclass
class TrainConfig:
    lr_generator: float = 0.0002
    lr_encoder: float = 0.0002
    lr_discriminator: float = 0.0002
    batch_size: int = 4
    steps: int = 2000
    seed: int = 0
    views: int = 4
    image_size: int = 64
    camera_scale: float = 0.9
    camera_pool: int = 64
    adam_beta1: float = 0.0
    adam_beta2: float = 0.99
    adam_eps: float = 1e-8
    rule: str = "two_tone"
    palette_jitter: float = 0.03
    disc_channels: list[int] = field(default_factory=lambda: [32, 64, 64])
    hist_bins: int = 4

    def validate(self) -> list[str]:
        errs = []
        for name in ("lr_generator", "lr_encoder", "lr_discriminator", "camera_scale"):
            if not getattr(self, name) > 0:
                errs.append(f"{name} must be positive")
        for name in ("batch_size", "views", "camera_pool", "hist_bins"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be >= 1")
        if self.steps < 0:
            errs.append("steps must be >= 0")
        if self.rule not in RULES:
            errs.append(f"rule must be one of {', '.join(RULES)}")
        if len(self.disc_channels) != gan.DISC_LAYERS:
            errs.append(f"disc_channels needs {gan.DISC_LAYERS} entries")
        try:
            gan.disc_patches(self.image_size)
        except ValueError as exc:
            errs.append(str(exc))
        if not 0 <= self.adam_beta1 < 1 or not 0 <= self.adam_beta2 < 1:
            errs.append("adam betas must lie in [0, 1)")
        return errs

    def to_dict(self) -> dict:
        return asdict(self)


class CameraPool:
    """A fixed set of random cameras with lazily cached per-mesh coverage."""

    def __init__(self, meshes, n: int, seed, size: int, scale: float):
        self.meshes = list(meshes)
        self.cameras = render.sample_cameras(seed, n, size=size, scale=scale)
        self._cov: dict[tuple[int, int], np.ndarray] = {}

    def __len__(self):
        return len(self.cameras)

    def coverage(self, mesh_idx: int, cam_idx: int) -> np.ndarray:
        key = (mesh_idx, cam_idx)
        if key not in self._cov:
            self._cov[key] = render.rasterize(self.meshes[mesh_idx], self.cameras[cam_idx])
        return self._cov[key]


def rule_colors(mesh: TriMesh, rule: str, palette=PALETTE, axis: int = 1) -> np.ndarray:
    """Base per-face colors for a procedural rule."""
    if rule == "constant":
        return np.tile([1.0, 0.0, 0.0], (mesh.n_faces, 1))
    if rule == "two_tone":
        c = face_centroids(mesh)[:, axis]
        upper = c >= 0.5 * (c.min() + c.max())
        return np.where(upper[:, None], np.asarray(palette[0]), np.asarray(palette[1]))
    raise ValueError(f"unknown rule {rule!r}")


class ToyDataset:
    """Stream of "real" renders: meshes colored by a fixed rule, random views.

    Two-tone images get a per-image palette jitter; the constant rule is exact.
    """

    def __init__(self, meshes, rule: str = "two_tone", seed=0, image_size: int = 64,
                 camera_pool: int = 64, jitter: float = 0.03, scale: float = 0.9):
        meshes = list(meshes)
        if not meshes:
            raise ValueError("toy dataset needs at least one mesh")
        self.meshes = meshes
        self.rule = rule
        self.jitter = jitter if rule == "two_tone" else 0.0
        self.rng = np.random.default_rng(seed)
        self.pool = CameraPool(meshes, camera_pool, [seed, 1], image_size, scale)
        self.base = [rule_colors(m, rule) for m in meshes]

    def sample(self, n: int):
        """``n`` images (n, S, S, 3) and their coverage maps."""
        imgs, covs = [], []
        for _ in range(n):
            mi = int(self.rng.integers(len(self.meshes)))
            ci = int(self.rng.integers(len(self.pool)))
            colors = self.base[mi]
            if self.jitter:
                shift = self.rng.uniform(-self.jitter, self.jitter, (2, 3))
                upper = np.all(colors == np.asarray(PALETTE[0]), axis=1)
                colors = np.clip(colors + np.where(upper[:, None], shift[0], shift[1]), 0, 1)
            cov = self.pool.coverage(mi, ci)
            imgs.append(render.shade(colors, cov))
            covs.append(cov)
        return np.stack(imgs), np.stack(covs)


def make_toy_dataset(meshes, rule: str = "two_tone", seed=0, **kw) -> ToyDataset:
    return ToyDataset(meshes, rule=rule, seed=seed, **kw)


def color_histogram(images, coverages, bins: int = 4) -> np.ndarray:
    """Normalized joint RGB histogram of foreground pixels, flattened to ``bins**3``."""
    fg = np.asarray(images)[np.asarray(coverages) >= 0]
    idx = np.clip((fg * bins).astype(np.int64), 0, bins - 1)
    flat = (idx[:, 0] * bins + idx[:, 1]) * bins + idx[:, 2]
    h = np.bincount(flat, minlength=bins ** 3).astype(np.float64)
    return h / max(h.sum(), 1.0)


def hist_chi2(p, q) -> float:
    """Symmetric chi-squared distance ``0.5 * sum (p-q)^2 / (p+q)``, in [0, 1]."""
    s = p + q
    m = s > 0
    return float(0.5 * np.sum((p[m] - q[m]) ** 2 / s[m]))


@dataclass
class TrainResult:
    generator: dict[str, np.ndarray]
    discriminator: dict[str, np.ndarray]
    log: list[tuple[int, float, float, float]]
    initial_generator: dict[str, np.ndarray]


def init_state(gcfg: G.GeneratorConfig, tcfg: TrainConfig):
    gw = G.init_weights(gcfg, seed=tcfg.seed)
    dw = gan.init_discriminator(tcfg.image_size, tuple(tcfg.disc_channels), seed=tcfg.seed + 7919)
    return gw, dw


def render_textures(ctxs, gw, gcfg, zs, mesh_ids, pool: CameraPool, cam_ids, record=False):
    """Generate one texture per z and render each from its camera list."""
    imgs, covs, tapes = [], [], []
    for z, mi, cams in zip(zs, mesh_ids, cam_ids):
        if record:
            rgb, tape = G.forward(ctxs[mi], z, gw, gcfg, record=True)
            tapes.append(tape)
        else:
            rgb = G.forward(ctxs[mi], z, gw, gcfg)
        for ci in cams:
            cov = pool.coverage(mi, ci)
            imgs.append(render.shade(rgb, cov))
            covs.append(cov)
    return np.stack(imgs), np.stack(covs), tapes


def evaluate_chi2(ctxs, gw, gcfg: G.GeneratorConfig, tcfg: TrainConfig, n_textures: int = 8,
                  seed: int = 12345) -> float:
    """Histogram chi-squared between a fixed generated batch and a fixed real batch."""
    meshes = [c.mesh for c in ctxs]
    rng = np.random.default_rng(seed)
    pool = CameraPool(meshes, tcfg.camera_pool, [seed, 2], tcfg.image_size, tcfg.camera_scale)
    zs = rng.standard_normal((n_textures, gcfg.z_dim))
    mids = rng.integers(len(ctxs), size=n_textures)
    cams = rng.integers(len(pool), size=(n_textures, tcfg.views))
    fake, fcov, _ = render_textures(ctxs, gw, gcfg, zs, mids, pool, cams)
    ds = ToyDataset(meshes, tcfg.rule, seed=[seed, 3], image_size=tcfg.image_size,
                    camera_pool=tcfg.camera_pool, jitter=tcfg.palette_jitter,
                    scale=tcfg.camera_scale)
    real, rcov = ds.sample(n_textures * tcfg.views)
    return hist_chi2(color_histogram(fake, fcov, tcfg.hist_bins),
                     color_histogram(real, rcov, tcfg.hist_bins))


def train(ctxs, gcfg: G.GeneratorConfig, tcfg: TrainConfig, state=None,
          progress=None) -> TrainResult:
    """Alternate one discriminator and one generator/encoder Adam step per iteration.

    Each step generates ``batch_size`` textures, renders each from ``views``
    pooled cameras, and draws as many real images. Logged per step:
    ``(step, d_loss, g_loss, hist_chi2)`` where the histogram distance
    compares the step's fake and real batches before the update.
    """
    errs = gcfg.validate() + tcfg.validate()
    if errs:
        raise ValueError("; ".join(errs))
    meshes = [c.mesh for c in ctxs]
    gw, dw = state if state is not None else init_state(gcfg, tcfg)
    init_copy = {k: v.copy() for k, v in gw.items()}
    rng = np.random.default_rng(tcfg.seed)
    pool = CameraPool(meshes, tcfg.camera_pool, [tcfg.seed, 0], tcfg.image_size, tcfg.camera_scale)
    data = ToyDataset(meshes, tcfg.rule, seed=[tcfg.seed, 1], image_size=tcfg.image_size,
                      camera_pool=tcfg.camera_pool, jitter=tcfg.palette_jitter,
                      scale=tcfg.camera_scale)
    enc_keys = {k for k in gw if k.startswith("enc.")}
    opt_g = gan.Adam({k: v for k, v in gw.items() if k not in enc_keys}, tcfg.lr_generator,
                     tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps)
    opt_e = gan.Adam({k: gw[k] for k in enc_keys}, tcfg.lr_encoder,
                     tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps)
    opt_d = gan.Adam(dw, tcfg.lr_discriminator, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps)
    B, V = tcfg.batch_size, tcfg.views
    rows = []
    for step in range(tcfg.steps):
        zs = rng.standard_normal((B, gcfg.z_dim))
        mids = rng.integers(len(ctxs), size=B)
        cams = rng.integers(len(pool), size=(B, V))
        fake, fcov, tapes = render_textures(ctxs, gw, gcfg, zs, mids, pool, cams, record=True)
        real, rcov = data.sample(B * V)
        chi2 = hist_chi2(color_histogram(fake, fcov, tcfg.hist_bins),
                         color_histogram(real, rcov, tcfg.hist_bins))

        lr_, cr = gan.discriminator_forward(real, dw)
        lf, cf = gan.discriminator_forward(fake, dw)
        d_loss, _ = gan.gan_losses(lr_, lf)
        if not math.isfinite(d_loss):
            raise NumericError(f"non-finite discriminator loss at step {step}")
        dr, df = gan.d_loss_grads(lr_, lf)
        _, gr = gan.discriminator_backward(dr, cr, dw)
        _, gf = gan.discriminator_backward(df, cf, dw)
        opt_d.step(dw, {k: gr[k] + gf[k] for k in gr})

        lf2, cf2 = gan.discriminator_forward(fake, dw)
        _, g_loss = gan.gan_losses(lr_, lf2)
        if not math.isfinite(g_loss):
            raise NumericError(f"non-finite generator loss at step {step}")
        dimg, _ = gan.discriminator_backward(gan.g_loss_grad(lf2), cf2, dw)
        grads = G.zero_grads(gw)
        for b in range(B):
            mi = int(mids[b])
            n_f = ctxs[mi].mesh.n_faces
            drgb = np.zeros((n_f, 3))
            for v in range(V):
                drgb += render.render_backward(dimg[b * V + v], fcov[b * V + v], n_f)
            G.generator_backward(drgb, tapes[b], ctxs[mi], gw, gcfg, grads)
        opt_g.step(gw, {k: g for k, g in grads.items() if k not in enc_keys})
        opt_e.step(gw, {k: grads[k] for k in enc_keys})
        rows.append((step, d_loss, g_loss, chi2))
        if progress is not None:
            progress(step, d_loss, g_loss, chi2)
    return TrainResult(gw, dw, rows, init_copy)


def write_metrics_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,d_loss,g_loss,hist_chi2\n")
        for step, d, g, c in rows:
            fh.write(f"{int(step)},{float(d)!r},{float(g)!r},{float(c)!r}\n")


def read_metrics_csv(path) -> list[tuple[int, float, float, float]]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "step,d_loss,g_loss,hist_chi2":
        raise ValueError(f"{path}: unexpected metrics header")
    out = []
    for ln in lines[1:]:
        s, d, g, c = ln.split(",")
        out.append((int(s), float(d), float(g), float(c)))
    return out
