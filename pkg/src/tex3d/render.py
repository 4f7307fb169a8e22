"""Orthographic flat-shading z-buffer rasterizer, differentiable in face colors.

Geometry is fixed, so rasterization reduces to a per-pixel face index
(``coverage``). Rendering is then a gather of face colors and its backward a
scatter-sum of pixel cotangents per face.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh

BACKGROUND = 0.5
_CHUNK_PIXELS = 1 << 21


@dataclass(frozen=True, eq=False)
class Camera:
    """Orthographic camera looking down -z of the rotated frame.

    World point ``p`` maps to view ``R @ p``; view x/y in
    ``[-1/scale, 1/scale]`` fill the image.
    """

    rotation: np.ndarray
    scale: float = 0.9
    size: int = 64

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        if R.shape != (3, 3) or not np.allclose(R @ R.T, np.eye(3), atol=1e-9):
            raise ValueError("camera rotation must be a 3x3 orthonormal matrix")
        if self.size < 8:
            raise ValueError("image size must be >= 8")
        object.__setattr__(self, "rotation", R)

    def project(self, vertices):
        """Screen x, y (pixels, y down) and depth (smaller is nearer)."""
        p = np.asarray(vertices, dtype=np.float64) @ self.rotation.T
        half = self.size / 2.0
        sx = (p[:, 0] * self.scale + 1.0) * half
        sy = (1.0 - p[:, 1] * self.scale) * half
        return sx, sy, -p[:, 2]


@dataclass(frozen=True, eq=False)
class RenderOutput:
    image: np.ndarray     # (S, S, 3)
    coverage: np.ndarray  # (S, S) face index, -1 for background


def quaternion_to_matrix(q) -> np.ndarray:
    x, y, z, w = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_quaternions(rng, n: int) -> np.ndarray:
    """Uniform unit quaternions (x, y, z, w) by Shoemake's method."""
    u1, u2, u3 = rng.random((3, n))
    a, b = np.sqrt(1.0 - u1), np.sqrt(u1)
    return np.stack([a * np.sin(2 * np.pi * u2), a * np.cos(2 * np.pi * u2),
                     b * np.sin(2 * np.pi * u3), b * np.cos(2 * np.pi * u3)], axis=1)


def sample_cameras(seed, n: int = 4, size: int = 64, scale: float = 0.9) -> list[Camera]:
    """``n`` cameras with rotations uniform on SO(3)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return [Camera(quaternion_to_matrix(q), scale, size) for q in random_quaternions(rng, n)]


def rasterize(mesh: TriMesh, camera: Camera) -> np.ndarray:
    """Per-pixel index of the nearest covering face (-1 where empty).

    Pixel centers sit at half-integer coordinates. Pixels exactly on an edge
    belong to the triangle for which that edge is a top or left edge, so
    shared edges are drawn once. Depth ties go to the lower face index.
    """
    S = camera.size
    sx, sy, dz = camera.project(mesh.vertices)
    f = mesh.faces
    ax, bx, cx = sx[f[:, 0]], sx[f[:, 1]], sx[f[:, 2]]
    ay, by, cy = sy[f[:, 0]], sy[f[:, 1]], sy[f[:, 2]]
    za, zb, zc = dz[f[:, 0]], dz[f[:, 1]], dz[f[:, 2]]
    area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    flip = area < 0
    bx, cx = np.where(flip, cx, bx), np.where(flip, bx, cx)
    by, cy = np.where(flip, cy, by), np.where(flip, by, cy)
    zb, zc = np.where(flip, zc, zb), np.where(flip, zb, zc)
    area = np.abs(area)

    keep = np.flatnonzero(
        (area > 0)
        & (np.maximum(np.maximum(ax, bx), cx) >= 0) & (np.minimum(np.minimum(ax, bx), cx) <= S)
        & (np.maximum(np.maximum(ay, by), cy) >= 0) & (np.minimum(np.minimum(ay, by), cy) <= S)
    )
    pc = np.arange(S) + 0.5
    PY, PX = np.meshgrid(pc, pc, indexing="ij")
    px, py = PX.ravel(), PY.ravel()
    depth = np.full(S * S, np.inf)
    cov = np.full(S * S, -1, dtype=np.int64)
    chunk = max(1, _CHUNK_PIXELS // (S * S))

    def edge(x0, y0, x1, y1):
        dx, dy = (x1 - x0)[:, None], (y1 - y0)[:, None]
        e = dx * (py[None, :] - y0[:, None]) - dy * (px[None, :] - x0[:, None])
        top_left = ((dy < 0) | ((dy == 0) & (dx > 0)))
        return e, (e > 0) | ((e == 0) & top_left)

    for s in range(0, len(keep), chunk):
        ids = keep[s:s + chunk]
        e0, in0 = edge(bx[ids], by[ids], cx[ids], cy[ids])  # opposite a
        e1, in1 = edge(cx[ids], cy[ids], ax[ids], ay[ids])  # opposite b
        e2, in2 = edge(ax[ids], ay[ids], bx[ids], by[ids])  # opposite c
        inside = in0 & in1 & in2
        z = (e0 * za[ids, None] + e1 * zb[ids, None] + e2 * zc[ids, None]) / area[ids, None]
        z = np.where(inside, z, np.inf)
        best = np.argmin(z, axis=0)
        zbest = z[best, np.arange(z.shape[1])]
        upd = zbest < depth
        depth[upd] = zbest[upd]
        cov[upd] = ids[best[upd]]
    return cov.reshape(S, S)


def shade(face_colors, coverage, background: float = BACKGROUND) -> np.ndarray:
    """Flat shading: each covered pixel takes its face's color exactly."""
    img = np.full(coverage.shape + (3,), background, dtype=np.float64)
    m = coverage >= 0
    img[m] = np.asarray(face_colors, dtype=np.float64)[coverage[m]]
    return img


def render(mesh: TriMesh, face_colors, camera: Camera, coverage=None) -> RenderOutput:
    face_colors = np.asarray(face_colors, dtype=np.float64)
    if face_colors.shape != (mesh.n_faces, 3):
        raise ValueError(f"face_colors shape {face_colors.shape} != ({mesh.n_faces}, 3)")
    if coverage is None:
        coverage = rasterize(mesh, camera)
    return RenderOutput(shade(face_colors, coverage), coverage)


def render_backward(dimage, coverage, n_faces: int) -> np.ndarray:
    """Per-face color gradient: sum of pixel cotangents over each face's pixels."""
    dimage = np.asarray(dimage, dtype=np.float64)
    if dimage.shape != coverage.shape + (3,):
        raise ValueError(f"cotangent shape {dimage.shape} does not match coverage {coverage.shape}")
    m = coverage >= 0
    idx = coverage[m]
    g = dimage[m]
    return np.stack([np.bincount(idx, weights=g[:, c], minlength=n_faces) for c in range(3)], axis=1)


def pixel_counts(coverage, n_faces: int) -> np.ndarray:
    return np.bincount(coverage[coverage >= 0], minlength=n_faces)
