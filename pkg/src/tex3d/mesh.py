"""Triangle meshes, the face-centroid graph, and per-face geometric features."""

from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)

AREA_EPS = 1e-12
FEATURE_DIM = 8


class MeshError(ValueError):
    """Raised for malformed mesh input (bad indices, degenerate faces, parse errors)."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Indexed triangle mesh. Arrays are copied and frozen on construction."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must be (V, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must be (F, 3), got {f.shape}")
        if len(f) == 0:
            raise MeshError("mesh has no faces")
        bad = np.flatnonzero((f < 0).any(axis=1) | (f >= len(v)).any(axis=1))
        if len(bad):
            raise MeshError(
                f"face {bad[0]} has vertex index out of range {f[bad[0]].tolist()} "
                f"(vertex count {len(v)})"
            )
        rep = np.flatnonzero((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2]))
        if len(rep):
            raise MeshError(f"face {rep[0]} repeats a vertex index {f[rep[0]].tolist()}")
        areas = _face_areas(v, f)
        degen = np.flatnonzero(~(areas > AREA_EPS))
        if len(degen):
            raise MeshError(f"face {degen[0]} is degenerate (area {areas[degen[0]]:.3e})")
        object.__setattr__(self, "vertices", _readonly(v))
        object.__setattr__(self, "faces", _readonly(f))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def edges(self) -> np.ndarray:
        """Unique undirected vertex edges, sorted, shape (E, 2)."""
        e = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)


def _face_areas(v, f):
    cr = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    return 0.5 * np.linalg.norm(cr, axis=1)


@dataclass(frozen=True, eq=False)
class FaceGraph:
    """Geometric graph with one node per mesh face.

    ``adjacency`` is a symmetric CSR matrix of ones without self loops.
    """

    node_positions: np.ndarray
    node_features: np.ndarray
    adjacency: sparse.csr_matrix
    non_manifold_edges: int = 0
    n_faces: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_faces", len(self.node_positions))

    @property
    def n_nodes(self) -> int:
        return self.n_faces

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]


def load_obj(path) -> TriMesh:
    """Read the ``v``/``f`` subset of a Wavefront OBJ file.

    Polygons with more than three vertices are fan-triangulated around their
    first vertex. ``f`` tokens may carry ``/vt/vn`` suffixes and negative
    (relative) indices.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such mesh file: {path}")
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tag, *rest = line.split()
            if tag == "v":
                if len(rest) < 3:
                    raise MeshError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    verts.append([float(x) for x in rest[:3]])
                except ValueError as exc:
                    raise MeshError(f"{path}:{lineno}: bad vertex: {exc}") from None
            elif tag == "f":
                if len(rest) < 3:
                    raise MeshError(f"{path}:{lineno}: face needs at least 3 vertices")
                try:
                    idx = [int(tok.split("/")[0]) for tok in rest]
                except ValueError as exc:
                    raise MeshError(f"{path}:{lineno}: bad face index: {exc}") from None
                poly = []
                for i in idx:
                    if i > 0:
                        poly.append(i - 1)
                    elif i < 0:
                        poly.append(len(verts) + i)
                    else:
                        raise MeshError(f"{path}:{lineno}: face index 0 is invalid in OBJ")
                for k in range(1, len(poly) - 1):
                    faces.append([poly[0], poly[k], poly[k + 1]])
    if not faces:
        raise MeshError(f"{path}: no faces found")
    return TriMesh(np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64))


def save_obj(mesh: TriMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in mesh.faces:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def face_adjacency(mesh: TriMesh) -> tuple[sparse.csr_matrix, int]:
    """Face-to-face adjacency via shared undirected edges.

    Returns the symmetric adjacency and the number of non-manifold edges
    (edges shared by more than two faces; all sharing pairs are linked).
    """
    F = mesh.n_faces
    e = np.sort(mesh.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    fid = np.repeat(np.arange(F), 3)
    order = np.lexsort((fid, e[:, 1], e[:, 0]))
    e, fid = e[order], fid[order]
    new = np.ones(len(e), dtype=bool)
    new[1:] = (e[1:] != e[:-1]).any(axis=1)
    starts = np.flatnonzero(new)
    counts = np.diff(np.append(starts, len(e)))

    rows, cols = [], []
    two = starts[counts == 2]
    rows.append(fid[two])
    cols.append(fid[two + 1])
    n_nm = int((counts > 2).sum())
    for s, c in zip(starts[counts > 2], counts[counts > 2]):
        group = fid[s:s + c]
        for a in range(c):
            for b in range(a + 1, c):
                rows.append(group[a:a + 1])
                cols.append(group[b:b + 1])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    keep = r != c
    r, c = r[keep], c[keep]
    adj = sparse.coo_matrix(
        (np.ones(2 * len(r), dtype=np.int8), (np.concatenate([r, c]), np.concatenate([c, r]))),
        shape=(F, F),
    ).tocsr()
    adj.data[:] = 1
    adj.sort_indices()
    return adj, n_nm


def face_normals(mesh: TriMesh) -> np.ndarray:
    v, f = mesh.vertices, mesh.faces
    cr = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    return cr / np.linalg.norm(cr, axis=1, keepdims=True)


def face_centroids(mesh: TriMesh) -> np.ndarray:
    return mesh.vertices[mesh.faces].mean(axis=1)


def _corner_angles(v, f):
    # angle at corner k of each face, shape (F, 3)
    ang = np.empty((len(f), 3))
    for k in range(3):
        a = v[f[:, (k + 1) % 3]] - v[f[:, k]]
        b = v[f[:, (k + 2) % 3]] - v[f[:, k]]
        cos = np.einsum("ij,ij->i", a, b)
        sin = np.linalg.norm(np.cross(a, b), axis=1)
        ang[:, k] = np.arctan2(sin, cos)
    return ang


def boundary_vertices(mesh: TriMesh) -> np.ndarray:
    e = np.sort(mesh.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    mask = np.zeros(mesh.n_vertices, dtype=bool)
    mask[uniq[counts == 1].ravel()] = True
    return mask


def angle_deficits(mesh: TriMesh) -> np.ndarray:
    """Per-vertex angle deficit: 2pi (interior) or pi (boundary) minus the corner angle sum."""
    ang = _corner_angles(mesh.vertices, mesh.faces)
    total = np.bincount(mesh.faces.ravel(), weights=ang.ravel(), minlength=mesh.n_vertices)
    full = np.where(boundary_vertices(mesh), np.pi, 2 * np.pi)
    return full - total


def vertex_curvatures(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Discrete Gaussian and mean curvature per vertex.

    Gaussian curvature is the angle deficit over one third of the incident
    face area. Mean curvature is half the norm of the cotangent Laplacian of
    the position, signed positive where it points along the outward vertex
    normal.
    """
    v, f = mesh.vertices, mesh.faces
    V = len(v)
    areas = _face_areas(v, f)
    vert_area = np.bincount(f.ravel(), weights=np.repeat(areas / 3.0, 3), minlength=V)
    ang = _corner_angles(v, f)

    deficit = angle_deficits(mesh)
    lap = np.zeros((V, 3))
    for k in range(3):
        i, j = f[:, (k + 1) % 3], f[:, (k + 2) % 3]
        cot = 1.0 / np.tan(ang[:, k])
        d = cot[:, None] * (v[i] - v[j])
        np.add.at(lap, i, d)
        np.add.at(lap, j, -d)

    cr = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    vn = np.zeros((V, 3))
    for k in range(3):
        np.add.at(vn, f[:, k], cr)

    ok = vert_area > AREA_EPS
    used = np.zeros(V, dtype=bool)
    used[f.ravel()] = True
    if (used & ~ok).any():
        warnings.warn(f"{int((used & ~ok).sum())} vertices with zero-area region; curvature set to 0")
    gauss = np.zeros(V)
    mean = np.zeros(V)
    gauss[ok] = deficit[ok] / vert_area[ok]
    hn = lap[ok] / (2.0 * vert_area[ok, None])
    sign = np.sign(np.einsum("ij,ij->i", hn, vn[ok]))
    sign[sign == 0] = 1.0
    mean[ok] = 0.5 * np.linalg.norm(hn, axis=1) * sign
    return gauss, mean


def compute_face_features(mesh: TriMesh) -> np.ndarray:
    """(F, 8) features: centroid xyz, unit normal xyz, Gaussian and mean curvature."""
    gauss, mean = vertex_curvatures(mesh)
    f = mesh.faces
    out = np.empty((mesh.n_faces, FEATURE_DIM))
    out[:, 0:3] = face_centroids(mesh)
    out[:, 3:6] = face_normals(mesh)
    out[:, 6] = gauss[f].mean(axis=1)
    out[:, 7] = mean[f].mean(axis=1)
    return out


def build_face_graph(mesh: TriMesh) -> FaceGraph:
    adj, n_nm = face_adjacency(mesh)
    if n_nm:
        warnings.warn(f"{n_nm} non-manifold edges; all face pairs sharing them were connected")
    feats = compute_face_features(mesh)
    return FaceGraph(
        node_positions=_readonly(feats[:, :3]),
        node_features=_readonly(feats),
        adjacency=adj,
        non_manifold_edges=n_nm,
    )


def quantize_colors(colors) -> np.ndarray:
    """Map [0, 1] colors to 0..255 with round-half-up."""
    c = np.clip(np.asarray(colors, dtype=np.float64), 0.0, 1.0)
    return np.floor(c * 255.0 + 0.5).astype(np.int64)


def export_face_colors(mesh: TriMesh, colors, path) -> None:
    """Write an ASCII PLY with per-face ``red green blue`` properties."""
    colors = np.asarray(colors, dtype=np.float64)
    if colors.shape != (mesh.n_faces, 3):
        raise ValueError(
            f"colors length {len(colors)} does not match mesh with {mesh.n_faces} faces"
        )
    q = quantize_colors(colors)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {mesh.n_faces}",
        "property list uchar int vertex_indices",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [
        f"3 {a} {b} {c} {r} {g} {bl}"
        for (a, b, c), (r, g, bl) in zip(mesh.faces.tolist(), q.tolist())
    ]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_ply(path) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Read an ASCII PLY written by this package.

    Returns (vertices, faces or None, face colors in [0, 1] or None).
    """
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "ply":
        raise MeshError(f"{path}: not a PLY file")
    elements: list[tuple[str, int, list[str]]] = []
    i = 1
    while lines[i] != "end_header":
        tok = lines[i].split()
        if tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            elements[-1][2].append(tok[-1])
        i += 1
    i += 1
    verts = faces = colors = None
    for name, count, props in elements:
        rows = [ln.split() for ln in lines[i:i + count]]
        i += count
        if name == "vertex":
            verts = np.array([[float(x) for x in r[:3]] for r in rows]).reshape(-1, 3)
        elif name == "face":
            faces = np.array([[int(x) for x in r[1:4]] for r in rows], dtype=np.int64).reshape(-1, 3)
            if "red" in props:
                colors = np.array([[int(x) for x in r[4:7]] for r in rows]).reshape(-1, 3) / 255.0
    return verts, faces, colors


def write_point_ply(positions, path) -> None:
    """Vertex-only ASCII PLY (used for pooling-level point dumps)."""
    positions = np.asarray(positions, dtype=np.float64)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(positions)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in positions.tolist()]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
