"""Procedural meshes: test fixtures and the built-in toy training set."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def tetrahedron() -> TriMesh:
    s = 1.0 / np.sqrt(3.0)
    v = s * np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)
    f = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
    return TriMesh(v, f)


def cube_quads() -> tuple[np.ndarray, list[list[int]]]:
    v = np.array(
        [[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)],
        dtype=np.float64,
    )
    # outward-facing quads, indices into v = (x, y, z) bit order
    quads = [
        [0, 1, 3, 2],  # x-
        [4, 6, 7, 5],  # x+
        [0, 4, 5, 1],  # y-
        [2, 3, 7, 6],  # y+
        [0, 2, 6, 4],  # z-
        [1, 5, 7, 3],  # z+
    ]
    return v, quads


def cube() -> TriMesh:
    v, quads = cube_quads()
    f = [[q[0], q[k], q[k + 1]] for q in quads for k in (1, 2)]
    return TriMesh(v, f)


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> TriMesh:
    """Subdivided icosahedron with ``20 * 4**subdivisions`` outward-wound faces."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ]
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [list(np.asarray(p, dtype=np.float64) / np.linalg.norm(p)) for p in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = (np.asarray(verts[a]) + np.asarray(verts[b])) / 2.0
                verts.append(list(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new
    return TriMesh(radius * np.array(verts), faces)


def grid(n: int = 10, size: float = 1.0) -> TriMesh:
    """Flat ``n x n`` quad grid in the z=0 plane, split into ``2 n^2`` triangles."""
    xs = np.linspace(0.0, size, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    v = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], axis=1)
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    f = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            f += [[a, b, c], [a, c, d]]
    return TriMesh(v, f)


def two_triangles() -> TriMesh:
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]
    return TriMesh(v, [[0, 1, 2], [1, 3, 2]])


def bowtie_tetrahedra() -> TriMesh:
    """Two tetrahedra glued along one edge: that edge is shared by four faces."""
    v = np.array(
        [[0, 0, -0.5], [0, 0, 0.5], [0.8, 0.3, 0.0], [0.6, -0.6, 0.1],
         [-0.8, 0.35, 0.05], [-0.55, -0.6, -0.1]],
        dtype=np.float64,
    )
    f = [
        [0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2],
        [0, 4, 1], [0, 1, 5], [0, 5, 4], [1, 4, 5],
    ]
    return TriMesh(v, f)


def jitter(mesh: TriMesh, scale: float, seed: int) -> TriMesh:
    rng = np.random.default_rng(seed)
    return TriMesh(mesh.vertices + scale * rng.standard_normal(mesh.vertices.shape), mesh.faces)


def permute_faces(mesh: TriMesh, perm) -> TriMesh:
    return TriMesh(mesh.vertices, mesh.faces[np.asarray(perm)])


BUILTIN = {
    "tetrahedron": tetrahedron,
    "cube": cube,
    "icosphere1": lambda: icosphere(1),
    "icosphere2": lambda: icosphere(2),
    "icosphere3": lambda: icosphere(3),
    "bowtie": bowtie_tetrahedra,
}


def builtin(name: str) -> TriMesh:
    if name not in BUILTIN:
        raise KeyError(f"unknown builtin mesh {name!r}; choose from {sorted(BUILTIN)}")
    return BUILTIN[name]()
