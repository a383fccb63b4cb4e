"""Indexed triangle meshes, OBJ input/output and basic measures."""
from __future__ import annotations

import io
import os

import numpy as np

from ..errors import InvalidMesh, NotWatertight, ObjParseError
from .transform import RigidTransform

MIN_TRIANGLE_AREA = 1e-12


class TriMesh:
    """Immutable indexed triangle surface.

    Parameters
    ----------
    vertices : (n, 3) array_like of float
    triangles : (m, 3) array_like of int
    validate : bool
        Check index bounds, repeated indices and degenerate faces.
    """

    __slots__ = ("vertices", "triangles")

    def __init__(self, vertices, triangles, validate=True):
        v = np.array(vertices, dtype=float).reshape(-1, 3)
        f = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if validate:
            _check_mesh(v, f)
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", f)

    def __setattr__(self, name, value):
        raise AttributeError("TriMesh is immutable")

    def __repr__(self):
        return f"TriMesh({len(self.vertices)} vertices, {len(self.triangles)} triangles)"

    @property
    def corners(self):
        """(m, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    def aabb(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def aabb_volume(self):
        lo, hi = self.aabb()
        return float(np.prod(hi - lo))

    def triangle_areas(self):
        c = self.corners
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    def surface_area(self):
        return float(self.triangle_areas().sum())

    def face_normals(self):
        c = self.corners
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def is_watertight(self):
        return _edge_manifold(self.triangles)


def _check_mesh(v, f):
    if len(f) == 0:
        return
    if f.min() < 0 or f.max() >= len(v):
        raise InvalidMesh("triangle index out of range")
    if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
        raise InvalidMesh("triangle with repeated vertex index")
    c = v[f]
    area = 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)
    bad = np.flatnonzero(area <= MIN_TRIANGLE_AREA)
    if len(bad):
        raise InvalidMesh(f"degenerate triangle {int(bad[0])} (area {area[bad[0]]:.3g})")


def _edge_manifold(f):
    """Every directed edge appears once and its reverse appears once."""
    if len(f) == 0:
        return False
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    n = int(f.max()) + 1
    fwd = e[:, 0] * n + e[:, 1]
    rev = e[:, 1] * n + e[:, 0]
    uniq, counts = np.unique(fwd, return_counts=True)
    if np.any(counts != 1):
        return False
    return bool(np.all(np.isin(rev, uniq, assume_unique=False)))


def transform_mesh(mesh, t: RigidTransform):
    return TriMesh(t.apply(mesh.vertices), mesh.triangles, validate=False)


def mesh_volume(mesh):
    """Signed enclosed volume by the divergence theorem.

    Raises NotWatertight unless every edge is shared by exactly two
    oppositely wound triangles.
    """
    if not mesh.is_watertight():
        raise NotWatertight("mesh is not a closed, consistently oriented surface")
    c = mesh.corners
    # shift to the centroid to limit cancellation
    c = c - mesh.vertices.mean(axis=0)
    return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)


def merge_meshes(meshes):
    verts, tris, off = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + off)
        off += len(m.vertices)
    return TriMesh(np.concatenate(verts), np.concatenate(tris), validate=False)


# ---------------------------------------------------------------- primitives


def box_mesh(size=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    """Axis-aligned box ``[origin, origin + size]`` with outward winding."""
    sx, sy, sz = size
    ox, oy, oz = origin
    v = np.array([
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
    ], dtype=float) * [sx, sy, sz] + [ox, oy, oz]
    f = [
        [0, 2, 1], [0, 3, 2],  # z-
        [4, 5, 6], [4, 6, 7],  # z+
        [0, 1, 5], [0, 5, 4],  # y-
        [3, 7, 6], [3, 6, 2],  # y+
        [0, 4, 7], [0, 7, 3],  # x-
        [1, 2, 6], [1, 6, 5],  # x+
    ]
    return TriMesh(v, f)


def icosphere(radius=1.0, subdivisions=2, center=(0.0, 0.0, 0.0)):
    t = (1.0 + 5 ** 0.5) / 2.0
    v = [
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ]
    f = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [np.array(p, dtype=float) / np.linalg.norm(p) for p in v]
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                p = verts[i] + verts[j]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = nf
    return TriMesh(np.array(verts) * radius + np.asarray(center, dtype=float), f)


# ----------------------------------------------------------------------- OBJ


def parse_obj(text):
    """Parse ``v``/``f`` records; other records are ignored.

    Polygons are fan-triangulated and negative indices resolve relative
    to the vertices read so far.
    """
    verts, tris = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "v":
                if len(parts) < 4:
                    raise ValueError("vertex needs 3 coordinates")
                verts.append([float(x) for x in parts[1:4]])
            elif tag == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    if i < 0:
                        i = len(verts) + i
                    else:
                        i -= 1
                    if not 0 <= i < len(verts):
                        raise ValueError(f"face index {tok} out of range")
                    idx.append(i)
                if len(idx) < 3:
                    raise ValueError("face needs at least 3 vertices")
                for k in range(1, len(idx) - 1):
                    tris.append([idx[0], idx[k], idx[k + 1]])
        except ValueError as exc:
            raise ObjParseError(f"line {lineno}: {exc}") from None
    if not verts or not tris:
        raise ObjParseError("no geometry found")
    try:
        return TriMesh(verts, tris)
    except InvalidMesh as exc:
        raise ObjParseError(str(exc)) from None


def load_obj(path):
    with open(path, encoding="utf-8") as fh:
        return parse_obj(fh.read())


def format_obj(meshes, names=None):
    """OBJ text for one or more meshes, 9 significant digits."""
    if isinstance(meshes, TriMesh):
        meshes = [meshes]
    out = io.StringIO()
    off = 1
    for k, m in enumerate(meshes):
        if names is not None:
            out.write(f"o {names[k]}\n")
        for p in m.vertices:
            out.write("v {:.9g} {:.9g} {:.9g}\n".format(*p))
        for a, b, c in m.triangles + off:
            out.write(f"f {a} {b} {c}\n")
        off += len(m.vertices)
    return out.getvalue()


def save_obj(path, meshes, names=None):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_obj(meshes, names))
