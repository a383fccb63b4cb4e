"""Minimum-volume oriented bounding boxes.

The search evaluates a uniform sample of box orientations (modulo the
24 symmetries of a box), adds the orientations that put one box face
flush with a hull facet (solved exactly in-plane by rotating calipers),
then polishes the best candidate by coordinate descent on three small
Euler rotations with step halving.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import functools
import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..errors import DegenerateInput
from .hull import affine_rank, convex_hull
from .mesh import TriMesh
from .transform import matrix_to_quat, quat_to_matrix

HALF_EXTENT_FLOOR = 1e-9
DEFAULT_ANGULAR_STEP = math.radians(6.0)
REFINE_MIN_STEP = math.radians(0.1)


@dataclass(frozen=True, eq=False)
class Obb:
    center: np.ndarray
    half_extents: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        for name in ("center", "half_extents", "orientation"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if np.any(self.half_extents <= 0):
            raise ValueError("half extents must be positive")

    @property
    def axes(self):
        """3x3 matrix whose columns are the box axes in world coordinates."""
        return quat_to_matrix(self.orientation)

    @property
    def extents(self):
        return 2.0 * self.half_extents

    def volume(self):
        return float(8.0 * np.prod(self.half_extents))

    def longest_edge(self):
        return float(2.0 * self.half_extents.max())

    def to_local(self, points):
        return (np.asarray(points, dtype=float) - self.center) @ self.axes

    def contains(self, points, tol=1e-7):
        local = np.abs(self.to_local(points))
        return bool(np.all(local <= self.half_extents + tol))

    def corners(self):
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
        return self.center + (signs * self.half_extents) @ self.axes.T

    def to_dict(self):
        return {
            "center": self.center.tolist(),
            "half_extents": self.half_extents.tolist(),
            "quaternion": self.orientation.tolist(),
            "volume": self.volume(),
        }


def aabb_obb(points):
    pts = np.asarray(points, dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return Obb((lo + hi) / 2, np.maximum((hi - lo) / 2, HALF_EXTENT_FLOOR))


# ------------------------------------------------------------ orientation set


def _perp_basis(u):
    ref = np.zeros_like(u)
    # reference axis least aligned with u
    k = np.argmin(np.abs(u), axis=-1)
    np.put_along_axis(ref, k[..., None], 1.0, axis=-1)
    e1 = ref - (u * ref).sum(-1, keepdims=True) * u
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    return e1, np.cross(u, e1)


def orientation_samples(angular_step=DEFAULT_ANGULAR_STEP):
    """Rotation matrices (rows = box axes) covering box frames at ``angular_step``.

    Each matrix has columns ``v, w, u``: ``u`` runs over a Fibonacci cap
    of directions within ``acos(1/sqrt(3)) + step`` of +z and ``v`` over
    in-plane angles in ``[0, pi/2)``.  Up to the 24 symmetries of a box,
    every rotation lies within about ``0.8 * angular_step`` of a sample.
    """
    return _orientation_samples(float(angular_step)).copy()


@functools.lru_cache(maxsize=8)
def _orientation_samples(angular_step):
    cap = math.acos(1.0 / math.sqrt(3.0)) + angular_step
    z0 = math.cos(cap)
    n_dir = max(1, math.ceil(2.0 * math.pi * (1.0 - z0) / angular_step ** 2))
    i = np.arange(n_dir)
    z = 1.0 - (i + 0.5) / n_dir * (1.0 - z0)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    u = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    e1, e2 = _perp_basis(u)
    angles = np.arange(0.0, math.pi / 2, angular_step)
    ca, sa = np.cos(angles)[None, :, None], np.sin(angles)[None, :, None]
    v = ca * e1[:, None, :] + sa * e2[:, None, :]
    uu = np.broadcast_to(u[:, None, :], v.shape)
    w = np.cross(uu, v)
    rots = np.stack([v, w, uu], axis=2)  # columns v, w, u
    rots = rots.reshape(-1, 3, 3)
    rots.flags.writeable = False
    return rots


def _box_volumes(rots, pts, chunk=4096):
    out = np.empty(len(rots))
    for s in range(0, len(rots), chunk):
        r = rots[s:s + chunk]
        # one matrix product: (n, 3) x (3, 3k) -> projections on every axis
        proj = pts @ r.reshape(-1, 3).T
        ext = (proj.max(axis=0) - proj.min(axis=0)).reshape(len(r), 3)
        out[s:s + chunk] = np.prod(np.maximum(ext, 2 * HALF_EXTENT_FLOOR), axis=1)
    return out


def _volume(rot, pts):
    proj = pts @ rot.T
    ext = proj.max(axis=0) - proj.min(axis=0)
    return float(np.prod(np.maximum(ext, 2 * HALF_EXTENT_FLOOR)))


def _min_rect_2d(p2):
    """Rotating calipers: (area, angle) of the minimum-area rectangle."""
    try:
        hv = p2[ConvexHull(p2).vertices]
    except QhullError:
        hv = p2
    edges = np.roll(hv, -1, axis=0) - hv
    ang = np.unique(np.mod(np.arctan2(edges[:, 1], edges[:, 0]), math.pi / 2))
    c, s = np.cos(ang), np.sin(ang)
    x = hv[:, 0][None, :] * c[:, None] + hv[:, 1][None, :] * s[:, None]
    y = -hv[:, 0][None, :] * s[:, None] + hv[:, 1][None, :] * c[:, None]
    area = (x.max(1) - x.min(1)) * (y.max(1) - y.min(1))
    k = int(np.argmin(area))
    return float(area[k]), float(ang[k])


def _face_flush_candidates(pts, normals):
    out = []
    for n in normals:
        e1, e2 = _perp_basis(n[None, :])
        e1, e2 = e1[0], e2[0]
        p2 = np.stack([pts @ e1, pts @ e2], axis=1)
        _, ang = _min_rect_2d(p2)
        a = math.cos(ang) * e1 + math.sin(ang) * e2
        b = np.cross(n, a)
        out.append(np.stack([a, b, n]))
    return out


def _euler(a, b, c):
    ca, sa, cb, sb, cc, sc = math.cos(a), math.sin(a), math.cos(b), math.sin(b), math.cos(c), math.sin(c)
    rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rz = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
    return rz @ ry @ rx


def _refine(rot, pts, step, min_step=REFINE_MIN_STEP):
    best = _volume(rot, pts)
    angles = np.zeros(3)
    while step >= min_step:
        improved = True
        while improved:
            improved = False
            for k in range(3):
                for sign in (1.0, -1.0):
                    trial = angles.copy()
                    trial[k] += sign * step
                    r = _euler(*trial) @ rot
                    v = _volume(r, pts)
                    if v < best * (1 - 1e-12):
                        best, angles, improved = v, trial, True
                        break
        step /= 2.0
    return _euler(*angles) @ rot, best


def min_obb(mesh, angular_step=DEFAULT_ANGULAR_STEP):
    """Approximate minimum-volume oriented bounding box of a mesh or point set.

    Parameters
    ----------
    mesh : TriMesh or (n, 3) array_like
    angular_step : float
        Orientation sampling resolution in radians, in ``(0, pi/4]``.

    Raises
    ------
    DegenerateInput
        If the input has zero extent along two or more directions.
    """
    if not 0.0 < angular_step <= math.pi / 4 + 1e-12:
        raise ValueError("angular_step must lie in (0, pi/4]")
    pts = mesh.vertices if isinstance(mesh, TriMesh) else np.asarray(mesh, dtype=float).reshape(-1, 3)
    rank = affine_rank(pts)
    if rank < 2:
        raise DegenerateInput("point set has zero extent along two or more axes")
    if rank == 3:
        hull = convex_hull(pts)
        hp = hull.vertices
        normals = np.unique(np.round(hull.face_normals(), 12), axis=0)
    else:
        hp = np.unique(pts, axis=0)
        centered = hp - hp.mean(axis=0)
        normals = np.linalg.svd(centered)[2][2:3]

    # work about the centroid for conditioning
    origin = hp.mean(axis=0)
    local = hp - origin

    cands = [np.eye(3)]
    cands += _face_flush_candidates(local, normals)
    cands = np.concatenate([np.array(cands), _orientation_samples(float(angular_step))])
    vols = _box_volumes(cands, local)
    k = int(np.argmin(vols))
    rot, _ = _refine(cands[k], local, angular_step)

    proj = local @ rot.T
    lo, hi = proj.min(axis=0), proj.max(axis=0)
    half = np.maximum((hi - lo) / 2.0, HALF_EXTENT_FLOOR)
    axes = rot.T
    if np.linalg.det(axes) < 0:
        axes[:, 2] *= -1
        lo[2], hi[2] = -hi[2], -lo[2]
    center = origin + axes @ ((lo + hi) / 2.0)
    return Obb(center, half, matrix_to_quat(axes))
