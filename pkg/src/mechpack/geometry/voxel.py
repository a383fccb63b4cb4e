"""Regular occupancy grids and conservative solid voxelization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NotWatertight

# perturbation of the +x ray origin used when a ray grazes an edge or vertex
RAY_JITTER = np.array([1e-7, 2e-7, 3e-7])
_EDGE_TOL = 1e-12
_CELL_SHRINK = 1e-6


@dataclass(eq=False)
class VoxelGrid:
    """Dense boolean occupancy over ``dims`` cells of edge ``cell_size``.

    ``occupancy[i, j, k]`` is the cell whose minimum corner sits at
    ``origin + cell_size * (i, j, k)``.
    """

    origin: np.ndarray
    cell_size: float
    dims: tuple
    occupancy: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.dims = tuple(int(d) for d in self.dims)
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if any(d <= 0 for d in self.dims):
            raise ValueError("dims must be positive")
        self.occupancy = np.asarray(self.occupancy, dtype=bool)
        if self.occupancy.shape != self.dims:
            raise ValueError(f"occupancy shape {self.occupancy.shape} != dims {self.dims}")

    @classmethod
    def empty(cls, origin, cell_size, dims):
        return cls(origin, cell_size, dims, np.zeros(tuple(dims), dtype=bool))

    def count(self):
        return int(self.occupancy.sum())

    def occupied_volume(self):
        return self.count() * self.cell_size ** 3

    def cell_centers(self):
        idx = np.indices(self.dims).reshape(3, -1).T
        return self.origin + (idx + 0.5) * self.cell_size


def _yz_edge_functions(p, c):
    """Signed 2D edge functions of points ``p`` (..., 2) against triangles ``c`` (..., 3, 2)."""
    e = []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        pa, pb = c[..., a, :], c[..., b, :]
        e.append((pb[..., 0] - pa[..., 0]) * (p[..., 1] - pa[..., 1])
                 - (pb[..., 1] - pa[..., 1]) * (p[..., 0] - pa[..., 0]))
    return np.stack(e, axis=-1)


def _crossings(p_yz, corners):
    """For each (point, triangle) pair: whether the +x line hits, the hit x, and degeneracy."""
    tri_yz = corners[:, :, 1:]
    e = _yz_edge_functions(p_yz[:, None, :], tri_yz[None, :, :, :])
    scale = np.abs(tri_yz).max() + 1.0
    tol = _EDGE_TOL * scale * scale
    # triangles seen edge-on by the ray contribute no crossing
    area2 = _yz_edge_functions(tri_yz[:, 2, :], tri_yz)[..., 0]
    flat = np.abs(area2) <= tol
    pos = np.all(e > tol, axis=-1)
    neg = np.all(e < -tol, axis=-1)
    hit = (pos | neg) & ~flat[None, :]
    near = np.any(np.abs(e) <= tol, axis=-1) & np.all(e >= -tol, axis=-1)
    near |= np.any(np.abs(e) <= tol, axis=-1) & np.all(e <= tol, axis=-1)
    degenerate = near & ~flat[None, :]
    # x of the supporting plane along each line
    v0 = corners[:, 0]
    n = np.cross(corners[:, 1] - v0, corners[:, 2] - v0)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = v0[:, 0][None, :] - (
            n[:, 1][None, :] * (p_yz[:, None, 0] - v0[:, 1][None, :])
            + n[:, 2][None, :] * (p_yz[:, None, 1] - v0[:, 2][None, :])
        ) / n[:, 0][None, :]
    return hit, x, degenerate


def points_inside(mesh, points, chunk=512):
    """Parity ray-casting inside test along +x for a closed mesh."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    corners = mesh.corners
    out = np.zeros(len(pts), dtype=bool)
    for s in range(0, len(pts), chunk):
        p = pts[s:s + chunk]
        hit, x, deg = _crossings(p[:, 1:], corners)
        inside = (np.sum(hit & (x > p[:, 0:1]), axis=1) % 2) == 1
        bad = np.flatnonzero(deg.any(axis=1))
        if len(bad):
            q = p[bad] + RAY_JITTER
            hit2, x2, _ = _crossings(q[:, 1:], corners)
            inside[bad] = (np.sum(hit2 & (x2 > q[:, 0:1]), axis=1) % 2) == 1
        out[s:s + chunk] = inside
    return out


def _interior_cells(mesh, origin, cell, dims):
    nx, ny, nz = dims
    jj, kk = np.meshgrid(np.arange(ny), np.arange(nz), indexing="ij")
    cols = np.stack([jj.ravel(), kk.ravel()], axis=1)
    yz = origin[1:] + (cols + 0.5) * cell
    corners = mesh.corners
    # only triangles whose yz-extent can cover some column centre matter
    lo = corners[:, :, 1:].min(axis=1)
    hi = corners[:, :, 1:].max(axis=1)
    keep = np.all(hi >= origin[1:], axis=1) & np.all(lo <= origin[1:] + np.array([ny, nz]) * cell, axis=1)
    corners = corners[keep]
    counts = np.zeros((nx + 1, ny, nz), dtype=np.int64)
    if len(corners) == 0:
        return np.zeros(dims, dtype=bool)

    def accumulate(col_idx, yz_pts, x_shift):
        for s in range(0, len(col_idx), 256):
            ci = col_idx[s:s + 256]
            hit, x, deg = _crossings(yz_pts[s:s + 256], corners)
            r, t = np.nonzero(hit)
            # cells whose (shifted) centre lies below the hit gain a crossing
            xc = (x[r, t] - x_shift - origin[0]) / cell - 0.5
            upto = np.clip(np.ceil(xc), 0, nx).astype(np.int64)
            np.add.at(counts, (np.zeros_like(upto), cols[ci[r], 0], cols[ci[r], 1]), 1)
            np.add.at(counts, (upto, cols[ci[r], 0], cols[ci[r], 1]), -1)
            yield ci[deg.any(axis=1)]

    all_idx = np.arange(len(cols))
    bad = np.concatenate(list(accumulate(all_idx, yz, 0.0)) or [np.zeros(0, dtype=np.int64)])
    if len(bad):
        # redo grazing columns with a jittered ray
        counts[:, cols[bad, 0], cols[bad, 1]] = 0
        for _ in accumulate(bad, yz[bad] + RAY_JITTER[1:], RAY_JITTER[0]):
            pass
    return (np.cumsum(counts, axis=0)[:nx] % 2) == 1


def _tri_box_overlap(tri, centers, half):
    """Separating-axis test of one triangle against many axis-aligned cubes."""
    v = tri[None, :, :] - centers[:, None, :]  # (C, 3, 3)
    # box face normals
    sep = np.any(v.min(axis=1) > half, axis=1) | np.any(v.max(axis=1) < -half, axis=1)
    f = np.array([tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2]])
    n = np.cross(f[0], f[1])
    d = v[:, 0, :] @ n
    sep |= np.abs(d) > half * np.abs(n).sum()
    eye = np.eye(3)
    for i in range(3):
        for j in range(3):
            a = np.cross(eye[i], f[j])
            if not a.any():
                continue
            p = v @ a
            r = half * np.abs(a).sum()
            sep |= (p.min(axis=1) > r) | (p.max(axis=1) < -r)
    return ~sep


def _surface_cells(mesh, origin, cell, dims):
    occ = np.zeros(dims, dtype=bool)
    half = 0.5 * cell * (1.0 - _CELL_SHRINK)
    dims_arr = np.array(dims)
    for tri in mesh.corners:
        lo = np.floor((tri.min(axis=0) - origin) / cell).astype(int)
        hi = np.floor((tri.max(axis=0) - origin) / cell).astype(int)
        lo = np.clip(lo, 0, dims_arr - 1)
        hi = np.clip(hi, 0, dims_arr - 1)
        if np.any(tri.max(axis=0) < origin) or np.any(tri.min(axis=0) > origin + dims_arr * cell):
            continue
        idx = np.stack(np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij"), -1).reshape(-1, 3)
        centers = origin + (idx + 0.5) * cell
        # cheap plane-slab test first; tilted triangles have large AABBs
        n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        near = np.abs((centers - tri[0]) @ n) <= half * np.abs(n).sum()
        idx, centers = idx[near], centers[near]
        hit = _tri_box_overlap(tri, centers, half)
        occ[tuple(idx[hit].T)] = True
    return occ


def voxelize(mesh, origin, cell_size, dims):
    """Conservative solid voxelization.

    A cell is occupied when its centre is inside the mesh or a triangle
    passes through its interior.  Raises NotWatertight for open meshes.
    """
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    if not mesh.is_watertight():
        raise NotWatertight("voxelization needs a closed mesh")
    origin = np.asarray(origin, dtype=float)
    dims = tuple(int(d) for d in dims)
    occ = _interior_cells(mesh, origin, float(cell_size), dims)
    occ |= _surface_cells(mesh, origin, float(cell_size), dims)
    return VoxelGrid(origin, float(cell_size), dims, occ)
