"""Greedy insertion of rigid groups into a fixed-base, variable-height box.

The box is a voxel grid over the base ``W x D`` that grows upward.  Each
group is placed in one of the 24 axis-aligned orientations of its OBB
frame by three rules, tried in order:

1. If some hole (6-connected empty region below ``h``) contains the
   group's voxel block, use the hole whose volume is closest to the
   group's, lowest position first.
2. Otherwise, among collision-free positions that keep ``h``, minimise
   the empty cells left beneath the group.
3. Otherwise raise ``h`` as little as possible.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import json
import math

import numpy as np
from scipy import ndimage
from scipy.signal import fftconvolve

from .errors import DoesNotFit, EmptyLayout
from .geometry.mesh import TriMesh, box_mesh
from .geometry.transform import RigidTransform, matrix_to_quat
from .geometry.voxel import VoxelGrid, voxelize

GRID_DIVISIONS = 64
TRIAL_GRID_DIVISIONS = 32
# extents within this many cells of a whole count round down
CELL_ROUND_TOL = 1e-6
_SIX = ndimage.generate_binary_structure(3, 1)


def _orientation_matrices():
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            m = np.zeros((3, 3))
            for row, (col, s) in enumerate(zip(perm, signs)):
                m[row, col] = s
            if np.linalg.det(m) > 0:
                mats.append(m)
    return mats


ORIENTATIONS = tuple(_orientation_matrices())  # identity first


@dataclass(frozen=True)
class BoxSpec:
    base_w: float
    base_d: float
    cell_size: float | None = None

    def __post_init__(self):
        if self.base_w <= 0 or self.base_d <= 0:
            raise ValueError("box base dimensions must be positive")
        if self.cell_size is None:
            object.__setattr__(self, "cell_size", min(self.base_w, self.base_d) / GRID_DIVISIONS)
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if self.base_w < self.cell_size or self.base_d < self.cell_size:
            raise ValueError("base dimensions must be at least one cell")

    @classmethod
    def trial(cls, base_w, base_d):
        return cls(base_w, base_d, min(base_w, base_d) / TRIAL_GRID_DIVISIONS)

    @property
    def grid_xy(self):
        return (math.ceil(self.base_w / self.cell_size - CELL_ROUND_TOL), math.ceil(self.base_d / self.cell_size - CELL_ROUND_TOL))

    def to_dict(self):
        return {"base_w": self.base_w, "base_d": self.base_d, "cell_size": self.cell_size}


@dataclass(eq=False)
class Footprint:
    """Voxel image of a group in one orientation, tight to its rotated AABB."""

    occupancy: np.ndarray
    rotation: np.ndarray  # group frame -> oriented frame
    offset: np.ndarray  # rotated AABB minimum corner

    @property
    def dims(self):
        return self.occupancy.shape

    @property
    def cells(self):
        return int(self.occupancy.sum())

    @property
    def column_bottoms(self):
        """Lowest occupied z per (x, y) column, -1 where the column is empty."""
        occ = self.occupancy
        any_ = occ.any(axis=2)
        return np.where(any_, occ.argmax(axis=2), -1)

    def as_grid(self, cell_size):
        return VoxelGrid(self.offset, cell_size, self.dims, self.occupancy)


@dataclass(frozen=True, eq=False)
class Placement:
    group_index: int
    orientation: int
    quaternion: np.ndarray
    translation: np.ndarray
    cell_anchor: tuple
    rule: int
    footprint: Footprint = field(repr=False, default=None)

    @property
    def transform(self):
        return RigidTransform(self.quaternion, self.translation)


@dataclass(frozen=True)
class Hole:
    cells: np.ndarray
    volume: float
    anchor: tuple

    @property
    def count(self):
        return len(self.cells)


def group_frame(group):
    """Rigid map from the group's assembly frame into its OBB frame."""
    obb = group.obb
    axes = obb.axes
    return RigidTransform(matrix_to_quat(axes.T), -(axes.T @ obb.center))


def footprint(group, orientation, cell_size):
    """Conservative voxel image of ``group`` in orientation ``orientation`` (index or matrix)."""
    rot_o = ORIENTATIONS[orientation] if np.ndim(orientation) == 0 else np.asarray(orientation, dtype=float)
    frame = group_frame(group)
    rot = rot_o @ frame.matrix
    shift = rot_o @ frame.translation
    meshes = [TriMesh(m.vertices @ rot.T + shift, m.triangles, validate=False) for m in group.meshes]
    allv = np.concatenate([m.vertices for m in meshes])
    lo, hi = allv.min(axis=0), allv.max(axis=0)
    dims = tuple(max(1, math.ceil((h - l) / cell_size - CELL_ROUND_TOL)) for l, h in zip(lo, hi))
    occ = np.zeros(dims, dtype=bool)
    for m in meshes:
        occ |= voxelize(m, lo, cell_size, dims).occupancy
    return Footprint(occ, rot, lo)


def _correlate(a, kernel):
    """Valid-mode cross-correlation rounded to integers."""
    if a.size == 0 or kernel.size == 0:
        return np.zeros(tuple(max(0, s - k + 1) for s, k in zip(a.shape, kernel.shape)))
    out = fftconvolve(a.astype(float), kernel[::-1, ::-1, ::-1].astype(float), mode="valid")
    return np.rint(out)


class PackingLayout:
    """Box state: occupancy, claim map, current height and placements."""

    def __init__(self, box: BoxSpec):
        self.box = box
        nx, ny = box.grid_xy
        self.claims = np.full((nx, ny, 0), -1, dtype=np.int32)
        self.placements = []
        self.groups = []
        self.heights = []

    @property
    def occupancy(self):
        return self.claims >= 0

    @property
    def height_cells(self):
        occ = self.occupancy
        if not occ.any():
            return 0
        return int(np.flatnonzero(occ.any(axis=(0, 1))).max()) + 1

    @property
    def h(self):
        return self.height_cells * self.box.cell_size

    @property
    def grid(self):
        hz = max(self.height_cells, 1)
        return VoxelGrid(np.zeros(3), self.box.cell_size, (*self.claims.shape[:2], hz), self.occupancy[:, :, :hz])

    def _ensure_height(self, z):
        nx, ny, nz = self.claims.shape
        if z > nz:
            extra = np.full((nx, ny, z - nz), -1, dtype=np.int32)
            self.claims = np.concatenate([self.claims, extra], axis=2)

    def add(self, group, placement):
        fp = placement.footprint
        ax, ay, az = placement.cell_anchor
        fx, fy, fz = fp.dims
        self._ensure_height(az + fz)
        window = self.claims[ax:ax + fx, ay:ay + fy, az:az + fz]
        if np.any(window[fp.occupancy] >= 0):
            raise AssertionError("placement overlaps occupied cells")
        window[fp.occupancy] = len(self.placements)
        self.placements.append(placement)
        self.groups.append(group)
        self.heights.append(self.h)

    def material_volume(self):
        return sum(g.material_volume for g in self.groups)

    def part_poses(self):
        """World pose of every placed part, keyed by part id."""
        out = {}
        for g, p in zip(self.groups, self.placements):
            t = p.transform
            for pid, pose in g.part_poses.items():
                out[pid] = t.compose(pose)
        return out

    def to_dict(self):
        return {
            "box": self.box.to_dict(),
            "h": self.h,
            "utilization": utilization(self) if self.placements else 0.0,
            "placements": [
                {
                    "group_index": p.group_index,
                    "part_ids": list(g.part_ids),
                    "quaternion": p.quaternion.tolist(),
                    "translation": p.translation.tolist(),
                }
                for g, p in zip(self.groups, self.placements)
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def sort_groups(groups):
    """Longest OBB edge first, then larger OBB volume, then part ids."""
    return sorted(groups, key=lambda g: (-g.obb.longest_edge(), -g.obb.volume(), tuple(sorted(g.part_ids))))


def find_holes(layout: PackingLayout):
    """6-connected empty regions strictly below the current height."""
    hz = layout.height_cells
    if hz == 0:
        return []
    empty = ~layout.occupancy[:, :, :hz]
    labels, n = ndimage.label(empty, structure=_SIX)
    cell3 = layout.box.cell_size ** 3
    holes = []
    for k in range(1, n + 1):
        cells = np.argwhere(labels == k)
        order = np.lexsort((cells[:, 0], cells[:, 1], cells[:, 2]))
        first = cells[order[0]]
        holes.append(Hole(cells, len(cells) * cell3, tuple(int(c) for c in first)))
    holes.sort(key=lambda h: (h.anchor[2], h.anchor[1], h.anchor[0]))
    return holes


def fits_base(group, box: BoxSpec, orientations=range(24)):
    nx, ny = box.grid_xy
    return any(
        fp.dims[0] <= nx and fp.dims[1] <= ny
        for fp in (footprint(group, o, box.cell_size) for o in orientations)
    )


def _footprints(group, orientations, cell_size, cache):
    """Footprints per orientation, memoised on the group when it carries a cache."""
    own = getattr(group, "footprints", None)
    out = []
    for o in orientations:
        store, key = (own, (o, cell_size)) if own is not None else (cache, (id(group), o, cell_size))
        fp = None if store is None else store.get(key)
        if fp is None:
            fp = footprint(group, o, cell_size)
            if store is not None:
                store[key] = fp
        out.append((o, fp))
    return out


def place_group(layout: PackingLayout, group, orientations=range(24), group_index=0, cache=None):
    """Choose a placement for ``group`` by the three insertion rules.

    Does not modify ``layout``.  Ties inside a rule go to the lowest z,
    then y, then x of the anchor cell, then the lowest orientation index.
    """
    box = layout.box
    nx, ny = box.grid_xy
    hz = layout.height_cells
    occ = layout.occupancy
    fps = [(o, fp) for o, fp in _footprints(group, orientations, box.cell_size, cache)
           if fp.dims[0] <= nx and fp.dims[1] <= ny]
    if not fps:
        raise DoesNotFit(f"group {list(group.part_ids)} does not fit the box base", group_id=group_index)

    holes_lab, n_holes, hole_sizes = None, 0, None
    if hz > 0:
        holes_lab, n_holes = ndimage.label(~occ[:, :, :hz], structure=_SIX)
        hole_sizes = np.bincount(holes_lab.ravel(), minlength=n_holes + 1)
        empty = ~occ[:, :, :hz]
        # empty cells strictly below each cell of a column
        below = np.concatenate([np.zeros((nx, ny, 1)), np.cumsum(empty, axis=2)[:, :, :-1]], axis=2)

    best = {1: None, 2: None, 3: None}

    def offer(rule, key, o, fp, anchor):
        if best[rule] is None or key < best[rule][0]:
            best[rule] = (key, o, fp, anchor)

    for o, fp in fps:
        fx, fy, fz = fp.dims
        space = np.zeros((nx, ny, hz + fz), dtype=bool)
        space[:, :, :hz] = occ[:, :, :hz]
        coll = _correlate(space, fp.occupancy) if hz > 0 else np.zeros((nx - fx + 1, ny - fy + 1, fz + 1))
        coll = coll[:, :, :hz + 1]
        free = coll == 0

        # rule 3 always has candidates: on top at az = hz
        new_h = np.maximum(hz, np.arange(hz + 1) + fz)
        cand = np.argwhere(free)
        keys = np.stack([new_h[cand[:, 2]], cand[:, 2], cand[:, 1], cand[:, 0]], axis=1)
        k = np.lexsort(keys.T[::-1])[0]
        offer(3, (tuple(int(v) for v in keys[k]), o), o, fp, tuple(int(v) for v in cand[k]))

        if hz == 0 or fz > hz:
            continue
        keep = free[:, :, :hz - fz + 1]
        if not keep.any():
            continue

        # rule 1: the footprint's whole block lies inside one hole
        block = np.ones(fp.dims)
        for lab in range(1, n_holes + 1):
            if hole_sizes[lab] < fx * fy * fz:
                continue
            inside = _correlate(holes_lab == lab, block) == fx * fy * fz
            pos = np.argwhere(inside & keep)
            if len(pos):
                diff = abs(int(hole_sizes[lab]) - fp.cells)
                keys = np.stack([pos[:, 2], pos[:, 1], pos[:, 0]], axis=1)
                k = np.lexsort(keys.T[::-1])[0]
                offer(1, ((diff,) + tuple(int(v) for v in keys[k]), o), o, fp, tuple(int(v) for v in pos[k]))

        # rule 2: minimise empty cells beneath each footprint column
        bottoms = fp.column_bottoms
        depth = int(bottoms.max()) + 1
        kern = np.zeros((fx, fy, depth))
        ii, jj = np.nonzero(bottoms >= 0)
        kern[ii, jj, bottoms[ii, jj]] = 1.0
        under = _correlate(below, kern)[:, :, :hz - fz + 1]
        pos = np.argwhere(keep)
        keys = np.stack([under[pos[:, 0], pos[:, 1], pos[:, 2]].astype(np.int64), pos[:, 2], pos[:, 1], pos[:, 0]], axis=1)
        k = np.lexsort(keys.T[::-1])[0]
        offer(2, (tuple(int(v) for v in keys[k]), o), o, fp, tuple(int(v) for v in pos[k]))

    rule = 1 if best[1] else 2 if best[2] else 3
    _, o, fp, anchor = best[rule]
    frame = group_frame(group)
    rot_o = ORIENTATIONS[o]
    world_rot = fp.rotation
    trans = rot_o @ frame.translation - fp.offset + np.asarray(anchor, dtype=float) * box.cell_size
    return Placement(group_index, o, matrix_to_quat(world_rot), trans, anchor, rule, fp)


def pack_all(groups, box: BoxSpec, orientations=range(24), cache=None):
    """Insert ``groups`` one by one in :func:`sort_groups` order."""
    layout = PackingLayout(box)
    cache = {} if cache is None else cache
    index = {id(g): i for i, g in enumerate(groups)}
    for g in sort_groups(groups):
        p = place_group(layout, g, orientations, group_index=index[id(g)], cache=cache)
        layout.add(g, p)
    return layout


def utilization(layout: PackingLayout):
    if not layout.placements:
        raise EmptyLayout("no groups placed")
    b = layout.box
    return layout.material_volume() / (b.base_w * b.base_d * layout.h)


def scene_meshes(layout: PackingLayout):
    """(names, meshes) of every placed part in box coordinates."""
    names, meshes = [], []
    poses = layout.part_poses()
    for g in layout.groups:
        for pid in g.part_ids:
            mesh = g.part_meshes[pid]
            t = poses[pid]
            names.append(pid)
            meshes.append(TriMesh(t.apply(mesh.vertices), mesh.triangles, validate=False))
    return names, meshes


def box_wireframe_obj(layout: PackingLayout):
    """OBJ text with the box edges as ``l`` elements."""
    b = layout.box
    corners = box_mesh((b.base_w, b.base_d, max(layout.h, b.cell_size))).vertices
    lines = ["o box"] + ["v {:.9g} {:.9g} {:.9g}".format(*c) for c in corners]
    edges = [(1, 2), (2, 3), (3, 4), (4, 1), (5, 6), (6, 7), (7, 8), (8, 5), (1, 5), (2, 6), (3, 7), (4, 8)]
    lines += [f"l {a} {b_}" for a, b_ in edges]
    return "\n".join(lines) + "\n"
