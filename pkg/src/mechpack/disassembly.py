"""Hierarchical disassembly: joint cuts, per-group OBB minimisation, BFS selection."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import json
import logging
import os

import numpy as np

from .errors import DoesNotFit, GroupTooLarge, LoopClosureViolation, NoAdmissibleConfiguration
from .geometry.intersect import DEFAULT_EPS
from .geometry.mesh import mesh_volume, transform_mesh
from .geometry.obb import DEFAULT_ANGULAR_STEP, min_obb
from .mechanism import (
    Configuration,
    GroupSkeleton,
    Mechanism,
    check_slippable,
    forward_kinematics,
    split_by_joints,
)
from .packing import BoxSpec, fits_base, pack_all

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerSettings:
    angular_step: float = DEFAULT_ANGULAR_STEP
    param_steps: int = 32
    eps: float = DEFAULT_EPS
    max_sweeps: int = 10
    rel_tol: float = 1e-3
    zoom_levels: int = 3
    zoom_points: int = 4


@dataclass(frozen=True)
class SearchCriteria:
    max_groups: int = 3
    target_efficiency: float = 1.0
    beam_width: int = 4
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    trial_cell: float | None = None

    def __post_init__(self):
        if self.max_groups < 1:
            raise ValueError("max_groups must be >= 1")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if not 0.0 <= self.target_efficiency <= 1.0:
            raise ValueError("target_efficiency must lie in [0, 1]")


@dataclass(eq=False)
class Group:
    """Connected part set at an optimised internal configuration.

    Geometry is expressed in the group frame: the group root keeps its
    rest pose.
    """

    part_ids: tuple
    internal_joints: tuple
    config: Configuration
    obb: object
    part_poses: dict  # part id -> RigidTransform (part-local -> group frame)
    part_meshes: dict  # part id -> part-local TriMesh
    material_volume: float
    pose: object = None
    footprints: dict = field(default_factory=dict, repr=False)  # (orientation, cell) -> Footprint

    @property
    def meshes(self):
        return [transform_mesh(self.part_meshes[p], self.part_poses[p]) for p in self.part_ids]

    def volume(self):
        return self.obb.volume()

    def to_dict(self):
        return {
            "part_ids": list(self.part_ids),
            "internal_joints": list(self.internal_joints),
            "config": self.config.to_dict(),
            "obb": self.obb.to_dict(),
        }


@dataclass(eq=False)
class HierarchyNode:
    cut: tuple
    groups: list
    parent_cut: tuple | None = None
    efficiency: float | None = None
    trial_h: float | None = None

    @property
    def total_volume(self):
        return float(sum(g.obb.volume() for g in self.groups))

    @property
    def level(self):
        return len(self.cut)

    def rank_key(self):
        return (self.total_volume, self.cut)

    def to_dict(self):
        return {
            "cut": list(self.cut),
            "parent_cut": None if self.parent_cut is None else list(self.parent_cut),
            "groups": [g.to_dict() for g in self.groups],
            "group_obb_volumes": [g.obb.volume() for g in self.groups],
            "total_volume": self.total_volume,
            "trial_efficiency": self.efficiency,
            "trial_h": self.trial_h,
        }


class GroupOptimizer:
    """Memoised per-group OBB minimisation for one mechanism."""

    def __init__(self, mechanism: Mechanism, settings: OptimizerSettings | None = None):
        self.m = mechanism
        self.settings = settings or OptimizerSettings()
        self._groups = {}
        self._volumes = {}
        self._part_volumes = {p.id: mesh_volume(p.mesh) for p in mechanism.parts}

    def evaluate(self, skel: GroupSkeleton, config: Configuration):
        """OBB volume at ``config``, or None when the configuration is inadmissible."""
        key = (skel.part_ids, config.key())
        if key in self._volumes:
            return self._volumes[key]
        vol = None
        try:
            bad = check_slippable(self.m, config, self.settings.eps, skel.part_ids, skel.joint_ids)
        except LoopClosureViolation:
            bad = True
        if not bad:
            vol = self._obb(skel, config).volume()
        self._volumes[key] = vol
        return vol

    def _obb(self, skel, config):
        poses = forward_kinematics(self.m, config, skel.part_ids, skel.joint_ids)
        pts = np.concatenate([poses[p].apply(self.m.part(p).mesh.vertices) for p in skel.part_ids])
        return min_obb(pts, self.settings.angular_step)

    def _line_search(self, skel, config, jid, current):
        s = self.settings
        lo, hi = self.m.joint(jid).limits
        x0 = config[jid]

        def score(x):
            v = self.evaluate(skel, config.with_value(jid, x))
            return None if v is None else (v, abs(x - x0), x)

        grid = list(np.linspace(lo, hi, s.param_steps)) if hi > lo else [lo]
        scored = [(score(x), x) for x in grid]
        best = (current, x0)
        for sc, x in scored:
            if sc is not None and sc < best[0]:
                best = (sc, x)
        if hi > lo and len(grid) > 1 and best[1] != x0:
            width = (hi - lo) / (len(grid) - 1)
            for _ in range(s.zoom_levels):
                a, b = max(lo, best[1] - width), min(hi, best[1] + width)
                for x in np.linspace(a, b, s.zoom_points + 2)[1:-1]:
                    sc = score(x)
                    if sc is not None and sc < best[0]:
                        best = (sc, float(x))
                width = (b - a) / (s.zoom_points + 1)
        return best

    def _descend(self, skel, start, free):
        s = self.settings
        config = start
        vol = self.evaluate(skel, config)
        for _ in range(s.max_sweeps):
            before = vol
            for jid in free:
                sc, x = self._line_search(skel, config, jid, (vol, 0.0, config[jid]))
                if sc[0] < vol:
                    config, vol = config.with_value(jid, x), sc[0]
            if before - vol <= s.rel_tol * before:
                break
        return config, vol

    def optimize(self, skel: GroupSkeleton, start: Configuration | None = None):
        """Best admissible configuration from the warm start and the rest pose."""
        key = (skel.part_ids, skel.joint_ids, None if start is None else start.key())
        if key in self._groups:
            return self._groups[key]
        free = self.m.free_joint_ids(skel.joint_ids)
        rest = Configuration.zero(self.m, skel.joint_ids)
        starts = []
        if start is not None:
            warm = Configuration({j: start.get(j, 0.0) for j in free})
            if warm.key() != rest.key() and self.evaluate(skel, warm) is not None:
                starts.append(warm)
        if self.evaluate(skel, rest) is None:
            if not starts:
                raise NoAdmissibleConfiguration(f"group {list(skel.part_ids)} penetrates at its rest configuration")
        else:
            starts.append(rest)
        best = None
        for st in starts:
            cfg, vol = self._descend(skel, st, free) if free else (st, self.evaluate(skel, st))
            if best is None or vol < best[1]:
                best = (cfg, vol)
        group = self.build(skel, best[0])
        self._groups[key] = group
        return group

    def build(self, skel: GroupSkeleton, cfg: Configuration):
        """Group for ``skel`` frozen at ``cfg`` (no optimisation, no admissibility check)."""
        poses = forward_kinematics(self.m, cfg, skel.part_ids, skel.joint_ids)
        return Group(
            part_ids=skel.part_ids,
            internal_joints=skel.joint_ids,
            config=cfg,
            obb=self._obb(skel, cfg),
            part_poses=poses,
            part_meshes={p: self.m.part(p).mesh for p in skel.part_ids},
            material_volume=sum(self._part_volumes[p] for p in skel.part_ids),
        )


def minimize_group_obb(m: Mechanism, g: GroupSkeleton, res: OptimizerSettings | None = None, start=None,
                       optimizer: GroupOptimizer | None = None):
    """Optimise the free joints of group ``g``; returns (Configuration, Obb)."""
    opt = optimizer or GroupOptimizer(m, res)
    group = opt.optimize(g, start)
    return group.config, group.obb


def rest_group(m: Mechanism, optimizer: GroupOptimizer | None = None):
    """The whole mechanism as one rigid group at its rest configuration."""
    opt = optimizer or GroupOptimizer(m)
    skel = split_by_joints(m, ())[0]
    return opt.build(skel, Configuration.zero(m, skel.joint_ids))


# ------------------------------------------------------------------ hierarchy


def root_node(m: Mechanism, optimizer: GroupOptimizer):
    groups = [optimizer.optimize(s) for s in split_by_joints(m, ())]
    return HierarchyNode((), groups, None)


def child_node(m: Mechanism, node: HierarchyNode, jid, optimizer: GroupOptimizer):
    """Cut ``jid`` and re-optimise only the groups it touches."""
    j = m.joint(jid)
    cut = tuple(sorted(node.cut + (jid,)))
    by_parts = {g.part_ids: g for g in node.groups}
    parent_of = {p: g for g in node.groups for p in g.part_ids}
    touched = {j.part_a, j.part_b}
    groups = []
    for skel in split_by_joints(m, cut):
        if skel.part_ids in by_parts and not touched & set(skel.part_ids):
            groups.append(by_parts[skel.part_ids])
        else:
            parent = parent_of[skel.part_ids[0]]
            groups.append(optimizer.optimize(skel, parent.config))
    return HierarchyNode(cut, groups, node.cut)


def expand_node(m: Mechanism, node: HierarchyNode, res=None, optimizer: GroupOptimizer | None = None):
    """One child per uncut joint, sorted by total OBB volume."""
    opt = optimizer or GroupOptimizer(m, res)
    children = [child_node(m, node, jid, opt) for jid in sorted(set(m.joint_ids) - set(node.cut))]
    return sorted(children, key=HierarchyNode.rank_key)


def joint_cost(m: Mechanism, node: HierarchyNode, jid, res=None, optimizer: GroupOptimizer | None = None):
    """Volume removed by disconnecting ``jid`` (may be negative)."""
    m.joint(jid)
    if jid in node.cut:
        raise ValueError(f"joint {jid} is already cut")
    opt = optimizer or GroupOptimizer(m, res)
    return node.total_volume - child_node(m, node, jid, opt).total_volume


# ------------------------------------------------------------------- search


def trial_pack(node: HierarchyNode, box: BoxSpec, total_volume: float):
    """Pack ``node`` at trial resolution and record its efficiency."""
    try:
        layout = pack_all(node.groups, box)
    except DoesNotFit:
        node.efficiency, node.trial_h = None, None
        return node
    node.trial_h = layout.h
    node.efficiency = total_volume / (box.base_w * box.base_d * layout.h)
    return node


def _select_key(node):
    return (-node.efficiency, len(node.groups), node.cut)


def _map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


@dataclass
class SearchResult:
    node: HierarchyNode
    explored: list
    accepted: bool


def bfs_search(m: Mechanism, box_base, criteria: SearchCriteria, threads: int = 1,
               optimizer: GroupOptimizer | None = None) -> SearchResult:
    """Breadth-first exploration of the cut hierarchy with a volume-ranked beam."""
    W, D = box_base
    trial_box = BoxSpec(W, D, criteria.trial_cell) if criteria.trial_cell else BoxSpec.trial(W, D)
    opt = optimizer or GroupOptimizer(m, criteria.optimizer)
    total = sum(g.material_volume for g in root_node(m, opt).groups)

    for p in m.parts:
        single = opt.optimize(GroupSkeleton((p.id,), ()))
        if not fits_base(single, trial_box):
            raise GroupTooLarge(f"part {p.id} does not fit the {W} x {D} base in any orientation", group_id=p.id)

    level = [root_node(m, opt)]
    explored = []
    for depth in range(criteria.max_groups):
        level = [n for n in level if len(n.groups) <= criteria.max_groups]
        level.sort(key=HierarchyNode.rank_key)
        level = level[:criteria.beam_width]
        if not level:
            break
        _map(lambda n: trial_pack(n, trial_box, total), level, threads)
        explored.extend(level)
        for n in level:
            log.debug("cut=%s volume=%.6g efficiency=%s", n.cut, n.total_volume, n.efficiency)
            if n.efficiency is not None and n.efficiency >= criteria.target_efficiency:
                return SearchResult(n, explored, True)
        if depth == criteria.max_groups - 1:
            break
        expansions = _map(lambda n: expand_node(m, n, optimizer=opt), level, threads)
        merged = {}
        for parent, kids in zip(level, expansions):
            for c in kids:
                cur = merged.get(c.cut)
                if cur is None or (c.total_volume, c.parent_cut) < (cur.total_volume, cur.parent_cut):
                    merged[c.cut] = c
        level = list(merged.values())

    feasible = [n for n in explored if n.efficiency is not None]
    if not feasible:
        worst = next(g for g in explored[-1].groups if not fits_base(g, trial_box))
        raise GroupTooLarge(f"group {list(worst.part_ids)} does not fit the base at the finest level reached",
                            group_id=",".join(worst.part_ids))
    return SearchResult(min(feasible, key=_select_key), explored, False)


def bfs_disassemble(m: Mechanism, box_base, criteria: SearchCriteria, threads: int = 1,
                    optimizer: GroupOptimizer | None = None) -> HierarchyNode:
    """Chosen hierarchy node (see :func:`bfs_search`)."""
    return bfs_search(m, box_base, criteria, threads, optimizer).node


def dump_hierarchy(nodes, directory):
    """Write one JSON document per explored node."""
    os.makedirs(directory, exist_ok=True)
    for k, n in enumerate(nodes):
        name = "root" if not n.cut else "cut-" + "+".join(n.cut)
        with open(os.path.join(directory, f"{k:04d}_{name}.json"), "w", encoding="utf-8") as fh:
            json.dump(n.to_dict(), fh, indent=2, sort_keys=True)
