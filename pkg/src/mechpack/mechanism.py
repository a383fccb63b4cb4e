"""Kinematic model: parts, typed joints, configurations and forward kinematics."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
import json
import os
from typing import Mapping

import numpy as np

from .errors import InvalidMechanism, LoopClosureViolation, UnknownJoint
from .geometry.intersect import DEFAULT_EPS, meshes_intersect
from .geometry.mesh import TriMesh, load_obj, save_obj, transform_mesh
from .geometry.transform import RigidTransform

AXIS_TOL = 1e-9
LOOP_TOL = 1e-4
QUAT_LOAD_TOL = 1e-3


class JointKind(str, Enum):
    FIXED = "Fixed"
    REVOLUTE = "Revolute"
    GEAR = "Gear2Gear"
    POINT_ON_LINE = "PointOnLine"


@dataclass(frozen=True, eq=False)
class Part:
    id: str
    mesh: TriMesh
    rest_pose: RigidTransform = field(default_factory=RigidTransform.identity)

    def posed_mesh(self, motion=None):
        pose = self.rest_pose if motion is None else motion.compose(self.rest_pose)
        return transform_mesh(self.mesh, pose)


@dataclass(frozen=True, eq=False)
class Joint:
    """A kinematic pair.

    ``axis`` is the rotation axis (Revolute), the line direction
    (PointOnLine) or the driver gear axis (Gear2Gear); ``axis_b`` is the
    follower gear axis.  For gears ``anchor`` is a point on the follower
    axis.
    """

    id: str
    kind: JointKind
    part_a: str
    part_b: str
    anchor: np.ndarray = field(default_factory=lambda: np.zeros(3))
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    limits: tuple | None = None
    ratio: float | None = None
    axis_b: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", JointKind(self.kind))
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float).reshape(3))
        object.__setattr__(self, "axis", np.asarray(self.axis, dtype=float).reshape(3))
        if self.axis_b is not None:
            object.__setattr__(self, "axis_b", np.asarray(self.axis_b, dtype=float).reshape(3))
        if self.limits is not None:
            object.__setattr__(self, "limits", (float(self.limits[0]), float(self.limits[1])))

    @property
    def has_parameter(self):
        return self.kind is not JointKind.FIXED

    def relative_motion(self, value):
        """Motion of ``part_b`` relative to ``part_a`` in the rest assembly frame."""
        if self.kind is JointKind.FIXED or value == 0.0:
            return RigidTransform.identity()
        if self.kind is JointKind.REVOLUTE:
            return RigidTransform.about_axis(self.anchor, self.axis, value)
        if self.kind is JointKind.POINT_ON_LINE:
            return RigidTransform.translation_only(value * self.axis)
        # external gears mesh with reversed rotation
        return RigidTransform.about_axis(self.anchor, self.axis_b, -self.ratio * value)

    def to_dict(self):
        d = {"id": self.id, "kind": self.kind.value, "part_a": self.part_a, "part_b": self.part_b,
             "anchor": self.anchor.tolist()}
        if self.kind is JointKind.GEAR:
            d["axis_a"] = self.axis.tolist()
            d["axis_b"] = self.axis_b.tolist()
            d["ratio"] = self.ratio
        else:
            d["axis"] = self.axis.tolist()
        if self.limits is not None:
            d["limits"] = list(self.limits)
        return d


@dataclass(frozen=True, eq=False)
class Mechanism:
    parts: tuple
    joints: tuple
    driving_part: str

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "_parts", {p.id: p for p in self.parts})
        object.__setattr__(self, "_joints", {j.id: j for j in self.joints})

    def part(self, pid) -> Part:
        return self._parts[pid]

    def joint(self, jid) -> Joint:
        try:
            return self._joints[jid]
        except KeyError:
            raise UnknownJoint(jid) from None

    @property
    def part_ids(self):
        return [p.id for p in self.parts]

    @property
    def joint_ids(self):
        return [j.id for j in self.joints]

    def free_joint_ids(self, joint_ids=None):
        ids = self.joint_ids if joint_ids is None else joint_ids
        return sorted(j for j in ids if self.joint(j).has_parameter)

    def total_part_volume(self):
        from .geometry.mesh import mesh_volume
        return sum(mesh_volume(p.mesh) for p in self.parts)


class Configuration(Mapping):
    """Joint parameter values keyed by joint id (immutable)."""

    def __init__(self, values=None):
        self._values = {str(k): float(v) for k, v in dict(values or {}).items()}

    def __getitem__(self, key):
        return self._values[key]

    def __iter__(self):
        return iter(sorted(self._values))

    def __len__(self):
        return len(self._values)

    def __repr__(self):
        return f"Configuration({dict(sorted(self._values.items()))})"

    @classmethod
    def zero(cls, mechanism, joint_ids=None):
        return cls({j: 0.0 for j in mechanism.free_joint_ids(joint_ids)})

    def replace(self, **updates):
        v = dict(self._values)
        v.update(updates)
        return Configuration(v)

    def with_value(self, jid, value):
        v = dict(self._values)
        v[jid] = float(value)
        return Configuration(v)

    def restrict(self, joint_ids):
        keep = set(joint_ids)
        return Configuration({k: v for k, v in self._values.items() if k in keep})

    def key(self):
        return tuple(sorted(self._values.items()))

    def to_dict(self):
        return dict(sorted(self._values.items()))


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str

    def __str__(self):
        return f"{self.rule}: {self.message}"


# ---------------------------------------------------------------- validation


def validate_mechanism(m: Mechanism):
    """Return one Violation per failed invariant; empty when valid."""
    out = []
    seen = set()
    for p in m.parts:
        if p.id in seen:
            out.append(Violation("duplicate part id", p.id))
        seen.add(p.id)
        if not p.mesh.is_watertight():
            out.append(Violation("open part mesh", f"part {p.id} mesh is not closed"))
    part_ids = {p.id for p in m.parts}
    if m.driving_part not in part_ids:
        out.append(Violation("unknown driving part", str(m.driving_part)))
    seen = set()
    for j in m.joints:
        if j.id in seen:
            out.append(Violation("duplicate joint id", j.id))
        seen.add(j.id)
        for end in (j.part_a, j.part_b):
            if end not in part_ids:
                out.append(Violation("unknown joint endpoint", f"joint {j.id} names missing part {end}"))
        if j.part_a == j.part_b:
            out.append(Violation("self joint", f"joint {j.id} connects part {j.part_a} to itself"))
        axes = [("axis", j.axis)]
        if j.kind is JointKind.GEAR:
            axes = [("axis_a", j.axis), ("axis_b", j.axis_b)]
        for name, ax in axes:
            if j.kind is JointKind.FIXED:
                continue
            if ax is None:
                out.append(Violation("missing axis", f"joint {j.id} has no {name}"))
            elif abs(np.linalg.norm(ax) - 1.0) > AXIS_TOL:
                out.append(Violation("non-unit axis", f"joint {j.id} {name} has length {np.linalg.norm(ax):.6g}"))
        if j.kind is JointKind.FIXED:
            if j.limits is not None:
                out.append(Violation("fixed joint parameter", f"joint {j.id} is Fixed but carries limits"))
        elif j.limits is None:
            out.append(Violation("missing limits", f"joint {j.id} needs limits"))
        else:
            lo, hi = j.limits
            if lo > hi:
                out.append(Violation("bad limits", f"joint {j.id} has lo > hi"))
            elif not lo <= 0.0 <= hi:
                out.append(Violation("rest outside limits", f"joint {j.id} limits must contain 0 (the rest pose)"))
        if j.kind is JointKind.GEAR and not j.ratio:
            out.append(Violation("zero gear ratio", f"joint {j.id} needs a non-zero ratio"))
    if not part_ids:
        out.append(Violation("no parts", "mechanism has no parts"))
    elif not is_connected(m, part_ids):
        out.append(Violation("disconnected graph", "joint graph does not connect every part"))
    return out


def is_connected(m, part_ids):
    """True when the joint graph over ``part_ids`` is connected."""
    comps = _components(part_ids, [j for j in m.joints if j.part_a in part_ids and j.part_b in part_ids])
    return len(comps) == 1


def check_configuration(m: Mechanism, c: Configuration, joint_ids=None):
    ids = m.free_joint_ids(joint_ids)
    missing = [j for j in ids if j not in c]
    if missing:
        raise ValueError(f"configuration lacks joints {missing}")
    for jid in ids:
        lo, hi = m.joint(jid).limits
        if not lo - 1e-12 <= c[jid] <= hi + 1e-12:
            raise ValueError(f"joint {jid} value {c[jid]} outside [{lo}, {hi}]")


# ------------------------------------------------------------------ topology


def _components(part_ids, joints):
    parent = {p: p for p in part_ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for j in joints:
        ra, rb = find(j.part_a), find(j.part_b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    comps = {}
    for p in part_ids:
        comps.setdefault(find(p), []).append(p)
    return [sorted(v) for v in comps.values()]


@dataclass(frozen=True)
class GroupSkeleton:
    """A connected component of the joint graph under a cut."""

    part_ids: tuple
    joint_ids: tuple


def split_by_joints(m: Mechanism, cut=()):
    """Connected components of the joint graph with the ``cut`` joints removed."""
    cut = set(cut)
    unknown = cut - set(m.joint_ids)
    if unknown:
        raise UnknownJoint(", ".join(sorted(unknown)))
    kept = [j for j in m.joints if j.id not in cut]
    comps = _components(m.part_ids, kept)
    out = []
    for parts in sorted(comps):
        ps = set(parts)
        jids = sorted(j.id for j in kept if j.part_a in ps)
        out.append(GroupSkeleton(tuple(parts), tuple(jids)))
    return out


def bfs_order(m: Mechanism, root=None, part_ids=None, joint_ids=None):
    """Spanning-tree traversal: list of (part, parent, joint) in BFS order.

    Incident joints are visited in joint-id order; the root has parent and
    joint ``None``.  Returns the traversal and the non-tree joints.
    """
    part_ids = m.part_ids if part_ids is None else list(part_ids)
    pset = set(part_ids)
    joints = [m.joint(j) for j in (m.joint_ids if joint_ids is None else joint_ids)]
    joints = sorted((j for j in joints if j.part_a in pset and j.part_b in pset), key=lambda j: j.id)
    incident = {p: [] for p in part_ids}
    for j in joints:
        incident[j.part_a].append(j)
        incident[j.part_b].append(j)
    root = m.driving_part if root is None else root
    order = [(root, None, None)]
    visited = {root}
    used = set()
    queue = deque([root])
    while queue:
        p = queue.popleft()
        for j in incident[p]:
            other = j.part_b if j.part_a == p else j.part_a
            if other in visited:
                continue
            visited.add(other)
            used.add(j.id)
            order.append((other, p, j))
            queue.append(other)
    loops = [j for j in joints if j.id not in used]
    return order, loops


def group_root(m: Mechanism, part_ids):
    """The member reached first by BFS from the driving part."""
    members = set(part_ids)
    if m.driving_part in members:
        return m.driving_part
    order, _ = bfs_order(m)
    for p, _, _ in order:
        if p in members:
            return p
    return min(members)


def part_motions(m: Mechanism, c: Mapping, part_ids=None, joint_ids=None, root=None):
    """World-frame displacement of each part relative to its rest pose."""
    part_ids = m.part_ids if part_ids is None else list(part_ids)
    root = group_root(m, part_ids) if root is None else root
    order, loops = bfs_order(m, root, part_ids, joint_ids)
    motion = {root: RigidTransform.identity()}
    for child, parent, j in order[1:]:
        rel = j.relative_motion(c.get(j.id, 0.0)) if j.has_parameter else RigidTransform.identity()
        if j.part_a == parent:
            motion[child] = motion[parent].compose(rel) if not rel.is_identity() else motion[parent]
        else:
            motion[child] = motion[parent].compose(rel.inverse()) if not rel.is_identity() else motion[parent]
    for j in loops:
        rel = j.relative_motion(c.get(j.id, 0.0)) if j.has_parameter else RigidTransform.identity()
        expected = motion[j.part_a].compose(rel).apply(j.anchor)
        actual = motion[j.part_b].apply(j.anchor)
        gap = float(np.linalg.norm(expected - actual))
        if gap > LOOP_TOL:
            raise LoopClosureViolation(f"joint {j.id} opens by {gap:.3g} m")
    return motion


def forward_kinematics(m: Mechanism, c: Mapping, part_ids=None, joint_ids=None, root=None):
    """Assembly-frame pose of every part (part-local -> assembly frame).

    The driving part (or the group root) keeps its rest pose; motion is
    propagated over the BFS spanning tree and loop joints are checked
    for closure.
    """
    motion = part_motions(m, c, part_ids, joint_ids, root)
    out = {}
    for pid, d in motion.items():
        rest = m.part(pid).rest_pose
        out[pid] = rest if d.is_identity() else d.compose(rest)
    return out


def posed_meshes(m: Mechanism, c: Mapping, part_ids=None, joint_ids=None):
    poses = forward_kinematics(m, c, part_ids, joint_ids)
    return {pid: transform_mesh(m.part(pid).mesh, t) for pid, t in poses.items()}


def check_slippable(m: Mechanism, c: Mapping, eps=DEFAULT_EPS, part_ids=None, joint_ids=None):
    """Part pairs that interpenetrate by more than ``eps`` at configuration ``c``."""
    part_ids = m.part_ids if part_ids is None else list(part_ids)
    joint_ids = m.joint_ids if joint_ids is None else list(joint_ids)
    motion = part_motions(m, c, part_ids, joint_ids)
    meshes = {p: m.part(p).posed_mesh(motion[p]) for p in part_ids}
    anchors = {}
    for jid in joint_ids:
        j = m.joint(jid)
        key = tuple(sorted((j.part_a, j.part_b)))
        anchors.setdefault(key, []).append(motion[j.part_a].apply(j.anchor))
    ids = sorted(part_ids)
    bad = []
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if meshes_intersect(meshes[a], meshes[b], eps, anchors.get((a, b))):
                bad.append((a, b))
    return bad


# --------------------------------------------------------------- file format

_PART_FIELDS = {"id", "mesh_path", "rest_pose"}
_POSE_FIELDS = {"quaternion", "translation"}
_JOINT_FIELDS = {"id", "kind", "part_a", "part_b", "anchor", "axis", "axis_a", "axis_b", "limits", "ratio"}
_TOP_FIELDS = {"parts", "joints", "driving_part"}


def _unknown(kind, d, allowed, out):
    for k in sorted(set(d) - allowed):
        out.append(Violation("unknown field", f"{kind} field '{k}'"))


def _load_pose(d, where, out):
    if d is None:
        return RigidTransform.identity()
    _unknown(f"{where} rest_pose", d, _POSE_FIELDS, out)
    q = np.asarray(d.get("quaternion", [1, 0, 0, 0]), dtype=float)
    t = np.asarray(d.get("translation", [0, 0, 0]), dtype=float)
    n = np.linalg.norm(q)
    if abs(n - 1.0) > QUAT_LOAD_TOL:
        out.append(Violation("non-unit quaternion", f"{where} rest_pose quaternion has norm {n:.6g}"))
        return RigidTransform.identity()
    return RigidTransform(q / n, t)


def mechanism_from_dict(doc, base_dir="."):
    """Build a Mechanism from a parsed document; raises InvalidMechanism."""
    out = []
    if not isinstance(doc, dict):
        raise InvalidMechanism([Violation("bad document", "top level must be an object")])
    _unknown("top-level", doc, _TOP_FIELDS, out)
    parts = []
    for k, pd in enumerate(doc.get("parts", [])):
        _unknown(f"part[{k}]", pd, _PART_FIELDS, out)
        pid = str(pd.get("id", f"#{k}"))
        try:
            mesh = load_obj(os.path.join(base_dir, pd["mesh_path"]))
        except KeyError:
            out.append(Violation("missing mesh", f"part {pid} has no mesh_path"))
            continue
        except Exception as exc:  # unreadable or malformed OBJ
            out.append(Violation("bad mesh", f"part {pid}: {exc}"))
            continue
        parts.append(Part(pid, mesh, _load_pose(pd.get("rest_pose"), f"part {pid}", out)))
    joints = []
    for k, jd in enumerate(doc.get("joints", [])):
        _unknown(f"joint[{k}]", jd, _JOINT_FIELDS, out)
        jid = str(jd.get("id", f"#{k}"))
        try:
            kind = JointKind(jd["kind"])
        except (KeyError, ValueError):
            out.append(Violation("bad joint kind", f"joint {jid} kind {jd.get('kind')!r}"))
            continue
        if kind is JointKind.GEAR:
            axis, axis_b = jd.get("axis_a"), jd.get("axis_b")
        else:
            axis, axis_b = jd.get("axis", [0, 0, 1]), None
        if axis is None:
            axis = [0, 0, 1]
            out.append(Violation("missing axis", f"joint {jid} has no axis_a"))
        if kind is JointKind.GEAR and axis_b is None:
            axis_b = [0, 0, 1]
            out.append(Violation("missing axis", f"joint {jid} has no axis_b"))
        limits = jd.get("limits")
        if kind is JointKind.FIXED and limits is not None and len(limits) == 0:
            limits = None
        joints.append(Joint(jid, kind, str(jd.get("part_a")), str(jd.get("part_b")),
                            jd.get("anchor", [0, 0, 0]), axis, limits, jd.get("ratio"), axis_b))
    if "driving_part" not in doc:
        out.append(Violation("unknown driving part", "driving_part missing"))
    m = Mechanism(parts, joints, str(doc.get("driving_part")))
    out.extend(validate_mechanism(m))
    if out:
        raise InvalidMechanism(out)
    return m


def load_mechanism(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidMechanism([Violation("bad document", str(exc))]) from None
    return mechanism_from_dict(doc, os.path.dirname(os.path.abspath(path)))


def save_mechanism(m: Mechanism, path):
    """Write ``path`` plus one OBJ per part next to it."""
    base = os.path.dirname(os.path.abspath(path))
    parts = []
    for p in m.parts:
        rel = f"meshes/{p.id}.obj"
        save_obj(os.path.join(base, rel), p.mesh)
        parts.append({"id": p.id, "mesh_path": rel, "rest_pose": {
            "quaternion": p.rest_pose.rotation.tolist(), "translation": p.rest_pose.translation.tolist()}})
    doc = {"parts": parts, "joints": [j.to_dict() for j in m.joints], "driving_part": m.driving_part}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
