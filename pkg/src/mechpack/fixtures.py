"""Small synthetic mechanisms used by the tests and demos."""
import math

import numpy as np

from .geometry.mesh import TriMesh, box_mesh
from .mechanism import Joint, JointKind, Mechanism, Part

Z = (0.0, 0.0, 1.0)
BAR = (1.0, 0.2, 0.2)


def prism(radius, height, sides=8, center=(0.0, 0.0), z0=0.0):
    """Closed regular prism about a vertical axis."""
    cx, cy = center
    ang = 2 * math.pi * np.arange(sides) / sides
    ring = np.stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)], axis=1)
    bottom = np.column_stack([ring, np.full(sides, z0)])
    top = np.column_stack([ring, np.full(sides, z0 + height)])
    verts = np.vstack([bottom, top, [[cx, cy, z0], [cx, cy, z0 + height]]])
    cb, ct = 2 * sides, 2 * sides + 1
    tris = []
    for i in range(sides):
        k = (i + 1) % sides
        tris += [[i, k, sides + k], [i, sides + k, sides + i]]
        tris += [[cb, k, i], [ct, sides + i, sides + k]]
    return TriMesh(verts, tris)


def single_cube():
    return Mechanism([Part("cube", box_mesh())], [], "cube")


def two_bar_folded():
    """Two coincident bars hinged at a shared corner: they overlap at 0."""
    parts = [Part("a", box_mesh(BAR)), Part("b", box_mesh(BAR))]
    j = Joint("hinge", JointKind.REVOLUTE, "a", "b", (0, 0, 0), Z, (0.0, math.pi))
    return Mechanism(parts, [j], "a")


def two_bar_hinge():
    """L-shaped pair of 1 x 0.2 x 0.2 bars hinged at their touching ends."""
    parts = [Part("a", box_mesh(BAR)), Part("b", box_mesh((0.2, 1.0, 0.2), (-0.2, 0.0, 0.0)))]
    j = Joint("hinge", JointKind.REVOLUTE, "a", "b", (0, 0, 0), Z, (0.0, math.pi))
    return Mechanism(parts, [j], "a")


def zigzag3():
    """Three bars in a Z, revolute joints about z at the shared corners."""
    parts = [
        Part("a", box_mesh(BAR)),
        Part("b", box_mesh((0.2, 1.0, 0.2), (1.0, 0.0, 0.0))),
        Part("c", box_mesh(BAR, (1.2, 0.8, 0.0))),
    ]
    joints = [
        Joint("j1", JointKind.REVOLUTE, "a", "b", (1.0, 0.0, 0.0), Z, (-math.pi, math.pi)),
        Joint("j2", JointKind.REVOLUTE, "b", "c", (1.2, 1.0, 0.0), Z, (-math.pi, math.pi)),
    ]
    return Mechanism(parts, joints, "a")


def slider_cubes():
    """Unit cube stacked on another, sliding along x with d in [0, 1]."""
    parts = [Part("lower", box_mesh()), Part("upper", box_mesh(origin=(0, 0, 1)))]
    j = Joint("slide", JointKind.POINT_ON_LINE, "lower", "upper", (0, 0, 1), (1, 0, 0), (0.0, 1.0))
    return Mechanism(parts, [j], "lower")


def gear_chain4():
    """Base plate, driver gear, follower gear and a sliding rod."""
    parts = [
        Part("base", box_mesh((2.0, 1.0, 0.1), (-0.5, -0.5, -0.1))),
        Part("gear1", prism(0.25, 0.1, center=(0.0, 0.0))),
        Part("gear2", prism(0.5, 0.1, center=(0.75, 0.0))),
        Part("rod", box_mesh((1.0, 0.1, 0.1), (0.75, -0.05, 0.1))),
    ]
    joints = [
        Joint("j0", JointKind.REVOLUTE, "base", "gear1", (0, 0, 0), Z, (-math.pi / 2, math.pi / 2)),
        Joint("j1", JointKind.GEAR, "gear1", "gear2", (0.75, 0, 0), Z, (-math.pi / 2, math.pi / 2),
              ratio=0.5, axis_b=Z),
        Joint("j2", JointKind.POINT_ON_LINE, "gear2", "rod", (0.75, 0, 0.1), (1, 0, 0), (-0.75, 0.0)),
    ]
    return Mechanism(parts, joints, "base")


def serial_chain(kinds, seed=0):
    """Chain of unit-ish boxes joined by the given joint kinds (for kinematics tests)."""
    rng = np.random.default_rng(seed)
    parts = [Part("p0", box_mesh((0.3, 0.3, 0.3)))]
    joints = []
    for k, kind in enumerate(kinds, 1):
        parts.append(Part(f"p{k}", box_mesh((0.3, 0.3, 0.3), (k * 0.5, 0, 0))))
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        anchor = rng.normal(size=3)
        kw = {}
        if kind is JointKind.GEAR:
            axis_b = rng.normal(size=3)
            kw = {"ratio": float(rng.uniform(0.3, 3.0)), "axis_b": axis_b / np.linalg.norm(axis_b)}
        limits = None if kind is JointKind.FIXED else (-math.pi, math.pi)
        joints.append(Joint(f"j{k}", kind, f"p{k - 1}", f"p{k}", anchor, axis, limits, **kw))
    return Mechanism(parts, joints, "p0")


ALL = {
    "single_cube": single_cube,
    "two_bar_hinge": two_bar_hinge,
    "two_bar_folded": two_bar_folded,
    "zigzag3": zigzag3,
    "slider_cubes": slider_cubes,
    "gear_chain4": gear_chain4,
}
