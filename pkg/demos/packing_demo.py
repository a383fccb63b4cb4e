"""Greedy insertion of box and L-shaped groups into a 3 x 3 base.

Prints the rule used for each insertion and a top view of column heights.
"""
import numpy as np

from mechpack.disassembly import GroupOptimizer
from mechpack.geometry import box_mesh
from mechpack.mechanism import Joint, JointKind, Mechanism, Part, split_by_joints
from mechpack.packing import BoxSpec, pack_all, utilization


def rigid_group(name, meshes):
    parts = [Part(f"{name}{k}", mesh) for k, mesh in enumerate(meshes)]
    joints = [Joint(f"{name}f{k}", JointKind.FIXED, parts[k - 1].id, parts[k].id) for k in range(1, len(parts))]
    m = Mechanism(parts, joints, parts[0].id)
    return GroupOptimizer(m).optimize(split_by_joints(m, ())[0])


def main():
    groups = [
        rigid_group("bar", [box_mesh((3, 1, 1))]),
        rigid_group("L", [box_mesh(origin=o) for o in ((0, 0, 0), (1, 0, 0), (0, 1, 0))]),
        rigid_group("slab", [box_mesh((2, 2, 1))]),
        rigid_group("cube", [box_mesh()]),
        rigid_group("post", [box_mesh((1, 1, 2))]),
    ]
    lay = pack_all(groups, BoxSpec(3.0, 3.0, 0.5))
    for g, p, h in zip(lay.groups, lay.placements, lay.heights):
        print(f"{g.part_ids[0][:-1]:>5}: rule {p.rule}, anchor {p.cell_anchor}, h after {h}")
    top = np.where(lay.occupancy.any(axis=2), lay.occupancy.shape[2] - np.argmax(lay.occupancy[:, :, ::-1], axis=2), 0)
    print("column heights in cells (x down, y across):")
    print(top)
    print(f"h = {lay.h}, utilization = {utilization(lay):.3f}")


if __name__ == "__main__":
    main()
