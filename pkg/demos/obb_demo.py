"""Minimum oriented bounding box of a posed brick and of a random point cloud.

The axis-aligned box of a rotated brick is loose; min_obb recovers the
brick's own frame.
"""
import math

import numpy as np

from mechpack.geometry import box_mesh, min_obb, transform_mesh
from mechpack.geometry.transform import RigidTransform, axis_angle_quat


def aabb_volume(points):
    return float(np.prod(points.max(axis=0) - points.min(axis=0)))


def main():
    brick = box_mesh((2.0, 1.0, 0.5), (-1.0, -0.5, -0.25))
    pose = RigidTransform(axis_angle_quat((1, 1, 0), math.radians(40)), (0.5, 0.0, 1.0))
    posed = transform_mesh(brick, pose)
    obb = min_obb(posed)
    print("posed brick 2 x 1 x 0.5")
    print(f"  AABB volume  {aabb_volume(posed.vertices):.4f}")
    print(f"  OBB volume   {obb.volume():.4f}")
    print(f"  OBB extents  {np.round(np.sort(obb.extents), 4)}")

    rng = np.random.default_rng(7)
    cloud = rng.normal(size=(150, 3)) * (1.5, 0.4, 0.2)
    cloud = RigidTransform(axis_angle_quat(rng.normal(size=3), 1.1), (0, 0, 0)).apply(cloud)
    obb = min_obb(cloud)
    print("gaussian cloud, 150 points")
    print(f"  AABB volume  {aabb_volume(cloud):.4f}")
    print(f"  OBB volume   {obb.volume():.4f}")


if __name__ == "__main__":
    main()
