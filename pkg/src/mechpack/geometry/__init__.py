"""Mesh primitives: transforms, volume, hull, OBB, voxels, intersection."""
from .hull import convex_hull
from .intersect import DEFAULT_EPS, meshes_intersect
from .mesh import TriMesh, box_mesh, icosphere, load_obj, mesh_volume, save_obj, transform_mesh
from .obb import Obb, min_obb
from .transform import RigidTransform
from .voxel import VoxelGrid, voxelize

__all__ = [
    "DEFAULT_EPS", "Obb", "RigidTransform", "TriMesh", "VoxelGrid", "box_mesh", "convex_hull", "icosphere",
    "load_obj", "meshes_intersect", "mesh_volume", "min_obb", "save_obj", "transform_mesh", "voxelize",
]
