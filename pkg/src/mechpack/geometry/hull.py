"""3D convex hull backed by Qhull."""
import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..errors import DegenerateInput
from .mesh import TriMesh


def affine_rank(points, tol=1e-9):
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0
    centered = pts - pts.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    scale = max(float(np.abs(centered).max()), 1.0)
    return int(np.sum(s > tol * scale))


def convex_hull(points):
    """Watertight, outward-wound hull mesh over the hull vertices only.

    Raises DegenerateInput for fewer than 4 points or coplanar input.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 4 or affine_rank(pts) < 3:
        raise DegenerateInput("convex hull needs 4 or more affinely independent points")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateInput(str(exc)) from None

    used = np.unique(hull.simplices)
    remap = np.full(len(pts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    verts = pts[used]
    tris = remap[hull.simplices].copy()

    # Qhull simplices are unoriented; flip against the facet plane normals
    c = verts[tris]
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    flip = np.einsum("ij,ij->i", n, hull.equations[:, :3]) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return TriMesh(verts, tris, validate=False)
