"""Interpenetration tests between closed triangle meshes.

Surface contact is allowed; only overlap deeper than ``eps`` counts.
Two sources of evidence are combined:

* a sample point of one mesh lies inside the other farther than ``eps``
  from its surface.  Samples are the vertices plus four points per face
  moved ``2 * eps`` into the solid, which catches coincident and
  face-sharing overlaps where every vertex sits on the other surface;
* a triangle pair intersects and each triangle pokes through the
  other's plane by more than ``eps`` on both sides (contact along a
  shared edge or face pokes through by zero).
"""
from __future__ import annotations

import numpy as np

from .voxel import points_inside

DEFAULT_EPS = 1e-6


def point_triangle_distance(points, corners):
    """Pairwise distances, shape (P, T), between points and triangles."""
    p = np.asarray(points, dtype=float)[:, None, :]
    a, b, c = (corners[None, :, k, :] for k in range(3))
    ab, ac, ap = b - a, c - a, p - a
    d1 = (ab * ap).sum(-1)
    d2 = (ac * ap).sum(-1)
    bp = p - b
    d3 = (ab * bp).sum(-1)
    d4 = (ac * bp).sum(-1)
    cp = p - c
    d5 = (ab * cp).sum(-1)
    d6 = (ac * cp).sum(-1)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
        closest = a + ab * v[..., None] + ac * w[..., None]

        def put(mask, value):
            np.copyto(closest, value, where=mask[..., None])

        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        put((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + (c - b) * t_bc[..., None])
        t_ac = d2 / (d2 - d6)
        put((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + ac * t_ac[..., None])
        t_ab = d1 / (d1 - d3)
        put((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + ab * t_ab[..., None])
        put((d6 >= 0) & (d5 <= d6), np.broadcast_to(c, closest.shape))
        put((d3 >= 0) & (d4 <= d3), np.broadcast_to(b, closest.shape))
        put((d1 <= 0) & (d2 <= 0), np.broadcast_to(a, closest.shape))
    return np.linalg.norm(p - closest, axis=-1)


def _near_any(points, anchors, radius):
    if anchors is None or len(anchors) == 0:
        return np.zeros(len(points), dtype=bool)
    d = np.linalg.norm(points[:, None, :] - np.asarray(anchors, dtype=float)[None, :, :], axis=-1)
    return np.any(d <= radius, axis=1)


# barycentric weights of the per-face samples
_FACE_SAMPLES = np.array([[1 / 3, 1 / 3, 1 / 3], [2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])


def _outward_sign(mesh):
    c = mesh.corners
    return 1.0 if np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() >= 0 else -1.0


def _sample_points(mesh, push):
    inner = np.einsum("sk,tkd->tsd", _FACE_SAMPLES, mesh.corners)
    inner -= (_outward_sign(mesh) * push) * mesh.face_normals()[:, None, :]
    return np.concatenate([mesh.vertices, inner.reshape(-1, 3)])


def _deep_points(a, b, eps, anchors):
    lo, hi = b.vertices.min(axis=0), b.vertices.max(axis=0)
    v = _sample_points(a, max(2.0 * eps, 1e-9))
    cand = np.all((v > lo + eps) & (v < hi - eps), axis=1)
    cand &= ~_near_any(v, anchors, 2 * eps)
    pts = v[cand]
    if len(pts) == 0:
        return False
    inside = points_inside(b, pts)
    pts = pts[inside]
    if len(pts) == 0:
        return False
    for s in range(0, len(pts), 256):
        d = point_triangle_distance(pts[s:s + 256], b.corners).min(axis=1)
        if np.any(d > eps):
            return True
    return False


def _interval_on_line(c, dist, origin, direction):
    """Segment of a triangle's intersection with another plane, as parameters on a line."""
    # c: (N, 3, 3) corners; dist: (N, 3) signed distances to the other plane
    lo = np.full(len(c), np.inf)
    hi = np.full(len(c), -np.inf)
    proj = ((c - origin[:, None, :]) * direction[:, None, :]).sum(-1)
    for i, j in ((0, 1), (1, 2), (2, 0)):
        di, dj = dist[:, i], dist[:, j]
        on_i = di == 0
        lo = np.where(on_i, np.minimum(lo, proj[:, i]), lo)
        hi = np.where(on_i, np.maximum(hi, proj[:, i]), hi)
        cross = (di * dj) < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(cross, di / (di - dj), 0.0)
        x = proj[:, i] + t * (proj[:, j] - proj[:, i])
        lo = np.where(cross, np.minimum(lo, x), lo)
        hi = np.where(cross, np.maximum(hi, x), hi)
    return lo, hi


def _deep_triangle_pairs(a, b, eps, anchors):
    ca, cb = a.corners, b.corners
    la, ha = ca.min(axis=1), ca.max(axis=1)
    lb, hb = cb.min(axis=1), cb.max(axis=1)
    ia, ib = np.nonzero(np.all((la[:, None] <= hb[None] + eps) & (lb[None] <= ha[:, None] + eps), axis=2))
    if len(ia) == 0:
        return False
    if anchors is not None and len(anchors):
        anc = np.asarray(anchors, dtype=float)
        near_a = (point_triangle_distance(anc, ca) <= 2 * eps).any(axis=0)
        near_b = (point_triangle_distance(anc, cb) <= 2 * eps).any(axis=0)
        keep = ~(near_a[ia] & near_b[ib])
        ia, ib = ia[keep], ib[keep]
        if len(ia) == 0:
            return False
    na, nb = a.face_normals(), b.face_normals()
    ta, tb = ca[ia], cb[ib]
    pa, pb = na[ia], nb[ib]
    scale = max(np.abs(ca).max(), np.abs(cb).max(), 1.0)
    tol = 1e-12 * scale
    da = ((ta - tb[:, None, 0, :]) * pb[:, None, :]).sum(-1)  # ta vs plane of tb
    db = ((tb - ta[:, None, 0, :]) * pa[:, None, :]).sum(-1)
    da = np.where(np.abs(da) <= tol, 0.0, da)
    db = np.where(np.abs(db) <= tol, 0.0, db)
    # how far each triangle pokes through the other's plane on both sides
    straddle_a = np.minimum(da.max(axis=1), -da.min(axis=1))
    straddle_b = np.minimum(db.max(axis=1), -db.min(axis=1))
    ok = np.minimum(straddle_a, straddle_b) > eps
    if not ok.any():
        return False
    ta, tb, pa, pb, da, db = ta[ok], tb[ok], pa[ok], pb[ok], da[ok], db[ok]
    line = np.cross(pa, pb)
    good = np.linalg.norm(line, axis=1) > 1e-12
    if not good.any():
        return False
    ta, tb, da, db, line = ta[good], tb[good], da[good], db[good], line[good]
    line /= np.linalg.norm(line, axis=1, keepdims=True)
    origin = ta[:, 0, :]
    lo_a, hi_a = _interval_on_line(ta, da, origin, line)
    lo_b, hi_b = _interval_on_line(tb, db, origin, line)
    overlap = np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b)
    return bool(np.any(overlap >= -tol))


def meshes_intersect(a, b, eps=DEFAULT_EPS, anchors=None):
    """True when ``a`` and ``b`` interpenetrate by more than ``eps``.

    ``anchors`` are joint anchor points; geometry within ``2 * eps`` of
    one is exempt from the test.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    lo = np.maximum(a.vertices.min(axis=0), b.vertices.min(axis=0))
    hi = np.minimum(a.vertices.max(axis=0), b.vertices.max(axis=0))
    if np.any(hi - lo <= eps):
        return False
    if _deep_points(a, b, eps, anchors) or _deep_points(b, a, eps, anchors):
        return True
    return _deep_triangle_pairs(a, b, eps, anchors) or _deep_triangle_pairs(b, a, eps, anchors)
