"""Quaternions and rigid transforms.

Quaternions are stored scalar-first, ``[w, x, y, z]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_TOL = 1e-9


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion")
    return q / n


def quat_mul(a, b):
    """Hamilton product ``a * b``."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(m):
    """Rotation matrix to unit quaternion (Shepperd's method), with ``w >= 0``."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    q = quat_normalize(q)
    return -q if q[0] < 0 else q


def axis_angle_quat(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation (unit quaternion) followed by translation: ``x -> R x + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = np.array(self.rotation, dtype=float).reshape(4)
        t = np.array(self.translation, dtype=float).reshape(3)
        if abs(np.linalg.norm(q) - 1.0) > QUAT_TOL:
            raise ValueError(f"rotation quaternion is not unit: |q| = {np.linalg.norm(q)}")
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_matrix(cls, rot, translation=(0.0, 0.0, 0.0)):
        return cls(matrix_to_quat(rot), translation)

    @classmethod
    def about_axis(cls, anchor, axis, angle):
        """Rotation by ``angle`` about the line through ``anchor`` along ``axis``."""
        q = axis_angle_quat(axis, angle)
        anchor = np.asarray(anchor, dtype=float)
        return cls(q, anchor - quat_to_matrix(q) @ anchor)

    @classmethod
    def translation_only(cls, v):
        return cls(translation=v)

    @property
    def matrix(self):
        return quat_to_matrix(self.rotation)

    def as_homogeneous(self):
        h = np.eye(4)
        h[:3, :3] = self.matrix
        h[:3, 3] = self.translation
        return h

    def apply(self, points):
        points = np.asarray(points, dtype=float)
        return points @ self.matrix.T + self.translation

    def compose(self, other):
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        q = quat_mul(self.rotation, other.rotation)
        t = self.matrix @ other.translation + self.translation
        n = np.linalg.norm(q)
        # renormalize only on drift so exact compositions stay bit-exact
        if abs(n - 1.0) > 1e-12:
            q = q / n
        return RigidTransform(q, t)

    __matmul__ = compose

    def inverse(self):
        qc = quat_conj(self.rotation)
        return RigidTransform(qc, -(quat_to_matrix(qc) @ self.translation))

    def is_identity(self):
        return (
            self.rotation[0] == 1.0
            and not self.rotation[1:].any()
            and not self.translation.any()
        )

    def allclose(self, other, atol=1e-9):
        # q and -q encode the same rotation
        same_q = np.allclose(self.rotation, other.rotation, atol=atol) or np.allclose(
            self.rotation, -other.rotation, atol=atol
        )
        return same_q and np.allclose(self.translation, other.translation, atol=atol)

    def to_dict(self):
        return {"quaternion": self.rotation.tolist(), "translation": self.translation.tolist()}

    def __repr__(self):
        return f"RigidTransform(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"
