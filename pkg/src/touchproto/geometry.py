"""Planar rotation+scale+translation algebra, 3D pose algebra, shaped rewards.

A planar transform is a 4-vector theta = [s*cos(a), s*sin(a), tx, ty]: the
rotation+scaling block applied to a point, plus a translation. 3D poses are
6-vectors [tx, ty, tz, rx, ry, rz] with Euler angles wrapped to (-pi, pi].
All functions are pure and operate on float64 numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi
IDENTITY_THETA = np.array([1.0, 0.0, 0.0, 0.0])

STEP_PENALTY = 0.2
SUCCESS_BONUS = 25.0
DEGENERACY_EPS = 1e-9
GIMBAL_EPS = 1e-8


class SingularTransformError(ValueError):
    """The two-finger design matrix is singular (coincident fingers or both at origin)."""


class GimbalLockError(ValueError):
    """Euler extraction attempted inside the ry = +-pi/2 cone."""


@dataclass(frozen=True)
class FingerPair:
    """Paired finger positions at two instants, screen coordinates in [0,1]^2."""

    l1: np.ndarray
    l2: np.ndarray
    l1p: np.ndarray
    l2p: np.ndarray

    def flat(self) -> np.ndarray:
        """Order: both fingers at the first instant, then both at the second."""
        return np.concatenate([self.l1, self.l2, self.l1p, self.l2p])


def rot_scale_matrix(theta) -> np.ndarray:
    t = np.asarray(theta, dtype=np.float64)
    return np.array([[t[0], -t[1]], [t[1], t[0]]])


def apply_affine2d(theta, points) -> np.ndarray:
    """A @ p + t for one point (2,) or many points (k, 2)."""
    t = np.asarray(theta, dtype=np.float64)
    p = np.asarray(points, dtype=np.float64)
    a = rot_scale_matrix(t)
    return p @ a.T + t[2:4]


def design_matrix(l1, l2) -> np.ndarray:
    x1, y1 = np.asarray(l1, dtype=np.float64)
    x2, y2 = np.asarray(l2, dtype=np.float64)
    return np.array([
        [x1, -y1, 1.0, 0.0],
        [y1, x1, 0.0, 1.0],
        [x2, -y2, 1.0, 0.0],
        [y2, x2, 0.0, 1.0],
    ])


def solve_affine2d(fp: FingerPair) -> np.ndarray:
    """Recover theta from two finger correspondences (exact interpolation).

    Raises SingularTransformError when the design matrix is degenerate,
    i.e. the fingers coincide or both sit at the screen origin.
    """
    d_mat = design_matrix(fp.l1, fp.l2)
    # det(D) == |l1 - l2|^2: the matrix is singular exactly when the fingers
    # coincide (both sitting at the screen origin being the special case).
    if abs(np.linalg.det(d_mat)) < DEGENERACY_EPS:
        at_origin = np.linalg.norm(fp.l1) < 1e-4 and np.linalg.norm(fp.l2) < 1e-4
        reason = "coincident fingers at the screen origin" if at_origin else "coincident fingers"
        raise SingularTransformError(f"degenerate finger configuration ({reason})")
    rhs = np.concatenate([np.asarray(fp.l1p, dtype=np.float64),
                          np.asarray(fp.l2p, dtype=np.float64)])
    return np.linalg.solve(d_mat, rhs)


def compose_affine2d(outer, inner) -> np.ndarray:
    """Transform applying `inner` first, then `outer`."""
    o = np.asarray(outer, dtype=np.float64)
    i = np.asarray(inner, dtype=np.float64)
    rot = np.array([o[0] * i[0] - o[1] * i[1], o[0] * i[1] + o[1] * i[0]])
    trans = rot_scale_matrix(o) @ i[2:4] + o[2:4]
    return np.concatenate([rot, trans])


def theta_from_params(alpha: float, sigma: float, tx: float, ty: float) -> np.ndarray:
    return np.array([sigma * np.cos(alpha), sigma * np.sin(alpha), tx, ty])


def wrap_angle(x):
    """Wrap into (-pi, pi]; vector-safe and idempotent."""
    return np.pi - (np.pi - np.asarray(x, dtype=np.float64)) % TWO_PI


def pose_to_matrix(pose) -> np.ndarray:
    """4x4 homogeneous matrix; rotation block Rz(rz) @ Ry(ry) @ Rx(rx)."""
    p = np.asarray(pose, dtype=np.float64)
    ca, sa = np.cos(p[3]), np.sin(p[3])
    cb, sb = np.cos(p[4]), np.sin(p[4])
    cc, sc = np.cos(p[5]), np.sin(p[5])
    r = np.array([
        [cc * cb, cc * sb * sa - sc * ca, sc * sa + cc * sb * ca],
        [sc * cb, cc * ca + sc * sb * sa, sc * sb * ca - cc * sa],
        [-sb, cb * sa, cb * ca],
    ])
    m = np.eye(4)
    m[:3, :3] = r
    m[:3, 3] = p[:3]
    return m


def matrix_to_pose(m) -> np.ndarray:
    """Inverse of pose_to_matrix for ry strictly inside (-pi/2, pi/2).

    Raises GimbalLockError inside the ry = +-pi/2 cone, where the x/z angles
    are not separable.
    """
    m = np.asarray(m, dtype=np.float64)
    sb = -m[2, 0]
    cb = np.sqrt(max(0.0, 1.0 - sb * sb))
    if cb < GIMBAL_EPS:
        raise GimbalLockError("ry within the +-pi/2 cone; Euler angles not unique")
    ry = np.arcsin(np.clip(sb, -1.0, 1.0))
    rx = np.arctan2(m[2, 1], m[2, 2])
    rz = np.arctan2(m[1, 0], m[0, 0])
    return np.array([m[0, 3], m[1, 3], m[2, 3], rx, ry, rz])


def add_residual_pose(pose, delta) -> np.ndarray:
    """Componentwise sum with angles wrapped back into (-pi, pi]."""
    p = np.asarray(pose, dtype=np.float64) + np.asarray(delta, dtype=np.float64)
    out = p.copy()
    out[3:6] = wrap_angle(p[3:6])
    return out


def transform_points(pose, points) -> np.ndarray:
    """Apply the pose's rigid transform to (k, 3) points."""
    m = pose_to_matrix(pose)
    pts = np.asarray(points, dtype=np.float64)
    return pts @ m[:3, :3].T + m[:3, 3]


def reward_shaped(object_vertices, target_vertices, done: bool) -> float:
    """-sum(L1 + L2 vertex distances) - 0.2, plus +25 on success."""
    o = np.asarray(object_vertices, dtype=np.float64)
    t = np.asarray(target_vertices, dtype=np.float64)
    if o.shape != t.shape:
        raise ValueError(f"vertex lists differ in shape: {o.shape} vs {t.shape}")
    diff = o - t
    l1 = np.abs(diff).sum()
    l2 = np.sqrt((diff * diff).sum(axis=-1)).sum()
    r = -(l1 + l2) - STEP_PENALTY
    if done:
        r += SUCCESS_BONUS
    return float(r)


def summed_vertex_distance(object_vertices, target_vertices) -> float:
    """Sum of per-vertex L2 distances (the success metric)."""
    o = np.asarray(object_vertices, dtype=np.float64)
    t = np.asarray(target_vertices, dtype=np.float64)
    return float(np.sqrt(((o - t) ** 2).sum(axis=-1)).sum())
