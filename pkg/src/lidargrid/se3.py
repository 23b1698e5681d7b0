"""SE(3) rigid transforms stored as unit quaternion + translation."""

import numpy as np


def quat_multiply(a, b):
    """Hamilton product of (w, x, y, z) quaternions."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_matrix(R):
    """Rotation matrix -> (w, x, y, z), branch chosen for numerical safety."""
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
        q = np.array([(R[2, 1] - R[1, 2]) / s,
                      0.25 * s,
                      (R[0, 1] + R[1, 0]) / s,
                      (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] >= R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
        q = np.array([(R[0, 2] - R[2, 0]) / s,
                      (R[0, 1] + R[1, 0]) / s,
                      0.25 * s,
                      (R[1, 2] + R[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
        q = np.array([(R[1, 0] - R[0, 1]) / s,
                      (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s,
                      0.25 * s])
    return q / np.linalg.norm(q)


def quat_from_rotvec(rotvec):
    """Exponential map: axis-angle vector -> quaternion."""
    rotvec = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(rotvec)
    if angle < 1e-12:
        # first-order expansion keeps small steps exact enough for GN updates
        return np.array([1.0, 0.5 * rotvec[0], 0.5 * rotvec[1], 0.5 * rotvec[2]])
    axis = rotvec / angle
    half = 0.5 * angle
    s = np.sin(half)
    return np.array([np.cos(half), s * axis[0], s * axis[1], s * axis[2]])


def quat_to_rotvec(q):
    """Logarithm map: quaternion -> axis-angle vector."""
    w, x, y, z = q
    if w < 0:  # pick the short arc
        w, x, y, z = -w, -x, -y, -z
    vec_norm = np.sqrt(x * x + y * y + z * z)
    if vec_norm < 1e-12:
        return 2.0 * np.array([x, y, z])
    angle = 2.0 * np.arctan2(vec_norm, w)
    return (angle / vec_norm) * np.array([x, y, z])


def skew(v):
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


class PoseSE3:
    """Rigid transform T(p) = R p + t.

    quaternion is (w, x, y, z), kept unit-norm; translation in meters.
    """

    __slots__ = ("quaternion", "translation")

    def __init__(self, quaternion=None, translation=None):
        q = np.array([1.0, 0.0, 0.0, 0.0]) if quaternion is None \
            else np.asarray(quaternion, dtype=float).copy()
        n = np.linalg.norm(q)
        if not np.isfinite(n) or n < 1e-12:
            raise ValueError("quaternion must be finite and nonzero")
        self.quaternion = q / n
        t = np.zeros(3) if translation is None \
            else np.asarray(translation, dtype=float).copy()
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise ValueError("translation must be a finite 3-vector")
        self.translation = t

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_rotvec(cls, rotvec, translation=None):
        return cls(quat_from_rotvec(rotvec), translation)

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=float)
        return cls(quat_from_matrix(T[:3, :3]), T[:3, 3])

    @property
    def rotation(self):
        return quat_to_matrix(self.quaternion)

    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def compose(self, other):
        """self o other: apply `other` first, then `self`."""
        q = quat_multiply(self.quaternion, other.quaternion)
        t = self.rotation @ other.translation + self.translation
        return PoseSE3(q, t)

    def __matmul__(self, other):
        return self.compose(other)

    def inverse(self):
        qi = quat_conjugate(self.quaternion)
        Ri = quat_to_matrix(qi)
        return PoseSE3(qi, -(Ri @ self.translation))

    def apply(self, points):
        """Transform one (3,) point or an (N, 3) array."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def rotvec(self):
        return quat_to_rotvec(self.quaternion)

    def rotation_angle(self):
        """Total rotation angle in radians."""
        return float(np.linalg.norm(self.rotvec()))

    def angle_to(self, other):
        """Relative rotation angle in radians."""
        return (self.inverse() @ other).rotation_angle()

    def distance_to(self, other):
        return float(np.linalg.norm(self.translation - other.translation))

    def yaw(self):
        """Heading of the planar (x, y) projection, radians in [-pi, pi]."""
        R = self.rotation
        return float(np.arctan2(R[1, 0], R[0, 0]))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.quaternion))
                    and np.all(np.isfinite(self.translation)))

    def __repr__(self):
        q = np.array2string(self.quaternion, precision=6, suppress_small=True)
        t = np.array2string(self.translation, precision=6, suppress_small=True)
        return f"PoseSE3(q={q}, t={t})"
