"""Pose representations, rotation conversions and trajectory buffers.

Euler convention (used everywhere in the package): extrinsic X-Y-Z. The
triple ``(theta, phi, psi)`` rotates about the fixed x axis by ``theta``,
then the fixed y axis by ``phi``, then the fixed z axis by ``psi``, so the
rotation matrix is ``Rz(psi) @ Ry(phi) @ Rx(theta)``.

Near gimbal lock (``|phi|`` within 1e-6 of pi/2) the conversions still go
through rotation matrices and stay well defined, but Euler round trips are
only accurate to about 1e-6 there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import kernels
from .errors import InsufficientHistoryError, InvalidInputError

DEFAULT_AXIS = np.array([0.0, 0.0, 1.0])
_GIMBAL_EPS = 1e-6


def wrap_angle(a):
    """Wrap angle(s) into (-pi, pi]."""
    return kernels.wrap(a)


@dataclass(frozen=True)
class Pose6DoF:
    """Translation in meters plus extrinsic XYZ Euler angles in radians.

    Angles are wrapped into (-pi, pi] on construction.
    """

    tx: float
    ty: float
    tz: float
    theta: float
    phi: float
    psi: float

    def __post_init__(self):
        vals = (self.tx, self.ty, self.tz, self.theta, self.phi, self.psi)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError(f"pose components must be finite, got {vals}")
        for name in ("tx", "ty", "tz"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("theta", "phi", "psi"):
            object.__setattr__(self, name, float(wrap_angle(float(getattr(self, name)))))

    @classmethod
    def from_array(cls, arr) -> Pose6DoF:
        a = np.asarray(arr, dtype=float).ravel()
        if a.shape != (6,):
            raise InvalidInputError(f"expected 6 pose components, got shape {a.shape}")
        return cls(*a.tolist())

    @classmethod
    def from_parts(cls, translation, rotation) -> Pose6DoF:
        return cls(*np.asarray(translation, float).tolist(), *np.asarray(rotation, float).tolist())

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.tx, self.ty, self.tz])

    @property
    def rotation(self) -> np.ndarray:
        return np.array([self.theta, self.phi, self.psi])

    def as_array(self) -> np.ndarray:
        return np.array([self.tx, self.ty, self.tz, self.theta, self.phi, self.psi])


@dataclass(frozen=True)
class AxisAngle:
    """Unit rotation axis and angle in [0, pi].

    Use :meth:`canonical` to build one from an arbitrary axis/angle pair; the
    constructor only validates.
    """

    axis: np.ndarray
    angle: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        angle = float(self.angle)
        if not (np.all(np.isfinite(axis)) and math.isfinite(angle)):
            raise InvalidInputError("axis-angle components must be finite")
        if angle != 0.0 and abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise InvalidInputError(f"axis must be unit-norm, got |axis|={np.linalg.norm(axis)}")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "angle", angle)

    @classmethod
    def canonical(cls, axis, angle: float) -> AxisAngle:
        """Normalise ``axis`` and fold ``angle`` into [0, pi] (flipping the axis)."""
        axis = np.asarray(axis, dtype=float).reshape(3)
        norm = np.linalg.norm(axis)
        angle = float(wrap_angle(angle))
        if norm < 1e-15 or angle == 0.0:
            return cls(DEFAULT_AXIS.copy(), 0.0)
        axis = axis / norm
        if angle < 0.0:
            axis, angle = -axis, -angle
        if angle == math.pi:
            axis = _sign_fix(axis)
        return cls(axis, angle)

    def __eq__(self, other):
        if not isinstance(other, AxisAngle):
            return NotImplemented
        return self.angle == other.angle and np.array_equal(self.axis, other.axis)

    __hash__ = None


def _sign_fix(axis):
    # a rotation by pi is the same about +axis and -axis; pick one deterministically
    for c in axis:
        if abs(c) > 1e-12:
            return axis if c > 0 else -axis
    return axis


def _check_euler(euler) -> np.ndarray:
    e = np.asarray(euler, dtype=float).reshape(-1)
    if e.shape != (3,):
        raise InvalidInputError(f"expected an Euler triple, got shape {e.shape}")
    if not np.all(np.isfinite(e)):
        raise InvalidInputError(f"Euler angles must be finite, got {e}")
    return e


def euler_to_quat(euler) -> np.ndarray:
    """Unit quaternion ``[w, x, y, z]`` for an extrinsic XYZ Euler triple."""
    th, ph, ps = _check_euler(euler) * 0.5
    cx, sx = math.cos(th), math.sin(th)
    cy, sy = math.cos(ph), math.sin(ph)
    cz, sz = math.cos(ps), math.sin(ps)
    # q = qz * qy * qx
    return np.array([
        cz * cy * cx + sz * sy * sx,
        cz * cy * sx - sz * sy * cx,
        cz * sy * cx + sz * cy * sx,
        sz * cy * cx - cz * sy * sx,
    ])


def euler_to_matrix(euler) -> np.ndarray:
    th, ph, ps = _check_euler(euler)
    cx, sx = math.cos(th), math.sin(th)
    cy, sy = math.cos(ph), math.sin(ph)
    cz, sz = math.cos(ps), math.sin(ps)
    return np.array([
        [cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx],
        [sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx],
        [-sy, cy * sx, cy * cx],
    ])


def matrix_to_euler(m) -> np.ndarray:
    """Extrinsic XYZ Euler triple of a rotation matrix."""
    m = np.asarray(m, dtype=float)
    cy = math.hypot(m[0, 0], m[1, 0])
    phi = math.atan2(-m[2, 0], cy)
    if cy > _GIMBAL_EPS:
        theta = math.atan2(m[2, 1], m[2, 2])
        psi = math.atan2(m[1, 0], m[0, 0])
    else:
        # gimbal lock: only theta -/+ psi is observable, put it all in psi
        theta = 0.0
        psi = math.atan2(-m[0, 1], m[1, 1])
    return wrap_angle(np.array([theta, phi, psi]))


def axis_angle_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues' rotation formula."""
    k = np.asarray(axis, dtype=float)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * (kx @ kx)


def euler_to_axis_angle(euler) -> AxisAngle:
    q = euler_to_quat(euler)
    if q[0] < 0.0:
        q = -q
    v = q[1:]
    s = np.linalg.norm(v)
    if s < 1e-15:
        return AxisAngle(DEFAULT_AXIS.copy(), 0.0)
    angle = 2.0 * math.atan2(s, q[0])
    return AxisAngle.canonical(v / s, angle)


def axis_angle_to_euler(aa: AxisAngle) -> np.ndarray:
    axis = np.asarray(aa.axis, dtype=float)
    if aa.angle != 0.0 and abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise InvalidInputError("axis must be unit-norm for a nonzero angle")
    if aa.angle == 0.0:
        return np.zeros(3)
    return matrix_to_euler(axis_angle_matrix(axis, aa.angle))


class TrajectoryBuffer:
    """Fixed-capacity ring buffer of ``(frame, Pose6DoF)`` history.

    Frames must be strictly increasing. Storage is two (capacity, 3) arrays
    so window queries hand contiguous chronological arrays to the kernels.
    """

    def __init__(self, capacity: int = 50):
        if capacity < 2:
            raise InvalidInputError(f"trajectory capacity must be >= 2, got {capacity}")
        self.capacity = int(capacity)
        self._frames = np.zeros(self.capacity, dtype=np.int64)
        self._trans = np.zeros((self.capacity, 3))
        self._rot = np.zeros((self.capacity, 3))
        self._start = 0
        self._size = 0

    def __len__(self):
        return self._size

    def copy(self) -> TrajectoryBuffer:
        out = TrajectoryBuffer(self.capacity)
        out._frames = self._frames.copy()
        out._trans = self._trans.copy()
        out._rot = self._rot.copy()
        out._start, out._size = self._start, self._size
        return out

    def append(self, frame: int, pose: Pose6DoF) -> None:
        if self._size and frame <= self.last_frame:
            raise InvalidInputError(
                f"frame indices must increase strictly ({frame} after {self.last_frame})")
        if self._size < self.capacity:
            slot = (self._start + self._size) % self.capacity
            self._size += 1
        else:
            slot = self._start
            self._start = (self._start + 1) % self.capacity
        self._frames[slot] = frame
        self._trans[slot] = (pose.tx, pose.ty, pose.tz)
        self._rot[slot] = (pose.theta, pose.phi, pose.psi)

    def _order(self):
        return (self._start + np.arange(self._size)) % self.capacity

    @property
    def last_frame(self) -> int:
        return int(self._frames[(self._start + self._size - 1) % self.capacity])

    def frames(self) -> np.ndarray:
        return self._frames[self._order()]

    def translations(self) -> np.ndarray:
        return self._trans[self._order()]

    def rotations(self) -> np.ndarray:
        return self._rot[self._order()]

    def poses(self) -> list[Pose6DoF]:
        return [Pose6DoF.from_parts(t, r) for t, r in zip(self.translations(), self.rotations())]

    def last(self, k: int = 1) -> list[tuple[int, Pose6DoF]]:
        """The most recent ``k`` entries, oldest first."""
        k = min(k, self._size)
        fr = self.frames()[-k:] if k else []
        ps = self.poses()[-k:] if k else []
        return list(zip((int(f) for f in fr), ps))


def max_pairwise_displacement(buf: TrajectoryBuffer,
                              selector: Literal["translation", "rotation"]) -> float:
    """Largest pairwise distance over the buffer window.

    Rotation distances use per-component wrapped Euler differences so that
    a track crossing +/-pi is not mistaken for a 2*pi jump.
    """
    if len(buf) < 2:
        raise InsufficientHistoryError(f"need at least 2 history entries, have {len(buf)}")
    if selector == "translation":
        return kernels.max_pairwise(np.ascontiguousarray(buf.translations()), False)
    if selector == "rotation":
        return kernels.max_pairwise(np.ascontiguousarray(buf.rotations()), True)
    raise InvalidInputError(f"unknown selector {selector!r}")
