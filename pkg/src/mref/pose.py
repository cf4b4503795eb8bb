"""Quaternion and pose algebra for placing instruction models on a tracked target.

Conventions: Hamilton product, components stored (x, y, z, w), right-handed
frames, rotations act on column vectors. ``quat_mul(a, b)`` applies ``b``
first, then ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

UNIT_TOL = 1e-6
# Below this angle between endpoints slerp degrades to normalized lerp.
SLERP_LINEAR_DOT = 1.0 - 1e-6


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __iter__(self):
        yield self.x
        yield self.y
        yield self.z

    def __add__(self, other: Vec3) -> Vec3:
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: Vec3) -> Vec3:
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, k: float) -> Vec3:
        return Vec3(self.x * k, self.y * k, self.z * k)

    def hadamard(self, other: Vec3) -> Vec3:
        return Vec3(self.x * other.x, self.y * other.y, self.z * other.z)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in self)


ZERO = Vec3(0.0, 0.0, 0.0)
ONES = Vec3(1.0, 1.0, 1.0)


@dataclass(frozen=True)
class Quat:
    """Rotation quaternion.

    Construction does not renormalize: decoded or authored data may carry a
    slightly (or badly) non-unit value, and it is up to validation to flag
    it. Every operation in this module returns a unit quaternion.
    """

    x: float
    y: float
    z: float
    w: float

    def __iter__(self):
        yield self.x
        yield self.y
        yield self.z
        yield self.w

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w)

    def is_unit(self, tol: float = UNIT_TOL) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def normalized(self) -> Quat:
        n = self.norm()
        if n == 0.0 or not math.isfinite(n):
            raise ValueError(f"cannot normalize quaternion {tuple(self)}")
        return Quat(self.x / n, self.y / n, self.z / n, self.w / n)

    def conjugate(self) -> Quat:
        return Quat(-self.x, -self.y, -self.z, self.w)

    def dot(self, other: Quat) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z + self.w * other.w

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle: float) -> Quat:
        ax, ay, az = axis
        n = math.sqrt(ax * ax + ay * ay + az * az)
        if n == 0.0:
            raise ValueError("rotation axis must be non-zero")
        s = math.sin(angle / 2.0) / n
        return cls(ax * s, ay * s, az * s, math.cos(angle / 2.0)).normalized()


IDENTITY_QUAT = Quat(0.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True)
class Pose:
    position: Vec3 = ZERO
    rotation: Quat = IDENTITY_QUAT
    scale: Vec3 = ONES


IDENTITY_POSE = Pose()


@dataclass(frozen=True)
class Keyframe:
    t_offset: float
    pose: Pose


def quat_mul(a: Quat, b: Quat) -> Quat:
    """Hamilton product ``a * b``, renormalized."""
    return Quat(
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
    ).normalized()


def quat_rotate(q: Quat, v: Vec3) -> Vec3:
    # v' = v + 2w (u x v) + 2 u x (u x v), u = vector part of q
    ux, uy, uz, w = q.x, q.y, q.z, q.w
    tx = 2.0 * (uy * v.z - uz * v.y)
    ty = 2.0 * (uz * v.x - ux * v.z)
    tz = 2.0 * (ux * v.y - uy * v.x)
    return Vec3(
        v.x + w * tx + (uy * tz - uz * ty),
        v.y + w * ty + (uz * tx - ux * tz),
        v.z + w * tz + (ux * ty - uy * tx),
    )


def quat_angle(a: Quat, b: Quat) -> float:
    """Rotation angle (radians, in [0, pi]) taking ``a`` to ``b``."""
    d = min(1.0, abs(a.dot(b)))
    return 2.0 * math.acos(d)


def quat_slerp(a: Quat, b: Quat, t: float) -> Quat:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"slerp parameter must lie in [0, 1], got {t}")
    d = a.dot(b)
    if d < 0.0:
        b = Quat(-b.x, -b.y, -b.z, -b.w)
        d = -d
    if d > SLERP_LINEAR_DOT:
        return Quat(
            a.x + (b.x - a.x) * t,
            a.y + (b.y - a.y) * t,
            a.z + (b.z - a.z) * t,
            a.w + (b.w - a.w) * t,
        ).normalized()
    theta = math.acos(min(1.0, d))
    s = math.sin(theta)
    ka = math.sin((1.0 - t) * theta) / s
    kb = math.sin(t * theta) / s
    return Quat(
        ka * a.x + kb * b.x,
        ka * a.y + kb * b.y,
        ka * a.z + kb * b.z,
        ka * a.w + kb * b.w,
    ).normalized()


def pose_compose(target: Pose, relative: Pose) -> Pose:
    """World placement of a cue authored relative to the target at the origin."""
    if target == IDENTITY_POSE:
        return relative
    offset = quat_rotate(target.rotation, target.scale.hadamard(relative.position))
    return Pose(
        position=target.position + offset,
        rotation=quat_mul(target.rotation, relative.rotation),
        scale=target.scale.hadamard(relative.scale),
    )


def _lerp(a: Vec3, b: Vec3, u: float) -> Vec3:
    return Vec3(a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u, a.z + (b.z - a.z) * u)


def keyframe_sample(track: Sequence[Keyframe], t: float) -> Pose:
    """Pose of an animated cue at time ``t`` (clamped to the track's ends)."""
    if not track:
        raise ValueError("keyframe track is empty")
    first, last = track[0], track[-1]
    if t <= first.t_offset:
        return first.pose
    if t >= last.t_offset:
        return last.pose
    # bisect on t_offset; tracks are short so a linear scan would also do
    lo, hi = 0, len(track) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if track[mid].t_offset <= t:
            lo = mid
        else:
            hi = mid
    k0, k1 = track[lo], track[hi]
    u = (t - k0.t_offset) / (k1.t_offset - k0.t_offset)
    if u == 0.0:
        return k0.pose
    p0, p1 = k0.pose, k1.pose
    return Pose(
        position=_lerp(p0.position, p1.position, u),
        rotation=quat_slerp(p0.rotation, p1.rotation, u),
        scale=_lerp(p0.scale, p1.scale, u),
    )
