"""Time-parameterised desired object trajectories.

Every trajectory maps time to a :class:`DesiredSample` holding pose, rate and
acceleration of the reference point.  Progress along a path follows a
trapezoidal speed profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline


class DesiredSample(NamedTuple):
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray


@dataclass(frozen=True)
class Trapezoid:
    """Scalar 0 -> length over [t0, t0 + duration] with symmetric accel/decel phases."""

    length: float
    duration: float
    t0: float = 0.0
    accel_frac: float = 0.2

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if not 0 < self.accel_frac <= 0.5:
            raise ValueError("accel_frac must be in (0, 0.5]")

    def __call__(self, t: float) -> tuple[float, float, float]:
        T, L = self.duration, self.length
        ta = self.accel_frac * T
        v = L / (T - ta)
        acc = v / ta
        tau = t - self.t0
        if tau <= 0:
            return 0.0, 0.0, 0.0
        if tau >= T:
            return L, 0.0, 0.0
        if tau < ta:
            return 0.5 * acc * tau * tau, acc * tau, acc
        if tau <= T - ta:
            return 0.5 * acc * ta * ta + v * (tau - ta), v, 0.0
        rem = T - tau
        return L - 0.5 * acc * rem * rem, acc * rem, -acc


class Trajectory:
    def sample(self, t: float) -> DesiredSample:
        raise NotImplementedError

    def __call__(self, t: float) -> DesiredSample:
        return self.sample(t)


class LineTrajectory(Trajectory):
    """Straight segment with an independent yaw ramp."""

    def __init__(self, start, end, duration, t0=0.0, accel_frac=0.2,
                 yaw_start=0.0, yaw_end=None, yaw_t0=None, yaw_duration=None):
        self.start = np.asarray(start, dtype=float)
        self.end = np.asarray(end, dtype=float)
        delta = self.end - self.start
        length = float(np.linalg.norm(delta))
        self.direction = delta / length if length > 0 else np.zeros(2)
        self.profile = Trapezoid(length, duration, t0, accel_frac) if length > 0 else None
        self.yaw_start = float(yaw_start)
        yaw_end = self.yaw_start if yaw_end is None else float(yaw_end)
        self.yaw_profile = None
        if yaw_end != self.yaw_start:
            self.yaw_profile = Trapezoid(yaw_end - self.yaw_start,
                                         yaw_duration if yaw_duration is not None else duration,
                                         t0 if yaw_t0 is None else yaw_t0, accel_frac)

    def sample(self, t):
        s = sd = sdd = 0.0
        if self.profile is not None:
            s, sd, sdd = self.profile(t)
        y = yd = ydd = 0.0
        if self.yaw_profile is not None:
            y, yd, ydd = self.yaw_profile(t)
        p = self.start + s * self.direction
        v = sd * self.direction
        a = sdd * self.direction
        return DesiredSample(np.array([p[0], p[1], self.yaw_start + y]),
                             np.array([v[0], v[1], yd]), np.array([a[0], a[1], ydd]))


class ArcTrajectory(Trajectory):
    """Circular arc starting at ``start`` with the given heading; yaw turns with the path."""

    def __init__(self, start, heading, radius, sweep, duration, t0=0.0, accel_frac=0.2, yaw_start=0.0):
        self.start = np.asarray(start, dtype=float)
        self.heading = float(heading)
        self.radius = float(radius)
        self.sweep = float(sweep)
        self.yaw_start = float(yaw_start)
        self.sign = 1.0 if sweep >= 0 else -1.0
        # centre lies to the left of the heading for positive sweep
        left = np.array([-math.sin(heading), math.cos(heading)])
        self.center = self.start + self.sign * self.radius * left
        self.profile = Trapezoid(abs(self.sweep), duration, t0, accel_frac)

    def sample(self, t):
        phi, phid, phidd = self.profile(t)
        phi, phid, phidd = self.sign * phi, self.sign * phid, self.sign * phidd
        ang0 = math.atan2(*(self.start - self.center)[::-1])
        ang = ang0 + phi
        r = self.radius
        c, s = math.cos(ang), math.sin(ang)
        p = self.center + r * np.array([c, s])
        v = r * phid * np.array([-s, c])
        a = r * phidd * np.array([-s, c]) - r * phid * phid * np.array([c, s])
        return DesiredSample(np.array([p[0], p[1], self.yaw_start + phi]),
                             np.array([v[0], v[1], phid]), np.array([a[0], a[1], phidd]))


class SplineTrajectory(Trajectory):
    """Cubic spline through (x, y, yaw) waypoints, parameterised by chord length."""

    def __init__(self, waypoints, duration, t0=0.0, accel_frac=0.2):
        w = np.asarray(waypoints, dtype=float)
        if w.ndim != 2 or w.shape[1] != 3 or len(w) < 2:
            raise ValueError("waypoints must be an (N>=2, 3) array of x, y, yaw")
        chord = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(w[:, :2], axis=0), axis=1))]
        if chord[-1] <= 0:
            raise ValueError("waypoints must not all coincide")
        self.spline = CubicSpline(chord / chord[-1], w, bc_type="clamped")
        self.profile = Trapezoid(1.0, duration, t0, accel_frac)

    def sample(self, t):
        u, ud, udd = self.profile(t)
        q = self.spline(u)
        d1 = self.spline(u, 1)
        d2 = self.spline(u, 2)
        return DesiredSample(np.array(q), d1 * ud, d2 * ud * ud + d1 * udd)


def trajectory_from_spec(spec: dict) -> Trajectory:
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "line":
        return LineTrajectory(**spec)
    if kind == "arc":
        return ArcTrajectory(**spec)
    if kind == "spline":
        return SplineTrajectory(**spec)
    if kind == "hold":
        pose = spec.get("pose", [0.0, 0.0, 0.0])
        return LineTrajectory(pose[:2], pose[:2], 1.0, yaw_start=pose[2])
    raise ValueError(f"unknown trajectory kind {kind!r}")
