"""Planar rigid-body dynamics of the manipulated object about a reference point p.

The configuration is ``q = [x_p, y_p, theta]``.  Equations of motion take the form

    tau = H(q) qdd + C(q, qd) qd + f_k

with ``H = m R [[1, 0, r_y], [0, 1, -r_x], [r_y, -r_x, I_p/m]] R^T`` and
``C qd = m omega^2 R [r_x, r_y, 0]``.  For these expressions to be Newton-Euler
about p, the COM must sit at ``x_p - R r_p``; that is the sign convention used for
``r_p`` throughout the package.  ``f_k`` is the load the agents have to overcome,
i.e. the negative of the physical friction wrench returned by
:func:`friction_wrench`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .contacts import ContactSpec, cross2, face_interval

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    w = math.remainder(a, TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    return w


def perp(a) -> np.ndarray:
    """z x a for a planar vector."""
    return np.array([-a[1], a[0]])


def rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotation(theta: float) -> np.ndarray:
    """Yaw rotation embedded in 3x3 (force x, force y, moment)."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class ObjectState:
    x_p: np.ndarray
    theta: float
    v_p: np.ndarray
    omega: float

    def __post_init__(self):
        object.__setattr__(self, "x_p", np.asarray(self.x_p, dtype=float).reshape(2))
        object.__setattr__(self, "v_p", np.asarray(self.v_p, dtype=float).reshape(2))
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "omega", float(self.omega))

    @classmethod
    def at_rest(cls, x=0.0, y=0.0, theta=0.0) -> "ObjectState":
        return cls(np.array([x, y]), theta, np.zeros(2), 0.0)

    @property
    def q(self) -> np.ndarray:
        return np.array([self.x_p[0], self.x_p[1], self.theta])

    @property
    def qdot(self) -> np.ndarray:
        return np.array([self.v_p[0], self.v_p[1], self.omega])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x_p)) and np.all(np.isfinite(self.v_p))
                    and math.isfinite(self.theta) and math.isfinite(self.omega))


@dataclass(frozen=True)
class ObjectParams:
    """Ground-truth object properties. Controllers never see this."""

    m_b: float
    I_Gzz: float
    r_p: np.ndarray = field(default_factory=lambda: np.zeros(2))
    half_extents: np.ndarray = field(default_factory=lambda: np.array([0.3, 0.4]))
    mu: float = 0.3
    rho_eff: float = 0.2
    g: float = 9.81

    def __post_init__(self):
        object.__setattr__(self, "r_p", np.asarray(self.r_p, dtype=float).reshape(2))
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=float).reshape(2))
        if not (self.m_b > 0 and self.I_Gzz > 0):
            raise ValueError(f"mass and inertia must be positive (m_b={self.m_b}, I_Gzz={self.I_Gzz})")
        if self.mu < 0 or self.rho_eff < 0:
            raise ValueError("friction coefficient and effective radius must be non-negative")

    @property
    def I_pzz(self) -> float:
        return self.I_Gzz + self.m_b * float(self.r_p @ self.r_p)

    @property
    def theta_vector(self) -> np.ndarray:
        """Linear parameterisation [m, m r_x, m r_y, I_p] of the inertial terms."""
        m = self.m_b
        return np.array([m, m * self.r_p[0], m * self.r_p[1], self.I_pzz])

    def com_offset_world(self, theta: float) -> np.ndarray:
        """R r_p; the COM is at x_p minus this vector."""
        return rot2(theta) @ self.r_p


class Wrench(NamedTuple):
    f: np.ndarray
    m: float

    @classmethod
    def zero(cls) -> "Wrench":
        return cls(np.zeros(2), 0.0)

    @classmethod
    def from_vector(cls, v) -> "Wrench":
        return cls(np.array([v[0], v[1]], dtype=float), float(v[2]))

    def as_vector(self) -> np.ndarray:
        return np.array([self.f[0], self.f[1], self.m])

    def __add__(self, other):  # type: ignore[override]
        return Wrench(self.f + other.f, self.m + other.m)


def mass_matrix(params: ObjectParams, theta: float) -> np.ndarray:
    m = params.m_b
    rx, ry = params.r_p
    body = m * np.array([[1.0, 0.0, ry], [0.0, 1.0, -rx], [ry, -rx, params.I_pzz / m]])
    R = rotation(theta)
    H = R @ body @ R.T
    H = 0.5 * (H + H.T)
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise ValueError("mass matrix is not positive definite; check object parameters") from exc
    return H


def coriolis_matrix(params: ObjectParams, theta: float, omega: float) -> np.ndarray:
    """Full C(q, qd) with C qd = m omega^2 R r_p and Hdot - 2C skew-symmetric."""
    a = params.m_b * params.com_offset_world(theta)
    C = np.zeros((3, 3))
    C[0, 2] = omega * a[0]
    C[1, 2] = omega * a[1]
    return C


def coriolis_vector(params: ObjectParams, theta: float, omega: float) -> np.ndarray:
    a = params.com_offset_world(theta)
    return params.m_b * omega * omega * np.array([a[0], a[1], 0.0])


def mass_matrix_dot(params: ObjectParams, theta: float, omega: float) -> np.ndarray:
    """Analytic time derivative of H along a motion with yaw rate omega."""
    a = params.m_b * params.com_offset_world(theta)
    return omega * np.array([[0.0, 0.0, a[0]], [0.0, 0.0, a[1]], [a[0], a[1], 0.0]])


def com_velocity(params: ObjectParams, state: ObjectState) -> np.ndarray:
    return state.v_p - state.omega * perp(params.com_offset_world(state.theta))


def friction_wrench(params: ObjectParams, state: ObjectState, applied: Wrench,
                    dt: float | None = None, v_eps: float = 1e-4,
                    omega_eps: float = 1e-3) -> Wrench:
    """Physical terrain friction acting on the object, as a wrench about p.

    Isotropic Coulomb friction at the COM plus a rotational term with effective
    radius ``rho_eff``.  ``applied`` is the non-friction wrench about p.

    Without ``dt`` this is the instantaneous law: kinetic when the COM or the yaw
    rate is moving (tanh-smoothed in yaw), otherwise static friction cancelling
    ``applied`` up to the Coulomb caps.  With ``dt`` the same caps are applied at
    the impulse level over one step, so friction never reverses the motion and a
    body with sub-cap load is brought exactly to rest.
    """
    cap_f = params.mu * params.m_b * params.g
    cap_m = cap_f * params.rho_eff
    if cap_f == 0.0:
        return Wrench.zero()
    a = params.com_offset_world(state.theta)
    v_G = state.v_p - state.omega * perp(a)
    F_app = np.asarray(applied.f, dtype=float)
    M_app_G = applied.m + cross2(a, F_app)
    I_G = params.I_Gzz

    if dt is None:
        speed = math.hypot(v_G[0], v_G[1])
        if speed > v_eps or abs(state.omega) > omega_eps:
            f = -cap_f * v_G / max(speed, v_eps)
            M_G = -cap_m * math.tanh(state.omega / omega_eps)
        else:
            f = -F_app
            n = math.hypot(f[0], f[1])
            if n > cap_f:
                f = f * (cap_f / n)
            M_G = -min(max(M_app_G, -cap_m), cap_m)
    else:
        p_free = params.m_b * v_G + dt * F_app
        n = math.hypot(p_free[0], p_free[1])
        if n <= dt * cap_f:
            f = -p_free / dt
        else:
            f = -cap_f * p_free / n
        L_free = I_G * state.omega + dt * M_app_G
        if abs(L_free) <= dt * cap_m:
            M_G = -L_free / dt
        else:
            M_G = -math.copysign(cap_m, L_free)
    # COM sits at x_p - a, so the moment about p picks up (-a) x f
    return Wrench(np.asarray(f, dtype=float), float(M_G - cross2(a, f)))


class ContactResult(NamedTuple):
    wrench: Wrench
    in_contact: list
    applied: np.ndarray        # transmitted force magnitudes
    slide: np.ndarray          # measured slide of each agent along its face
    forces_world: np.ndarray   # (n, 2) world force each agent puts on the object


def agent_slide_and_gap(state: ObjectState, contact: ContactSpec, agent_pos, standoff: float):
    """Measured (slide, normal gap) of an agent whose body sits ``standoff`` behind its contact point."""
    c, s = math.cos(state.theta), math.sin(state.theta)
    dx, dy = agent_pos[0] - state.x_p[0], agent_pos[1] - state.x_p[1]
    n, t, r0 = contact.n_hat, contact.t_hat, contact.r_0
    rx = c * dx + s * dy + standoff * n[0] - r0[0]
    ry = -s * dx + c * dy + standoff * n[1] - r0[1]
    return float(rx * t[0] + ry * t[1]), float(-(rx * n[0] + ry * n[1]))


def contact_resolve(state: ObjectState, contacts: Sequence[ContactSpec], agent_positions,
                    forces, tol: float, *, half_extents, standoff: float = 0.05,
                    caps=None, intervals=None) -> ContactResult:
    """Wrench the agents put on the object.

    An agent is in contact when its nose (``standoff`` ahead of its body along the
    face normal) is no more than ``tol`` short of its face and its measured slide
    is on the physical face.  In-contact agents transmit ``clip(F_i, 0, cap_i)`` along the
    inward normal at their measured contact point; everyone else transmits nothing.
    ``intervals`` may carry precomputed :func:`face_interval` results.
    """
    n = len(contacts)
    c, s = math.cos(state.theta), math.sin(state.theta)
    fx = fy = m = 0.0
    flags = []
    applied = np.zeros(n)
    slides = np.zeros(n)
    fw = np.zeros((n, 2))
    for i, con in enumerate(contacts):
        d_act, gap = agent_slide_and_gap(state, con, agent_positions[i], standoff)
        slides[i] = d_act
        lo, hi = intervals[i] if intervals is not None else face_interval(con, half_extents)
        touching = gap <= tol and lo <= d_act <= hi
        flags.append(bool(touching))
        if not touching:
            continue
        F = max(float(forces[i]), 0.0)
        if caps is not None:
            F = min(F, float(caps[i]))
        applied[i] = F
        nb = con.n_hat
        fwx, fwy = F * (c * nb[0] - s * nb[1]), F * (s * nb[0] + c * nb[1])
        pb = con.r_0 + d_act * con.t_hat
        rwx, rwy = c * pb[0] - s * pb[1], s * pb[0] + c * pb[1]
        fw[i] = fwx, fwy
        fx += fwx
        fy += fwy
        m += rwx * fwy - rwy * fwx
    return ContactResult(Wrench(np.array([fx, fy]), m), flags, applied, slides, fw)


def step(state: ObjectState, params: ObjectParams, tau: Wrench, dt: float) -> ObjectState:
    """Advance one semi-implicit Euler step under applied wrench ``tau`` and terrain friction.

    The accelerations are those of ``H qdd = tau - C qd + friction``.  Since that
    system is Newton-Euler about p, it is evaluated directly at the COM
    (``m a_G = F``, ``I_G omega_dot = M_G``).  The velocity update acts on the COM
    twist, which is exact for the momentum of a free body, and is then mapped back to p.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    fric = friction_wrench(params, state, tau, dt=dt)
    a = params.com_offset_world(state.theta)
    Fx = tau.f[0] + fric.f[0]
    Fy = tau.f[1] + fric.f[1]
    # moment about the COM: p sits at x_G + a
    M_G = tau.m + fric.m + a[0] * Fy - a[1] * Fx
    w = state.omega
    w_new = w + dt * M_G / params.I_Gzz
    vGx = state.v_p[0] + w * a[1] + dt * Fx / params.m_b
    vGy = state.v_p[1] - w * a[0] + dt * Fy / params.m_b
    if not (math.isfinite(w_new) and math.isfinite(vGx) and math.isfinite(vGy)):
        raise FloatingPointError("non-finite object acceleration")
    theta_new = state.theta + dt * w_new
    xGx = state.x_p[0] - a[0] + dt * vGx
    xGy = state.x_p[1] - a[1] + dt * vGy
    c, s = math.cos(theta_new), math.sin(theta_new)
    rx, ry = params.r_p
    anx, any_ = c * rx - s * ry, s * rx + c * ry
    return ObjectState(np.array([xGx + anx, xGy + any_]), wrap_angle(theta_new),
                       np.array([vGx - w_new * any_, vGy + w_new * anx]), w_new)
