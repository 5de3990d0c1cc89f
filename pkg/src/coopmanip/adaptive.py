"""Object-level adaptive controller and its PD baseline.

The controller only sees the measured object state and the desired trajectory.
Unknown inertial parameters are ``Theta = [m, m r_x, m r_y, I_p]`` and the terrain
load is modelled as a constant wrench ``Psi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ObjectState, Wrench, wrap_angle
from .trajectory import DesiredSample


def _check_pd(name, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-12):
        raise ValueError(f"{name} must be a symmetric square matrix")
    if np.linalg.eigvalsh(M).min() <= 0:
        raise ValueError(f"{name} must be positive definite")
    return M


@dataclass(frozen=True)
class AdaptiveGains:
    lam: float = 1.0
    K_D: np.ndarray = field(default_factory=lambda: np.diag([40.0, 40.0, 15.0]))
    Gamma_theta: np.ndarray = field(default_factory=lambda: np.diag([1.0, 1.0, 1.0, 0.5]))
    Gamma_psi: np.ndarray = field(default_factory=lambda: np.diag([2.0, 2.0, 1.0]))
    F_max: float = math.inf
    M_max: float = math.inf

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        for name, shape in (("K_D", 3), ("Gamma_theta", 4), ("Gamma_psi", 3)):
            M = getattr(self, name)
            M = np.diag(M) if np.ndim(M) == 1 else M
            M = _check_pd(name, M)
            if M.shape != (shape, shape):
                raise ValueError(f"{name} must be {shape}x{shape}")
            object.__setattr__(self, name, M)


@dataclass(frozen=True)
class EstimateState:
    theta_hat: np.ndarray = field(default_factory=lambda: np.zeros(4))
    psi_hat: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "theta_hat", np.asarray(self.theta_hat, dtype=float).reshape(4))
        object.__setattr__(self, "psi_hat", np.asarray(self.psi_hat, dtype=float).reshape(3))


def tracking_errors(state: ObjectState, des: DesiredSample):
    """(q_e, qd_e) with actual minus desired and the yaw error wrapped."""
    q_e = np.array([state.x_p[0] - des.q[0], state.x_p[1] - des.q[1],
                    wrap_angle(state.theta - des.q[2])])
    return q_e, state.qdot - des.qd


def composite_error(state: ObjectState, des: DesiredSample, lam: float) -> np.ndarray:
    q_e, qd_e = tracking_errors(state, des)
    return qd_e + lam * q_e


def reference_motion(state: ObjectState, des: DesiredSample, lam: float):
    """Reference rate qd - s and its time derivative qdd_d - lam * qd_e."""
    q_e, qd_e = tracking_errors(state, des)
    s = qd_e + lam * q_e
    return state.qdot - s, des.qdd - lam * qd_e


def regressor_theta(theta: float, omega: float, qdot_r, qddot_r) -> np.ndarray:
    """Y such that H qdd_r + C qd_r = Y @ [m, m r_x, m r_y, I_p]."""
    c, s = math.cos(theta), math.sin(theta)
    a1, a2, a3 = qddot_r
    w3 = omega * qdot_r[2]
    return np.array([
        [a1, s * a3 + c * w3, c * a3 - s * w3, 0.0],
        [a2, -c * a3 + s * w3, s * a3 + c * w3, 0.0],
        [0.0, s * a1 - c * a2, c * a1 + s * a2, a3],
    ])


def regressor_psi(state: ObjectState | None = None) -> np.ndarray:
    """Constant-wrench load model."""
    return np.eye(3)


def saturate(tau: np.ndarray, F_max: float, M_max: float) -> tuple[np.ndarray, bool]:
    out = np.array(tau, dtype=float)
    sat = False
    n = math.hypot(out[0], out[1])
    if n > F_max:
        out[:2] *= F_max / n
        sat = True
    if abs(out[2]) > M_max:
        out[2] = math.copysign(M_max, out[2])
        sat = True
    return out, sat


def control_wrench(est: EstimateState, Y_theta, Y_psi, s, K_D,
                   F_max: float = math.inf, M_max: float = math.inf) -> tuple[Wrench, bool]:
    tau = Y_theta @ est.theta_hat + Y_psi @ est.psi_hat - np.asarray(K_D) @ s
    tau, sat = saturate(tau, F_max, M_max)
    return Wrench.from_vector(tau), sat


def adapt_step(est: EstimateState, Y_theta, Y_psi, s, gains: AdaptiveGains, dt: float) -> EstimateState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return EstimateState(est.theta_hat - dt * gains.Gamma_theta @ (Y_theta.T @ s),
                         est.psi_hat - dt * gains.Gamma_psi @ (Y_psi.T @ s))


def lyapunov_value(s, est: EstimateState, theta_true, psi_true, H, gains: AdaptiveGains) -> float:
    """V = 1/2 (s'Hs + dTheta' G_theta^-1 dTheta + dPsi' G_psi^-1 dPsi); needs ground truth."""
    s = np.asarray(s, dtype=float)
    dth = est.theta_hat - np.asarray(theta_true, dtype=float)
    dps = est.psi_hat - np.asarray(psi_true, dtype=float)
    return 0.5 * float(s @ H @ s
                       + dth @ np.linalg.solve(gains.Gamma_theta, dth)
                       + dps @ np.linalg.solve(gains.Gamma_psi, dps))


def pd_wrench(state: ObjectState, des: DesiredSample, K_P, K_D_pd,
              F_max: float = math.inf, M_max: float = math.inf) -> tuple[Wrench, bool]:
    q_e, qd_e = tracking_errors(state, des)
    tau = -np.asarray(K_P) @ q_e - np.asarray(K_D_pd) @ qd_e
    tau, sat = saturate(tau, F_max, M_max)
    return Wrench.from_vector(tau), sat


class AdaptiveController:
    """Stateful wrapper threading the estimates through successive ticks."""

    def __init__(self, gains: AdaptiveGains | None = None, estimate: EstimateState | None = None):
        self.gains = gains or AdaptiveGains()
        self.est = estimate or EstimateState()
        self.last_s = np.zeros(3)

    def update(self, state: ObjectState, des: DesiredSample, dt: float) -> tuple[Wrench, bool]:
        """Wrench for this tick, then advance the estimates by ``dt``."""
        g = self.gains
        qd_r, qdd_r = reference_motion(state, des, g.lam)
        s = state.qdot - qd_r
        Y_t = regressor_theta(state.theta, state.omega, qd_r, qdd_r)
        Y_p = regressor_psi(state)
        tau, sat = control_wrench(self.est, Y_t, Y_p, s, g.K_D, g.F_max, g.M_max)
        self.est = adapt_step(self.est, Y_t, Y_p, s, g, dt)
        self.last_s = s
        return tau, sat


class PdController:
    def __init__(self, K_P, K_D, F_max=math.inf, M_max=math.inf, lam: float = 1.0):
        self.K_P = np.diag(K_P) if np.ndim(K_P) == 1 else np.asarray(K_P, dtype=float)
        self.K_D = np.diag(K_D) if np.ndim(K_D) == 1 else np.asarray(K_D, dtype=float)
        self.F_max, self.M_max = F_max, M_max
        self.lam = lam  # only for logging s
        self.est = EstimateState()
        self.last_s = np.zeros(3)

    def update(self, state, des, dt):
        self.last_s = composite_error(state, des, self.lam)
        return pd_wrench(state, des, self.K_P, self.K_D, self.F_max, self.M_max)
