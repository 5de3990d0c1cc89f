"""Per-agent loco-manipulation MPC on a planar single-rigid-body model.

The agent state is ``X = [p_x, p_y, yaw, v_x, v_y, yaw_rate]`` driven by a net
ground force and yaw moment ``u = [u_fx, u_fy, u_m]``.  The force the agent puts
on the object is appended to the state as ``f_r / m`` with zero dynamics, which
lets the pushing reaction be discretised with an ordinary zero-order hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, expm

from . import qp
from .contacts import ContactSpec
from .dynamics import ObjectState, perp, rot2, wrap_angle

NX = 6
NAUG = 8
NU = 3
# the pushed object pushes back: v_dot gets -f_r/m
REACTION_SIGN = -1.0


@dataclass(frozen=True)
class AgentParams:
    m_i: float = 12.0
    I_i: float = 0.4
    mu_a: float = 0.3
    g: float = 9.81
    M_cap: float = 10.0

    def __post_init__(self):
        if min(self.m_i, self.I_i, self.mu_a, self.g, self.M_cap) <= 0:
            raise ValueError("agent parameters must all be positive")

    def input_bounds(self, mu_a: float | None = None) -> np.ndarray:
        mu = self.mu_a if mu_a is None else mu_a
        f = mu * self.m_i * self.g
        return np.array([f, f, self.M_cap])


@dataclass(frozen=True)
class AgentState:
    p: np.ndarray
    yaw: float
    v: np.ndarray
    yaw_rate: float

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(2))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(2))
        object.__setattr__(self, "yaw", float(self.yaw))
        object.__setattr__(self, "yaw_rate", float(self.yaw_rate))

    @property
    def X(self) -> np.ndarray:
        return np.array([self.p[0], self.p[1], self.yaw, self.v[0], self.v[1], self.yaw_rate])

    @classmethod
    def from_vector(cls, X) -> "AgentState":
        return cls(X[0:2], X[2], X[3:5], X[5])


def augment(state: AgentState, f_r_world, m_i: float) -> np.ndarray:
    return np.concatenate([state.X, np.asarray(f_r_world, dtype=float) / m_i])


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 10
    dt_mpc: float = 2.0 / 150.0
    Q: np.ndarray = field(default_factory=lambda: np.diag([1e4, 1e4, 2e3, 50.0, 50.0, 10.0]))
    P_w: np.ndarray = field(default_factory=lambda: np.diag([1e-4, 1e-4, 1e-3]))

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.dt_mpc <= 0:
            raise ValueError("dt_mpc must be positive")
        Q = np.diag(self.Q) if np.ndim(self.Q) == 1 else np.asarray(self.Q, dtype=float)
        P = np.diag(self.P_w) if np.ndim(self.P_w) == 1 else np.asarray(self.P_w, dtype=float)
        if Q.shape != (NX, NX) or P.shape != (NU, NU):
            raise ValueError("Q must be 6x6 and P_w 3x3")
        if np.linalg.eigvalsh(Q).min() < 0 or np.linalg.eigvalsh(P).min() <= 0:
            raise ValueError("Q must be PSD and P_w PD")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "P_w", P)


def continuous_matrices(params: AgentParams) -> tuple[np.ndarray, np.ndarray]:
    D = np.zeros((NAUG, NAUG))
    D[0, 3] = D[1, 4] = D[2, 5] = 1.0
    D[3, 6] = D[4, 7] = REACTION_SIGN
    G = np.zeros((NAUG, NU))
    G[3, 0] = G[4, 1] = 1.0 / params.m_i
    G[5, 2] = 1.0 / params.I_i
    return D, G


def discretize(D_bar, G_bar, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretisation via the exponential of the stacked block matrix."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    n, m = G_bar.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = D_bar
    M[:n, n:] = G_bar
    M *= dt
    # nilpotent for the agent model, where the series stops after a few terms
    E = np.eye(n + m)
    term = np.eye(n + m)
    for k in range(1, n + m + 1):
        term = term @ M / k
        if not term.any():
            break
        E = E + term
    else:
        E = expm(M)
    return E[:n, :n], E[:n, n:]


def desired_agent_state(obj: ObjectState, contact: ContactSpec, d_i: float, standoff: float) -> AgentState:
    R = rot2(obj.theta)
    r_b = contact.r_0 + d_i * contact.t_hat - standoff * contact.n_hat
    r_w = R @ r_b
    n_w = R @ contact.n_hat
    return AgentState(obj.x_p + r_w, math.atan2(n_w[1], n_w[0]), obj.v_p + obj.omega * perp(r_w), obj.omega)


def reference_horizon(obj: ObjectState, contact: ContactSpec, d_i: float, standoff: float,
                      horizon: int, dt: float) -> np.ndarray:
    """Agent references over the horizon, extrapolating the object at constant twist."""
    tj = dt * np.arange(1, horizon + 1)
    th = obj.theta + tj * obj.omega
    c, s = np.cos(th), np.sin(th)
    r_b = contact.r_0 + d_i * contact.t_hat - standoff * contact.n_hat
    r_w = np.stack([c * r_b[0] - s * r_b[1], s * r_b[0] + c * r_b[1]], axis=1)
    n_w = np.stack([c * contact.n_hat[0] - s * contact.n_hat[1], s * contact.n_hat[0] + c * contact.n_hat[1]], axis=1)
    refs = np.empty((horizon, NX))
    refs[:, :2] = obj.x_p + np.outer(tj, obj.v_p) + r_w
    refs[:, 2] = np.arctan2(n_w[:, 1], n_w[:, 0])
    refs[:, 3] = obj.v_p[0] - obj.omega * r_w[:, 1]
    refs[:, 4] = obj.v_p[1] + obj.omega * r_w[:, 0]
    refs[:, 5] = obj.omega
    return refs


class CondensedModel:
    """Prediction matrices X_{1..k} = S_x eta_0 + S_u U for a fixed (A_d, B_d, cfg)."""

    def __init__(self, A_d, B_d, cfg: MpcConfig, m_i: float):
        k = cfg.horizon
        self.k, self.cfg, self.m_i = k, cfg, m_i
        self.A_d, self.B_d = A_d, B_d
        Sx = np.zeros((NX * k, NAUG))
        Su = np.zeros((NX * k, NU * k))
        Apow = np.eye(NAUG)
        powers = []
        for j in range(k):
            powers.append(Apow)
            Apow = A_d @ Apow
            Sx[NX * j:NX * (j + 1)] = Apow[:NX]
        for j in range(k):
            for l in range(j + 1):
                Su[NX * j:NX * (j + 1), NU * l:NU * (l + 1)] = (powers[j - l] @ B_d)[:NX]
        self.Sx, self.Su = Sx, Su
        self.Qbar = np.kron(np.eye(k), cfg.Q)
        self.Pbar = np.kron(np.eye(k), cfg.P_w)
        H = 2.0 * (Su.T @ self.Qbar @ Su + self.Pbar)
        self.H = 0.5 * (H + H.T)
        self.SuTQ = Su.T @ self.Qbar
        self.known_pd = bool(np.linalg.eigvalsh(self.H)[0] >= qp.REG_THRESHOLD)
        self.H_factor = cho_factor(self.H)

    def tracking_offset(self, eta0, refs) -> np.ndarray:
        return self.Sx @ eta0 - np.asarray(refs, dtype=float).reshape(-1)

    def qp(self, eta0, refs, u_max) -> qp.QpProblem:
        e0 = self.tracking_offset(eta0, refs)
        c = 2.0 * self.SuTQ @ e0 - 2.0 * self.Pbar @ np.tile(hold_input(eta0, self.m_i), self.k)
        nv = NU * self.k
        ub = np.tile(u_max, self.k)
        A_in = np.vstack([np.eye(nv), -np.eye(nv)])
        return qp.QpProblem(self.H, c, A_in=A_in, b_in=np.concatenate([ub, ub]), known_pd=self.known_pd)

    def solve(self, eta0, refs, u_max, warm_start=None) -> qp.QpSolution:
        """Exact shortcut when the unconstrained minimiser already satisfies the box."""
        problem = self.qp(eta0, refs, u_max)
        U = cho_solve(self.H_factor, -problem.c)
        if np.all(np.abs(U) <= problem.b_in[: NU * self.k]):
            mu = np.zeros(problem.m_in)
            return qp.QpSolution(U, qp.OPTIMAL, (), qp.kkt_residual(problem, U, None, mu), 0,
                                 np.zeros(0), mu, problem.objective(U))
        return qp.solve(problem, warm_start=warm_start)

    def constant_cost(self, eta0, refs) -> float:
        e0 = self.tracking_offset(eta0, refs)
        u0 = np.tile(hold_input(eta0, self.m_i), self.k)
        return float(e0 @ self.Qbar @ e0 + u0 @ self.Pbar @ u0)

    def predict(self, eta0, U) -> np.ndarray:
        return (self.Sx @ eta0 + self.Su @ np.asarray(U).reshape(-1)).reshape(self.k, NX)


def hold_input(eta, m_i: float) -> np.ndarray:
    """Input cancelling the augmented push reaction; the input weight penalises deviation from it."""
    return np.array([-REACTION_SIGN * m_i * eta[6], -REACTION_SIGN * m_i * eta[7], 0.0])


def build_condensed_qp(eta0, refs, A_d, B_d, cfg: MpcConfig, u_max, m_i: float) -> qp.QpProblem:
    """Inputs-only QP: 1/2 U'HU + c'U (cost minus its constant) with per-step friction box."""
    return CondensedModel(A_d, B_d, cfg, m_i).qp(eta0, refs, u_max)


def rollout_cost(eta0, refs, U, A_d, B_d, cfg: MpcConfig, m_i: float) -> float:
    """Tracking cost of an explicit step-by-step rollout (no condensing)."""
    eta = np.asarray(eta0, dtype=float)
    U = np.asarray(U, dtype=float).reshape(-1, NU)
    u_hold = hold_input(eta, m_i)
    total = 0.0
    for j, u in enumerate(U):
        eta = A_d @ eta + B_d @ u
        e = eta[:NX] - refs[j]
        du = u - u_hold
        total += e @ cfg.Q @ e + du @ cfg.P_w @ du
    return float(total)


class MpcResult(NamedTuple):
    u: np.ndarray
    predicted: np.ndarray
    ok: bool
    saturated: bool
    active_set: tuple


def _unwrap_refs(refs, yaw):
    refs = np.array(refs, dtype=float)
    for j in range(len(refs)):
        refs[j, 2] = yaw + wrap_angle(refs[j, 2] - yaw)
    return refs


def mpc_step(agent_state: AgentState, f_r_cmd, refs, params: AgentParams, cfg: MpcConfig,
             model: CondensedModel | None = None, mu_a: float | None = None,
             prev_u=None, warm_start=None) -> MpcResult:
    """First input of the receding-horizon solution; previous input if the QP fails."""
    if model is None:
        model = CondensedModel(*discretize(*continuous_matrices(params), cfg.dt_mpc), cfg, params.m_i)
    u_max = params.input_bounds(mu_a)
    eta0 = augment(agent_state, f_r_cmd, params.m_i)
    refs = _unwrap_refs(refs, agent_state.yaw)
    sol = model.solve(eta0, refs, u_max, warm_start=warm_start)
    if not sol.ok:
        u = np.zeros(NU) if prev_u is None else np.clip(prev_u, -u_max, u_max)
        return MpcResult(u, np.full((model.k, NX), np.nan), False, True, ())
    U = sol.x
    u = np.clip(U[:NU], -u_max, u_max)
    sat = bool(np.any(np.abs(u) >= u_max * (1 - 1e-9)))
    return MpcResult(u, model.predict(eta0, U), True, sat, sol.active_set)


class AgentController:
    """One agent's MPC with cached prediction matrices and warm start."""

    def __init__(self, params: AgentParams, cfg: MpcConfig):
        self.params, self.cfg = params, cfg
        self.A_d, self.B_d = discretize(*continuous_matrices(params), cfg.dt_mpc)
        self.model = CondensedModel(self.A_d, self.B_d, cfg, params.m_i)
        self.u = np.zeros(NU)
        self.active_set: tuple = ()
        self.saturated = False
        self.ok = True
        self.predicted_head = np.zeros(NX)

    def update(self, state: AgentState, f_r_world, refs, mu_a=None) -> np.ndarray:
        res = mpc_step(state, f_r_world, refs, self.params, self.cfg, self.model, mu_a,
                       prev_u=self.u, warm_start=self.active_set)
        self.u, self.saturated, self.ok = res.u, res.saturated, res.ok
        self.active_set = res.active_set
        self.predicted_head = res.predicted[0]
        return self.u


def step_agent(state: AgentState, params: AgentParams, u, f_on_object_world, dt: float) -> AgentState:
    """Semi-implicit Euler for the agent body under ground input and contact reaction."""
    vx = state.v[0] + dt * (u[0] + REACTION_SIGN * f_on_object_world[0]) / params.m_i
    vy = state.v[1] + dt * (u[1] + REACTION_SIGN * f_on_object_world[1]) / params.m_i
    w = state.yaw_rate + dt * u[2] / params.I_i
    return AgentState(np.array([state.p[0] + dt * vx, state.p[1] + dt * vy]),
                      wrap_angle(state.yaw + dt * w), np.array([vx, vy]), w)
