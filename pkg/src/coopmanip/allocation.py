"""Distribution of the object wrench over push-only agents.

The allocation problem is bilinear in (F_i, d_i) because the slide shifts each
agent's moment arm.  Substituting ``u_i = F_i d_i`` makes both balance rows and
the slide bounds linear, so one convex QP in ``z = [F; u]`` is solved per tick.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qp
from .contacts import ContactSpec, cross2, face_interval  # noqa: F401  (re-exported)
from .dynamics import Wrench, rot2, wrap_angle

RELAX_WEIGHT = 1e4
U_REG = 1e-8


@dataclass(frozen=True)
class AllocatorConfig:
    gamma1: float = 1.0
    gamma2: float = 0.1
    gamma3: float = 10.0
    F_eps: float = 0.1

    def __post_init__(self):
        if min(self.gamma1, self.gamma2, self.gamma3) < 0:
            raise ValueError("allocation weights must be non-negative")
        if self.gamma1 + self.gamma2 <= 0:
            raise ValueError("gamma1 + gamma2 must be positive")


@dataclass
class Allocation:
    F_r: np.ndarray
    d: np.ndarray
    residual_wrench: Wrench = field(default_factory=Wrench.zero)
    status: str = qp.OPTIMAL
    relaxed: bool = False
    active_set: tuple = ()

    @classmethod
    def zeros(cls, n: int) -> "Allocation":
        return cls(np.zeros(n), np.zeros(n))

    @property
    def residual_norm(self) -> float:
        return float(max(np.abs(self.residual_wrench.f).max(initial=0.0), abs(self.residual_wrench.m)))


def _active_indices(contacts):
    return [i for i, c in enumerate(contacts) if c.active]


def _balance_rows(contacts, idx, d_fixed=None):
    """Equality rows in z = [F; u] (or in F alone when slides are fixed)."""
    k = len(idx)
    if d_fixed is None:
        A = np.zeros((3, 2 * k))
        for j, i in enumerate(idx):
            c = contacts[i]
            A[0, j], A[1, j] = c.n_hat
            A[2, j] = c.moment_arm_force
            A[2, k + j] = c.moment_arm_slide
    else:
        A = np.zeros((3, k))
        for j, i in enumerate(idx):
            c = contacts[i]
            A[0, j], A[1, j] = c.n_hat
            A[2, j] = cross2(c.point(d_fixed[i]), c.n_hat)
    return A


def build_allocation_qp(F_world, M_p: float, theta: float, contacts: Sequence[ContactSpec],
                        prev: Allocation, cfg: AllocatorConfig) -> qp.QpProblem:
    """QP over ``z = [F; u]`` for the active contacts, in index order."""
    idx = _active_indices(contacts)
    if not idx:
        raise ValueError("allocation needs at least one active contact")
    k = len(idx)
    F_body = rot2(theta).T @ np.asarray(F_world, dtype=float)
    A_eq = _balance_rows(contacts, idx)
    b_eq = np.array([F_body[0], F_body[1], float(M_p)])

    P = np.zeros((2 * k, 2 * k))
    c = np.zeros(2 * k)
    F_prev = prev.F_r[idx]
    d_prev = prev.d[idx]
    for j in range(k):
        P[j, j] += 2.0 * (cfg.gamma1 + cfg.gamma2)
        c[j] -= 2.0 * cfg.gamma2 * F_prev[j]
        # gamma3 (u_j - d_prev_j F_j)^2
        w = np.zeros(2 * k)
        w[j], w[k + j] = -d_prev[j], 1.0
        P += 2.0 * cfg.gamma3 * np.outer(w, w)
        P[k + j, k + j] += 2.0 * U_REG

    A_in = np.zeros((3 * k, 2 * k))
    for j, i in enumerate(idx):
        cs = contacts[i]
        A_in[3 * j, j] = -1.0                                  # F >= 0
        A_in[3 * j + 1, j], A_in[3 * j + 1, k + j] = -cs.d_max, 1.0   # u <= d_max F
        A_in[3 * j + 2, j], A_in[3 * j + 2, k + j] = cs.d_min, -1.0   # u >= d_min F
    return qp.QpProblem(P, c, A_eq, b_eq, A_in, np.zeros(3 * k))


def _relaxed(problem: qp.QpProblem) -> qp.QpProblem:
    A, b = problem.A_eq, problem.b_eq
    P = problem.P + 2.0 * RELAX_WEIGHT * A.T @ A
    c = problem.c - 2.0 * RELAX_WEIGHT * A.T @ b
    return qp.QpProblem(P, c, A_in=problem.A_in, b_in=problem.b_in)


def _solve_with_fallback(problem, warm):
    sol = qp.solve(problem, warm_start=warm)
    if sol.ok:
        return sol, False
    return qp.solve(_relaxed(problem)), True


def _residual(problem: qp.QpProblem, z) -> Wrench:
    r = problem.A_eq @ z - problem.b_eq
    return Wrench(r[:2].copy(), float(r[2]))


def allocate(F_world, M_p: float, theta: float, contacts: Sequence[ContactSpec],
             prev: Allocation, cfg: AllocatorConfig, warm_start=None) -> Allocation:
    n = len(contacts)
    idx = _active_indices(contacts)
    F_r = np.zeros(n)
    d = prev.d.copy()
    if not idx:
        return Allocation(F_r, d, Wrench.zero(), qp.INFEASIBLE, relaxed=True)
    problem = build_allocation_qp(F_world, M_p, theta, contacts, prev, cfg)
    sol, relaxed = _solve_with_fallback(problem, warm_start)
    k = len(idx)
    for j, i in enumerate(idx):
        F = max(float(sol.x[j]), 0.0)
        F_r[i] = F
        c = contacts[i]
        if F > cfg.F_eps:
            d[i] = min(max(sol.x[k + j] / F, c.d_min), c.d_max)
        else:
            d[i] = min(max(prev.d[i], c.d_min), c.d_max)
    return Allocation(F_r, d, _residual(problem, sol.x), sol.status, relaxed, sol.active_set)


def heuristic_allocate(F_world, M_p: float, theta: float, theta_d: float,
                       contacts: Sequence[ContactSpec], prev: Allocation, k_p_d: float,
                       cfg: AllocatorConfig) -> Allocation:
    """Slides set open loop from the yaw error (deliberately unclamped); forces by QP."""
    n = len(contacts)
    d = np.full(n, k_p_d * wrap_angle(theta_d - theta))
    F_r = np.zeros(n)
    idx = _active_indices(contacts)
    if not idx:
        return Allocation(F_r, d, Wrench.zero(), qp.INFEASIBLE, relaxed=True)
    k = len(idx)
    F_body = rot2(theta).T @ np.asarray(F_world, dtype=float)
    A_eq = _balance_rows(contacts, idx, d_fixed=d)
    b_eq = np.array([F_body[0], F_body[1], float(M_p)])
    P = 2.0 * (cfg.gamma1 + cfg.gamma2) * np.eye(k)
    c = -2.0 * cfg.gamma2 * prev.F_r[idx]
    problem = qp.QpProblem(P, c, A_eq, b_eq, -np.eye(k), np.zeros(k))
    sol, relaxed = _solve_with_fallback(problem, None)
    for j, i in enumerate(idx):
        F_r[i] = max(float(sol.x[j]), 0.0)
    return Allocation(F_r, d, _residual(problem, sol.x), sol.status, relaxed, sol.active_set)


def allocation_objective(F_r, d, prev: Allocation, cfg: AllocatorConfig) -> float:
    """Cost of an allocation in the original (F, d) variables, slide term scaled by F."""
    F_r, d = np.asarray(F_r), np.asarray(d)
    return float(cfg.gamma1 * F_r @ F_r + cfg.gamma2 * np.sum((F_r - prev.F_r) ** 2)
                 + cfg.gamma3 * np.sum((F_r * (d - prev.d)) ** 2))


def body_forces_to_world(theta: float, contacts, F_r) -> np.ndarray:
    R = rot2(theta)
    return np.array([R @ (F * c.n_hat) for c, F in zip(contacts, F_r)]).reshape(-1, 2)

