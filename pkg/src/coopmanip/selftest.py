"""Fast numeric invariant checks that need nothing beyond the package itself."""

from __future__ import annotations

import numpy as np

from . import adaptive, allocation, dynamics, mpc, qp
from .contacts import ContactSpec


def _random_params(rng) -> dynamics.ObjectParams:
    return dynamics.ObjectParams(m_b=rng.uniform(1, 20), I_Gzz=rng.uniform(0.05, 3),
                                 r_p=rng.uniform(-0.3, 0.3, 2), mu=0.3)


def check_skew_symmetry(rng, draws=1000) -> float:
    worst = 0.0
    for _ in range(draws):
        p = _random_params(rng)
        th, w = rng.uniform(-np.pi, np.pi), rng.uniform(-5, 5)
        s = rng.normal(size=3)
        N = dynamics.mass_matrix_dot(p, th, w) - 2 * dynamics.coriolis_matrix(p, th, w)
        worst = max(worst, abs(s @ N @ s))
    return worst


def check_regressor(rng, draws=1000) -> float:
    worst = 0.0
    for _ in range(draws):
        p = _random_params(rng)
        th, w = rng.uniform(-np.pi, np.pi), rng.uniform(-5, 5)
        qd_r, qdd_r = rng.normal(size=3), rng.normal(size=3)
        Y = adaptive.regressor_theta(th, w, qd_r, qdd_r)
        direct = dynamics.mass_matrix(p, th) @ qdd_r + dynamics.coriolis_matrix(p, th, w) @ qd_r
        worst = max(worst, float(np.abs(Y @ p.theta_vector - direct).max()))
    return worst


def check_mass_matrix_pd(rng, draws=200) -> float:
    lo = np.inf
    for _ in range(draws):
        p = _random_params(rng)
        lo = min(lo, np.linalg.eigvalsh(dynamics.mass_matrix(p, rng.uniform(-np.pi, np.pi)))[0])
    return lo


def check_qp_kkt(rng, draws=100) -> float:
    worst = 0.0
    for _ in range(draws):
        n = int(rng.integers(2, 7))
        L = rng.normal(size=(n, n))
        prob = qp.QpProblem(L @ L.T + 0.5 * np.eye(n), rng.normal(size=n),
                            A_eq=rng.normal(size=(1, n)), b_eq=rng.normal(size=1),
                            A_in=np.vstack([np.eye(n), -np.eye(n)]), b_in=np.full(2 * n, 2.0))
        sol = qp.solve(prob)
        if sol.ok:
            worst = max(worst, sol.kkt_residual)
    return worst


def check_allocation_balance(rng, draws=100) -> float:
    contacts = [ContactSpec(np.array([-0.3, 0.0]), np.array([1.0, 0.0]), np.array([0.0, -1.0]), -0.2, 0.2),
                ContactSpec(np.array([0.0, -0.4]), np.array([0.0, 1.0]), np.array([1.0, 0.0]), -0.2, 0.2),
                ContactSpec(np.array([0.0, 0.4]), np.array([0.0, -1.0]), np.array([-1.0, 0.0]), -0.2, 0.2)]
    cfg = allocation.AllocatorConfig()
    worst = 0.0
    for _ in range(draws):
        F = np.array([rng.uniform(5, 40), rng.uniform(-10, 10)])
        M = rng.uniform(-1, 1)
        out = allocation.allocate(F, M, 0.0, contacts, allocation.Allocation.zeros(3), cfg)
        if out.status == qp.OPTIMAL and not out.relaxed:
            worst = max(worst, out.residual_norm)
    return worst


def check_condensing(rng, draws=20) -> float:
    params = mpc.AgentParams()
    cfg = mpc.MpcConfig()
    A_d, B_d = mpc.discretize(*mpc.continuous_matrices(params), cfg.dt_mpc)
    model = mpc.CondensedModel(A_d, B_d, cfg, params.m_i)
    worst = 0.0
    for _ in range(draws):
        eta0 = rng.normal(size=mpc.NAUG)
        refs = rng.normal(size=(cfg.horizon, mpc.NX))
        U = rng.normal(size=cfg.horizon * mpc.NU)
        prob = model.qp(eta0, refs, params.input_bounds())
        condensed = prob.objective(U) + model.constant_cost(eta0, refs)
        direct = mpc.rollout_cost(eta0, refs, U, A_d, B_d, cfg, params.m_i)
        worst = max(worst, abs(condensed - direct) / max(1.0, abs(direct)))
    return worst


CHECKS = [
    ("skew symmetry of Hdot - 2C", check_skew_symmetry, lambda v: v < 1e-9),
    ("regressor identity", check_regressor, lambda v: v < 1e-10),
    ("mass matrix positive definite", check_mass_matrix_pd, lambda v: v > 0),
    ("qp kkt residual", check_qp_kkt, lambda v: v < 1e-8),
    ("allocation balance", check_allocation_balance, lambda v: v < 1e-7),
    ("mpc condensing", check_condensing, lambda v: v < 1e-10),
]


def run_selftest(seed: int = 0, out=print) -> bool:
    rng = np.random.default_rng(seed)
    ok_all = True
    for name, fn, ok in CHECKS:
        value = fn(rng)
        passed = bool(ok(value))
        ok_all &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {name:32s} {value:.3e}")
    return ok_all
