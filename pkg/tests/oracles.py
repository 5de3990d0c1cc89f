"""Reference computations that share no code with the routines they check."""

from __future__ import annotations

import itertools
import math

import numpy as np


# -- rigid body ----------------------------------------------------------------

def body_H(m, I_G, r_p, theta):
    """Mass matrix about p built from the kinetic energy of the COM, with the COM at x_p - R r_p."""
    c, s = math.cos(theta), math.sin(theta)
    R = np.array([[c, -s], [s, c]])
    dR = np.array([[-s, -c], [c, -s]])        # d(R r)/dtheta = dR r
    J = np.zeros((2, 3))                      # v_G = J qdot
    J[:, :2] = np.eye(2)
    J[:, 2] = -(dR @ r_p)
    return m * J.T @ J + I_G * np.diag([0.0, 0.0, 1.0])


def numeric_Hdot(m, I_G, r_p, theta, omega, h=1e-6):
    return omega * (body_H(m, I_G, r_p, theta + h) - body_H(m, I_G, r_p, theta - h)) / (2 * h)


def rk4(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


# -- quadratic programs --------------------------------------------------------

def projected_gradient_box(P, c, lo, hi, iters=100_000):
    """Batched projected gradient for min 1/2 x'Px + c'x over lo <= x <= hi.

    ``P`` has shape (B, n, n); the step is 1 / lambda_max(P) per problem.
    """
    L = np.linalg.eigvalsh(P)[:, -1]
    step = (1.0 / L)[:, None]
    x = np.clip(np.zeros_like(c), lo, hi)
    for _ in range(iters):
        g = np.einsum("bij,bj->bi", P, x) + c
        x = np.clip(x - step * g, lo, hi)
    return x


def cvxpy_qp(P, c, A_eq=None, b_eq=None, A_in=None, b_in=None):
    import cvxpy as cp

    n = len(c)
    x = cp.Variable(n)
    cons = []
    if A_eq is not None and len(A_eq):
        cons.append(A_eq @ x == b_eq)
    if A_in is not None and len(A_in):
        cons.append(A_in @ x <= b_in)
    prob = cp.Problem(cp.Minimize(0.5 * cp.quad_form(x, cp.psd_wrap(P)) + c @ x), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return prob.status, (None if x.value is None else np.asarray(x.value))


# -- allocation -------------------------------------------------------------------

def _interval(a, b):
    """{y : a y <= b} for vectors a, b as (lo, hi); empty when lo > hi."""
    lo, hi = -math.inf, math.inf
    for ai, bi in zip(a, b):
        if ai > 1e-14:
            hi = min(hi, bi / ai)
        elif ai < -1e-14:
            lo = max(lo, bi / ai)
        elif bi < -1e-12:
            return math.inf, -math.inf
    return lo, hi


def _grid_min(f, lo, hi, grid, rounds):
    """Minimise a convex scalar function on [lo, hi] by repeated grid refinement."""
    best_x, best = lo, f(np.array([lo]))[0]
    for _ in range(rounds):
        xs = np.linspace(lo, hi, grid)
        vals = f(xs)
        j = int(np.argmin(vals))
        if vals[j] <= best:
            best, best_x = float(vals[j]), float(xs[j])
        # a convex function sampled on a grid has its minimiser within one cell of the best sample
        cell = (hi - lo) / (grid - 1)
        lo, hi = max(lo, best_x - 2 * cell), min(hi, best_x + 2 * cell)
        if hi - lo <= 1e-15 * max(1.0, abs(best_x)):
            break
    return best_x, best


def brute_force_allocation(F_body, M, contacts, F_prev, d_prev, gammas, F_cap=200.0,
                           grid=60, rounds=14):
    """Grid search over the feasible (F, d) set of a two-agent allocation.

    The three balance rows are linear in (F_1, F_2, u_1, u_2) with u_i = F_i d_i,
    so the feasible set is an affine family, parameterised by null-space
    coordinates y.  The cost is convex in y, so nested one-dimensional grid
    searches with refinement over the exact feasible intervals find its minimum.
    Returns (cost, F, d) or None when infeasible.
    """
    k = len(contacts)
    A = np.zeros((3, 2 * k))
    for j, (r0, n, t, _, _) in enumerate(contacts):
        A[0, j], A[1, j] = n
        A[2, j] = r0[0] * n[1] - r0[1] * n[0]
        A[2, k + j] = t[0] * n[1] - t[1] * n[0]
    b = np.array([F_body[0], F_body[1], M])
    z0, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.abs(A @ z0 - b).max() > 1e-9:
        return None
    _, sv, Vt = np.linalg.svd(A)
    rank = int((sv > 1e-10).sum())
    N = Vt[rank:].T                            # null-space basis, shape (2k, dim)
    dim = N.shape[1]
    if dim not in (1, 2):
        raise NotImplementedError("oracle handles one or two free directions")
    # inequalities G z <= h: 0 <= F <= F_cap, d_min F <= u <= d_max F
    G, h = [], []
    for j, (_, _, _, dmin, dmax) in enumerate(contacts):
        e = np.zeros(2 * k); e[j] = -1; G.append(e); h.append(0.0)
        e = np.zeros(2 * k); e[j] = 1; G.append(e); h.append(F_cap)
        e = np.zeros(2 * k); e[k + j] = 1; e[j] = -dmax; G.append(e); h.append(0.0)
        e = np.zeros(2 * k); e[k + j] = -1; e[j] = dmin; G.append(e); h.append(0.0)
    G, h = np.array(G), np.array(h)
    Gn, hn = G @ N, h - G @ z0

    def cost(Y):
        Z = z0 + Y @ N.T
        F, U = Z[:, :k], Z[:, k:]
        safe = np.where(F > 1e-12, F, 1.0)
        D = np.where(F > 1e-12, U / safe, d_prev)
        val = (gammas[0] * (F * F).sum(axis=1) + gammas[1] * ((F - F_prev) ** 2).sum(axis=1)
               + gammas[2] * ((F * (D - d_prev)) ** 2).sum(axis=1))
        return val, F, D

    if dim == 1:
        lo, hi = _interval(Gn[:, 0], hn)
        if lo > hi + 1e-12:
            return None
        y1, _ = _grid_min(lambda ys: cost(ys[:, None])[0], lo, max(lo, hi), grid, rounds)
        y = np.array([y1])
    else:
        # outer range: project the polytope onto y_1 via its vertices
        verts = []
        for r1, r2 in itertools.combinations(range(len(hn)), 2):
            M_ = Gn[[r1, r2]]
            if abs(np.linalg.det(M_)) < 1e-12:
                continue
            v = np.linalg.solve(M_, hn[[r1, r2]])
            if (Gn @ v - hn).max() <= 1e-9:
                verts.append(v)
        if not verts:
            return None
        verts = np.array(verts)

        def inner(y1):
            lo2, hi2 = _interval(Gn[:, 1], hn - Gn[:, 0] * y1)
            if lo2 > hi2 + 1e-12:
                return math.nan, math.inf
            hi2 = max(lo2, hi2)
            return _grid_min(lambda ys: cost(np.stack([np.full_like(ys, y1), ys], axis=1))[0],
                             lo2, hi2, grid, rounds)

        def outer(y1s):
            return np.array([inner(v)[1] for v in y1s])

        y1, _ = _grid_min(outer, verts[:, 0].min(), verts[:, 0].max(), 24, 22)
        y = np.array([y1, inner(y1)[0]])
    val, F, D = cost(y[None, :])
    return float(val[0]), F[0], D[0]
