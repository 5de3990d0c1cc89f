"""Dense primal active-set solver for small strictly convex QPs.

    minimize    1/2 x'Px + c'x
    subject to  A_eq x  = b_eq
                A_in x <= b_in

Sized for the tens-of-variables problems produced at control rates by the force
allocator and the agent MPC.  Pivoting is in fixed index order so repeated
solves are bit-for-bit reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"

FEAS_TOL = 1e-9
KKT_TOL = 1e-8
REG_THRESHOLD = 1e-9
REG_SHIFT = 1e-8


def _as_matrix(A, n):
    if A is None:
        return np.zeros((0, n))
    A = np.asarray(A, dtype=float)
    return A.reshape(-1, n)


def _as_vector(b, m):
    if b is None:
        return np.zeros(m)
    return np.asarray(b, dtype=float).reshape(m)


@dataclass
class QpProblem:
    P: np.ndarray
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_in: np.ndarray | None = None
    b_in: np.ndarray | None = None
    known_pd: bool = False
    """Caller guarantees P is symmetric with eigenvalues above the regularisation threshold."""
    regularized: bool = field(default=False, init=False)

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        n = P.shape[0]
        if P.shape != (n, n):
            raise ValueError("P must be square")
        if not self.known_pd:
            scale = max(1.0, float(np.abs(P).max(initial=0.0)))
            if np.abs(P - P.T).max(initial=0.0) > 1e-12 * scale:
                raise ValueError("P must be symmetric")
            P = 0.5 * (P + P.T)
        if n and not self.known_pd and np.linalg.eigvalsh(P)[0] < REG_THRESHOLD:
            P = P + REG_SHIFT * np.eye(n)
            self.regularized = True
        self.P = P
        self.c = _as_vector(self.c, n)
        self.A_eq = _as_matrix(self.A_eq, n)
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0])
        self.A_in = _as_matrix(self.A_in, n)
        self.b_in = _as_vector(self.b_in, self.A_in.shape[0])

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def m_eq(self) -> int:
        return self.A_eq.shape[0]

    @property
    def m_in(self) -> int:
        return self.A_in.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.P @ x + self.c @ x)


@dataclass
class QpSolution:
    x: np.ndarray
    status: str
    active_set: tuple = ()
    kkt_residual: float = np.inf
    iterations: int = 0
    eq_duals: np.ndarray | None = None
    in_duals: np.ndarray | None = None
    objective: float = np.nan
    history: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def kkt_residual(problem: QpProblem, x, eq_duals=None, in_duals=None) -> float:
    """Largest of the stationarity, primal/dual feasibility and complementarity violations."""
    x = np.asarray(x, dtype=float)
    nu = np.zeros(problem.m_eq) if eq_duals is None else np.asarray(eq_duals, dtype=float)
    mu = np.zeros(problem.m_in) if in_duals is None else np.asarray(in_duals, dtype=float)
    grad = problem.P @ x + problem.c + problem.A_eq.T @ nu + problem.A_in.T @ mu
    slack = problem.A_in @ x - problem.b_in
    parts = [np.abs(grad).max(initial=0.0),
             np.abs(problem.A_eq @ x - problem.b_eq).max(initial=0.0),
             np.maximum(slack, 0.0).max(initial=0.0),
             np.maximum(-mu, 0.0).max(initial=0.0),
             np.abs(mu * slack).max(initial=0.0)]
    return float(max(parts))


def _independent_rows(A, b, tol=1e-10):
    """Greedy row selection in index order; reports whether dropped rows are consistent."""
    keep = []
    basis = np.zeros((0, A.shape[1]))
    for i in range(A.shape[0]):
        row = A[i]
        nrm = np.linalg.norm(row)
        if nrm <= tol:
            continue
        r = row - basis.T @ (basis @ row) if len(basis) else row.copy()
        rn = np.linalg.norm(r)
        if rn > tol * max(1.0, nrm):
            keep.append(i)
            basis = np.vstack([basis, r / rn])
    A_k, b_k = A[keep], b[keep]
    consistent = True
    if len(keep) < A.shape[0]:
        x_ls = np.linalg.lstsq(A_k, b_k, rcond=None)[0] if keep else np.zeros(A.shape[1])
        consistent = bool(np.abs(A @ x_ls - b).max(initial=0.0) <= 1e-9 * max(1.0, np.abs(b).max(initial=0.0)))
    return A_k, b_k, consistent


def _kkt_solve(P, A, rhs_x, rhs_c):
    n, m = P.shape[0], A.shape[0]
    if m == 0:
        return np.linalg.solve(P, rhs_x), np.zeros(0)
    K = np.zeros((n + m, n + m))
    K[:n, :n] = P
    K[:n, n:] = A.T
    K[n:, :n] = A
    sol = np.linalg.solve(K, np.concatenate([rhs_x, rhs_c]))
    return sol[:n], sol[n:]


class _Core:
    """Primal active-set iterations from a feasible start."""

    def __init__(self, P, c, E, be, G, bg, max_iter):
        self.P, self.c, self.E, self.be, self.G, self.bg = P, c, E, be, G, bg
        self.max_iter = max_iter

    def run(self, x, working):
        P, c, E, G, bg = self.P, self.c, self.E, self.G, self.bg
        me = E.shape[0]
        W = list(working)
        history = [float(0.5 * x @ P @ x + c @ x)]
        it = 0
        at_min = False
        g_norm = np.linalg.norm(G, axis=1)
        while it < self.max_iter:
            it += 1
            A_w = np.vstack([E, G[W]]) if W else E
            g = P @ x + c
            p, lam = _kkt_solve(P, A_w, -g, np.zeros(A_w.shape[0]))
            # after an unblocked full step x already minimises on the working set
            if at_min or np.abs(p).max(initial=0.0) <= 1e-12 * max(1.0, np.abs(x).max(initial=0.0)):
                mu = lam[me:]
                if not W or mu.min() >= -1e-12 * max(1.0, np.abs(g).max(initial=0.0)):
                    return x, W, it, history, True
                # drop most negative multiplier; ties go to the lowest constraint index
                order = sorted(range(len(W)), key=lambda k: (mu[k], W[k]))
                W.pop(order[0])
                at_min = False
                continue
            Gp = G @ p
            slack = np.maximum(bg - G @ x, 0.0)
            alpha, block = 1.0, None
            tiny = 1e-11 * np.linalg.norm(p) * g_norm
            cand = [i for i in range(G.shape[0]) if i not in W and Gp[i] > tiny[i]]
            if cand and A_w.shape[0]:
                # rows in the span of the working set have G_i p = 0 exactly; round-off says otherwise
                Qw = np.linalg.qr(A_w.T)[0]
                Gc = G[cand]
                resid = np.linalg.norm(Gc - (Gc @ Qw) @ Qw.T, axis=1)
                cand = [i for i, r in zip(cand, resid) if r > 1e-9 * g_norm[i]]
            for i in cand:
                a_i = slack[i] / Gp[i]
                if a_i < alpha:
                    alpha, block = a_i, i
            x = x + alpha * p
            if block is not None:
                W.append(block)
            at_min = block is None
            history.append(float(0.5 * x @ P @ x + c @ x))
        return x, W, it, history, False


def _feasible(problem_parts, x, tol=FEAS_TOL):
    E, be, G, bg = problem_parts
    if E.shape[0] and np.abs(E @ x - be).max() > tol:
        return False
    if G.shape[0] and (G @ x - bg).max() > tol:
        return False
    return True


def _phase_one(E, be, G, bg, max_iter):
    """Feasible point via min t + (eps/2)|(x, t) - (x0, 0)|^2 s.t. Gx - t <= bg, t >= 0."""
    n = G.shape[1]
    if E.shape[0]:
        x0 = np.linalg.lstsq(E, be, rcond=None)[0]
    else:
        x0 = np.zeros(n)
    t0 = max(0.0, float((G @ x0 - bg).max(initial=0.0)))
    big = 1e6 * max(1.0, float(np.abs(G).max(initial=1.0)))
    P1 = np.eye(n + 1)
    c1 = np.concatenate([-x0, [big]])
    E1 = np.hstack([E, np.zeros((E.shape[0], 1))])
    G1 = np.vstack([np.hstack([G, -np.ones((G.shape[0], 1))]),
                    np.concatenate([np.zeros(n), [-1.0]])[None, :]])
    bg1 = np.concatenate([bg, [0.0]])
    core = _Core(P1, c1, E1, be, G1, bg1, max_iter)
    z, W, it, _, _ = core.run(np.concatenate([x0, [t0]]), [])
    x = z[:n]
    return x, it


def solve(problem: QpProblem, warm_start=None, max_iter: int | None = None) -> QpSolution:
    """Solve ``problem``; ``warm_start`` is an active set (inequality indices) from a previous solve."""
    n, m_in = problem.n, problem.m_in
    max_iter = max_iter or 50 * (n + m_in)
    E, be, consistent = _independent_rows(problem.A_eq, problem.b_eq)
    if not consistent:
        return QpSolution(np.full(n, np.nan), INFEASIBLE)
    G, bg, P, c = problem.A_in, problem.b_in, problem.P, problem.c
    parts = (E, be, G, bg)
    core = _Core(P, c, E, be, G, bg, max_iter)
    used = 0

    start = None
    if warm_start:
        W0 = sorted(set(int(i) for i in warm_start if 0 <= int(i) < m_in))
        trial = np.vstack([E, G[W0]])
        if np.linalg.matrix_rank(trial) < trial.shape[0]:
            W0 = []
            for i in sorted(set(int(i) for i in warm_start if 0 <= int(i) < m_in)):
                trial = np.vstack([E, G[W0 + [i]]])
                if np.linalg.matrix_rank(trial) == trial.shape[0]:
                    W0.append(i)
        try:
            x_w, _ = _kkt_solve(P, np.vstack([E, G[W0]]), -c, np.concatenate([be, bg[W0]]))
            if _feasible(parts, x_w):
                start = (x_w, W0)
        except np.linalg.LinAlgError:
            pass
    if start is None:
        x_u, _ = _kkt_solve(P, E, -c, be)
        if _feasible(parts, x_u):
            start = (x_u, [])
    if start is None:
        x_z = np.linalg.lstsq(E, be, rcond=None)[0] if E.shape[0] else np.zeros(n)
        if _feasible(parts, x_z):
            start = (x_z, [])
    if start is None:
        x_f, used = _phase_one(E, be, G, bg, max_iter)
        if not _feasible(parts, x_f, tol=1e-7):
            return QpSolution(x_f, INFEASIBLE, iterations=used)
        start = (x_f, [])

    x, W, it, history, converged = core.run(*start)
    it += used
    if not converged:
        return _finish(problem, x, W, E, be, MAX_ITER, it, history, polish=False)
    return _finish(problem, x, W, E, be, OPTIMAL, it, history, polish=True)


def _finish(problem, x, W, E, be, status, it, history, polish):
    P, c, G, bg = problem.P, problem.c, problem.A_in, problem.b_in
    W = sorted(W)
    A_w = np.vstack([E, G[W]]) if W else E
    lam = np.zeros(A_w.shape[0])
    if polish:
        # re-solve on the final working set: lands exactly on the active constraints
        x_p, lam_p = _kkt_solve(P, A_w, -c, np.concatenate([be, bg[W]]))
        x, lam = x_p, lam_p
    else:
        g = P @ x + c
        if A_w.shape[0]:
            lam = np.linalg.lstsq(A_w.T, -g, rcond=None)[0]
    # multipliers for the original (unreduced) equality rows
    nu = np.zeros(problem.m_eq)
    if problem.m_eq:
        me = E.shape[0]
        if me:
            nu = np.linalg.lstsq(problem.A_eq.T, E.T @ lam[:me], rcond=None)[0]
    mu = np.zeros(problem.m_in)
    mu[W] = lam[E.shape[0]:]
    res = kkt_residual(problem, x, nu, mu)
    if status == OPTIMAL and res >= KKT_TOL:
        # one refinement pass on the reduced KKT system
        r_x = -(P @ x + c + A_w.T @ lam)
        r_c = np.concatenate([be, bg[W]]) - A_w @ x
        dx, dl = _kkt_solve(P, A_w, r_x, r_c)
        x, lam = x + dx, lam + dl
        mu[W] = lam[E.shape[0]:]
        if problem.m_eq and E.shape[0]:
            nu = np.linalg.lstsq(problem.A_eq.T, E.T @ lam[:E.shape[0]], rcond=None)[0]
        res = kkt_residual(problem, x, nu, mu)
        if res >= KKT_TOL:
            status = MAX_ITER
    return QpSolution(x, status, tuple(W), res, it, nu, mu, problem.objective(x), history)


def dump(problem: QpProblem, path) -> None:
    """Write a problem as whitespace-separated row-major matrices with dimension headers."""
    lines = [f"qp {problem.n} {problem.m_eq} {problem.m_in}"]

    def block(name, M):
        M = np.atleast_2d(M)
        lines.append(f"{name} {M.shape[0]} {M.shape[1]}")
        lines.extend(" ".join(repr(float(v)) for v in row) for row in M)

    block("P", problem.P)
    block("c", problem.c.reshape(1, -1))
    block("A_eq", problem.A_eq)
    block("b_eq", problem.b_eq.reshape(1, -1))
    block("A_in", problem.A_in)
    block("b_in", problem.b_in.reshape(1, -1))
    Path(path).write_text("\n".join(lines) + "\n")


def load(path) -> QpProblem:
    tokens = Path(path).read_text().split("\n")
    head = tokens[0].split()
    if head[0] != "qp":
        raise ValueError(f"{path}: not a qp dump")
    blocks = {}
    i = 1
    while i < len(tokens) and tokens[i].strip():
        name, r, k = tokens[i].split()
        r, k = int(r), int(k)
        rows = [[float(v) for v in tokens[i + 1 + j].split()] for j in range(r)]
        blocks[name] = np.array(rows, dtype=float).reshape(r, k)
        i += 1 + r
    return QpProblem(blocks["P"], blocks["c"].ravel(), blocks["A_eq"], blocks["b_eq"].ravel(),
                     blocks["A_in"], blocks["b_in"].ravel())
