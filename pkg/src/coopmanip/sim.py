"""Multi-rate closed-loop simulation.

Physics runs at ``physics_hz``.  The object controller (L1) and the allocator
(L2) run every ``floor(physics_hz / l1_l2_hz)`` steps, the agent MPCs (L3) every
``floor(physics_hz / l3_hz)`` steps, and every command is held in between.
Controllers only see the (optionally noisy) object state, the desired
trajectory and contact geometry; ground-truth object parameters stay inside
the physics.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import adaptive, allocation, dynamics, mpc
from .contacts import ContactSpec, cross2, face_interval
from .dynamics import ObjectParams, ObjectState, Wrench, perp, rot2
from .scenario import ScenarioConfig
from .trajectory import trajectory_from_spec

CAP_FRACTION = 0.8
DIVERGENCE_LIMIT = 1e3


class SimulationDiverged(RuntimeError):
    """Raised when the object state stops being finite; carries the partial log."""

    def __init__(self, message: str, log: "RunLog", diagnostic: dict):
        super().__init__(message)
        self.log = log
        self.diagnostic = diagnostic


def csv_columns(n_agents: int) -> list[str]:
    cols = ["t", "xp_x", "xp_y", "theta", "xd_x", "xd_y", "theta_d", "s1", "s2", "s3",
            "tau_fx", "tau_fy", "tau_m"]
    cols += [f"theta_hat_{k}" for k in range(1, 5)] + [f"psi_hat_{k}" for k in range(1, 4)]
    for i in range(n_agents):
        cols += [f"Fr_{i}", f"d_{i}", f"contact_{i}", f"ufx_{i}", f"ufy_{i}", f"um_{i}", f"sat_{i}"]
    return cols + ["event"]


@dataclass
class RunLog:
    """One record per L1 tick. ``data`` holds every numeric CSV column."""

    columns: list
    data: np.ndarray
    events: list
    n_agents: int
    config: ScenarioConfig
    extras: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def __len__(self) -> int:
        return len(self.data)

    @property
    def t(self) -> np.ndarray:
        return self["t"]


def apply_mass_drop(params: ObjectParams, drop_mass: float, drop_offset) -> ObjectParams:
    """Composite body after a point mass lands at body-frame ``drop_offset``.

    ``drop_offset`` uses the same convention as ``r_p``: the load sits at
    ``x_p - R offset``.
    """
    if drop_mass <= 0:
        raise ValueError("drop_mass must be positive")
    off = np.asarray(drop_offset, dtype=float).reshape(2)
    m0, r0 = params.m_b, params.r_p
    m1 = m0 + drop_mass
    r1 = (m0 * r0 + drop_mass * off) / m1
    I1 = params.I_Gzz + m0 * float((r0 - r1) @ (r0 - r1)) + drop_mass * float((off - r1) @ (off - r1))
    return dataclasses.replace(params, m_b=m1, I_Gzz=I1, r_p=r1)


def drop_state(state: ObjectState, before: ObjectParams, after: ObjectParams) -> ObjectState:
    """Inelastic capture of a load at rest: linear and angular momentum are conserved."""
    a0 = before.com_offset_world(state.theta)
    a1 = after.com_offset_world(state.theta)
    v_G = state.v_p - state.omega * perp(a0)
    v_G1 = before.m_b * v_G / after.m_b
    # angular momentum about the (momentarily fixed) point x_p
    omega1 = (before.I_Gzz * state.omega + before.m_b * cross2(a1 - a0, v_G)) / after.I_Gzz
    return ObjectState(state.x_p, state.theta, v_G1 + omega1 * perp(a1), omega1)


def _zone_mu(zones, x: float, base: float) -> float:
    mu = base
    for x_from, value in zones:
        if x >= x_from:
            mu = value
    return mu


def _object_params(cfg: ScenarioConfig) -> ObjectParams:
    o = cfg.object
    return ObjectParams(m_b=o.mass, I_Gzz=o.inertia, r_p=np.array(o.r_p, dtype=float),
                        half_extents=np.array(o.half_extents, dtype=float), mu=o.mu, rho_eff=o.rho_eff)


def _contact_spec(a) -> ContactSpec:
    c = a.contact
    return ContactSpec(np.array(c.r_0, dtype=float), np.array(c.n_hat, dtype=float),
                       np.array(c.t_hat, dtype=float), c.d_min, c.d_max)


def _object_controller(cfg: ScenarioConfig):
    if cfg.controller == "adaptive":
        g = cfg.gains.adaptive
        gains = adaptive.AdaptiveGains(g.lam, np.array(g.K_D, dtype=float), np.array(g.Gamma_theta, dtype=float),
                                       np.array(g.Gamma_psi, dtype=float), float(g.F_max), float(g.M_max))
        est = adaptive.EstimateState(np.array(g.theta_hat0, dtype=float), np.array(g.psi_hat0, dtype=float))
        return adaptive.AdaptiveController(gains, est)
    g = cfg.gains.pd
    a = cfg.gains.adaptive
    return adaptive.PdController(np.array(g.K_P, dtype=float), np.array(g.K_D, dtype=float),
                                 float(a.F_max), float(a.M_max), lam=a.lam)


class Simulation:
    """Explicit state of one run; :func:`run_scenario` drives it to completion."""

    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        r = cfg.rates
        self.dt = 1.0 / r.physics_hz
        self.n12 = max(1, int(math.floor(r.physics_hz / r.l1_l2_hz)))
        self.n3 = max(1, int(math.floor(r.physics_hz / r.l3_hz)))
        self.n_steps = int(round(cfg.duration * r.physics_hz))
        self.rng = np.random.default_rng(cfg.seed)
        self.noise = np.asarray(cfg.sensor_noise, dtype=float).reshape(2)

        self.params = _object_params(cfg)
        o = cfg.object
        self.state = ObjectState(np.array(o.pose[:2], dtype=float), o.pose[2],
                                 np.array(o.twist[:2], dtype=float), o.twist[2])
        self.traj = trajectory_from_spec(cfg.trajectory)
        self.controller = _object_controller(cfg)
        ag = cfg.gains.allocator
        self.alloc_cfg = allocation.AllocatorConfig(ag.gamma1, ag.gamma2, ag.gamma3, ag.F_eps)
        self.k_p_d = ag.k_p_d

        mg = cfg.gains.mpc
        self.mpc_cfg = mpc.MpcConfig(mg.horizon, mg.dt_mpc,
                                     np.array(mg.Q, dtype=float), np.array(mg.P_w, dtype=float))
        self.n = len(cfg.agents)
        self.contacts = [_contact_spec(a) for a in cfg.agents]
        self.intervals = [face_interval(c, self.params.half_extents) for c in self.contacts]
        self.agent_params = [mpc.AgentParams(a.m_i, a.I_i, a.mu_a, M_cap=a.M_cap) for a in cfg.agents]
        self.agent_ctrl = [mpc.AgentController(p, self.mpc_cfg) for p in self.agent_params]
        self.joined = [bool(a.joined) for a in cfg.agents]
        self.zones: list = []

        self.alloc = allocation.Allocation.zeros(self.n)
        self.tau = Wrench.zero()
        self.tau_sat = False
        self.force_cmd = np.zeros(self.n)
        self.in_contact = [False] * self.n
        self.u = np.zeros((self.n, 3))
        self.mpc_sat = [False] * self.n
        self.agents = [self._rest_agent(i) for i in range(self.n)]
        self.in_contact = self._contact_result().in_contact
        self.pending_events = sorted(cfg.events, key=lambda e: e.time)
        self.markers: list = []

    # -- helpers -----------------------------------------------------------
    def _standoff(self, i: int) -> float:
        return self.cfg.standoff + (0.0 if self.joined[i] else self.cfg.approach_gap)

    def _rest_agent(self, i: int) -> mpc.AgentState:
        return mpc.desired_agent_state(self.state, self.contacts[i], 0.0, self._standoff(i))

    def _mu_object(self) -> float:
        com_x = self.state.x_p[0] - self.params.com_offset_world(self.state.theta)[0]
        return _zone_mu(self.zones, com_x, self.cfg.object.mu)

    def _mu_agent(self, i: int) -> float:
        return _zone_mu(self.zones, self.agents[i].p[0], self.cfg.agents[i].mu_a)

    def _cap(self, i: int) -> float:
        a = self.cfg.agents[i]
        if a.push_cap is not None:
            return float(a.push_cap)
        p = self.agent_params[i]
        return CAP_FRACTION * self._mu_agent(i) * p.m_i * p.g

    def _contact_result(self):
        caps = [self._cap(i) for i in range(self.n)]
        forces = [self.force_cmd[i] if self.joined[i] else 0.0 for i in range(self.n)]
        return dynamics.contact_resolve(self.state, self.contacts, [a.p for a in self.agents], forces,
                                        self.cfg.contact_tol, half_extents=self.params.half_extents,
                                        standoff=self.cfg.standoff, caps=caps, intervals=self.intervals)

    def _measured(self) -> ObjectState:
        if not self.noise.any():
            return self.state
        e = self.rng.normal(size=3)
        return ObjectState(self.state.x_p + self.noise[0] * e[:2], self.state.theta + self.noise[1] * e[2],
                           self.state.v_p, self.state.omega)

    # -- events ------------------------------------------------------------
    def _apply_events(self, t: float):
        while self.pending_events and self.pending_events[0].time <= t + 1e-12:
            ev = self.pending_events.pop(0)
            if ev.kind == "mass_drop":
                new = apply_mass_drop(self.params, ev.mass, ev.offset)
                self.state = drop_state(self.state, self.params, new)
                self.params = new
                self.markers.append(f"mass_drop:{ev.mass:g}")
            elif ev.kind == "friction_zone":
                self.zones.append((float(ev.x_from), float(ev.mu)))
                self.markers.append(f"friction_zone:{ev.mu:g}@{ev.x_from:g}")
            elif ev.kind == "agent_join":
                self.joined[ev.index] = True
                self.markers.append(f"agent_join:{ev.index}")
            elif ev.kind == "agent_leave":
                self.joined[ev.index] = False
                self.markers.append(f"agent_leave:{ev.index}")

    # -- controller levels ---------------------------------------------------
    def _level12(self, t: float, meas: ObjectState):
        des = self.traj(t)
        self.tau, self.tau_sat = self.controller.update(meas, des, self.n12 * self.dt)
        active = [dataclasses.replace(c, active=self.joined[i] and self.in_contact[i])
                  for i, c in enumerate(self.contacts)]
        if not any(c.active for c in active):
            self.alloc = allocation.Allocation(np.zeros(self.n), self.alloc.d.copy())
        elif self.cfg.allocator == "qp":
            self.alloc = allocation.allocate(self.tau.f, self.tau.m, meas.theta, active, self.alloc, self.alloc_cfg)
        else:
            self.alloc = allocation.heuristic_allocate(self.tau.f, self.tau.m, meas.theta, des.q[2], active,
                                                       self.alloc, self.k_p_d, self.alloc_cfg)
        self.force_cmd = self.alloc.F_r.copy()
        return des

    def _level3(self, meas: ObjectState):
        R = rot2(meas.theta)
        for i in range(self.n):
            d_i = float(self.alloc.d[i])
            refs = mpc.reference_horizon(meas, self.contacts[i], d_i, self._standoff(i),
                                         self.mpc_cfg.horizon, self.mpc_cfg.dt_mpc)
            if self.joined[i] and self.in_contact[i]:
                f_r = R @ (min(max(self.force_cmd[i], 0.0), self._cap(i)) * self.contacts[i].n_hat)
            else:
                f_r = np.zeros(2)
            ctrl = self.agent_ctrl[i]
            self.u[i] = ctrl.update(self.agents[i], f_r, refs, self._mu_agent(i))
            self.mpc_sat[i] = ctrl.saturated

    # -- main loop ------------------------------------------------------------
    def run(self) -> RunLog:
        cols = csv_columns(self.n)
        rows: list = []
        events: list = []
        extras = {k: [] for k in ("com_x", "agent_x", "joined", "alloc_residual", "n_active",
                                  "relaxed", "mass", "mu_object", "mu_agents", "agent_y")}
        des = None
        for k in range(self.n_steps + 1):
            t = k * self.dt
            self._apply_events(t)
            l12 = k % self.n12 == 0
            if l12 or k % self.n3 == 0:
                meas = self._measured()
            if l12:
                des = self._level12(t, meas)
            if k % self.n3 == 0:
                self._level3(meas)
            if l12:
                rows.append(self._record(t, des))
                events.append(";".join(self.markers))
                self.markers = []
                self._record_extras(extras)
            if k == self.n_steps:
                break
            self._physics()
            if not self.state.is_finite() or np.abs(self.state.x_p).max() > DIVERGENCE_LIMIT:
                log = self._make_log(cols, rows, events, extras)
                diag = {"t": t, "state": repr(self.state), "tau": self.tau.as_vector().tolist(),
                        "forces": self.force_cmd.tolist()}
                raise SimulationDiverged(f"object state diverged at t={t:.3f}s", log, diag)
        return self._make_log(cols, rows, events, extras)

    def _physics(self):
        mu = self._mu_object()
        if mu != self.params.mu:
            self.params = dataclasses.replace(self.params, mu=mu)
        res = self._contact_result()
        self.last_contact = res
        self.in_contact = [bool(c) for c in res.in_contact]
        self.state = dynamics.step(self.state, self.params, res.wrench, self.dt)
        for i in range(self.n):
            self.agents[i] = mpc.step_agent(self.agents[i], self.agent_params[i], self.u[i],
                                            res.forces_world[i], self.dt)
        self.applied = res.applied

    def _record(self, t: float, des) -> list:
        s = self.state
        row = [t, s.x_p[0], s.x_p[1], s.theta, des.q[0], des.q[1], des.q[2]]
        row += list(self.controller.last_s) + list(self.tau.as_vector())
        row += list(self.controller.est.theta_hat) + list(self.controller.est.psi_hat)
        for i in range(self.n):
            capped = self.joined[i] and self.force_cmd[i] > self._cap(i)
            sat = self.mpc_sat[i] or capped
            row += [self.force_cmd[i], self.alloc.d[i], float(self.in_contact[i]),
                    self.u[i][0], self.u[i][1], self.u[i][2], float(sat)]
        return [float(v) for v in row]

    def _record_extras(self, ex: dict):
        ex["com_x"].append(self.state.x_p[0] - self.params.com_offset_world(self.state.theta)[0])
        ex["agent_x"].append([a.p[0] for a in self.agents])
        ex["agent_y"].append([a.p[1] for a in self.agents])
        ex["joined"].append(list(self.joined))
        ex["alloc_residual"].append(self.alloc.residual_norm)
        ex["n_active"].append(sum(1 for i in range(self.n) if self.joined[i] and self.in_contact[i]))
        ex["relaxed"].append(self.alloc.relaxed)
        ex["mass"].append(self.params.m_b)
        ex["mu_object"].append(self.params.mu)
        ex["mu_agents"].append([self._mu_agent(i) for i in range(self.n)])

    def _make_log(self, cols, rows, events, extras) -> RunLog:
        data = np.array(rows, dtype=float).reshape(-1, len(cols) - 1)
        ex = {k: np.array(v) for k, v in extras.items()}
        return RunLog(cols, data, events, self.n, self.cfg, ex)


def run_scenario(cfg: ScenarioConfig) -> RunLog:
    from .metrics import metrics

    log = Simulation(cfg).run()
    log.summary = metrics(log)
    return log
