"""Scenario configuration: dataclasses plus YAML loading.

A scenario file is a YAML mapping whose keys mirror the dataclass fields below.
Unknown keys are rejected so typos surface immediately.  See
``scenarios/*.yaml`` for complete examples.
"""

from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

EVENT_KINDS = ("mass_drop", "friction_zone", "agent_join", "agent_leave")
CONTROLLERS = ("adaptive", "pd")
ALLOCATORS = ("qp", "heuristic")


@dataclass
class ObjectConfig:
    mass: float = 5.0
    inertia: float = 0.4
    """Yaw inertia about the COM."""
    r_p: list = field(default_factory=lambda: [0.0, 0.0])
    """Body-frame vector from the COM to the reference point p (COM = x_p - R r_p)."""
    half_extents: list = field(default_factory=lambda: [0.3, 0.4])
    mu: float = 0.3
    rho_eff: float = 0.2
    pose: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    twist: list = field(default_factory=lambda: [0.0, 0.0, 0.0])


@dataclass
class ContactConfig:
    r_0: list = field(default_factory=lambda: [-0.3, 0.0])
    n_hat: list = field(default_factory=lambda: [1.0, 0.0])
    t_hat: list = field(default_factory=lambda: [0.0, -1.0])
    d_min: float = -0.2
    d_max: float = 0.2


@dataclass
class AgentConfig:
    contact: ContactConfig = field(default_factory=ContactConfig)
    m_i: float = 12.0
    I_i: float = 0.4
    mu_a: float = 0.3
    M_cap: float = 10.0
    joined: bool = True
    """Whether the agent is part of the team at t = 0."""
    push_cap: Optional[float] = None
    """Largest force the agent can transmit; default 0.8 * mu_a * m_i * g under its feet."""


@dataclass
class RatesConfig:
    physics_hz: float = 1000.0
    l1_l2_hz: float = 100.0
    l3_hz: float = 150.0


@dataclass
class EventConfig:
    time: float
    kind: str
    mass: float = 0.0
    offset: list = field(default_factory=lambda: [0.0, 0.0])
    x_from: float = 0.0
    mu: float = 0.0
    index: int = -1


@dataclass
class AdaptiveGainsConfig:
    lam: float = 1.0
    K_D: list = field(default_factory=lambda: [40.0, 40.0, 15.0])
    Gamma_theta: list = field(default_factory=lambda: [1.0, 1.0, 1.0, 0.5])
    Gamma_psi: list = field(default_factory=lambda: [2.0, 2.0, 1.0])
    F_max: float = math.inf
    M_max: float = math.inf
    theta_hat0: list = field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0])
    psi_hat0: list = field(default_factory=lambda: [0.0, 0.0, 0.0])


@dataclass
class PdGainsConfig:
    K_P: list = field(default_factory=lambda: [40.0, 40.0, 15.0])
    K_D: list = field(default_factory=lambda: [40.0, 40.0, 15.0])


@dataclass
class AllocatorGainsConfig:
    gamma1: float = 1.0
    gamma2: float = 0.1
    gamma3: float = 10.0
    F_eps: float = 0.1
    k_p_d: float = 1.0
    """Slide gain of the heuristic policy, d = k_p_d * (theta_d - theta)."""


@dataclass
class MpcGainsConfig:
    horizon: int = 10
    dt_mpc: float = 2.0 / 150.0
    """Prediction step: two L3 periods at the nominal rate."""
    Q: list = field(default_factory=lambda: [1e4, 1e4, 2e3, 50.0, 50.0, 10.0])
    P_w: list = field(default_factory=lambda: [1e-4, 1e-4, 1e-3])


@dataclass
class GainsConfig:
    adaptive: AdaptiveGainsConfig = field(default_factory=AdaptiveGainsConfig)
    pd: PdGainsConfig = field(default_factory=PdGainsConfig)
    allocator: AllocatorGainsConfig = field(default_factory=AllocatorGainsConfig)
    mpc: MpcGainsConfig = field(default_factory=MpcGainsConfig)


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    object: ObjectConfig = field(default_factory=ObjectConfig)
    agents: list = field(default_factory=list)
    trajectory: dict = field(default_factory=lambda: {"kind": "hold", "pose": [0.0, 0.0, 0.0]})
    rates: RatesConfig = field(default_factory=RatesConfig)
    events: list = field(default_factory=list)
    controller: str = "adaptive"
    allocator: str = "qp"
    gains: GainsConfig = field(default_factory=GainsConfig)
    duration: float = 10.0
    seed: int = 0
    standoff: float = 0.05
    """Distance from an agent's body centre to its contact nose."""
    contact_tol: float = 0.02
    approach_gap: float = 0.3
    """Extra stand-off of agents that are not (or no longer) part of the team."""
    sensor_noise: list = field(default_factory=lambda: [0.0, 0.0])
    """Std of the pose noise seen by the controllers: [position, yaw]."""

    def validate(self) -> "ScenarioConfig":
        r = self.rates
        if min(r.physics_hz, r.l1_l2_hz, r.l3_hz) <= 0:
            raise ValueError("rates must be positive")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller must be one of {CONTROLLERS}, got {self.controller!r}")
        if self.allocator not in ALLOCATORS:
            raise ValueError(f"allocator must be one of {ALLOCATORS}, got {self.allocator!r}")
        if not self.agents:
            raise ValueError("scenario needs at least one agent")
        for ev in self.events:
            if ev.kind not in EVENT_KINDS:
                raise ValueError(f"unknown event kind {ev.kind!r}")
            if not 0.0 <= ev.time <= self.duration:
                raise ValueError(f"event at t={ev.time} lies outside [0, {self.duration}]")
            if ev.kind == "mass_drop" and ev.mass <= 0:
                raise ValueError("mass_drop needs a positive mass")
            if ev.kind in ("agent_join", "agent_leave") and not 0 <= ev.index < len(self.agents):
                raise ValueError(f"{ev.kind} refers to missing agent {ev.index}")
        return self

    def replace(self, **changes) -> "ScenarioConfig":
        out = copy.deepcopy(self)
        for k, v in changes.items():
            if not hasattr(out, k):
                raise AttributeError(k)
            setattr(out, k, v)
        return out.validate()

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ValueError(f"{where}: expected a mapping")
    hints = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(hints)
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _coerce(cls, name, value, f"{where}.{name}")
    return cls(**kwargs)


_NESTED = {
    (ScenarioConfig, "object"): ObjectConfig,
    (ScenarioConfig, "rates"): RatesConfig,
    (ScenarioConfig, "gains"): GainsConfig,
    (AgentConfig, "contact"): ContactConfig,
    (GainsConfig, "adaptive"): AdaptiveGainsConfig,
    (GainsConfig, "pd"): PdGainsConfig,
    (GainsConfig, "allocator"): AllocatorGainsConfig,
    (GainsConfig, "mpc"): MpcGainsConfig,
}


def _coerce(cls, name, value, where):
    sub = _NESTED.get((cls, name))
    if sub is not None:
        return _build(sub, value, where)
    if cls is ScenarioConfig and name == "agents":
        return [_build(AgentConfig, a, f"{where}[{i}]") for i, a in enumerate(value)]
    if cls is ScenarioConfig and name == "events":
        return [_build(EventConfig, e, f"{where}[{i}]") for i, e in enumerate(value)]
    if isinstance(value, str) and value.lower() in ("inf", "+inf", "-inf"):
        return float(value)
    return value


def config_from_dict(data: dict) -> ScenarioConfig:
    return _build(ScenarioConfig, data, "scenario").validate()


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read scenario file {path}: {exc}") from exc
    data = yaml.safe_load(text) or {}
    cfg = config_from_dict(data)
    if cfg.name == "scenario":
        cfg.name = path.stem
    return cfg


def builtin_scenario_dir() -> Path:
    return Path(__file__).with_name("scenarios")


def builtin_scenario(name: str) -> ScenarioConfig:
    return load_scenario(builtin_scenario_dir() / f"{name}.yaml")
