import math

import pytest

from coopmanip.scenario import (AgentConfig, EventConfig, RatesConfig, ScenarioConfig, builtin_scenario,
                                builtin_scenario_dir, config_from_dict, load_scenario)

BUILTINS = sorted(p.stem for p in builtin_scenario_dir().glob("*.yaml"))


def _cfg(**kw):
    return ScenarioConfig(agents=[AgentConfig()], **kw)


@pytest.mark.parametrize("name", BUILTINS)
def test_builtins_load_and_round_trip(name):
    cfg = builtin_scenario(name)
    assert cfg.name == name and cfg.agents
    back = config_from_dict(cfg.to_dict())
    assert back == cfg


def test_bundled_set():
    assert {"a1_mass_drop", "a2_allocation", "b_terrain", "c_heavy_join", "regulation"} <= set(BUILTINS)


def test_infinite_limits_survive_round_trip():
    cfg = _cfg()
    d = cfg.to_dict()
    assert d["gains"]["adaptive"]["F_max"] == "inf"
    assert config_from_dict(d).gains.adaptive.F_max == math.inf


def test_unknown_keys_rejected():
    with pytest.raises(ValueError, match="unknown keys"):
        config_from_dict({"agents": [{}], "colour": "red"})
    with pytest.raises(ValueError, match="unknown keys"):
        config_from_dict({"agents": [{"contact": {"r0": [0, 0]}}]})


@pytest.mark.parametrize("bad", [
    dict(rates=RatesConfig(l3_hz=0.0)),
    dict(duration=0.0),
    dict(controller="lqr"),
    dict(allocator="greedy"),
    dict(events=[EventConfig(time=11.0, kind="mass_drop", mass=1.0)]),
    dict(events=[EventConfig(time=1.0, kind="mass_drop", mass=0.0)]),
    dict(events=[EventConfig(time=1.0, kind="agent_join", index=3)]),
    dict(events=[EventConfig(time=1.0, kind="earthquake")]),
])
def test_validation(bad):
    with pytest.raises(ValueError):
        _cfg(**bad).validate()


def test_needs_an_agent():
    with pytest.raises(ValueError):
        ScenarioConfig().validate()


def test_rates_need_not_be_ordered():
    _cfg(rates=RatesConfig(physics_hz=1000, l1_l2_hz=200, l3_hz=50)).validate()


def test_replace_copies_and_validates():
    cfg = _cfg()
    other = cfg.replace(controller="pd")
    assert other.controller == "pd" and cfg.controller == "adaptive"
    with pytest.raises(ValueError):
        cfg.replace(controller="nope")
    with pytest.raises(AttributeError):
        cfg.replace(colour="red")


def test_missing_file_names_the_path(tmp_path):
    p = tmp_path / "missing.yaml"
    with pytest.raises(OSError, match="missing.yaml"):
        load_scenario(p)


def test_name_defaults_to_file_stem(tmp_path):
    p = tmp_path / "mine.yaml"
    p.write_text("agents:\n  - {}\n")
    assert load_scenario(p).name == "mine"
