import math

import pytest
import yaml

from gaitopt.model import (
    ModelError,
    build_model,
    default_model,
    default_model_params,
    load_model,
)


def test_packaged_model_loads(model):
    # Unitree quotes 12 kg trunk-and-legs plus ~0.45 kg of battery/covers;
    # the planar reduction must preserve the total.
    assert model.total_mass == pytest.approx(12.45, abs=0.01)
    assert model.gravity == pytest.approx(9.81, rel=1e-6)
    assert 0.0 < model.friction <= 1.0


def test_mass_budget_is_consistent(model):
    links = model.link_masses()
    assert sum(links.values()) == pytest.approx(model.total_mass, rel=1e-12)
    # the legs (with their hip assemblies folded in) carry the majority share
    assert model.leg_mass_fraction == pytest.approx(0.6, abs=0.05)
    # pair-lumped planar links weigh both physical legs
    assert 2 * (model.thigh_mass + model.calf_mass) < \
        model.total_mass * model.leg_mass_fraction + 1e-9


def test_motor_limit_matches_datasheet(model):
    params = default_model_params()
    assert model.motor_torque_limit == pytest.approx(
        params["limits"]["motor_torque"], rel=1e-12)
    # each planar joint is a motor pair, so the leg links carry both legs' mass
    assert model.thigh_mass == pytest.approx(
        2 * params["leg"]["thigh_mass"], rel=1e-12)
    assert model.calf_mass == pytest.approx(
        2 * params["leg"]["calf_mass"], rel=1e-12)


def test_limits_are_ordered(model):
    lo, hi = model.thigh_limits
    assert lo < hi
    lo, hi = model.calf_limits
    assert lo < hi
    assert model.velocity_limit > 0


def test_load_model_roundtrip(tmp_path, model):
    params = default_model_params()
    path = tmp_path / "robot.yaml"
    path.write_text(yaml.safe_dump(params))
    again = load_model(path)
    assert again == model


@pytest.mark.parametrize("mutate, message", [
    (lambda p: p["torso"].pop("trunk_mass"), "missing field"),
    (lambda p: p["torso"].__setitem__("trunk_mass", -3.0), "non-positive"),
    (lambda p: p["leg"].__setitem__("thigh_length", 0.0), "non-positive"),
    (lambda p: p.__setitem__("friction_coefficient", math.nan), "positive"),
])
def test_invalid_parameters_rejected(mutate, message):
    params = default_model_params()
    mutate(params)
    with pytest.raises(ModelError, match=message):
        build_model(params)


def test_weight_property(model):
    assert model.weight == pytest.approx(model.total_mass * model.gravity, rel=1e-15)
