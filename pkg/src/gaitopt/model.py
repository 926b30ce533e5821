"""Robot parameter loading and the sagittal-plane reduction.

The parameter file describes the physical robot (trunk, hip assemblies and one
leg of each identical pair).  The planar model used everywhere else lumps that
into five sagittal links:

* ``torso`` -- trunk plus the four hip ab/ad assemblies, which stay rigid when
  the hip joints are held at zero;
* ``thigh`` / ``calf`` for the front and rear pairs -- each planar leg link
  carries the mass and inertia of both physical legs of its pair, and each
  planar joint is driven by two motors (so its torque authority is twice the
  single-motor limit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml


class ModelError(ValueError):
    """Raised for missing fields or physically invalid parameters."""


@dataclass(frozen=True)
class RobotModel:
    """Validated planar model.  All leg-link quantities are pair-lumped."""

    # torso (trunk + hip assemblies)
    torso_mass: float
    torso_com: tuple[float, float]   # in the torso frame, from the geometric centre
    torso_inertia: float             # kg m^2 about the lumped torso COM
    hip_x: float                     # fore/aft hip pivot offset from the centre
    hip_z: float

    # leg links (pair-lumped; front and rear pairs are identical)
    thigh_mass: float
    thigh_length: float
    thigh_com: float                 # distance from the hip pivot along the link
    thigh_inertia: float
    calf_mass: float
    calf_length: float
    calf_com: float
    calf_inertia: float

    gravity: float
    friction: float
    foot_radius: float

    thigh_limits: tuple[float, float]
    calf_limits: tuple[float, float]
    velocity_limit: float            # rad/s per joint
    motor_torque_limit: float        # N m per physical motor

    total_mass: float
    leg_mass_fraction: float         # mass carried by the leg assemblies (incl. hips)

    @property
    def weight(self) -> float:
        return self.total_mass * self.gravity

    def link_masses(self) -> dict[str, float]:
        """Planar link masses; they sum to the total mass."""
        return {
            "torso": self.torso_mass,
            "front_thigh": self.thigh_mass,
            "front_calf": self.calf_mass,
            "rear_thigh": self.thigh_mass,
            "rear_calf": self.calf_mass,
        }


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ModelError(f"missing field '{key}' in section '{where}'")
    return section[key]


def _positive(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ModelError(f"non-positive {what}: {value}")
    return value


def _angle_range(raw, what: str) -> tuple[float, float]:
    lo, hi = float(raw[0]), float(raw[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ModelError(f"invalid {what} range: [{lo}, {hi}]")
    return lo, hi


def build_model(params: dict) -> RobotModel:
    """Build and validate a :class:`RobotModel` from a parsed parameter set."""
    if not isinstance(params, dict):
        raise ModelError("parameter set must be a mapping")

    torso = _require(params, "torso", "<root>")
    leg = _require(params, "leg", "<root>")
    limits = _require(params, "limits", "<root>")

    g = _positive(_require(params, "gravity", "<root>"), "gravity")
    mu = float(_require(params, "friction_coefficient", "<root>"))
    if not math.isfinite(mu) or mu <= 0.0:
        raise ModelError(f"friction coefficient must be positive, got {mu}")
    foot_radius = _positive(_require(params, "foot_radius", "<root>"), "foot radius")

    trunk_mass = _positive(_require(torso, "trunk_mass", "torso"), "link mass (trunk)")
    trunk_inertia = _positive(_require(torso, "trunk_pitch_inertia", "torso"), "link inertia (trunk)")
    trunk_com = tuple(float(v) for v in _require(torso, "trunk_com_offset", "torso"))
    hip_mass = _positive(_require(torso, "hip_assembly_mass", "torso"), "link mass (hip assembly)")
    hip_inertia = _positive(_require(torso, "hip_assembly_pitch_inertia", "torso"), "link inertia (hip assembly)")
    hip_x = _positive(_require(torso, "hip_offset_x", "torso"), "hip offset")
    hip_z = float(torso.get("hip_offset_z", 0.0))

    thigh_mass = _positive(_require(leg, "thigh_mass", "leg"), "link mass (thigh)")
    thigh_length = _positive(_require(leg, "thigh_length", "leg"), "link length (thigh)")
    thigh_com = _positive(_require(leg, "thigh_com_distance", "leg"), "COM distance (thigh)")
    thigh_inertia = _positive(_require(leg, "thigh_pitch_inertia", "leg"), "link inertia (thigh)")
    calf_mass = _positive(_require(leg, "calf_mass", "leg"), "link mass (calf)")
    calf_length = _positive(_require(leg, "calf_length", "leg"), "link length (calf)")
    calf_com = _positive(_require(leg, "calf_com_distance", "leg"), "COM distance (calf)")
    calf_inertia = _positive(_require(leg, "calf_pitch_inertia", "leg"), "link inertia (calf)")
    if thigh_com > thigh_length or calf_com > calf_length:
        raise ModelError("link COM distance exceeds link length")

    thigh_limits = _angle_range(_require(limits, "thigh_angle", "limits"), "thigh angle")
    calf_limits = _angle_range(_require(limits, "calf_angle", "limits"), "calf angle")
    velocity_limit = _positive(_require(limits, "joint_velocity", "limits"), "velocity limit")
    motor_torque = _positive(_require(limits, "motor_torque", "limits"), "torque limit")

    # Lump the trunk and the four hip assemblies into one torso link.
    torso_mass = trunk_mass + 4.0 * hip_mass
    hips = [(hip_x, hip_z), (hip_x, hip_z), (-hip_x, hip_z), (-hip_x, hip_z)]
    com_x = (trunk_mass * trunk_com[0] + hip_mass * sum(p[0] for p in hips)) / torso_mass
    com_z = (trunk_mass * trunk_com[1] + hip_mass * sum(p[1] for p in hips)) / torso_mass
    torso_inertia = trunk_inertia + trunk_mass * ((trunk_com[0] - com_x) ** 2 + (trunk_com[1] - com_z) ** 2)
    for px, pz in hips:
        torso_inertia += hip_inertia + hip_mass * ((px - com_x) ** 2 + (pz - com_z) ** 2)

    total = torso_mass + 2.0 * (2.0 * thigh_mass + 2.0 * calf_mass)
    leg_assembly_mass = 4.0 * (hip_mass + thigh_mass + calf_mass)

    model = RobotModel(
        torso_mass=torso_mass,
        torso_com=(com_x, com_z),
        torso_inertia=torso_inertia,
        hip_x=hip_x,
        hip_z=hip_z,
        thigh_mass=2.0 * thigh_mass,
        thigh_length=thigh_length,
        thigh_com=thigh_com,
        thigh_inertia=2.0 * thigh_inertia,
        calf_mass=2.0 * calf_mass,
        calf_length=calf_length,
        calf_com=calf_com,
        calf_inertia=2.0 * calf_inertia,
        gravity=g,
        friction=mu,
        foot_radius=foot_radius,
        thigh_limits=thigh_limits,
        calf_limits=calf_limits,
        velocity_limit=velocity_limit,
        motor_torque_limit=motor_torque,
        total_mass=total,
        leg_mass_fraction=leg_assembly_mass / total,
    )

    mass_sum = sum(model.link_masses().values())
    if abs(mass_sum - model.total_mass) > 1e-9:
        raise ModelError(f"link masses sum to {mass_sum}, expected {model.total_mass}")
    return model


def load_model(path: str | Path) -> RobotModel:
    """Load and validate a model parameter file (YAML)."""
    with open(path) as fh:
        params = yaml.safe_load(fh)
    return build_model(params)


def load_model_params(path: str | Path) -> dict:
    with open(path) as fh:
        return yaml.safe_load(fh)


def default_model_params() -> dict:
    """Parameter dict of the packaged A1 sagittal model."""
    text = resources.files("gaitopt.data").joinpath("a1_planar.yaml").read_text()
    return yaml.safe_load(text)


def default_model() -> RobotModel:
    return build_model(default_model_params())
