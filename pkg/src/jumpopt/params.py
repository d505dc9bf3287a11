"""Robot parameter file loading and validation.

The parameter file is a JSON document with top-level keys ``links``,
``joints``, ``markers`` and ``limits`` (SI units throughout).  See
``data/default_robot.json`` for the shipped 42 kg default and the README
for the schema.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class LinkParams:
    name: str
    mass: float
    com: np.ndarray          # (3,) offset in link frame
    inertia: np.ndarray      # (3,3) about link CoM


@dataclass(frozen=True)
class JointParams:
    name: str
    joint_type: str          # "revolute" | "prismatic"
    axis: np.ndarray         # (3,) unit vector in parent frame
    parent: str              # joint name or "base"
    offset: np.ndarray       # (3,) translation from parent frame
    child_link: str | None   # physical link carried by this joint, if any


@dataclass(frozen=True)
class MarkerParams:
    name: str
    link: str
    offset: np.ndarray


@dataclass
class RobotParams:
    """Validated contents of a robot parameter file."""

    name: str
    gravity: float
    base_link: str
    links: dict[str, LinkParams]
    joints: list[JointParams]
    markers: dict[str, MarkerParams]
    joint_position_limits: dict[str, tuple[float, float]]
    joint_velocity_max: float
    joint_torque_max: dict[str, float]
    mirror_sign: dict[str, float]
    poses: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def total_mass(self) -> float:
        return float(sum(l.mass for l in self.links.values()))


def _as_vec3(value, where: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ConfigurationError(f"{where}: expected a 3-vector, got shape {arr.shape}")
    return arr


def _validate_inertia(tensor: np.ndarray, where: str) -> None:
    if tensor.shape != (3, 3):
        raise ConfigurationError(f"{where}: inertia must be 3x3")
    if not np.allclose(tensor, tensor.T, atol=1e-12):
        raise ConfigurationError(f"{where}: inertia tensor is not symmetric")
    eigvals = np.linalg.eigvalsh(tensor)
    if np.min(eigvals) <= 0.0:
        raise ConfigurationError(f"{where}: inertia tensor is not positive definite")


def load_robot_params(path: str | Path | None = None) -> RobotParams:
    """Load and validate a robot parameter file.

    With ``path=None`` the packaged default 42 kg robot is used.  Raises
    :class:`ConfigurationError` naming the offending field on any missing
    or non-positive parameter.
    """
    if path is None:
        text = resources.files("jumpopt.data").joinpath("default_robot.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"robot parameter file is not valid JSON: {exc}") from exc
    return parse_robot_params(raw)


def parse_robot_params(raw: dict) -> RobotParams:
    for key in ("links", "joints", "markers", "limits", "base_link"):
        if key not in raw:
            raise ConfigurationError(f"missing top-level key '{key}'")

    links: dict[str, LinkParams] = {}
    for name, spec in raw["links"].items():
        if "mass" not in spec:
            raise ConfigurationError(f"links.{name}.mass is missing")
        mass = float(spec["mass"])
        if mass <= 0.0:
            raise ConfigurationError(f"links.{name}.mass must be > 0, got {mass}")
        inertia = np.asarray(spec.get("inertia"), dtype=float)
        _validate_inertia(inertia, f"links.{name}.inertia")
        links[name] = LinkParams(
            name=name,
            mass=mass,
            com=_as_vec3(spec.get("com", (0.0, 0.0, 0.0)), f"links.{name}.com"),
            inertia=inertia,
        )

    base_link = raw["base_link"]
    if base_link not in links:
        raise ConfigurationError(f"base_link '{base_link}' is not in links")

    joints: list[JointParams] = []
    seen = {"base"}
    for spec in raw["joints"]:
        name = spec.get("name")
        if not name:
            raise ConfigurationError("joints[*].name is missing")
        jtype = spec.get("type", "revolute")
        if jtype not in ("revolute", "prismatic"):
            raise ConfigurationError(f"joints.{name}.type must be revolute or prismatic")
        axis = _as_vec3(spec["axis"], f"joints.{name}.axis")
        norm = float(np.linalg.norm(axis))
        if abs(norm - 1.0) > 1e-9:
            raise ConfigurationError(f"joints.{name}.axis must be a unit vector")
        parent = spec.get("parent", "base")
        if parent not in seen:
            raise ConfigurationError(
                f"joints.{name}.parent '{parent}' does not precede it (tree must be topologically ordered)"
            )
        child_link = spec.get("child_link")
        if child_link is not None and child_link not in links:
            raise ConfigurationError(f"joints.{name}.child_link '{child_link}' is not in links")
        joints.append(
            JointParams(
                name=name,
                joint_type=jtype,
                axis=axis,
                parent=parent,
                offset=_as_vec3(spec.get("offset", (0.0, 0.0, 0.0)), f"joints.{name}.offset"),
                child_link=child_link,
            )
        )
        seen.add(name)

    carried = [j.child_link for j in joints if j.child_link is not None]
    if len(set(carried)) != len(carried):
        raise ConfigurationError("a link is attached to more than one joint")
    unattached = set(links) - set(carried) - {base_link}
    if unattached:
        raise ConfigurationError(f"links not attached to any joint: {sorted(unattached)}")

    markers: dict[str, MarkerParams] = {}
    for name, spec in raw["markers"].items():
        link = spec.get("link")
        if link not in links:
            raise ConfigurationError(f"markers.{name}.link '{link}' is not in links")
        markers[name] = MarkerParams(
            name=name, link=link, offset=_as_vec3(spec["offset"], f"markers.{name}.offset")
        )

    limits = raw["limits"]
    pos_limits: dict[str, tuple[float, float]] = {}
    for jname, pair in limits.get("joint_position", {}).items():
        lo, hi = float(pair[0]), float(pair[1])
        if not lo < hi:
            raise ConfigurationError(f"limits.joint_position.{jname}: lower must be < upper")
        pos_limits[jname] = (lo, hi)
    vel_max = float(limits.get("joint_velocity_max", 0.0))
    if vel_max <= 0.0:
        raise ConfigurationError("limits.joint_velocity_max must be > 0")
    torque_max = {k: float(v) for k, v in limits.get("joint_torque_max", {}).items()}
    for jname, tau in torque_max.items():
        if tau <= 0.0:
            raise ConfigurationError(f"limits.joint_torque_max.{jname} must be > 0")

    gravity = float(raw.get("gravity", 9.8))
    if gravity <= 0.0:
        raise ConfigurationError("gravity must be > 0")

    return RobotParams(
        name=raw.get("name", "robot"),
        gravity=gravity,
        base_link=base_link,
        links=links,
        joints=joints,
        markers=markers,
        joint_position_limits=pos_limits,
        joint_velocity_max=vel_max,
        joint_torque_max=torque_max,
        mirror_sign={k: float(v) for k, v in raw.get("mirror_sign", {}).items()},
        poses={k: {n: float(a) for n, a in v.items()} for k, v in raw.get("poses", {}).items()},
    )
