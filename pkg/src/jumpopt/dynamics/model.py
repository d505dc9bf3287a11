"""Kinematic tree construction for the two robot variants.

Internally the tree is one body per degree of freedom: floating-base DOFs
and multi-DOF joint clusters become chains of single-DOF bodies, where
only the last body of a cluster carries link mass (intermediate bodies
are massless frames).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..params import RobotParams

FULL_20DOF = "full_20dof"
SYMMETRIC_5LINK = "symmetric_5link"

# Nominal ranges used when sampling random base poses in tests.
_BASE_SAMPLING = {
    "x": (-0.5, 0.5),
    "y": (-0.5, 0.5),
    "z": (0.5, 1.5),
    "roll": (-0.6, 0.6),
    "pitch": (-0.6, 0.6),
    "yaw": (-0.6, 0.6),
}

_BASE_AXES = {
    "x": ("prismatic", np.array([1.0, 0.0, 0.0])),
    "y": ("prismatic", np.array([0.0, 1.0, 0.0])),
    "z": ("prismatic", np.array([0.0, 0.0, 1.0])),
    "roll": ("revolute", np.array([1.0, 0.0, 0.0])),
    "pitch": ("revolute", np.array([0.0, 1.0, 0.0])),
    "yaw": ("revolute", np.array([0.0, 0.0, 1.0])),
}


@dataclass
class Body:
    """One degree of freedom of the kinematic tree."""

    name: str
    parent: int                  # index of parent body, -1 for the world
    joint_type: str              # "revolute" | "prismatic"
    axis: np.ndarray             # (3,) in parent frame
    offset: np.ndarray           # (3,) translation from parent frame
    mass: float = 0.0
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    link_name: str | None = None


class KinematicModel:
    """Immutable articulated model: one body per DOF, floating base first."""

    def __init__(
        self,
        variant: str,
        bodies: list[Body],
        markers: dict[str, tuple[int, np.ndarray]],
        base_dofs: list[str],
        gravity: float,
        q_min: np.ndarray,
        q_max: np.ndarray,
        mirror_pairs: list[tuple[int, int, float]] | None = None,
    ):
        self.variant = variant
        self.bodies = bodies
        self.markers = markers
        self.base_dofs = base_dofs
        self.gravity = float(gravity)
        self.n = len(bodies)
        self.nb = len(base_dofs)
        self.coord_names = [b.name for b in bodies]
        self.q_min = np.asarray(q_min, dtype=float)
        self.q_max = np.asarray(q_max, dtype=float)
        self.mirror_pairs = mirror_pairs or []

        self.parents = np.array([b.parent for b in bodies], dtype=int)
        self.is_revolute = np.array([b.joint_type == "revolute" for b in bodies])
        self.axes_local = np.stack([b.axis for b in bodies])
        self.offsets = np.stack([b.offset for b in bodies])
        self.masses = np.array([b.mass for b in bodies])
        self.coms_local = np.stack([b.com for b in bodies])
        self.inertias_local = np.stack([b.inertia for b in bodies])
        self.has_mass = self.masses > 0.0
        self.massive_idx = np.nonzero(self.has_mass)[0]
        self.total_mass = float(self.masses.sum())

        # ancestor_mask[i, j]: DOF j moves body i (j == i or j above i).
        mask = np.zeros((self.n, self.n), dtype=bool)
        for i in range(self.n):
            j = i
            while j >= 0:
                mask[i, j] = True
                j = self.parents[j]
        self.ancestor_mask = mask
        self.children: list[list[int]] = [[] for _ in range(self.n)]
        for i, p in enumerate(self.parents):
            if p >= 0:
                self.children[p].append(i)

    def index(self, name: str) -> int:
        try:
            return self.coord_names.index(name)
        except ValueError:
            raise ConfigurationError(f"unknown coordinate '{name}'") from None

    def marker_names(self) -> list[str]:
        return list(self.markers)

    def __repr__(self) -> str:
        return f"KinematicModel({self.variant}, n={self.n}, mass={self.total_mass:.2f} kg)"


def _base_chain(base_dofs: list[str]) -> list[Body]:
    bodies = []
    for k, dof in enumerate(base_dofs):
        jtype, axis = _BASE_AXES[dof]
        bodies.append(
            Body(name=f"base_{dof}", parent=k - 1, joint_type=jtype, axis=axis, offset=np.zeros(3))
        )
    return bodies


def build_model(params: RobotParams, variant: str) -> KinematicModel:
    """Construct the articulated model for one variant.

    ``full_20dof`` keeps every joint of the parameter file under a 6-DOF
    floating base.  ``symmetric_5link`` keeps only the sagittal (pitch)
    joints of the right-side chains, aggregates each carried link with its
    left twin (masses and inertia tensors summed, lateral offsets dropped)
    and restricts the floating base to x, z and pitch.
    """
    if variant == FULL_20DOF:
        return _build_full(params)
    if variant == SYMMETRIC_5LINK:
        return _build_symmetric(params)
    raise ConfigurationError(f"unknown model variant '{variant}'")


def _sampling_bounds(params: RobotParams, names: list[str], base_dofs: list[str]):
    q_min, q_max = [], []
    for name in names:
        if name.startswith("base_"):
            lo, hi = _BASE_SAMPLING[name[len("base_"):]]
        elif name in params.joint_position_limits:
            lo, hi = params.joint_position_limits[name]
        else:
            lo, hi = -1.5, 1.5
        q_min.append(lo)
        q_max.append(hi)
    return np.array(q_min), np.array(q_max)


def _build_full(params: RobotParams) -> KinematicModel:
    base_dofs = ["x", "y", "z", "roll", "pitch", "yaw"]
    bodies = _base_chain(base_dofs)
    base_link = params.links[params.base_link]
    bodies[-1].mass = base_link.mass
    bodies[-1].com = base_link.com.copy()
    bodies[-1].inertia = base_link.inertia.copy()
    bodies[-1].link_name = base_link.name

    index_of = {"base": len(base_dofs) - 1}
    for j in params.joints:
        body = Body(
            name=j.name,
            parent=index_of[j.parent],
            joint_type=j.joint_type,
            axis=j.axis.copy(),
            offset=j.offset.copy(),
        )
        if j.child_link is not None:
            link = params.links[j.child_link]
            body.mass = link.mass
            body.com = link.com.copy()
            body.inertia = link.inertia.copy()
            body.link_name = link.name
        index_of[j.name] = len(bodies)
        bodies.append(body)

    attached = sum(b.mass for b in bodies)
    if abs(attached - params.total_mass) > 1e-9:
        raise ConfigurationError("sum of attached link masses does not equal the total link mass")

    names = [b.name for b in bodies]
    markers = {
        m.name: (names.index(_joint_carrying(params, m.link)), m.offset.copy())
        for m in params.markers.values()
    }

    mirror_pairs = []
    for j in params.joints:
        if j.name.startswith("r_"):
            stem = j.name[2:]
            twin = "l_" + stem
            if twin in index_of:
                sign = params.mirror_sign.get(stem, 1.0)
                mirror_pairs.append((index_of[j.name], index_of[twin], sign))

    q_min, q_max = _sampling_bounds(params, names, base_dofs)
    return KinematicModel(
        FULL_20DOF, bodies, markers, base_dofs, params.gravity, q_min, q_max, mirror_pairs
    )


def _joint_carrying(params: RobotParams, link_name: str) -> str:
    if link_name == params.base_link:
        return "base_yaw"
    for j in params.joints:
        if j.child_link == link_name:
            return j.name
    raise ConfigurationError(f"link '{link_name}' is not carried by any joint")


def _chain_from_base(params: RobotParams, first: str) -> list:
    """Follow the (single-child) joint chain starting at a base-attached joint."""
    by_parent: dict[str, list] = {}
    for j in params.joints:
        by_parent.setdefault(j.parent, []).append(j)
    chain = [next(j for j in params.joints if j.name == first)]
    while chain[-1].name in by_parent:
        nxt = by_parent[chain[-1].name]
        if len(nxt) != 1:
            raise ConfigurationError(f"joint '{chain[-1].name}' must have a single child in a limb chain")
        chain.append(nxt[0])
    return chain


def _aggregate(params: RobotParams, right_link: str):
    """Sum a right link with its left twin; lateral offsets drop out."""
    left_link = "l_" + right_link[2:]
    if left_link not in params.links:
        raise ConfigurationError(f"links.{left_link} is missing (required to aggregate {right_link})")
    r, l = params.links[right_link], params.links[left_link]
    mass = r.mass + l.mass
    com = (r.mass * r.com + l.mass * l.com) / mass
    com = com * np.array([1.0, 0.0, 1.0])
    return mass, com, r.inertia + l.inertia


def _build_symmetric(params: RobotParams) -> KinematicModel:
    base_dofs = ["x", "z", "pitch"]
    bodies = _base_chain(base_dofs)
    trunk = params.links[params.base_link]
    bodies[-1].mass = trunk.mass
    bodies[-1].com = trunk.com * np.array([1.0, 0.0, 1.0])
    bodies[-1].inertia = trunk.inertia.copy()
    bodies[-1].link_name = trunk.name

    pitch_axis = np.array([0.0, 1.0, 0.0])
    sagittal = np.array([1.0, 0.0, 1.0])
    roots = [j.name for j in params.joints if j.parent == "base" and j.name.startswith("r_")]
    carried_joint: dict[str, int] = {}
    link_frame_shift: dict[str, np.ndarray] = {}
    for root in roots:
        chain = _chain_from_base(params, root)
        parent_idx = len(base_dofs) - 1
        pending_offset = np.zeros(3)
        for j in chain:
            pending_offset = pending_offset + j.offset
            is_pitch = j.joint_type == "revolute" and abs(abs(j.axis[1]) - 1.0) < 1e-12
            if is_pitch:
                body = Body(
                    name=j.name[2:],
                    parent=parent_idx,
                    joint_type="revolute",
                    axis=pitch_axis.copy(),
                    offset=pending_offset * sagittal,
                )
                parent_idx = len(bodies)
                bodies.append(body)
                pending_offset = np.zeros(3)
            if j.child_link is not None:
                # attach the aggregated link to the last kept pitch body;
                # the link frame sits pending_offset away from that body frame
                shift = pending_offset * sagittal
                mass, com, inertia = _aggregate(params, j.child_link)
                bodies[parent_idx].mass = mass
                bodies[parent_idx].com = com + shift
                bodies[parent_idx].inertia = inertia
                bodies[parent_idx].link_name = j.child_link[2:]
                carried_joint[j.child_link] = parent_idx
                link_frame_shift[j.child_link] = shift

    if abs(sum(b.mass for b in bodies) - params.total_mass) > 1e-9:
        raise ConfigurationError("aggregated 5-link masses do not sum to the total link mass")

    names = [b.name for b in bodies]
    markers = {}
    for m in params.markers.values():
        if not m.name.startswith("r_") or m.link not in carried_joint:
            continue
        markers[m.name[2:]] = (
            carried_joint[m.link],
            m.offset * sagittal + link_frame_shift[m.link],
        )

    q_min_named, q_max_named = [], []
    for name in names:
        if name.startswith("base_"):
            lo, hi = _BASE_SAMPLING[name[len("base_"):]]
        else:
            lo, hi = params.joint_position_limits.get("r_" + name, (-1.5, 1.5))
        q_min_named.append(lo)
        q_max_named.append(hi)

    return KinematicModel(
        SYMMETRIC_5LINK,
        bodies,
        markers,
        base_dofs,
        params.gravity,
        np.array(q_min_named),
        np.array(q_max_named),
    )
