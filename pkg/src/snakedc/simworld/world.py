"""Planar peg-array world for a chain of capsule links."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from snakedc.errors import SimulationError
from snakedc.simworld import _kernel

MAX_CONTACTS = 256
# integrate() only writes contact rows for resolve_contacts-style callers; reuse one buffer
_CONTACT_SCRATCH = np.empty((MAX_CONTACTS, 7))


@dataclass(frozen=True)
class WorldParams:
    n_joints: int = 16
    link_length: float = 0.1
    link_radius: float = 0.02
    link_mass: float = 0.1
    kp: float = 20.0
    kd: float = 2.0
    k_stop: float = 50.0
    friction_tangential: float = 10.0  # N s/m per metre of body
    friction_normal: float = 100.0
    peg_radius: float = 0.04
    contact_stiffness: float = 1.0e5
    contact_damping: float = 10.0
    peg_friction: float = 0.1
    slip_velocity: float = 0.05
    dt_phys: float = 1.0e-3
    energy_factor: float = 10.0

    @property
    def n_links(self) -> int:
        return self.n_joints + 1

    @property
    def body_length(self) -> float:
        return self.n_links * self.link_length

    def node_masses(self) -> np.ndarray:
        m = np.full(self.n_links + 1, self.link_mass)
        m[0] = m[-1] = 0.5 * self.link_mass
        return m

    @cached_property
    def _node_masses(self) -> np.ndarray:
        return self.node_masses()

    def frictionless(self) -> "WorldParams":
        from dataclasses import replace

        return replace(self, friction_tangential=0.0, friction_normal=0.0)


@dataclass
class WorldState:
    """Chain state in centre-of-mass / absolute-link-angle coordinates.

    ``phi[l]`` is the heading of link ``l`` pointing from the head end to the
    tail end of that link; joint ``i`` couples links ``i`` and ``i + 1`` with
    angle ``phi[i+1] - phi[i]``.
    """

    params: WorldParams
    com: np.ndarray
    com_vel: np.ndarray
    phi: np.ndarray
    phi_vel: np.ndarray
    pegs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    time: float = 0.0
    energy_bound: float = 0.0
    max_penetration: float = 0.0
    n_contacts: int = 0
    last_command: np.ndarray | None = None
    _peg_cache: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.pegs = np.ascontiguousarray(np.asarray(self.pegs, dtype=float).reshape(-1, 2))
        if self.energy_bound == 0.0:
            p = self.params
            self.energy_bound = 0.5 * p.kp * p.n_joints * math.pi**2 + self.kinetic_energy()

    @classmethod
    def from_joint_angles(cls, params: WorldParams, joint_angles, center=(0.0, 0.0),
                          heading: float = 0.0, pegs=None) -> "WorldState":
        """Chain at rest whose mean backbone direction (tail to head) is ``heading``."""
        alpha = np.asarray(joint_angles, dtype=float)
        if alpha.shape != (params.n_joints,):
            raise ValueError(f"expected {params.n_joints} joint angles, got {alpha.shape}")
        rel = np.concatenate([[0.0], np.cumsum(alpha)])
        mean_dir = math.atan2(np.sin(rel).mean(), np.cos(rel).mean())
        # links point head -> tail, i.e. opposite to the travel heading
        phi = rel - mean_dir + heading + math.pi
        world = cls(
            params=params,
            com=np.zeros(2),
            com_vel=np.zeros(2),
            phi=phi,
            phi_vel=np.zeros(params.n_links),
            pegs=np.zeros((0, 2)) if pegs is None else pegs,
        )
        shift = np.asarray(center, dtype=float) - geometric_center(world)
        world.com = world.com + shift
        return world

    @property
    def n_pegs(self) -> int:
        return self.pegs.shape[0]

    @property
    def joint_angles(self) -> np.ndarray:
        return np.diff(self.phi)

    @property
    def joint_rates(self) -> np.ndarray:
        return np.diff(self.phi_vel)

    def nodes(self) -> np.ndarray:
        return _kernel.node_positions(self.com, self.phi, self.params._node_masses, self.params.link_length)

    def node_velocities(self) -> np.ndarray:
        return _kernel.node_velocities(
            self.com_vel, self.phi, self.phi_vel, self.params._node_masses, self.params.link_length
        )

    def link_centers(self) -> np.ndarray:
        p = self.nodes()
        return 0.5 * (p[:-1] + p[1:])

    def kinetic_energy(self) -> float:
        v = self.node_velocities()
        return float(0.5 * np.sum(self.params.node_masses() * np.sum(v * v, axis=1)))

    def momentum(self) -> np.ndarray:
        return self.params.node_masses().sum() * self.com_vel

    def heading(self) -> float:
        """Mean backbone direction from tail to head."""
        return math.atan2(-np.sin(self.phi).mean(), -np.cos(self.phi).mean())

    def copy(self) -> "WorldState":
        return WorldState(
            params=self.params,
            com=self.com.copy(),
            com_vel=self.com_vel.copy(),
            phi=self.phi.copy(),
            phi_vel=self.phi_vel.copy(),
            pegs=self.pegs.copy(),
            time=self.time,
            energy_bound=self.energy_bound,
            max_penetration=self.max_penetration,
            n_contacts=self.n_contacts,
            last_command=None if self.last_command is None else self.last_command.copy(),
        )


@dataclass(frozen=True)
class ContactForce:
    force: np.ndarray
    point: np.ndarray
    peg: int  # -1 for ground friction
    link: int


@dataclass(frozen=True)
class JointReadings:
    angle: np.ndarray
    rate: np.ndarray
    torque_ext: np.ndarray


def geometric_center(world: WorldState) -> np.ndarray:
    return world.link_centers().mean(axis=0)


def nearby_pegs(world: WorldState, margin: float = 0.1) -> np.ndarray:
    if world.n_pegs == 0:
        return world.pegs
    nodes = world.nodes()
    reach = world.params.peg_radius + world.params.link_radius + margin
    lo = nodes.min(axis=0) - reach
    hi = nodes.max(axis=0) + reach
    mask = np.all((world.pegs >= lo) & (world.pegs <= hi), axis=1)
    return np.ascontiguousarray(world.pegs[mask])


def _candidate_pegs(world: WorldState) -> np.ndarray:
    """Pegs that can touch the body this step, from a cached neighbourhood.

    Every node lies within one body length of the centre of mass, so a square
    of that half-width around the cached centre plus a margin covers the body
    until the centre drifts by more than the margin.
    """
    if world.n_pegs == 0:
        return world.pegs
    cache = world._peg_cache
    cx, cy = world.com
    if cache is not None and abs(cx - cache[0]) < cache[2] and abs(cy - cache[1]) < cache[2]:
        return cache[3]
    p = world.params
    margin = 0.25
    half = p.body_length + p.peg_radius + p.link_radius + 2 * margin
    near = np.all(np.abs(world.pegs - world.com) <= half, axis=1)
    cache = (cx, cy, margin, np.ascontiguousarray(world.pegs[near]))
    world._peg_cache = cache
    return cache[3]


def step_world(world: WorldState, commanded_angles, dt: float):
    """Advance the world by one control period ``dt`` (in place).

    Joint PD torques track ``commanded_angles``; contacts and friction are
    resolved every physics substep. Returns ``(world, readings)`` where the
    external-torque readings are averaged over the substeps.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    p = world.params
    cmd = np.asarray(commanded_angles, dtype=float)
    if cmd.shape != (p.n_joints,) or not math.isfinite(cmd.sum()):
        raise ValueError("commanded angles must be a finite vector with one entry per joint")
    # derivative action acts on the tracking error, so it needs the command rate
    cmd_rate = np.zeros(p.n_joints) if world.last_command is None else (cmd - world.last_command) / dt
    world.last_command = cmd.copy()
    n_sub = max(1, int(round(dt / p.dt_phys)))
    h = dt / n_sub
    # pegs move at most a few cm relative to the body within one control step
    pegs = _candidate_pegs(world)
    tau = np.zeros(p.n_joints)
    ke, pen, n_contacts = _kernel.integrate(
        world.com, world.com_vel, world.phi, world.phi_vel, cmd, cmd_rate, p._node_masses,
        p.link_length, p.link_radius, p.kp, p.kd, p.k_stop,
        p.friction_tangential, p.friction_normal, pegs, p.peg_radius,
        p.contact_stiffness, p.contact_damping, p.peg_friction, p.slip_velocity,
        h, n_sub, tau, _CONTACT_SCRATCH,
    )
    world.time += dt
    world.max_penetration = pen
    world.n_contacts = n_contacts
    # kinetic energy is non-finite whenever any velocity is
    finite = math.isfinite(ke) and math.isfinite(world.phi.sum() + world.com.sum())
    if not finite or ke > p.energy_factor * world.energy_bound:
        raise SimulationError(
            f"integration diverged at t={world.time:.3f}s (kinetic energy {ke:.3g}, "
            f"bound {world.energy_bound:.3g})"
        )
    phi, phi_vel = world.phi, world.phi_vel
    readings = JointReadings(angle=phi[1:] - phi[:-1], rate=phi_vel[1:] - phi_vel[:-1], torque_ext=tau)
    return world, readings


def resolve_contacts(world: WorldState) -> list[ContactForce]:
    """External forces acting on the chain in its current state.

    Peg contacts carry the peg index; ground friction appears as one entry per
    node with ``peg = -1``.
    """
    p = world.params
    pos = world.nodes()
    vel = world.node_velocities()
    n_links = p.n_links
    out: list[ContactForce] = []
    for n in range(n_links + 1):
        f = np.zeros((n_links, 2))
        t = np.zeros(n_links)
        single = np.zeros_like(pos)
        single[n] = vel[n]
        _kernel.ground_friction(pos, single, world.phi, p.link_length,
                                p.friction_tangential, p.friction_normal, f, t)
        link = 0 if n == 0 else n - 1
        if np.any(f[link] != 0.0):
            out.append(ContactForce(force=f[link].copy(), point=pos[n].copy(), peg=-1, link=link))
    if world.n_pegs:
        buf = np.zeros((MAX_CONTACTS, 7))
        f = np.zeros((n_links, 2))
        t = np.zeros(n_links)
        count = _kernel.peg_contacts(pos, vel, world.phi, p.link_length, p.link_radius, world.pegs,
                                     p.peg_radius, p.contact_stiffness, p.contact_damping,
                                     p.peg_friction, p.slip_velocity, f, t, buf)
        for row in buf[: min(count, MAX_CONTACTS)]:
            out.append(ContactForce(force=row[:2].copy(), point=row[2:4].copy(),
                                    peg=int(row[4]), link=int(row[5])))
    return out


def sense_external_torques(world: WorldState, contacts) -> np.ndarray:
    """Joint torques produced by external forces, head-side base convention.

    A force applied on link ``l`` loads every joint between the head and that
    link: ``tau_i += (p - x_i) x f`` where ``x_i`` is joint ``i``'s position.
    """
    nodes = world.nodes()
    tau = np.zeros(world.params.n_joints)
    for c in contacts:
        f = np.asarray(c.force, dtype=float)
        p = np.asarray(c.point, dtype=float)
        joints = np.arange(min(c.link, world.params.n_joints))
        arm = p - nodes[joints + 1]
        tau[joints] += arm[:, 0] * f[1] - arm[:, 1] * f[0]
    return tau
