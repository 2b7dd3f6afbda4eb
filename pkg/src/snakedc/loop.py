"""Closed control loop: per-plane shape controllers driving the peg world."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from snakedc.admittance import AdmittanceGains, ShapeState, admittance_step
from snakedc.gait import GaitParams, odd_joints, shape_function
from snakedc.reactive import (
    AbsitionTracker,
    ComplianceMode,
    ReferenceStrategy,
    transition,
    update_absition,
    update_mean,
)
from snakedc.simworld import WorldState, step_world
from snakedc.windows import WindowLayout, advance_windows, cycle_windows, needs_cycle, weight_matrix


class Variant(str, enum.Enum):
    NC = "NC"
    NDC = "NDC"
    PDC = "PDC"
    DS = "DS"

    @property
    def fixed_mode(self) -> ComplianceMode:
        return {
            Variant.NC: ComplianceMode.NC,
            Variant.NDC: ComplianceMode.NDC,
            Variant.PDC: ComplianceMode.PDC,
            Variant.DS: ComplianceMode.NC,
        }[self]


@dataclass(frozen=True)
class ModeEvent:
    time: float
    plane: str
    slot: int
    window_id: int
    old: int
    new: int
    absition: float

    def as_dict(self) -> dict:
        return {
            "time": self.time,
            "plane": self.plane,
            "slot": self.slot,
            "window_id": self.window_id,
            "from": ComplianceMode(self.old).name,
            "to": ComplianceMode(self.new).name,
            "absition": self.absition,
        }


@dataclass(frozen=True)
class ThresholdSettings:
    upper_scale: float = 2.0  # multiples of the plane's amplitude scale, rad s
    lower_scale: float = -2.0
    exit_scale: float = 1e-3
    mean_periods: float = 1.0  # trailing-mean window in gait periods
    strategy: ReferenceStrategy = ReferenceStrategy.REMAP


@dataclass
class PlaneController:
    """Shape-based controller for one bending plane.

    ``nominal_scale`` is the amplitude magnitude used to scale thresholds. It
    equals ``A0`` for the odd plane; the even plane (``A0 = 0``) borrows the
    odd plane's value.
    """

    name: str
    gait: GaitParams
    joints: np.ndarray
    layout: WindowLayout
    state: ShapeState
    tracker: AbsitionTracker
    gains: AdmittanceGains
    variant: Variant
    nominal_scale: float
    dt: float
    window_ids: np.ndarray = None
    events: list = field(default_factory=list)
    _next_id: int = 0
    _weights: np.ndarray = None
    _weights_for: WindowLayout = None
    _positions: np.ndarray = None

    @classmethod
    def build(
        cls,
        name: str,
        gait: GaitParams,
        joints,
        layout: WindowLayout,
        gains: AdmittanceGains,
        variant: Variant | str,
        dt: float,
        thresholds: ThresholdSettings = ThresholdSettings(),
        nominal_scale: float | None = None,
        friction_offset=None,
    ) -> "PlaneController":
        variant = Variant(variant)
        amp0 = gait.nominal_amplitude
        scale = abs(amp0) if nominal_scale is None else float(nominal_scale)
        n = layout.n_windows
        k = max(1, int(round(thresholds.mean_periods * gait.period / dt)))
        tracker = AbsitionTracker.create(
            n,
            amp0,
            k,
            dt,
            thresh_upper=thresholds.upper_scale * scale,
            thresh_lower=thresholds.lower_scale * scale,
            eps_exit=thresholds.exit_scale * scale,
            friction_offset=friction_offset,
            strategy=thresholds.strategy,
        )
        return cls(
            name=name,
            gait=gait,
            joints=np.asarray(joints),
            layout=layout,
            state=ShapeState.nominal(n, amp0, variant.fixed_mode),
            tracker=tracker,
            gains=gains,
            variant=variant,
            nominal_scale=scale,
            dt=dt,
            window_ids=np.arange(n)[::-1].copy(),
            _next_id=n,
        )

    @property
    def n_windows(self) -> int:
        return self.layout.n_windows

    @property
    def positions(self) -> np.ndarray:
        if self._positions is None:
            self._positions = self.joints * self.gait.delta_s
        return self._positions

    def weights(self) -> np.ndarray:
        """Window weights of this plane's joints under the current layout."""
        if self._weights_for is not self.layout:
            self._weights = weight_matrix(self.positions, self.layout)
            self._weights_for = self.layout
        return self._weights

    def joint_amplitudes(self) -> np.ndarray:
        return self.weights() @ self.state.amp_desired

    def commanded(self, t: float) -> np.ndarray:
        """Joint angles for this plane's joints at time ``t``."""
        g = self.gait
        return g.kappa + self.joint_amplitudes() * np.sin(g.eta * self.positions - g.omega * t)

    def step(self, t: float, torques) -> None:
        """One control period: torques measured over ``(t - dt, t]`` drive the amplitudes."""
        g = self.gait
        jac = np.sin(g.eta * self.positions - g.omega * t)
        force = (jac * torques) @ self.weights()
        self.state = admittance_step(self.state, force, self.gains, self.dt)
        update_mean(self.tracker, self.state.amp_desired)
        update_absition(self.tracker, self.state.amp_desired, self.dt)
        if self.variant is Variant.DS:
            new_mode, _ = transition(self.tracker, self.state.mode)
            changed = np.flatnonzero(new_mode != self.state.mode)
            for j in changed:
                self.events.append(
                    ModeEvent(
                        time=t + self.dt,
                        plane=self.name,
                        slot=int(j),
                        window_id=int(self.window_ids[j]),
                        old=int(self.state.mode[j]),
                        new=int(new_mode[j]),
                        absition=float(self.tracker.absition[j]),
                    )
                )
            if changed.size:
                self.state = replace(self.state, mode=new_mode.astype(np.int8))
        self.layout = advance_windows(self.layout, self.dt, self.gait)
        while needs_cycle(self.layout):
            self.layout, self.state, self.tracker = cycle_windows(
                self.layout, self.state, self.tracker, self.gait.nominal_amplitude
            )
            self.window_ids[1:] = self.window_ids[:-1].copy()
            self.window_ids[0] = self._next_id
            self._next_id += 1


class ClosedLoop:
    """Planar loop: odd-plane controller, even joints held straight."""

    def __init__(self, world: WorldState, planes: dict[str, PlaneController], dt: float):
        self.world = world
        self.planes = planes
        self.dt = float(dt)
        self.time = 0.0
        self.n_joints = world.params.n_joints
        self.torques = np.zeros(self.n_joints)
        self._cmd = self.command(0.0)

    def command(self, t: float) -> np.ndarray:
        cmd = np.zeros(self.n_joints)
        for plane in self.planes.values():
            cmd[plane.joints] = plane.commanded(t)
        return cmd

    def step(self):
        self.world, readings = step_world(self.world, self._cmd, self.dt)
        self.time += self.dt
        self.torques = readings.torque_ext
        for plane in self.planes.values():
            plane.step(self.time, self.torques[plane.joints])
        self._cmd = self.command(self.time)
        return readings

    def run(self, duration: float, callback=None):
        n = int(round(duration / self.dt))
        for _ in range(n):
            readings = self.step()
            if callback is not None:
                callback(self, readings)
        return self

    @property
    def events(self) -> list:
        out = [e for p in self.planes.values() for e in p.events]
        return sorted(out, key=lambda e: (e.time, e.plane, e.slot))


def planar_loop(
    world: WorldState,
    gait: GaitParams,
    layout: WindowLayout,
    gains: AdmittanceGains,
    variant: Variant | str = Variant.NC,
    dt: float = 0.005,
    thresholds: ThresholdSettings = ThresholdSettings(),
    friction_offset=None,
) -> ClosedLoop:
    plane = PlaneController.build(
        "odd",
        gait,
        odd_joints(gait.n_joints),
        layout,
        gains,
        variant,
        dt,
        thresholds=thresholds,
        friction_offset=friction_offset,
    )
    return ClosedLoop(world, {"odd": plane}, dt)
