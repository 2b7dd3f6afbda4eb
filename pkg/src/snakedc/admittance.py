"""Spring-mass-damper dynamics on the per-window amplitudes.

Each window's desired amplitude obeys ``M a + B v + K (A - A0) = F`` where the
shape force ``F`` is the window-weighted projection of the measured external
joint torques through the shape Jacobian. Integration is semi-implicit Euler
with the directional-compliance filter applied to the velocity between the
velocity and position updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from snakedc.errors import ConfigurationError
from snakedc.reactive import ComplianceMode, apply_filter
from snakedc.windows import WindowLayout, weight_matrix


@dataclass(frozen=True)
class AdmittanceGains:
    m_gain: float = 1.0
    b_gain: float = 4.0
    k_gain: float = 4.0
    amp_max: float = math.pi / 2
    amp_min: float = 0.0

    def __post_init__(self):
        for name in ("m_gain", "b_gain", "k_gain"):
            value = np.asarray(getattr(self, name), dtype=float)
            if not np.all(value > 0):
                raise ConfigurationError(f"{name} must be strictly positive, got {value}")
        if not self.amp_min < self.amp_max:
            raise ConfigurationError("amplitude clamp needs amp_min < amp_max")

    @property
    def natural_frequency(self) -> float:
        return math.sqrt(self.k_gain / self.m_gain)

    @property
    def damping_ratio(self) -> float:
        return self.b_gain / (2.0 * math.sqrt(self.k_gain * self.m_gain))


@dataclass(frozen=True)
class ShapeState:
    amp_desired: np.ndarray
    amp_vel: np.ndarray
    amp_acc: np.ndarray
    amp_nominal: np.ndarray
    mode: np.ndarray
    birth_mode: int = ComplianceMode.NC

    @classmethod
    def nominal(cls, n_windows: int, amp_nominal: float, mode=ComplianceMode.NC):
        return cls(
            amp_desired=np.full(n_windows, float(amp_nominal)),
            amp_vel=np.zeros(n_windows),
            amp_acc=np.zeros(n_windows),
            amp_nominal=np.full(n_windows, float(amp_nominal)),
            mode=np.full(n_windows, int(mode), dtype=np.int8),
            birth_mode=int(mode),
        )

    @property
    def n_windows(self) -> int:
        return self.amp_desired.shape[0]

    def shift_in(self) -> "ShapeState":
        """Drop the tail window and add a nominal window at the head."""
        amp0 = self.amp_nominal[0]

        def shifted(arr, fill):
            out = np.empty_like(arr)
            out[1:] = arr[:-1]
            out[0] = fill
            return out

        return replace(
            self,
            amp_desired=shifted(self.amp_desired, amp0),
            amp_vel=shifted(self.amp_vel, 0.0),
            amp_acc=shifted(self.amp_acc, 0.0),
            amp_nominal=shifted(self.amp_nominal, amp0),
            mode=shifted(self.mode, self.birth_mode),
        )


@dataclass
class TorqueVector:
    torques: np.ndarray
    plane: str = "odd"

    def __post_init__(self):
        self.torques = np.asarray(self.torques, dtype=float)
        if not np.all(np.isfinite(self.torques)):
            raise FloatingPointError("non-finite torque reading")


def shape_force(torques, time: float, layout: WindowLayout, gait, joints=None):
    """Project joint torques into per-window shape forces.

    ``torques`` holds one reading per entry of ``joints`` (all joints of
    ``gait`` when ``joints`` is None).
    """
    tau = torques.torques if isinstance(torques, TorqueVector) else np.asarray(torques, dtype=float)
    idx = np.arange(gait.n_joints) if joints is None else np.asarray(joints)
    if tau.shape != idx.shape:
        raise ConfigurationError(f"{tau.size} torques for {idx.size} joints")
    s = idx * gait.delta_s
    jac = np.sin(gait.eta * s - gait.omega * time)
    return (jac * tau) @ weight_matrix(s, layout)


def admittance_step(
    state: ShapeState, force, gains: AdmittanceGains, dt: float, filter=apply_filter
) -> ShapeState:
    """Advance every window's amplitude dynamics by one control step."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    force = np.asarray(force, dtype=float)
    if force.shape != state.amp_desired.shape:
        raise ConfigurationError(f"{force.size} forces for {state.n_windows} windows")
    if not np.isfinite(force).all():
        bad = int(np.flatnonzero(~np.isfinite(force))[0])
        raise FloatingPointError(f"non-finite shape force in window {bad}")

    amp = state.amp_desired
    acc = (force - gains.b_gain * state.amp_vel - gains.k_gain * (amp - state.amp_nominal)) / gains.m_gain
    vel = filter(state.amp_vel + dt * acc, state.mode)
    amp = amp + dt * vel

    if amp.min() < gains.amp_min or amp.max() > gains.amp_max:
        low = amp < gains.amp_min
        high = amp > gains.amp_max
        amp = np.clip(amp, gains.amp_min, gains.amp_max)
        vel = np.where(low & (vel < 0), 0.0, vel)
        vel = np.where(high & (vel > 0), 0.0, vel)
    return ShapeState(amp, vel, acc, state.amp_nominal, state.mode, state.birth_mode)
