"""Serpenoid joint-angle generation and the amplitude shape function.

Joints are indexed from 0 (head) to ``n_joints - 1`` (tail). Joint ``i`` sits at
normalized backbone position ``s_i = i * delta_s`` with ``delta_s = 1 / n_joints``.
In dual-plane mode the joints alternate between two bending planes: indices with
``i % 2 == 1`` belong to the odd (dorsoventral) plane, ``i % 2 == 0`` to the even
(lateral) plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from snakedc.errors import ConfigurationError


@dataclass(frozen=True)
class GaitParams:
    kappa: float = 0.0
    nominal_amplitude: float = math.pi / 5
    eta: float = 3 * math.pi
    omega: float = math.pi / 2
    n_joints: int = 16
    delta_s: float | None = None

    def __post_init__(self):
        if self.delta_s is None:
            object.__setattr__(self, "delta_s", 1.0 / self.n_joints)
        if self.n_joints < 2:
            raise ValueError(f"n_joints must be >= 2, got {self.n_joints}")
        if not self.delta_s > 0:
            raise ValueError(f"delta_s must be positive, got {self.delta_s}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.nominal_amplitude >= 0:
            raise ValueError(
                f"nominal_amplitude must be non-negative, got {self.nominal_amplitude}"
            )

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega

    @property
    def wavelength(self) -> float:
        """Spatial wavelength in normalized backbone units."""
        return 2 * math.pi / self.eta

    @property
    def phase_velocity(self) -> float:
        """Tailward speed of the body wave in backbone units per second."""
        return self.omega / self.eta

    def positions(self, joints=None) -> np.ndarray:
        idx = np.arange(self.n_joints) if joints is None else np.asarray(joints)
        return idx * self.delta_s

    def phase(self, joint_index, time: float):
        return self.eta * (np.asarray(joint_index) * self.delta_s) - self.omega * time


def _check_index(joint_index: int, params: GaitParams) -> None:
    if not 0 <= joint_index < params.n_joints:
        raise IndexError(f"joint index {joint_index} outside [0, {params.n_joints})")


def serpenoid_angle(joint_index: int, time: float, amplitude: float, params: GaitParams) -> float:
    """Joint angle ``kappa + A sin(eta s_i - omega t)``."""
    _check_index(joint_index, params)
    if not math.isfinite(amplitude):
        raise FloatingPointError(f"non-finite amplitude {amplitude!r}")
    s_i = joint_index * params.delta_s
    return params.kappa + amplitude * math.sin(params.eta * s_i - params.omega * time)


def shape_jacobian_entry(joint_index: int, time: float, params: GaitParams) -> float:
    """Sensitivity of joint ``i``'s angle to the amplitude, ``dh_i/dA``."""
    _check_index(joint_index, params)
    s_i = joint_index * params.delta_s
    return math.sin(params.eta * s_i - params.omega * time)


def shape_function(amplitudes, time: float, params: GaitParams, joints=None) -> np.ndarray:
    """Vectorized shape function over ``joints`` (all joints by default).

    ``amplitudes`` is either a scalar or one amplitude per listed joint.
    """
    idx = np.arange(params.n_joints) if joints is None else np.asarray(joints)
    return params.kappa + np.asarray(amplitudes, dtype=float) * np.sin(params.phase(idx, time))


def shape_jacobian(time: float, params: GaitParams, joints=None) -> np.ndarray:
    idx = np.arange(params.n_joints) if joints is None else np.asarray(joints)
    return np.sin(params.phase(idx, time))


def odd_joints(n_joints: int) -> np.ndarray:
    return np.arange(1, n_joints, 2)


def even_joints(n_joints: int) -> np.ndarray:
    return np.arange(0, n_joints, 2)


@dataclass(frozen=True)
class DualPlaneGait:
    """Two serpenoids, one per bending plane, on interleaved joints."""

    odd_plane: GaitParams = field(default_factory=GaitParams)
    even_plane: GaitParams = field(
        default_factory=lambda: GaitParams(nominal_amplitude=0.0)
    )

    def __post_init__(self):
        if self.odd_plane.n_joints != self.even_plane.n_joints:
            raise ValueError("both planes must describe the same joint chain")
        if self.odd_plane.delta_s != self.even_plane.delta_s:
            raise ValueError("both planes must share joint spacing")

    @property
    def n_joints(self) -> int:
        return self.odd_plane.n_joints

    def plane_joints(self, plane: str) -> np.ndarray:
        if plane == "odd":
            return odd_joints(self.n_joints)
        if plane == "even":
            return even_joints(self.n_joints)
        raise ValueError(f"unknown plane {plane!r}")

    def params(self, plane: str) -> GaitParams:
        return self.odd_plane if plane == "odd" else self.even_plane


def dual_plane_angles(time, amplitudes_odd, amplitudes_even, gait: DualPlaneGait, layout):
    """Full joint vector for the two-plane gait.

    ``layout`` is a single :class:`~snakedc.windows.WindowLayout` shared by both
    planes or an ``(odd_layout, even_layout)`` pair. Each joint takes the windowed
    amplitude at its own backbone position.
    """
    from snakedc.windows import blend

    odd_layout, even_layout = layout if isinstance(layout, (tuple, list)) else (layout, layout)
    theta = np.empty(gait.n_joints)
    for plane, amps, lay in (
        ("odd", amplitudes_odd, odd_layout),
        ("even", amplitudes_even, even_layout),
    ):
        params = gait.params(plane)
        joints = gait.plane_joints(plane)
        amps = np.asarray(amps, dtype=float)
        if amps.shape != (lay.n_windows,):
            raise ConfigurationError(
                f"{plane} plane: {amps.size} amplitudes for {lay.n_windows} windows"
            )
        sigma = blend(params.positions(joints), amps, lay)
        theta[joints] = shape_function(sigma, time, params, joints)
    return theta
