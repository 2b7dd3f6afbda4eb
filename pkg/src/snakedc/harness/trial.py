"""Single seeded trial: build the world, calibrate, run the closed loop, score it."""

from __future__ import annotations

import functools
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from snakedc.errors import ConfigurationError, SimulationError
from snakedc.gait import odd_joints
from snakedc.harness.config import ExperimentConfig
from snakedc.loop import ClosedLoop, Variant, planar_loop
from snakedc.reactive import calibrate_friction
from snakedc.simworld import WorldParams, WorldState, geometric_center, spawn_peg_array

log = logging.getLogger(__name__)

# stream tags for the seed tree; new streams get new tags so old ones never move
_PEGS, _POSE, _TRIAL = 0, 1, 2


def seed_sequence(master_seed: int, *path: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), *map(int, path)])


def derived_seed(master_seed: int, *path: int) -> int:
    return int(seed_sequence(master_seed, *path).generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float


@dataclass
class TrialRecord:
    variant: str
    pose_index: int
    trial_index: int
    seed: int
    pose: Pose
    duration: float  # s, the scoring window
    simulated: float  # s actually simulated (shorter when aborted)
    displacement: float  # body lengths along the initial heading
    total_displacement: float  # body lengths, straight-line
    velocity: float  # body lengths per minute
    events: list = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""
    max_penetration: float = 0.0

    @property
    def name(self) -> str:
        return trial_name(self.variant, self.pose_index, self.trial_index)

    def count(self, to_mode: str) -> int:
        return sum(1 for e in self.events if e["to"] == to_mode)

    def to_dict(self) -> dict:
        return asdict(self)


def trial_name(variant: str, pose_index: int, trial_index: int) -> str:
    return f"{variant}_p{pose_index}_t{trial_index}"


@functools.lru_cache(maxsize=4)
def _peg_array(master_seed: int, density: float, min_spacing: float, extent: float, radius: float):
    pegs = spawn_peg_array(
        derived_seed(master_seed, _PEGS),
        density,
        min_spacing,
        extent=(extent, extent),
        peg_radius=radius,
        origin=(-extent / 2, -extent / 2),
    )
    pegs.setflags(write=False)
    return pegs


def peg_array(config: ExperimentConfig) -> np.ndarray:
    p = config.pegs
    if p.density <= 0:
        return np.zeros((0, 2))
    return _peg_array(config.master_seed, p.density, p.min_spacing, p.extent, config.world.peg_radius)


def initial_pose(config: ExperimentConfig, pose_index: int, trial_index: int) -> Pose:
    """Seeded pose for ``pose_index`` plus a small per-trial perturbation."""
    rng = np.random.default_rng(seed_sequence(config.master_seed, _POSE, pose_index))
    half = config.pegs.pose_region / 2
    x, y = rng.uniform(-half, half, size=2)
    heading = rng.uniform(0.0, 2 * math.pi)
    jitter = np.random.default_rng(seed_sequence(config.master_seed, _TRIAL, pose_index, trial_index))
    dx, dy = jitter.normal(0.0, config.trial.position_jitter, size=2)
    dh = jitter.normal(0.0, config.trial.heading_jitter)
    return Pose(float(x + dx), float(y + dy), float(heading + dh))


def clear_pegs(world: WorldState, pegs: np.ndarray, clearance: float) -> np.ndarray:
    """Drop pegs closer than ``clearance`` to the body surface."""
    if pegs.shape[0] == 0:
        return pegs
    nodes = world.nodes()
    a, b = nodes[:-1], nodes[1:]
    seg = b - a
    rel = pegs[:, None, :] - a[None]
    lam = np.clip(np.sum(rel * seg[None], axis=2) / np.sum(seg * seg, axis=1)[None], 0.0, 1.0)
    closest = a[None] + lam[..., None] * seg[None]
    dist = np.linalg.norm(pegs[:, None, :] - closest, axis=2).min(axis=1)
    keep = dist >= world.params.peg_radius + world.params.link_radius + clearance
    return np.ascontiguousarray(pegs[keep])


def _initial_world(config: ExperimentConfig, loop_cmd: np.ndarray, pose: Pose | None, pegs) -> WorldState:
    if pose is None:
        return WorldState.from_joint_angles(config.world, loop_cmd)
    world = WorldState.from_joint_angles(config.world, loop_cmd, center=(pose.x, pose.y), heading=pose.heading)
    world.pegs = clear_pegs(world, pegs, config.pegs.clearance)
    return world


def build_loop(config: ExperimentConfig, variant, pose: Pose | None = None, pegs=None,
               friction_offset=None, world_params: WorldParams | None = None) -> ClosedLoop:
    """Closed loop at the nominal gait pose; ``pose=None`` puts it at the origin without pegs."""
    if world_params is not None:
        config = config.replace(world=world_params)
    placeholder = WorldState.from_joint_angles(config.world, np.zeros(config.world.n_joints))
    loop = planar_loop(
        placeholder,
        config.gait_params(),
        config.windows.layout(),
        config.admittance.gains(),
        variant,
        dt=config.control_dt,
        thresholds=config.reactive.thresholds(),
        friction_offset=friction_offset,
    )
    loop.world = _initial_world(config, loop._cmd, pose, pegs if pegs is not None else np.zeros((0, 2)))
    return loop


@functools.lru_cache(maxsize=16)
def _calibration(gait, windows, admittance, reactive, world, dt, n_cycles, transient, n_joints):
    config = ExperimentConfig(
        gait=gait, windows=windows, admittance=admittance, reactive=reactive, world=world, control_dt=dt
    )
    loop = build_loop(config, Variant.NC)
    offsets = calibrate_friction(loop, n_cycles=n_cycles, transient_cycles=transient)
    offsets.setflags(write=False)
    return offsets


def friction_offsets(config: ExperimentConfig) -> np.ndarray:
    """Calibrated per-slot offsets for this configuration (cached), or zeros when disabled."""
    n = config.windows.layout().n_windows
    if not config.calibration.enabled:
        return np.zeros(n)
    c = config.calibration
    return _calibration(
        config.gait, config.windows, config.admittance, config.reactive, config.world,
        config.control_dt, c.n_cycles, c.transient_cycles, config.world.n_joints,
    ).copy()


def absition_drift(config: ExperimentConfig, offsets=None, settle_cycles: int = 2, cycles: int = 1) -> np.ndarray:
    """Per-window absition change per gait cycle on open ground under nominal compliance.

    Windows are matched by id, so with a travelling layout only windows alive
    for the whole measurement contribute.
    """
    loop = build_loop(config, Variant.NC, friction_offset=offsets)
    ctrl = loop.planes["odd"]
    period = ctrl.gait.period
    loop.run(settle_cycles * period)
    before = dict(zip(ctrl.window_ids.tolist(), ctrl.tracker.absition.tolist()))
    loop.run(cycles * period)
    after = dict(zip(ctrl.window_ids.tolist(), ctrl.tracker.absition.tolist()))
    common = sorted(set(before) & set(after))
    return np.array([abs(after[i] - before[i]) / cycles for i in common])


class Telemetry:
    """Decimated JSONL snapshots of a running loop."""

    def __init__(self, path, stride: int):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.stride = max(1, int(stride))
        self._fh = open(self.path, "w")
        self._count = 0

    def __call__(self, loop: ClosedLoop, readings) -> None:
        self._count += 1
        if self._count % self.stride:
            return
        self._fh.write(json.dumps(snapshot(loop)) + "\n")

    def event(self, record: dict) -> None:
        self._fh.write(json.dumps({"event": record}) + "\n")

    def close(self) -> None:
        self._fh.close()


def snapshot(loop: ClosedLoop) -> dict:
    world = loop.world
    out = {
        "time": round(loop.time, 9),
        "center": geometric_center(world).tolist(),
        "link_centers": world.link_centers().tolist(),
        "link_angles": world.phi.tolist(),
        "torques": loop.torques.tolist(),
    }
    for name, plane in loop.planes.items():
        out[name] = {
            "window_ids": plane.window_ids.tolist(),
            "boundaries": np.nan_to_num(plane.layout.boundaries, posinf=1e9, neginf=-1e9).tolist(),
            "mode": plane.state.mode.tolist(),
            "amplitude": plane.state.amp_desired.tolist(),
            "absition": plane.tracker.absition.tolist(),
            "running_mean": plane.tracker.running_mean.tolist(),
        }
    return out


def run_trial(config: ExperimentConfig, pose_index: int, trial_index: int, variant=None,
              telemetry_dir=None) -> TrialRecord:
    if not 0 <= pose_index < config.n_poses:
        raise ConfigurationError(f"pose index {pose_index} outside [0, {config.n_poses})")
    if not 0 <= trial_index < config.trials_per_pose:
        raise ConfigurationError(f"trial index {trial_index} outside [0, {config.trials_per_pose})")
    variant = Variant(variant or config.variant)
    pose = initial_pose(config, pose_index, trial_index)
    loop = build_loop(config, variant, pose, peg_array(config), friction_offsets(config))

    start = geometric_center(loop.world).copy()
    direction = np.array([math.cos(pose.heading), math.sin(pose.heading)])
    n_steps = int(round(config.trial_duration / config.control_dt))
    checkpoint_every = max(1, int(round(1.0 / config.control_dt)))
    last_center = start.copy()
    telemetry = None
    if telemetry_dir is not None and config.output.telemetry:
        telemetry = Telemetry(Path(telemetry_dir) / f"{trial_name(variant.value, pose_index, trial_index)}.jsonl",
                              config.output.telemetry_stride)
    aborted, reason = False, ""
    peak_penetration = 0.0
    try:
        for k in range(n_steps):
            readings = loop.step()
            peak_penetration = max(peak_penetration, loop.world.max_penetration)
            if telemetry is not None:
                telemetry(loop, readings)
            if (k + 1) % checkpoint_every == 0:
                last_center = geometric_center(loop.world)
        last_center = geometric_center(loop.world)
    except SimulationError as exc:
        # score the last finite checkpoint, as a run that got stuck or failed
        aborted, reason = True, str(exc)
        log.warning("trial %s aborted: %s", trial_name(variant.value, pose_index, trial_index), exc)
    events = [e.as_dict() for e in loop.events]
    if telemetry is not None:
        for e in events:
            telemetry.event(e)
        telemetry.close()

    body = config.world.body_length
    delta = last_center - start
    displacement = float(delta @ direction) / body
    minutes = config.trial_duration / 60.0
    return TrialRecord(
        variant=variant.value,
        pose_index=pose_index,
        trial_index=trial_index,
        seed=derived_seed(config.master_seed, _TRIAL, pose_index, trial_index),
        pose=pose,
        duration=config.trial_duration,
        simulated=round(loop.time, 9),
        displacement=displacement,
        total_displacement=float(np.hypot(*delta)) / body,
        velocity=displacement / minutes,
        events=events,
        aborted=aborted,
        abort_reason=reason,
        max_penetration=float(peak_penetration),
    )
