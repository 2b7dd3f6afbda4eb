"""Scripted scenarios: a peg jam, manually switched compliance, and two-plane torque injection."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from snakedc.admittance import AdmittanceGains
from snakedc.errors import ConfigurationError
from snakedc.gait import DualPlaneGait
from snakedc.harness.config import AdmittanceConfig, ExperimentConfig, WindowConfig
from snakedc.harness.trial import build_loop, friction_offsets
from snakedc.loop import PlaneController, Variant
from snakedc.reactive import ComplianceMode
from snakedc.simworld import geometric_center
from snakedc.windows import WindowLayout

SERIES = ("amplitude", "absition", "running_mean", "mode")


@dataclass
class ScenarioLog:
    """Per-step traces of every plane controller in a scenario."""

    name: str
    dt: float
    time: np.ndarray
    planes: dict  # plane -> {series name -> (T, W) array}
    events: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def series(self, plane: str, name: str) -> np.ndarray:
        return self.planes[plane][name]

    def write_jsonl(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(json.dumps({"scenario": self.name, "dt": self.dt, "meta": self.meta}) + "\n")
            for k, t in enumerate(self.time):
                rec = {"time": float(t)}
                for plane, traces in self.planes.items():
                    rec[plane] = {name: traces[name][k].tolist() for name in SERIES}
                fh.write(json.dumps(rec) + "\n")
            for e in self.events:
                fh.write(json.dumps({"event": e}) + "\n")
        return path

    @classmethod
    def read_jsonl(cls, path) -> "ScenarioLog":
        """Load a scenario log or a trial telemetry file."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"no log at {path}")
        header, rows, events = {}, [], []
        with open(path) as fh:
            for line in fh:
                rec = json.loads(line)
                if "scenario" in rec:
                    header = rec
                elif "event" in rec:
                    events.append(rec["event"])
                else:
                    rows.append(rec)
        names = [k for k, v in rows[0].items() if isinstance(v, dict) and "absition" in v] if rows else []
        planes = {
            p: {s: np.array([r[p][s] for r in rows], dtype=np.int8 if s == "mode" else float) for s in SERIES}
            for p in names
        }
        time = np.array([r["time"] for r in rows], dtype=float)
        dt = header.get("dt", float(time[1] - time[0]) if time.size > 1 else 0.0)
        return cls(header.get("scenario", path.stem), dt, time, planes, events, header.get("meta", {}))


class _Recorder:
    def __init__(self, controllers: dict):
        self.controllers = controllers
        self.time = []
        self.traces = {p: {s: [] for s in SERIES} for p in controllers}

    def __call__(self, t: float) -> None:
        self.time.append(t)
        for p, c in self.controllers.items():
            tr = self.traces[p]
            tr["amplitude"].append(c.state.amp_desired.copy())
            tr["absition"].append(c.tracker.absition.copy())
            tr["running_mean"].append(c.tracker.running_mean.copy())
            tr["mode"].append(c.state.mode.copy())

    def log(self, name: str, dt: float, events=(), meta=None) -> ScenarioLog:
        planes = {
            p: {s: np.array(v, dtype=np.int8 if s == "mode" else float) for s, v in tr.items()}
            for p, tr in self.traces.items()
        }
        return ScenarioLog(name, dt, np.array(self.time), planes, list(events), meta or {})


# the scripted scenarios use a stiffer spring than the sweep default so that
# amplitudes settle back to nominal within a few seconds
SCENARIO_ADMITTANCE = AdmittanceConfig(m_gain=1.0, b_gain=4.0, k_gain=4.0, amp_max=math.pi / 2)

# three pegs touching the nominal pose at t = 0: (backbone position in link
# lengths from the head, side of the body, gap in metres; negative presses in)
JAM_PEGS = ((11.0, -1, -0.003), (14.0, 1, -0.003), (15.5, -1, -0.003))


def _peg_beside(world, u: float, side: int, gap: float) -> np.ndarray:
    nodes = world.nodes()
    link = min(int(math.floor(u)), world.params.n_links - 1)
    frac = u - link
    d = nodes[link + 1] - nodes[link]
    d = d / np.linalg.norm(d)
    normal = np.array([-d[1], d[0]])
    reach = world.params.peg_radius + world.params.link_radius + gap
    return nodes[link] + frac * (nodes[link + 1] - nodes[link]) + side * reach * normal


def peg_jam(config: ExperimentConfig | None = None, duration: float = 20.0, pegs=JAM_PEGS,
             admittance: AdmittanceConfig = SCENARIO_ADMITTANCE) -> ScenarioLog:
    """Nominal compliance with three static windows while pegs hold the middle and tail."""
    config = (config or ExperimentConfig()).replace(
        windows=replace(config.windows if config else WindowConfig(), travelling=False),
        admittance=admittance,
    )
    loop = build_loop(config, Variant.NC, friction_offset=friction_offsets(config))
    loop.world.pegs = np.array([_peg_beside(loop.world, u, s, g) for u, s, g in pegs])
    start = geometric_center(loop.world).copy()
    rec = _Recorder(loop.planes)
    for _ in range(int(round(duration / loop.dt))):
        loop.step()
        rec(loop.time)
    meta = {
        "pegs": loop.world.pegs.tolist(),
        "displacement": float(np.linalg.norm(geometric_center(loop.world) - start)),
        "nominal_amplitude": config.gait.nominal_amplitude,
        "obstructed_windows": [1, 2],
    }
    return rec.log("fig2-jam", loop.dt, meta=meta)


# (start, end, mode) with NC outside the listed intervals
MANUAL_SCHEDULE = ((5.0, 14.0, ComplianceMode.PDC), (19.0, 32.0, ComplianceMode.NDC))


def manual_force(t: float) -> float:
    """Shape force pushing the amplitude up during the PDC interval and down during NDC."""
    if 5.5 <= t < 13.0:
        return 1.0 + 0.6 * math.sin(2 * math.pi * t / 2.5)
    if 19.5 <= t < 31.0:
        return -1.0 + 0.6 * math.sin(2 * math.pi * t / 2.5)
    return 0.0


def manual_compliance(config: ExperimentConfig | None = None, duration: float = 40.0,
                   gains: AdmittanceGains | None = None) -> ScenarioLog:
    """One whole-body window, nominal amplitude 1, compliance switched on a fixed timetable.

    Joint torques are synthesized so that their shape-force projection equals
    :func:`manual_force`; no world is simulated.
    """
    config = config or ExperimentConfig()
    gait = replace(config.gait, nominal_amplitude=1.0).params(config.world.n_joints)
    gains = gains or SCENARIO_ADMITTANCE.gains()
    layout = WindowLayout(np.array([[-np.inf, np.inf]]), travelling=False, width=1.0)
    joints = np.arange(gait.n_joints)
    ctrl = PlaneController.build("body", gait, joints, layout, gains, Variant.NC, config.control_dt,
                                 thresholds=config.reactive.thresholds())
    rec = _Recorder({"body": ctrl})
    events = []
    dt = config.control_dt
    for k in range(int(round(duration / dt))):
        t = k * dt
        mode = ComplianceMode.NC
        for start, end, m in MANUAL_SCHEDULE:
            if start <= t < end:
                mode = m
        if ctrl.state.mode[0] != mode:
            events.append({"time": t, "plane": "body", "slot": 0, "window_id": 0,
                           "from": ComplianceMode(int(ctrl.state.mode[0])).name, "to": mode.name})
            ctrl.state = replace(ctrl.state, mode=np.array([int(mode)], dtype=np.int8))
        jac = np.sin(gait.eta * ctrl.positions - gait.omega * (t + dt))
        torques = manual_force(t) * jac / np.dot(jac, jac)
        ctrl.step(t + dt, torques)
        rec(t + dt)
    meta = {"schedule": [[s, e, m.name] for s, e, m in MANUAL_SCHEDULE], "nominal_amplitude": 1.0}
    return rec.log("fig3-manual-dc", dt, events, meta)


def _bump(t: float, start: float, end: float) -> float:
    """Smooth pulse equal to one on ``[start + 1, end - 1]``."""
    if t <= start or t >= end:
        return 0.0
    rise = min(1.0, t - start, end - t)
    return math.sin(0.5 * math.pi * rise) ** 2


# (plane, start s, end s, torque amplitude N m, window slot region as backbone interval)
INJECTIONS = (
    ("even", 6.0, 18.0, 1.5, (0.0, 0.5)),
    ("odd", 14.0, 26.0, -1.5, (0.4, 1.0)),
)


def dual_plane_controllers(config: ExperimentConfig, variant=Variant.DS) -> dict:
    n = config.world.n_joints
    odd = config.gait.params(n)
    gait = DualPlaneGait(odd_plane=odd, even_plane=replace(odd, nominal_amplitude=0.0))
    layout = config.windows.layout()
    base = config.admittance.gains()
    thresholds = config.reactive.thresholds()
    scale = abs(odd.nominal_amplitude)
    return {
        "odd": PlaneController.build("odd", gait.odd_plane, gait.plane_joints("odd"), layout, base, variant,
                                     config.control_dt, thresholds=thresholds, nominal_scale=scale),
        # lateral amplitudes may swing either way about zero
        "even": PlaneController.build("even", gait.even_plane, gait.plane_joints("even"), layout,
                                      replace(base, amp_min=-base.amp_max), variant, config.control_dt,
                                      thresholds=thresholds, nominal_scale=scale),
    }


def dual_plane_injection(config: ExperimentConfig | None = None, duration: float = 30.0,
                      inject=("odd", "even"), injections=INJECTIONS) -> ScenarioLog:
    """Dual-plane reactive control driven by scripted torque traces; no world.

    ``inject`` selects which planes receive their torque traces, so runs with
    and without one plane's disturbance can be compared.
    """
    config = config or ExperimentConfig()
    ctrls = dual_plane_controllers(config)
    rec = _Recorder(ctrls)
    dt = config.control_dt
    for k in range(int(round(duration / dt))):
        t = (k + 1) * dt
        for name, ctrl in ctrls.items():
            tau = np.zeros(ctrl.joints.size)
            if name in inject:
                s = ctrl.positions
                for plane, start, end, amp, (lo, hi) in injections:
                    if plane != name:
                        continue
                    region = (s >= lo) & (s < hi)
                    phase = ctrl.gait.eta * s - ctrl.gait.omega * t
                    tau += region * amp * _bump(t, start, end) * np.sin(phase)
            ctrl.step(t, tau)
        rec(t)
    events = sorted((e for c in ctrls.values() for e in c.events), key=lambda e: (e.time, e.plane, e.slot))
    meta = {"inject": list(inject), "injections": [list(map(str, i)) for i in injections]}
    return rec.log("eq10-synthetic-3d", dt, [e.as_dict() for e in events], meta)


SCENARIOS = {
    "fig2-jam": peg_jam,
    "fig3-manual-dc": manual_compliance,
    "eq10-synthetic-3d": dual_plane_injection,
}


def run_scenario(name: str, config: ExperimentConfig | None = None, out_path=None, **options) -> ScenarioLog:
    """Run a scripted scenario by id and optionally write its JSONL log."""
    if name not in SCENARIOS:
        raise ConfigurationError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    log = SCENARIOS[name](config, **options)
    if out_path is not None:
        log.write_jsonl(out_path)
    return log
