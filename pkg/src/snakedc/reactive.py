"""Obstruction inference and directional compliance.

Per activation window we track the shape absition (time integral of the desired
amplitude's deviation from its reference, minus a calibrated friction offset).
When the absition leaves the band ``[thresh_lower, thresh_upper]`` the window
switches from nominal compliance (NC) to positive (PDC) or negative (NDC)
directional compliance, and it returns to NC once the absition comes back to
zero. The compliance modes act through :func:`apply_filter` on the amplitude
rate.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from snakedc.errors import CalibrationError

log = logging.getLogger(__name__)


class ComplianceMode(enum.IntEnum):
    NC = 0
    PDC = 1
    NDC = 2


NC, PDC, NDC = ComplianceMode.NC, ComplianceMode.PDC, ComplianceMode.NDC
# plain ints for the per-step array comparisons (enum lookups are slow)
_NC, _PDC, _NDC = int(NC), int(PDC), int(NDC)


def apply_filter(amp_vel, mode):
    """Directional-compliance filter on the amplitude rate.

    NC passes everything, PDC zeroes negative rates, NDC zeroes positive rates.
    Works elementwise on arrays; scalars in give a float back.
    """
    v = np.asarray(amp_vel, dtype=float)
    m = np.asarray(mode)
    if m.ndim and not m.any():
        return v.copy()
    blocked = ((m == _PDC) & (v < 0.0)) | ((m == _NDC) & (v > 0.0))
    out = np.where(blocked, 0.0, v)
    if out.ndim == 0:
        return float(out)
    return out


def entry_mode(absition, thresh_lower: float, thresh_upper: float):
    """Mode selected by the threshold band alone (boundaries stay NC)."""
    a = np.asarray(absition, dtype=float)
    out = np.where(a < thresh_lower, _PDC, np.where(a > thresh_upper, _NDC, _NC)).astype(np.int8)
    return int(out) if out.ndim == 0 else out


def reactive_filter(amp_vel, absition, thresh_lower: float, thresh_upper: float):
    """Memoryless combined filter: band-selected mode, then :func:`apply_filter`."""
    return apply_filter(amp_vel, entry_mode(absition, thresh_lower, thresh_upper))


class ReferenceStrategy(str, enum.Enum):
    # on DC entry the absition integrates against A0 + threshold / window_duration
    REMAP = "remap"
    # the absition keeps integrating against A0 throughout
    NOMINAL = "nominal"


@dataclass
class AbsitionTracker:
    """Per-window absition state for one bending plane.

    All per-window fields are arrays over the plane's windows, head first.
    ``friction_offset`` belongs to window *slots* (backbone regions) and is not
    shifted when windows cycle.
    """

    absition: np.ndarray
    samples: np.ndarray  # (n_windows, k) ring buffer of recent desired amplitudes
    running_mean: np.ndarray
    mean_deviation: np.ndarray
    friction_offset: np.ndarray
    nominal: np.ndarray
    reference_amp: np.ndarray
    thresh_upper: float
    thresh_lower: float
    eps_exit: float
    window_duration: float
    strategy: ReferenceStrategy = ReferenceStrategy.REMAP
    cursor: int = 0
    sample_sum: np.ndarray = None  # running row sums of ``samples``

    def __post_init__(self):
        if self.sample_sum is None:
            self.sample_sum = self.samples.sum(axis=1)

    @classmethod
    def create(
        cls,
        n_windows: int,
        nominal: float,
        k: int,
        dt: float,
        thresh_upper: float,
        thresh_lower: float,
        eps_exit: float,
        friction_offset=None,
        strategy=ReferenceStrategy.REMAP,
    ) -> "AbsitionTracker":
        if not thresh_lower < 0.0 < thresh_upper:
            raise ValueError(
                f"thresholds must straddle zero, got [{thresh_lower}, {thresh_upper}]"
            )
        if k < 1:
            raise ValueError("mean window k must be at least one sample")
        offset = np.zeros(n_windows) if friction_offset is None else np.array(friction_offset, dtype=float)
        if offset.shape != (n_windows,):
            raise ValueError(f"friction offset needs {n_windows} entries, got {offset.shape}")
        return cls(
            absition=np.zeros(n_windows),
            samples=np.full((n_windows, k), float(nominal)),
            running_mean=np.full(n_windows, float(nominal)),
            mean_deviation=np.zeros(n_windows),
            friction_offset=offset,
            nominal=np.full(n_windows, float(nominal)),
            reference_amp=np.full(n_windows, float(nominal)),
            thresh_upper=float(thresh_upper),
            thresh_lower=float(thresh_lower),
            eps_exit=float(eps_exit),
            window_duration=float(k * dt),
            strategy=ReferenceStrategy(strategy),
        )

    @property
    def n_windows(self) -> int:
        return self.absition.shape[0]

    @property
    def k(self) -> int:
        return self.samples.shape[1]

    def shift_in(self) -> "AbsitionTracker":
        """Discard the tail window's state and start a fresh one at the head."""
        amp0 = self.nominal[0]
        for name in ("absition", "running_mean", "mean_deviation", "nominal", "reference_amp"):
            arr = getattr(self, name)
            arr[1:] = arr[:-1].copy()
        self.absition[0] = 0.0
        self.running_mean[0] = amp0
        self.mean_deviation[0] = 0.0
        self.nominal[0] = amp0
        self.reference_amp[0] = amp0
        self.samples[1:] = self.samples[:-1].copy()
        self.samples[0] = amp0
        self.sample_sum = self.samples.sum(axis=1)
        return self


def update_mean(tracker: AbsitionTracker, amp_sample) -> AbsitionTracker:
    """Push one desired-amplitude sample per window into the trailing mean."""
    col = tracker.cursor
    new = np.asarray(amp_sample, dtype=float)
    if new.ndim == 0:
        new = np.full(tracker.sample_sum.shape, float(new))
    tracker.sample_sum = tracker.sample_sum + (new - tracker.samples[:, col])
    tracker.samples[:, col] = new
    tracker.cursor = (col + 1) % tracker.k
    if tracker.cursor == 0:
        # resum once per pass so rounding cannot accumulate
        tracker.sample_sum = tracker.samples.sum(axis=1)
    tracker.running_mean = tracker.sample_sum / tracker.k
    tracker.mean_deviation = np.abs(tracker.running_mean - tracker.nominal)
    return tracker


def update_absition(tracker: AbsitionTracker, amp_desired, dt: float) -> AbsitionTracker:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    tracker.absition = tracker.absition + (
        np.asarray(amp_desired, dtype=float) - tracker.reference_amp - tracker.friction_offset
    ) * dt
    return tracker


def transition(tracker: AbsitionTracker, mode):
    """One evaluation of the mode machine for every window.

    NC enters PDC when the absition is strictly below the lower threshold and NDC
    when strictly above the upper one. A DC window returns to NC once its
    absition has come back to zero: a sign change relative to entry or
    ``|absition| < eps_exit``. At most one change per window per call.
    Returns ``(new_mode, tracker)``.
    """
    mode = np.asarray(mode)
    a = tracker.absition
    eps = tracker.eps_exit
    if not mode.any() and tracker.thresh_lower <= a.min() and a.max() <= tracker.thresh_upper:
        # all windows in NC and inside the band: nothing can change
        return mode.copy(), tracker
    nc = mode == _NC
    to_pdc = nc & (a < tracker.thresh_lower)
    to_ndc = nc & (a > tracker.thresh_upper)
    leave = ((mode == _PDC) & (a > -eps)) | ((mode == _NDC) & (a < eps))
    if not (to_pdc.any() or to_ndc.any() or leave.any()):
        return mode.copy(), tracker

    new_mode = mode.copy()
    new_mode[to_pdc] = _PDC
    new_mode[to_ndc] = _NDC
    new_mode[leave] = _NC

    if tracker.strategy is ReferenceStrategy.REMAP:
        ref = tracker.reference_amp
        ref[to_pdc] = tracker.nominal[to_pdc] + tracker.thresh_lower / tracker.window_duration
        ref[to_ndc] = tracker.nominal[to_ndc] + tracker.thresh_upper / tracker.window_duration
        ref[leave] = tracker.nominal[leave]
    return new_mode, tracker


def calibrate_friction(loop, n_cycles: int = 4, transient_cycles: int = 1, plane: str = "odd"):
    """Estimate each window slot's steady amplitude offset on open ground.

    ``loop`` is a closed loop (see :class:`snakedc.loop.ClosedLoop`) running
    nominal compliance in a world without pegs. The offset of slot ``j`` is the
    time average of ``A_d - A0`` over ``n_cycles`` gait periods after
    ``transient_cycles`` periods of settling.
    """
    if loop.world.n_pegs:
        raise CalibrationError("friction calibration needs a world without pegs")
    ctrl = loop.planes[plane]
    steps = int(round(ctrl.gait.period / loop.dt))
    for _ in range(transient_cycles * steps):
        loop.step()
    per_cycle = np.zeros((n_cycles, ctrl.n_windows))
    for c in range(n_cycles):
        for _ in range(steps):
            loop.step()
            per_cycle[c] += ctrl.state.amp_desired - ctrl.state.amp_nominal
    per_cycle /= steps
    offsets = per_cycle.mean(axis=0)
    spread = per_cycle.std(axis=0)
    amp0 = ctrl.nominal_scale
    if np.any(spread > 0.1 * amp0):
        raise CalibrationError(
            f"friction offset did not settle: per-cycle std {spread.max():.4g} > 10% of A0"
        )
    log.debug("calibrated %s-plane offsets %s", plane, offsets)
    return offsets
