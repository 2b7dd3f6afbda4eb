"""Activation windows: sigmoid-weighted backbone segments sharing one amplitude.

A window's weight is the product of a rising sigmoid at its left edge and a
falling sigmoid at its right edge, so it is ~1 inside ``[s_l, s_r]`` and ~0
outside. The head-most and tail-most windows of a layout are open-ended
(``s_l = -inf`` / ``s_r = +inf``) so that the layout covers the whole backbone
while windows travel.

A travelling layout holds ``windows_per_body + 1`` windows: one is always
entering at the head while another leaves at the tail. When the tail window's
left edge passes ``s = 1`` it is discarded and a fresh window is born at the head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from snakedc.errors import ConfigurationError

LN99 = math.log(99.0)


def _sigmoid(x):
    # tanh form stays finite for x = +/-inf
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class WindowLayout:
    boundaries: np.ndarray  # (n_windows, 2) rows of [s_l, s_r], head to tail
    slope: float = 50.0
    phase_offset: float = 0.0
    width: float = 1.0 / 3.0
    travelling: bool = True

    def __post_init__(self):
        b = np.array(self.boundaries, dtype=float)
        if b.ndim != 2 or b.shape[1] != 2 or b.shape[0] < 1:
            raise ConfigurationError(f"boundaries must be (W, 2), got shape {b.shape}")
        if not np.all(b[:, 0] < b[:, 1]):
            raise ConfigurationError("every window needs s_l < s_r")
        if np.any(np.diff(b[:, 0]) <= 0):
            raise ConfigurationError("windows must be ordered head to tail")
        if not self.slope > 0:
            raise ConfigurationError(f"slope must be positive, got {self.slope}")
        b.setflags(write=False)
        object.__setattr__(self, "boundaries", b)

    @classmethod
    def tiled(cls, windows_per_body: int = 3, slope: float = 50.0, travelling: bool = True):
        """Equal-width windows tiling the backbone.

        A static layout has ``windows_per_body`` windows; a travelling one carries
        an extra window just ahead of the head.
        """
        if windows_per_body < 1:
            raise ConfigurationError("need at least one window")
        w = 1.0 / windows_per_body
        if travelling:
            edges = np.arange(windows_per_body) * w
        else:
            edges = np.arange(1, windows_per_body) * w
        return cls(_edges_to_boundaries(edges), slope=slope, width=w, travelling=travelling)

    @property
    def n_windows(self) -> int:
        return self.boundaries.shape[0]

    @property
    def edges(self) -> np.ndarray:
        """Interior boundaries shared by neighbouring windows."""
        return self.boundaries[1:, 0]

    @property
    def transition_width(self) -> float:
        """Distance over which a sigmoid edge goes from 0.5 to 0.99."""
        return LN99 / self.slope


def _edges_to_boundaries(edges) -> np.ndarray:
    edges = np.asarray(edges, dtype=float)
    left = np.concatenate([[-np.inf], edges])
    right = np.concatenate([edges, [np.inf]])
    return np.stack([left, right], axis=1)


@dataclass
class WindowedAmplitudes:
    per_window: np.ndarray
    plane: str = "odd"

    def __post_init__(self):
        self.per_window = np.asarray(self.per_window, dtype=float)
        if not np.all(np.isfinite(self.per_window)):
            raise ConfigurationError("window amplitudes must be finite")


def window_weight(s, window_index: int, layout: WindowLayout):
    s_l, s_r = layout.boundaries[window_index]
    m = layout.slope
    return _sigmoid(m * (np.asarray(s, dtype=float) - s_l)) * _sigmoid(m * (s_r - np.asarray(s, dtype=float)))


def weight_matrix(s, layout: WindowLayout) -> np.ndarray:
    """Weights of every window at every position, shape ``(len(s), n_windows)``."""
    s = np.asarray(s, dtype=float)[:, None]
    b = layout.boundaries
    m = layout.slope
    return _sigmoid(m * (s - b[:, 0])) * _sigmoid(m * (b[:, 1] - s))


def _amplitude_array(amplitudes) -> np.ndarray:
    if isinstance(amplitudes, WindowedAmplitudes):
        return amplitudes.per_window
    return np.asarray(amplitudes, dtype=float)


def blend(s, amplitudes, layout: WindowLayout):
    """Effective amplitude at backbone position(s) ``s``."""
    amps = _amplitude_array(amplitudes)
    if amps.shape != (layout.n_windows,):
        raise ConfigurationError(
            f"{amps.size} window amplitudes for a layout of {layout.n_windows} windows"
        )
    scalar = np.ndim(s) == 0
    out = weight_matrix(np.atleast_1d(s), layout) @ amps
    return float(out[0]) if scalar else out


def advance_windows(layout: WindowLayout, dt: float, gait) -> WindowLayout:
    """Move a travelling layout tailward with the body wave for ``dt`` seconds."""
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    if not layout.travelling or dt == 0:
        return layout
    shift = dt * gait.omega / gait.eta
    # a rigid shift keeps the layout valid, so skip re-validation (hot path)
    moved = object.__new__(WindowLayout)
    for name in ("slope", "width", "travelling"):
        object.__setattr__(moved, name, getattr(layout, name))
    b = layout.boundaries + shift
    b.setflags(write=False)
    object.__setattr__(moved, "boundaries", b)
    object.__setattr__(moved, "phase_offset", layout.phase_offset + shift)
    return moved


def needs_cycle(layout: WindowLayout) -> bool:
    return layout.travelling and layout.n_windows > 1 and layout.boundaries[-1, 0] >= 1.0


def _shift_array(arr: np.ndarray, fill) -> np.ndarray:
    out = np.empty_like(arr)
    out[1:] = arr[:-1]
    out[0] = fill
    return out


def cycle_windows(layout: WindowLayout, amplitudes, trackers=None, nominal: float = 0.0):
    """Discard windows that passed off the tail and add fresh ones at the head.

    ``amplitudes`` may be a plain array, :class:`WindowedAmplitudes` or any
    per-window container with a ``shift_in()`` method (e.g. a shape state).
    ``trackers`` is an optional container with ``shift_in()``. The newborn
    window takes the ``nominal`` amplitude; containers reset their own fields.
    Returns ``(layout, amplitudes, trackers)``.
    """
    while needs_cycle(layout):
        edges = layout.edges
        new_edges = np.concatenate([[edges[0] - layout.width], edges[:-1]])
        layout = replace(layout, boundaries=_edges_to_boundaries(new_edges))
        if hasattr(amplitudes, "shift_in"):
            amplitudes = amplitudes.shift_in()
        elif isinstance(amplitudes, WindowedAmplitudes):
            amplitudes = WindowedAmplitudes(
                _shift_array(amplitudes.per_window, nominal), amplitudes.plane
            )
        else:
            amplitudes = _shift_array(np.asarray(amplitudes, dtype=float), nominal)
        if trackers is not None:
            trackers = trackers.shift_in()
    return layout, amplitudes, trackers
