"""Trial representation, muscle-onset detection and overlapping windowing."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class MovementClass(IntEnum):
    """The eight hand movements; the first six are the basic grasps."""

    SPHERICAL = 1
    TIP = 2
    PALMAR = 3
    LATERAL = 4
    CYLINDRICAL = 5
    HOOK = 6
    OPEN = 7
    CLOSE = 8

    @property
    def code(self) -> str:
        return _CLASS_CODES[self]


_CLASS_CODES = {
    MovementClass.SPHERICAL: "S",
    MovementClass.TIP: "T",
    MovementClass.PALMAR: "P",
    MovementClass.LATERAL: "L",
    MovementClass.CYLINDRICAL: "C",
    MovementClass.HOOK: "H",
    MovementClass.OPEN: "O",
    MovementClass.CLOSE: "X",
}

SIX_GRASPS = (
    MovementClass.SPHERICAL,
    MovementClass.TIP,
    MovementClass.PALMAR,
    MovementClass.LATERAL,
    MovementClass.CYLINDRICAL,
    MovementClass.HOOK,
)

#: Column order used by the result tables: S, H, T, L, P, C.
TABLE_CLASS_ORDER = (
    MovementClass.SPHERICAL,
    MovementClass.HOOK,
    MovementClass.TIP,
    MovementClass.LATERAL,
    MovementClass.PALMAR,
    MovementClass.CYLINDRICAL,
)


def _as_readonly_f64(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.flags.writeable:
        # Copy writeable inputs so the stored array cannot change under us;
        # read-only arrays (e.g. window slices of a trial) are shared as-is.
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """A single uniformly sampled channel.

    ``samples`` is stored as a read-only float64 array; ``fs`` is the
    sampling rate in Hz.
    """

    samples: np.ndarray
    fs: float

    def __post_init__(self):
        arr = _as_readonly_f64(self.samples)
        object.__setattr__(self, "samples", arr)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("samples must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must all be finite")
        if not self.fs > 0:
            raise ValueError(f"fs must be positive, got {self.fs}")

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True, eq=False)
class Trial:
    """One labeled multi-channel recording; the unit of CV splitting."""

    channels: tuple[SampledSignal, ...]
    label: MovementClass | None = None
    subject_id: str = ""
    trial_index: int = 0

    def __post_init__(self):
        channels = tuple(self.channels)
        object.__setattr__(self, "channels", channels)
        if not channels:
            raise ValueError("trial needs at least one channel")
        n = len(channels[0])
        fs = channels[0].fs
        for ch in channels[1:]:
            if len(ch) != n or ch.fs != fs:
                raise ValueError("all channels must share length and sampling rate")

    @property
    def n_samples(self) -> int:
        return len(self.channels[0])

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def fs(self) -> float:
        return self.channels[0].fs

    @property
    def key(self) -> tuple:
        """Identity used for cross-validation bookkeeping."""
        return (self.subject_id, None if self.label is None else int(self.label), self.trial_index)


@dataclass(frozen=True)
class WindowingConfig:
    """Onset detection and overlapping-window segmentation parameters.

    Defaults are the acquisition-script constants: a 20-sample (40 ms at
    500 Hz) IEMG window with threshold 10, 150-sample analysis windows
    advanced by 15 samples, and 500 samples trimmed from the signal tail.
    """

    window_len: int = 150
    step: int = 15
    tail_trim: int = 500
    onset_window: int = 20
    onset_threshold: float = 10.0

    def __post_init__(self):
        if self.window_len <= 0:
            raise ValueError("window_len must be positive")
        if not 0 < self.step <= self.window_len:
            raise ValueError("step must satisfy 0 < step <= window_len")
        if self.tail_trim < 0 or self.onset_window < 0:
            raise ValueError("tail_trim and onset_window must be nonnegative")


def iemg_profile(signal: SampledSignal, onset_window: int) -> np.ndarray:
    """Sliding sum of absolute sample values.

    Element ``i`` is the sum of ``|samples[i : i + onset_window]|``; the
    result has ``len(signal) - onset_window + 1`` elements.
    """
    n = len(signal)
    if onset_window < 1 or onset_window > n:
        raise ValueError(f"onset_window {onset_window} invalid for signal of length {n}")
    windows = np.lib.stride_tricks.sliding_window_view(np.abs(signal.samples), onset_window)
    return windows.sum(axis=1)


def detect_onset(trial: Trial, cfg: WindowingConfig) -> int:
    """First sample index where any channel's IEMG exceeds the threshold.

    Returns the minimum crossing index over channels, or the full signal
    length when no channel ever crosses.
    """
    best = trial.n_samples
    for ch in trial.channels:
        profile = iemg_profile(ch, cfg.onset_window)
        above = np.flatnonzero(profile > cfg.onset_threshold)
        if above.size:
            best = min(best, int(above[0]))
    return best


def window_starts(n_samples: int, onset: int, cfg: WindowingConfig) -> list[int]:
    """Start indices of all full windows in ``[onset, n_samples - tail_trim)``."""
    bound = n_samples - cfg.tail_trim
    out = []
    start = onset
    while start + cfg.window_len <= bound:
        out.append(start)
        start += cfg.step
    return out


def segment_windows(signal: SampledSignal, onset: int, cfg: WindowingConfig) -> list[SampledSignal]:
    """Slice a channel into overlapping analysis windows.

    Windows start at ``onset`` and advance by ``cfg.step`` while a full
    ``cfg.window_len`` fits inside the retained region. Returns an empty
    list when no full window fits. Slices share the parent's buffer.
    """
    return [
        SampledSignal(signal.samples[s : s + cfg.window_len], signal.fs)
        for s in window_starts(len(signal), onset, cfg)
    ]
