"""Empirical mode decomposition via envelope-mean sifting, plus Hilbert tracks.

The sifting inner loop (extrema scan, mirrored natural-spline envelopes,
fixed-iteration detail extraction) runs tens of thousands of times per
recording, so those kernels are numba-compiled; the public functions are
thin wrappers with validation and error mapping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


class MonotonicSignalError(ValueError):
    """Raised when a signal lacks the extrema needed to build envelopes."""


@dataclass(frozen=True)
class SiftConfig:
    """Decomposition parameters: IMF budget and fixed sifting iterations.

    ``fixed_sift_iters`` passes of envelope-mean removal are applied per
    IMF (fixed-count stopping); ``boundary_policy`` selects how envelopes
    are extended past the signal ends (only extremum mirroring is
    implemented).
    """

    max_modes: int = 3
    fixed_sift_iters: int = 10
    boundary_policy: str = "mirror_extrema"

    def __post_init__(self):
        if self.max_modes < 1:
            raise ValueError("max_modes must be >= 1")
        if self.fixed_sift_iters < 1:
            raise ValueError("fixed_sift_iters must be >= 1")
        if self.boundary_policy != "mirror_extrema":
            raise ValueError(f"unknown boundary_policy {self.boundary_policy!r}")


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Ordered IMFs plus the final residual of one signal."""

    imfs: tuple[np.ndarray, ...]
    residual: np.ndarray
    source_len: int

    def __post_init__(self):
        for part in (*self.imfs, self.residual):
            if part.shape != (self.source_len,):
                raise ValueError("every component must have the source length")

    def reconstruct(self) -> np.ndarray:
        out = self.residual.copy()
        for imf in self.imfs:
            out += imf
        return out


@dataclass(frozen=True, eq=False)
class HilbertTrack:
    """Instantaneous amplitude and frequency (Hz) of one oscillatory mode."""

    amplitude: np.ndarray
    inst_freq: np.ndarray
    fs: float

    def __post_init__(self):
        if self.amplitude.shape != self.inst_freq.shape:
            raise ValueError("amplitude and inst_freq must have equal length")


@dataclass(frozen=True)
class ImfCheck:
    """Diagnostics from the oscillatory-mode criteria.

    ``ok`` requires the extrema and zero-crossing counts to differ by at
    most one and the interior envelope-mean magnitude to stay below 5% of
    the signal's amplitude range.
    """

    ok: bool
    n_extrema: int
    n_zero_crossings: int
    envelope_ratio: float

    def __bool__(self) -> bool:
        return self.ok


@njit(cache=True)
def _extrema_kernel(x):
    """Strict interior extrema; plateaus count once at their midpoint."""
    n = x.size
    max_idx = np.empty(n, np.int64)
    min_idx = np.empty(n, np.int64)
    nmax = 0
    nmin = 0
    last_nz = -1
    last_slope = 0
    for j in range(n - 1):
        d = x[j + 1] - x[j]
        if d == 0.0:
            continue
        s = 1 if d > 0.0 else -1
        if last_slope != 0 and s != last_slope:
            mid = (last_nz + 1 + j) // 2
            if last_slope > 0:
                max_idx[nmax] = mid
                nmax += 1
            else:
                min_idx[nmin] = mid
                nmin += 1
        last_nz = j
        last_slope = s
    return max_idx[:nmax].copy(), min_idx[:nmin].copy()


@njit(cache=True)
def _spline_envelope(idx, vals, n, out):
    """Natural cubic spline through the extrema, mirrored at both ends.

    The two extrema nearest each boundary are reflected across it, the
    standard second-derivative tridiagonal system is solved with
    zero-curvature ends, and the spline is evaluated on 0..n-1 into
    ``out``. Requires idx ascending with at least two entries.
    """
    m = idx.size
    k = m + 4
    t = np.empty(k)
    y = np.empty(k)
    t[0] = -float(idx[1])
    t[1] = -float(idx[0])
    t[k - 2] = float(2 * (n - 1) - idx[m - 1])
    t[k - 1] = float(2 * (n - 1) - idx[m - 2])
    y[0] = vals[1]
    y[1] = vals[0]
    y[k - 2] = vals[m - 1]
    y[k - 1] = vals[m - 2]
    for i in range(m):
        t[i + 2] = float(idx[i])
        y[i + 2] = vals[i]

    h = np.empty(k - 1)
    slope = np.empty(k - 1)
    for i in range(k - 1):
        h[i] = t[i + 1] - t[i]
        slope[i] = (y[i + 1] - y[i]) / h[i]

    # Thomas solve for interior second derivatives (natural ends are zero).
    nun = k - 2
    diag = np.empty(nun)
    rhs = np.empty(nun)
    for i in range(nun):
        diag[i] = 2.0 * (h[i] + h[i + 1])
        rhs[i] = 6.0 * (slope[i + 1] - slope[i])
    for i in range(1, nun):
        w = h[i] / diag[i - 1]
        diag[i] -= w * h[i]
        rhs[i] -= w * rhs[i - 1]
    second = np.zeros(k)
    second[nun] = rhs[nun - 1] / diag[nun - 1]
    for i in range(nun - 2, -1, -1):
        second[i + 1] = (rhs[i] - h[i + 1] * second[i + 2]) / diag[i]

    seg = 0
    for xi in range(n):
        xf = float(xi)
        while seg < k - 2 and xf > t[seg + 1]:
            seg += 1
        d = xf - t[seg]
        hs = h[seg]
        m0 = second[seg]
        m1 = second[seg + 1]
        c1 = slope[seg] - hs * (2.0 * m0 + m1) / 6.0
        out[xi] = y[seg] + d * (c1 + d * (m0 / 2.0 + d * (m1 - m0) / (6.0 * hs)))


@njit(cache=True)
def _envelope_mean_kernel(x):
    """(ok, mean of upper and lower envelopes); ok is False with <2+2 extrema."""
    maxima, minima = _extrema_kernel(x)
    if maxima.size < 2 or minima.size < 2:
        return False, np.empty(0)
    n = x.size
    upper = np.empty(n)
    lower = np.empty(n)
    _spline_envelope(maxima, x[maxima], n, upper)
    _spline_envelope(minima, x[minima], n, lower)
    for i in range(n):
        upper[i] = (upper[i] + lower[i]) / 2.0
    return True, upper


@njit(cache=True)
def _sift_kernel(x, iters):
    """Repeated envelope-mean removal; stops early when extrema run out.

    Returns (status, detail) with status 0 = completed all passes,
    1 = stopped early after >=1 pass, 2 = first pass impossible.
    """
    detail = x.copy()
    for it in range(iters):
        ok, mean = _envelope_mean_kernel(detail)
        if not ok:
            return (2 if it == 0 else 1), detail
        detail -= mean
    return 0, detail


@njit(cache=True)
def _emd_kernel(x, max_modes, iters):
    """Extract IMFs from the running residual until monotonic or budget hit."""
    n = x.size
    imfs = np.empty((max_modes, n))
    residual = x.copy()
    count = 0
    while count < max_modes:
        maxima, minima = _extrema_kernel(residual)
        if maxima.size < 2 or minima.size < 2:
            break
        status, imf = _sift_kernel(residual, iters)
        if status == 2:
            break
        imfs[count] = imf
        residual -= imf
        count += 1
    return imfs[:count].copy(), residual, count


def _as_f64(signal) -> np.ndarray:
    return np.ascontiguousarray(signal, dtype=np.float64)


def find_extrema(signal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of strict interior maxima and minima.

    Plateaus of equal samples count once, at the plateau's midpoint.
    """
    x = _as_f64(signal)
    if x.size < 3:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return _extrema_kernel(x)


def envelope_mean(signal: np.ndarray) -> np.ndarray:
    """Mean of the upper and lower extremum envelopes.

    Each envelope is a natural cubic spline through the respective extrema
    after mirroring the two nearest extrema across each signal boundary.
    Raises :class:`MonotonicSignalError` when fewer than two maxima or two
    minima exist.
    """
    x = _as_f64(signal)
    ok, mean = _envelope_mean_kernel(x)
    if not ok:
        maxima, minima = find_extrema(x)
        raise MonotonicSignalError(
            f"need >=2 maxima and >=2 minima, found {maxima.size} and {minima.size}"
        )
    return mean


def sift_one_imf(signal: np.ndarray, cfg: SiftConfig) -> np.ndarray:
    """Extract one mode by repeated envelope-mean removal.

    Applies ``d <- d - envelope_mean(d)`` exactly ``cfg.fixed_sift_iters``
    times. If a later pass runs out of extrema the sift stops early with
    the current detail; a first-pass failure raises
    :class:`MonotonicSignalError`.
    """
    x = _as_f64(signal)
    status, detail = _sift_kernel(x, cfg.fixed_sift_iters)
    if status == 2:
        raise MonotonicSignalError("signal has too few extrema to sift")
    return detail


def emd(signal: np.ndarray, cfg: SiftConfig = SiftConfig()) -> Decomposition:
    """Decompose a signal into IMFs plus a residual.

    Modes are extracted from the running residual until it turns
    monotonic (fewer than two maxima or two minima) or ``cfg.max_modes``
    IMFs exist. A monotone input yields zero IMFs and residual == input.
    The components sum back to the input exactly up to rounding because
    each step subtracts what it emits.
    """
    x = _as_f64(signal)
    if x.size < 4:
        raise ValueError("signal too short to decompose")
    imf_matrix, residual, count = _emd_kernel(x, cfg.max_modes, cfg.fixed_sift_iters)
    imfs = tuple(imf_matrix[i] for i in range(count))
    return Decomposition(imfs, residual, x.size)


def count_zero_crossings(signal: np.ndarray) -> int:
    x = np.asarray(signal, dtype=np.float64)
    return int(np.count_nonzero(x[:-1] * x[1:] < 0))


def is_imf(signal: np.ndarray, envelope_tol: float = 0.05, edge_trim: float = 0.1) -> ImfCheck:
    """Check the two oscillatory-mode conditions with a 5% envelope slack.

    A perfectly zero envelope mean is unattainable under fixed-count
    sifting, so the mean-envelope magnitude is compared against
    ``envelope_tol`` times the amplitude range, over the interior after
    trimming ``edge_trim`` of the samples at each end.
    """
    x = _as_f64(signal)
    if x.size < 4:
        raise ValueError("signal too short to assess")
    maxima, minima = find_extrema(x)
    n_extrema = int(maxima.size + minima.size)
    n_zc = count_zero_crossings(x)
    counts_ok = abs(n_extrema - n_zc) <= 1

    amp_range = float(x.max() - x.min())
    ok, mean_env = _envelope_mean_kernel(x)
    if not ok:
        return ImfCheck(False, n_extrema, n_zc, float("inf"))
    trim = int(x.size * edge_trim)
    interior = mean_env[trim : x.size - trim] if trim else mean_env
    if amp_range == 0.0:
        ratio = float("inf")
    else:
        ratio = float(np.mean(np.abs(interior)) / amp_range)
    return ImfCheck(counts_ok and ratio <= envelope_tol, n_extrema, n_zc, ratio)


def analytic_signal(signal: np.ndarray) -> np.ndarray:
    """Frequency-domain analytic signal: negative bins zeroed, positive doubled."""
    x = np.asarray(signal, dtype=np.float64)
    n = x.size
    spectrum = np.fft.fft(x)
    gain = np.zeros(n)
    gain[0] = 1.0
    if n % 2 == 0:
        gain[n // 2] = 1.0
        gain[1 : n // 2] = 2.0
    else:
        gain[1 : (n + 1) // 2] = 2.0
    return np.fft.ifft(spectrum * gain)


def hilbert_track(imf: np.ndarray, fs: float) -> HilbertTrack:
    """Instantaneous amplitude and frequency of one mode.

    Frequency is the unwrapped-phase derivative (central differences
    inside, one-sided at the ends) scaled to Hz.
    """
    x = np.asarray(imf, dtype=np.float64)
    if x.size < 8:
        raise ValueError("need at least 8 samples for a stable analytic signal")
    z = analytic_signal(x)
    amplitude = np.abs(z)
    phase = np.unwrap(np.angle(z))
    inst_freq = np.gradient(phase) * (fs / (2.0 * np.pi))
    return HilbertTrack(amplitude, inst_freq, fs)
