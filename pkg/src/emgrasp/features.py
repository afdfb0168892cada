"""Time-, frequency- and instantaneous-frequency features, plus vector assembly.

The per-window feature vector holds 49 values per channel: 8 time-domain
features of the raw window, the median/std/kurtosis of the instantaneous
frequency of the first three modes (grouped by statistic), then 8 time
features for each mode and for the residual.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from .emd import HilbertTrack, SiftConfig, emd, hilbert_track
from .signals import MovementClass, SampledSignal, Trial, WindowingConfig, detect_onset, window_starts

DEFAULT_WAMP_THRESHOLD = 10.0
DEFAULT_ZC_THRESHOLD = 0.0
DEFAULT_IF_EDGE_TRIM = 0.1
N_TRACKED_IMFS = 3


@dataclass(frozen=True)
class TimeFeatures:
    """The eight time-domain statistics, in feature-vector order."""

    mean_abs: float
    variance: float
    zero_crossings: int
    slope_sign_changes: int
    waveform_length: float
    wamp: int
    kurtosis: float
    skewness: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=np.float64)


TIME_STAT_NAMES = tuple(f.name for f in fields(TimeFeatures))


@dataclass(frozen=True)
class FreqFeatures:
    fmd: float
    fmn: float
    total_power: float
    mnp: float
    psr: float


def time_features(
    signal,
    wamp_threshold: float = DEFAULT_WAMP_THRESHOLD,
    zc_threshold: float = DEFAULT_ZC_THRESHOLD,
) -> TimeFeatures:
    """Compute the eight time-domain features of one window.

    The variance is the power about zero, sum(x^2)/(N-1), with no mean
    subtraction. Zero crossings require a sign change with a jump larger
    than ``zc_threshold``; slope sign changes count strict interior
    extrema. A constant window (zero deviation) reports kurtosis and
    skewness of 0.
    """
    x = np.asarray(signal, dtype=np.float64)
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 samples")
    diffs = np.diff(x)
    abs_diffs = np.abs(diffs)

    mean_abs = float(np.mean(np.abs(x)))
    variance = float(np.dot(x, x) / (n - 1))
    zc = int(np.count_nonzero((x[:-1] * x[1:] < 0) & (abs_diffs > zc_threshold)))
    left = x[1:-1] - x[:-2]
    right = x[1:-1] - x[2:]
    ssc = int(np.count_nonzero(left * right > 0))
    wl = float(abs_diffs.sum())
    wamp = int(np.count_nonzero(abs_diffs > wamp_threshold))

    mu = x.mean()
    sd = x.std()
    if sd == 0.0:
        kurtosis = skewness = 0.0
    else:
        z = (x - mu) / sd
        kurtosis = float(np.mean(z**4))
        skewness = float(np.mean(z**3))
    return TimeFeatures(mean_abs, variance, zc, ssc, wl, wamp, kurtosis, skewness)


def rms(signal) -> float:
    x = np.asarray(signal, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty signal")
    return float(np.sqrt(np.mean(x * x)))


def ar_coeffs(signal, p: int) -> np.ndarray:
    """Autoregressive coefficients a_i of x_n = -sum(a_i x_{n-i}) + noise.

    Fitted with the autocorrelation (Yule-Walker) method solved by the
    Levinson-Durbin recursion; the returned signs follow the model above,
    so an AR(1) process with pole 0.9 yields a_1 close to -0.9.
    """
    x = np.asarray(signal, dtype=np.float64)
    n = x.size
    if p < 1 or n <= p:
        raise ValueError("need length > order >= 1")
    r = np.array([np.dot(x[: n - k], x[k:]) for k in range(p + 1)]) / n
    if r[0] == 0.0:
        raise ValueError("zero-variance signal has no AR representation")

    a = np.zeros(p + 1)
    a[0] = 1.0
    err = r[0]
    for k in range(1, p + 1):
        if err == 0.0:
            raise ValueError(f"prediction error vanished at order {k}")
        lam = -(r[k] + np.dot(a[1:k], r[k - 1 : 0 : -1])) / err
        a[1:k] += lam * a[k - 1 : 0 : -1]
        a[k] = lam
        err *= 1.0 - lam * lam
    return a[1:]


def power_spectrum(signal, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided periodogram: (freqs in Hz, |DFT|^2 / N), no window/detrend."""
    x = np.asarray(signal, dtype=np.float64)
    n = x.size
    if n < 8:
        raise ValueError("need at least 8 samples")
    powers = np.abs(np.fft.rfft(x)) ** 2 / n
    freqs = np.arange(powers.size) * (fs / n)
    return freqs, powers


def freq_features(freqs, powers, peak_halfwidth: int = 10) -> FreqFeatures:
    """Median/mean frequency, total and mean power, and peak power ratio.

    FMD is the smallest bin where cumulative power reaches half the total;
    PSR sums ``peak_halfwidth`` bins either side of the argmax bin,
    clipped to the spectrum bounds.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    powers = np.asarray(powers, dtype=np.float64)
    total = float(powers.sum())
    if total <= 0.0:
        raise ValueError("spectrum has no power")
    cumulative = np.cumsum(powers)
    fmd = float(freqs[np.argmax(cumulative >= total / 2.0)])
    fmn = float(np.dot(freqs, powers) / total)
    mnp = total / powers.size
    j0 = int(np.argmax(powers))
    lo = max(0, j0 - peak_halfwidth)
    hi = min(powers.size, j0 + peak_halfwidth + 1)
    psr = float(powers[lo:hi].sum() / total)
    return FreqFeatures(fmd, fmn, total, mnp, psr)


def _lower_median(values: np.ndarray) -> float:
    k = (values.size - 1) // 2
    return float(np.partition(values, k)[k])


def if_stats(track, edge_trim_fraction: float = DEFAULT_IF_EDGE_TRIM) -> tuple[float, float, float]:
    """(median, std, kurtosis) of the instantaneous frequency.

    ``edge_trim_fraction`` of the samples is dropped at each end to
    suppress transform end effects. The median is the lower of the two
    middles for even counts; the std normalizes by N-1; zero deviation
    gives kurtosis 0.
    """
    freq = track.inst_freq if isinstance(track, HilbertTrack) else np.asarray(track, dtype=np.float64)
    trim = int(freq.size * edge_trim_fraction)
    trimmed = freq[trim : freq.size - trim] if trim else freq
    if trimmed.size == 0:
        raise ValueError("edge trim leaves no samples")
    median = _lower_median(trimmed)
    std = float(trimmed.std(ddof=1)) if trimmed.size > 1 else 0.0
    pop_sd = trimmed.std()
    if pop_sd == 0.0:
        kurtosis = 0.0
    else:
        z = (trimmed - trimmed.mean()) / pop_sd
        kurtosis = float(np.mean(z**4))
    return median, std, kurtosis


@dataclass(frozen=True)
class FeatureSlot:
    name: str
    source: str  # raw | imf1..imf3 | residual | if_imf1..if_imf3 | trial
    statistic: str
    channel: int  # 1-based


@dataclass(frozen=True)
class FeatureSchema:
    """Named, ordered feature layout for a fixed channel count."""

    schema_id: str
    channels: int
    slots: tuple[FeatureSlot, ...]

    def __post_init__(self):
        names = [s.name for s in self.slots]
        if len(set(names)) != len(names):
            raise ValueError("slot names must be unique")

    def __len__(self) -> int:
        return len(self.slots)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)

    def select_sources(self, sources: Sequence[str], schema_id: str) -> "FeatureSchema":
        picked = tuple(s for s in self.slots if s.source in sources)
        return FeatureSchema(schema_id, self.channels, picked)


PART_A_SOURCES = ("raw", "if_imf1", "if_imf2", "if_imf3", "imf1", "imf2", "imf3", "residual")
IF_STAT_NAMES = ("median", "std", "kurtosis")
EMBEDDED_STAT_NAMES = ("max", "iemg", "var_over_100", "wl_over_10", "wamp", "std")


def part_a_schema(channels: int) -> FeatureSchema:
    """49 slots per channel: raw stats, IF stats per mode, mode/residual stats."""
    slots = []
    for ch in range(1, channels + 1):
        for stat in TIME_STAT_NAMES:
            slots.append(FeatureSlot(f"ch{ch}_raw_{stat}", "raw", stat, ch))
        for stat in IF_STAT_NAMES:
            for k in range(1, N_TRACKED_IMFS + 1):
                slots.append(FeatureSlot(f"ch{ch}_if_imf{k}_{stat}", f"if_imf{k}", stat, ch))
        for source in (*(f"imf{k}" for k in range(1, N_TRACKED_IMFS + 1)), "residual"):
            for stat in TIME_STAT_NAMES:
                slots.append(FeatureSlot(f"ch{ch}_{source}_{stat}", source, stat, ch))
    return FeatureSchema("part_a", channels, tuple(slots))


def raw_schema(channels: int) -> FeatureSchema:
    return part_a_schema(channels).select_sources(("raw",), "raw")


def imf1_schema(channels: int) -> FeatureSchema:
    return part_a_schema(channels).select_sources(("imf1",), "imf1")


def embedded_schema(channels: int) -> FeatureSchema:
    slots = []
    for ch in range(1, channels + 1):
        for stat in EMBEDDED_STAT_NAMES:
            slots.append(FeatureSlot(f"ch{ch}_{stat}", "trial", stat, ch))
    return FeatureSchema("embedded", channels, tuple(slots))


_SCHEMA_BUILDERS = {
    "part_a": part_a_schema,
    "raw": raw_schema,
    "imf1": imf1_schema,
    "embedded": embedded_schema,
}


def schema_for(schema_id: str, channels: int) -> FeatureSchema:
    try:
        builder = _SCHEMA_BUILDERS[schema_id]
    except KeyError:
        raise ValueError(f"unknown schema id {schema_id!r}; known: {sorted(_SCHEMA_BUILDERS)}")
    return builder(channels)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """One row of a feature dataset."""

    values: np.ndarray
    label: MovementClass | None = None
    trial_id: tuple | None = None
    window_index: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")


@dataclass(eq=False)
class FeatureDataset:
    """Feature matrix with labels and per-row trial bookkeeping."""

    schema: FeatureSchema
    X: np.ndarray
    labels: np.ndarray
    trial_keys: tuple
    window_indices: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.window_indices = np.asarray(self.window_indices, dtype=np.int64)
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.X.shape[1] != len(self.schema):
            raise ValueError("matrix width must match the schema")
        if self.labels.shape != (n,) or len(self.trial_keys) != n or self.window_indices.shape != (n,):
            raise ValueError("per-row metadata must match the row count")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def select_schema(self, schema: FeatureSchema) -> "FeatureDataset":
        """Column subset by slot name (e.g. the raw-only view of part A)."""
        index = {name: i for i, name in enumerate(self.schema.names)}
        try:
            cols = [index[name] for name in schema.names]
        except KeyError as missing:
            raise ValueError(f"slot {missing} not present in this dataset")
        return FeatureDataset(schema, self.X[:, cols], self.labels, self.trial_keys, self.window_indices)


def concat_datasets(datasets: Sequence[FeatureDataset]) -> FeatureDataset:
    if not datasets:
        raise ValueError("nothing to concatenate")
    schema = datasets[0].schema
    for ds in datasets[1:]:
        if ds.schema.names != schema.names:
            raise ValueError("datasets must share a schema")
    return FeatureDataset(
        schema,
        np.vstack([ds.X for ds in datasets]),
        np.concatenate([ds.labels for ds in datasets]),
        tuple(k for ds in datasets for k in ds.trial_keys),
        np.concatenate([ds.window_indices for ds in datasets]),
    )


def _part_a_channel_block(
    x: np.ndarray,
    fs: float,
    cfg: SiftConfig,
    wamp_threshold: float,
    zc_threshold: float,
    edge_trim: float,
) -> np.ndarray:
    block = np.zeros(8 + 3 * len(IF_STAT_NAMES) + 8 * (N_TRACKED_IMFS + 1))
    block[0:8] = time_features(x, wamp_threshold, zc_threshold).as_array()
    dec = emd(x, cfg)
    for k, imf in enumerate(dec.imfs[:N_TRACKED_IMFS]):
        med, std, kurt = if_stats(hilbert_track(imf, fs), edge_trim)
        block[8 + k] = med
        block[11 + k] = std
        block[14 + k] = kurt
        block[17 + 8 * k : 25 + 8 * k] = time_features(imf, wamp_threshold, zc_threshold).as_array()
    block[41:49] = time_features(dec.residual, wamp_threshold, zc_threshold).as_array()
    return block


def assemble_part_a(
    channels: Sequence[SampledSignal],
    cfg: SiftConfig,
    *,
    wamp_threshold: float = DEFAULT_WAMP_THRESHOLD,
    zc_threshold: float = DEFAULT_ZC_THRESHOLD,
    edge_trim: float = DEFAULT_IF_EDGE_TRIM,
    label: MovementClass | None = None,
    trial_id: tuple | None = None,
    window_index: int = 0,
) -> FeatureVector:
    """Assemble the untrimmed 49-per-channel vector of one window.

    Modes missing because the decomposition stopped early keep zero-filled
    slots, so the layout is fixed regardless of signal content.
    """
    blocks = [
        _part_a_channel_block(ch.samples, ch.fs, cfg, wamp_threshold, zc_threshold, edge_trim)
        for ch in channels
    ]
    return FeatureVector(np.concatenate(blocks), label, trial_id, window_index)


def assemble_embedded(
    channels: Sequence[SampledSignal],
    wamp_threshold: float = DEFAULT_WAMP_THRESHOLD,
    *,
    label: MovementClass | None = None,
    trial_id: tuple | None = None,
) -> FeatureVector:
    """Six whole-recording features per channel, with the scalings used on
    the embedded target: [max, mean(|x|), var/100, WL/10, WAMP, std].

    Variance and std subtract the mean and normalize by N-1 here, matching
    the offline implementation they were lifted from.
    """
    values = []
    for ch in channels:
        x = ch.samples
        variance = float(np.var(x, ddof=1)) if x.size > 1 else 0.0
        abs_diffs = np.abs(np.diff(x))
        values.extend(
            [
                float(x.max()),
                float(np.mean(np.abs(x))),
                variance / 100.0,
                float(abs_diffs.sum()) / 10.0,
                float(np.count_nonzero(abs_diffs > wamp_threshold)),
                float(np.sqrt(variance)),
            ]
        )
    return FeatureVector(np.array(values), label, trial_id)


def _raw_row(channels, wamp_threshold, zc_threshold):
    return np.concatenate(
        [time_features(ch.samples, wamp_threshold, zc_threshold).as_array() for ch in channels]
    )


def _imf1_row(channels, cfg, wamp_threshold, zc_threshold):
    out = []
    for ch in channels:
        dec = emd(ch.samples, cfg)
        if dec.imfs:
            out.append(time_features(dec.imfs[0], wamp_threshold, zc_threshold).as_array())
        else:
            out.append(np.zeros(8))
    return np.concatenate(out)


def featurize_trial(
    trial: Trial,
    schema: FeatureSchema,
    windowing: WindowingConfig = WindowingConfig(),
    sift: SiftConfig = SiftConfig(),
    *,
    wamp_threshold: float = DEFAULT_WAMP_THRESHOLD,
    zc_threshold: float = DEFAULT_ZC_THRESHOLD,
    edge_trim: float = DEFAULT_IF_EDGE_TRIM,
) -> FeatureDataset:
    """Feature rows of one trial: one row per window (one total for the
    embedded schema, which consumes the whole recording)."""
    if trial.n_channels != schema.channels:
        raise ValueError(
            f"trial has {trial.n_channels} channels, schema expects {schema.channels}"
        )
    label_value = -1 if trial.label is None else int(trial.label)

    if schema.schema_id == "embedded":
        vec = assemble_embedded(trial.channels, wamp_threshold)
        return FeatureDataset(schema, vec.values[None, :], [label_value], (trial.key,), [0])

    onset = detect_onset(trial, windowing)
    starts = window_starts(trial.n_samples, onset, windowing)
    rows = np.empty((len(starts), len(schema)))
    for i, start in enumerate(starts):
        windows = [
            SampledSignal(ch.samples[start : start + windowing.window_len], ch.fs)
            for ch in trial.channels
        ]
        if schema.schema_id == "raw":
            rows[i] = _raw_row(windows, wamp_threshold, zc_threshold)
        elif schema.schema_id == "imf1":
            rows[i] = _imf1_row(windows, sift, wamp_threshold, zc_threshold)
        else:
            rows[i] = assemble_part_a(
                windows,
                sift,
                wamp_threshold=wamp_threshold,
                zc_threshold=zc_threshold,
                edge_trim=edge_trim,
            ).values
    return FeatureDataset(
        schema,
        rows,
        np.full(len(starts), label_value),
        tuple(trial.key for _ in starts),
        np.arange(len(starts)),
    )
