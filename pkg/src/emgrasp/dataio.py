"""File formats and data generation: trial text, feature datasets, SimPlot
frames, trial manifests, synthetic recordings, reports and saved models."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classify
from .classify import CentroidModel, KernelSpec, KnnModel, LdcModel, MulticlassSvm, PnnModel, SvmModel
from .crossval import ConfusionMatrix, CvReport, FoldResult
from .dimred import PcaModel, StandardizerState
from .emd import SiftConfig
from .features import FeatureDataset, FeatureSchema, FeatureSlot, schema_for
from .signals import SIX_GRASPS, MovementClass, SampledSignal, Trial, WindowingConfig


class ParseError(ValueError):
    """Malformed trial text; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SchemaMismatchError(ValueError):
    """Feature file header does not match the expected schema."""


# ---------------------------------------------------------------------------
# Trial text files


def _parse_line(raw: str, line_no: int) -> list[float]:
    values = []
    for token in raw.replace(",", " ").split():
        try:
            value = float(token)
        except ValueError:
            raise ParseError(f"bad number {token!r}", line_no)
        if not math.isfinite(value):
            raise ParseError(f"non-finite value {token!r}", line_no)
        values.append(value)
    return values


def parse_trial_text(
    content: str,
    fs: float,
    channel_layout: str = "rows",
    *,
    label: MovementClass | None = None,
    subject_id: str = "",
    trial_index: int = 0,
) -> Trial:
    """Parse whitespace- or comma-separated numbers into a trial.

    ``channel_layout`` is "rows" (one line per channel) or "columns" (one
    line per sample). Trailing separators and trailing blank lines are
    tolerated; ragged or non-finite data is a :class:`ParseError`.
    """
    if channel_layout not in ("rows", "columns"):
        raise ValueError(f"unknown channel_layout {channel_layout!r}")
    lines = content.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    rows = []
    for i, raw in enumerate(lines, start=1):
        values = _parse_line(raw, i)
        if not values:
            raise ParseError("empty line inside data", i)
        rows.append(values)
    if not rows:
        raise ParseError("no data in file")
    width = len(rows[0])
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ParseError(f"expected {width} values, found {len(row)}", i)
    matrix = np.asarray(rows, dtype=np.float64)
    if channel_layout == "columns":
        matrix = matrix.T
    channels = tuple(SampledSignal(row, fs) for row in matrix)
    return Trial(channels=channels, label=label, subject_id=subject_id, trial_index=trial_index)


def format_trial_text(trial: Trial, channel_layout: str = "rows") -> str:
    matrix = np.vstack([ch.samples for ch in trial.channels])
    if channel_layout == "columns":
        matrix = matrix.T
    elif channel_layout != "rows":
        raise ValueError(f"unknown channel_layout {channel_layout!r}")
    return "\n".join(" ".join(f"{v:.17g}" for v in row) for row in matrix) + "\n"


# ---------------------------------------------------------------------------
# Feature dataset files (delimited text, header row, label column)


def _label_token(code: int) -> str:
    try:
        return MovementClass(code).name
    except ValueError:
        return str(code)


def _parse_label(token: str) -> int:
    try:
        return int(MovementClass[token])
    except KeyError:
        try:
            return int(token)
        except ValueError:
            raise SchemaMismatchError(f"bad label token {token!r}")


def write_feature_dataset(dataset: FeatureDataset) -> bytes:
    """CSV with the schema slot names plus a final label column; values are
    printed at 17 significant digits so the round trip is bit-exact."""
    lines = [",".join((*dataset.schema.names, "label"))]
    for row, label in zip(dataset.X, dataset.labels):
        lines.append(",".join([f"{v:.17g}" for v in row] + [_label_token(int(label))]))
    return ("\n".join(lines) + "\n").encode()


def read_feature_dataset(data: bytes, schema: FeatureSchema | None = None) -> FeatureDataset:
    """Read a dataset written by :func:`write_feature_dataset`.

    With ``schema`` given, the header must list exactly its slot names;
    otherwise a generic schema is reconstructed from the header. Row
    provenance (trial keys) is not stored in the file.
    """
    text = data.decode()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaMismatchError("empty feature file")
    header = lines[0].split(",")
    if header[-1] != "label":
        raise SchemaMismatchError("last column must be 'label'")
    names = header[:-1]
    if schema is not None:
        if tuple(names) != schema.names:
            unknown = set(names) - set(schema.names)
            missing = set(schema.names) - set(names)
            raise SchemaMismatchError(f"header mismatch: unknown={sorted(unknown)} missing={sorted(missing)}")
    else:
        slots = tuple(FeatureSlot(name, "file", name, 1) for name in names)
        schema = FeatureSchema("file", 1, slots)
    rows, labels = [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(names) + 1:
            raise SchemaMismatchError(f"row has {len(parts)} fields, expected {len(names) + 1}")
        rows.append([float(v) for v in parts[:-1]])
        labels.append(_parse_label(parts[-1]))
    n = len(rows)
    X = np.asarray(rows, dtype=np.float64).reshape(n, len(names))
    return FeatureDataset(schema, X, np.asarray(labels, dtype=np.int64), tuple(("file", l, i) for i, l in enumerate(labels)), np.arange(n))


# ---------------------------------------------------------------------------
# SimPlot binary framing

SIMPLOT_HEADER = 0xCDAB
_VALID_SIZES = (2, 4, 6, 8)


@dataclass(frozen=True)
class SimplotFrame:
    """Up to four signed 16-bit channel samples."""

    samples: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(int(s) for s in self.samples))
        if not 1 <= len(self.samples) <= 4:
            raise ValueError("frame carries 1..4 channels")
        for s in self.samples:
            if not -32768 <= s <= 32767:
                raise ValueError(f"sample {s} outside int16 range")


def simplot_encode(frame: SimplotFrame) -> bytes:
    """Little-endian: header 0xCDAB, payload byte count, int16 samples.

    The size field counts only the payload (2 bytes per channel), not the
    header or itself.
    """
    n = len(frame.samples)
    return struct.pack(f"<HH{n}h", SIMPLOT_HEADER, 2 * n, *frame.samples)


class SimplotStreamDecoder:
    """Single-consumer scanner that resynchronizes on corrupt bytes.

    Feed arbitrary chunks; whole frames come back as they complete and
    ``skipped_bytes`` counts everything discarded while hunting for a
    plausible header.
    """

    def __init__(self):
        self._buf = bytearray()
        self.skipped_bytes = 0

    @property
    def pending(self) -> int:
        return len(self._buf)

    def feed(self, data: bytes) -> list[SimplotFrame]:
        self._buf.extend(data)
        frames = []
        while len(self._buf) >= 4:
            if self._buf[0] == 0xAB and self._buf[1] == 0xCD:
                size = self._buf[2] | (self._buf[3] << 8)
                if size in _VALID_SIZES:
                    if len(self._buf) < 4 + size:
                        break  # incomplete frame: wait for more bytes
                    samples = struct.unpack_from(f"<{size // 2}h", self._buf, 4)
                    frames.append(SimplotFrame(samples))
                    del self._buf[: 4 + size]
                    continue
            del self._buf[:1]
            self.skipped_bytes += 1
        return frames


def simplot_decode(data: bytes) -> tuple[list[SimplotFrame], int]:
    """One-shot decode; returns (frames, skipped byte count). Never raises
    on garbage input, it resynchronizes instead."""
    decoder = SimplotStreamDecoder()
    frames = decoder.feed(data)
    return frames, decoder.skipped_bytes


# ---------------------------------------------------------------------------
# Trial manifests


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: MovementClass | None
    subject_id: str
    trial_index: int


@dataclass(frozen=True)
class TrialFileManifest:
    fs: float
    channels: int
    layout: str
    entries: tuple[ManifestEntry, ...]


def save_manifest(manifest: TrialFileManifest, path) -> None:
    doc = {
        "fs": manifest.fs,
        "channels": manifest.channels,
        "layout": manifest.layout,
        "trials": [
            {
                "path": e.path,
                "label": None if e.label is None else e.label.name,
                "subject": e.subject_id,
                "index": e.trial_index,
            }
            for e in manifest.entries
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_manifest(path) -> TrialFileManifest:
    """Read a manifest and verify every referenced file exists."""
    base = Path(path).parent
    doc = json.loads(Path(path).read_text())
    entries = []
    for item in doc["trials"]:
        entry = ManifestEntry(
            path=item["path"],
            label=None if item.get("label") is None else MovementClass[item["label"]],
            subject_id=item.get("subject", ""),
            trial_index=int(item.get("index", 0)),
        )
        if not (base / entry.path).exists():
            raise FileNotFoundError(f"manifest references missing file {entry.path}")
        entries.append(entry)
    return TrialFileManifest(
        fs=float(doc["fs"]),
        channels=int(doc["channels"]),
        layout=doc.get("layout", "rows"),
        entries=tuple(entries),
    )


def load_trials(manifest: TrialFileManifest, base_dir) -> list[Trial]:
    base = Path(base_dir)
    trials = []
    for e in manifest.entries:
        trial = parse_trial_text(
            (base / e.path).read_text(),
            manifest.fs,
            manifest.layout,
            label=e.label,
            subject_id=e.subject_id,
            trial_index=e.trial_index,
        )
        if trial.n_channels != manifest.channels:
            raise ParseError(f"{e.path}: expected {manifest.channels} channels, found {trial.n_channels}")
        trials.append(trial)
    return trials


# ---------------------------------------------------------------------------
# Synthetic recordings


@dataclass(frozen=True)
class ClassSignalParams:
    """Per-channel activity description of one movement class.

    Each channel mixes a fast and a slow muscle-like texture (narrowband
    AR(2) noise); the classes differ in overall amplitude and in the mix.
    """

    amplitudes: tuple[float, ...]
    fast_fraction: tuple[float, ...]
    fast_hz: float = 110.0
    slow_hz: float = 25.0
    pole_radius: float = 0.9


def default_class_params(channels: int) -> tuple[ClassSignalParams, ...]:
    """Six movement signatures sharing one amplitude; only the per-channel
    band mix separates them, which is what the mode decomposition reads."""
    mixes = (
        (0.80, 0.35),
        (0.65, 0.50),
        (0.50, 0.65),
        (0.35, 0.80),
        (0.80, 0.65),
        (0.35, 0.50),
    )
    out = []
    for mix in mixes:
        out.append(
            ClassSignalParams(
                amplitudes=tuple(5.0 + 1.0 * ch for ch in range(channels)),
                fast_fraction=tuple(mix[ch % 2] for ch in range(channels)),
            )
        )
    return tuple(out)


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    classes: tuple[MovementClass, ...] = SIX_GRASPS
    trials_per_class: int = 30
    channels: int = 2
    fs: float = 500.0
    duration: float = 6.0
    onset_range_s: tuple[float, float] = (0.45, 0.9)
    ramp_samples: int = 30
    noise_level: float = 0.25
    gain_range: tuple[float, float] = (0.75, 1.3)  # per-trial, per-channel electrode gain
    subject_id: str = "synth"
    class_params: tuple[ClassSignalParams, ...] | None = None

    def __post_init__(self):
        if self.trials_per_class < 1 or self.channels < 1 or self.fs <= 0 or self.duration <= 0:
            raise ValueError("counts, rate and duration must be positive")
        params = self.class_params
        if params is None:
            params = default_class_params(self.channels)[: len(self.classes)]
            if len(params) < len(self.classes):
                raise ValueError("supply class_params for more than six classes")
            object.__setattr__(self, "class_params", params)
        if len(self.class_params) != len(self.classes):
            raise ValueError("one ClassSignalParams per class required")


_BURN_IN = 200


def _ar2_texture(rng: np.random.Generator, n: int, center_hz: float, fs: float, radius: float) -> np.ndarray:
    """Unit-RMS narrowband noise with a resonance at ``center_hz``."""
    theta = 2.0 * math.pi * center_hz / fs
    a1 = 2.0 * radius * math.cos(theta)
    a2 = -radius * radius
    w = rng.standard_normal(n + _BURN_IN)
    x = np.empty(n + _BURN_IN)
    x[0] = w[0]
    x[1] = a1 * x[0] + w[1]
    for t in range(2, n + _BURN_IN):
        x[t] = a1 * x[t - 1] + a2 * x[t - 2] + w[t]
    x = x[_BURN_IN:]
    rms = math.sqrt(float(np.mean(x * x)))
    return x / rms if rms > 0 else x


def generate_synthetic(cfg: SynthConfig) -> list[Trial]:
    """Deterministic labeled recordings: silence, then an activity plateau
    of class-specific amplitude and spectral mix, plus sensor noise."""
    n = int(round(cfg.duration * cfg.fs))
    trials = []
    for ci, (label, params) in enumerate(zip(cfg.classes, cfg.class_params)):
        for ti in range(cfg.trials_per_class):
            trial_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(ci, ti)))
            onset_s = trial_rng.uniform(*cfg.onset_range_s)
            start = int(onset_s * cfg.fs)
            envelope = np.zeros(n)
            ramp_end = min(n, start + cfg.ramp_samples)
            envelope[start:ramp_end] = 0.5 * (
                1.0 - np.cos(np.pi * (np.arange(ramp_end - start) + 1) / max(1, cfg.ramp_samples))
            )
            envelope[ramp_end:] = 1.0
            channels = []
            for ch in range(cfg.channels):
                ch_rng = np.random.default_rng(
                    np.random.SeedSequence(cfg.seed, spawn_key=(ci, ti, ch))
                )
                fast = _ar2_texture(ch_rng, n, params.fast_hz, cfg.fs, params.pole_radius)
                slow = _ar2_texture(ch_rng, n, params.slow_hz, cfg.fs, params.pole_radius)
                gain = ch_rng.uniform(*cfg.gain_range)
                mix = params.fast_fraction[ch]
                blend = mix * fast + (1.0 - mix) * slow
                norm = math.sqrt(mix * mix + (1.0 - mix) * (1.0 - mix))
                activity = gain * params.amplitudes[ch] * blend / norm
                noise = cfg.noise_level * ch_rng.standard_normal(n)
                channels.append(SampledSignal(envelope * activity + noise, cfg.fs))
            trials.append(
                Trial(
                    channels=tuple(channels),
                    label=label,
                    subject_id=cfg.subject_id,
                    trial_index=ti,
                )
            )
    return trials


# ---------------------------------------------------------------------------
# Cross-validation report serialization


def report_to_json(report: CvReport) -> str:
    doc = {
        "classes": list(report.classes),
        "class_names": [_label_token(c) for c in report.classes],
        "overall_accuracy": report.overall_accuracy,
        "master_seed": report.master_seed,
        "schema_id": report.schema_id,
        "reduction": report.reduction,
        "classifier_kind": report.classifier_kind,
        "unequal_split": report.unequal_split,
        "fold_results": [
            {
                "repetition": f.repetition,
                "fold": f.fold,
                "accuracy": f.accuracy,
                "selected": f.selected,
                "n_train_trials": f.n_train_trials,
                "n_test_trials": f.n_test_trials,
            }
            for f in report.fold_results
        ],
        "confusion": report.confusion.counts.tolist(),
    }
    return json.dumps(doc, indent=2) + "\n"


def report_from_json(text: str) -> CvReport:
    doc = json.loads(text)
    classes = tuple(int(c) for c in doc["classes"])
    return CvReport(
        classes=classes,
        fold_results=tuple(
            FoldResult(
                repetition=int(f["repetition"]),
                fold=int(f["fold"]),
                accuracy=float(f["accuracy"]),
                selected=None if f["selected"] is None else int(f["selected"]),
                n_train_trials=int(f["n_train_trials"]),
                n_test_trials=int(f["n_test_trials"]),
            )
            for f in doc["fold_results"]
        ),
        confusion=ConfusionMatrix(classes, np.asarray(doc["confusion"], dtype=np.int64)),
        overall_accuracy=float(doc["overall_accuracy"]),
        master_seed=int(doc["master_seed"]),
        schema_id=doc["schema_id"],
        reduction=doc["reduction"],
        classifier_kind=doc["classifier_kind"],
        unequal_split=bool(doc["unequal_split"]),
    )


# ---------------------------------------------------------------------------
# Saved pipeline models (standardizer + optional reduction + classifier)


def _arr(x) -> list:
    return np.asarray(x).tolist()


def _classifier_to_doc(model) -> dict:
    if isinstance(model, LdcModel):
        return {
            "type": "ldc",
            "classes": _arr(model.classes),
            "priors": _arr(model.priors),
            "means": _arr(model.means),
            "cov_inv": _arr(model.cov_inv),
        }
    if isinstance(model, KnnModel):
        return {
            "type": "knn",
            "vectors": _arr(model.vectors),
            "labels": _arr(model.labels),
            "k": model.k,
        }
    if isinstance(model, PnnModel):
        return {
            "type": "pnn",
            "patterns": _arr(model.patterns),
            "labels": _arr(model.labels),
            "sigma": model.sigma,
        }
    if isinstance(model, CentroidModel):
        return {
            "type": "centroid",
            "classes": _arr(model.classes),
            "centroids": _arr(model.centroids),
            "rounded": model.rounded,
        }
    if isinstance(model, SvmModel):
        return {
            "type": "svm",
            "kernel": {
                "kind": model.kernel.kind,
                "degree": model.kernel.degree,
                "homogeneous": model.kernel.homogeneous,
                "gamma": model.kernel.gamma,
                "scale": model.kernel.scale,
                "offset": model.kernel.offset,
            },
            "c": model.c,
            "support_vectors": _arr(model.support_vectors),
            "dual_coef": _arr(model.dual_coef),
            "support_indices": _arr(model.support_indices),
            "bias": model.bias,
            "n_train": model.n_train,
            "sweeps": model.sweeps,
        }
    if isinstance(model, MulticlassSvm):
        return {
            "type": "svm_multiclass",
            "scheme": model.scheme,
            "classes": _arr(model.classes),
            "pairs": [list(p) for p in model.pairs],
            "models": [_classifier_to_doc(m) for m in model.models],
        }
    raise TypeError(f"cannot serialize model of type {type(model).__name__}")


def _classifier_from_doc(doc: dict):
    kind = doc["type"]
    if kind == "ldc":
        return LdcModel(
            np.asarray(doc["classes"]),
            np.asarray(doc["priors"]),
            np.asarray(doc["means"]),
            np.asarray(doc["cov_inv"]),
        )
    if kind == "knn":
        return KnnModel(
            np.asarray(doc["vectors"]),
            np.asarray(doc["labels"]),
            np.unique(np.asarray(doc["labels"])),
            int(doc["k"]),
        )
    if kind == "pnn":
        return PnnModel(
            np.asarray(doc["patterns"]),
            np.asarray(doc["labels"]),
            np.unique(np.asarray(doc["labels"])),
            float(doc["sigma"]),
        )
    if kind == "centroid":
        return CentroidModel(np.asarray(doc["classes"]), np.asarray(doc["centroids"]), bool(doc["rounded"]))
    if kind == "svm":
        return SvmModel(
            KernelSpec(**doc["kernel"]),
            float(doc["c"]),
            np.asarray(doc["support_vectors"], dtype=np.float64),
            np.asarray(doc["dual_coef"], dtype=np.float64),
            np.asarray(doc["support_indices"], dtype=np.int64),
            float(doc["bias"]),
            int(doc["n_train"]),
            int(doc["sweeps"]),
        )
    if kind == "svm_multiclass":
        return MulticlassSvm(
            doc["scheme"],
            np.asarray(doc["classes"]),
            tuple(_classifier_from_doc(m) for m in doc["models"]),
            tuple(tuple(p) for p in doc["pairs"]),
        )
    raise SchemaMismatchError(f"unknown model type {kind!r}")


_PREDICTORS = {
    "ldc": classify.ldc_predict,
    "knn": classify.knn_predict,
    "pnn": classify.pnn_predict,
    "centroid": classify.centroid_predict,
    "svm_multiclass": classify.svm_multiclass_predict,
}


@dataclass(frozen=True, eq=False)
class PipelineModel:
    """Everything needed to score a fresh trial: featurization settings,
    the fitted standardizer, an optional reduction, and a classifier."""

    schema_id: str
    channels: int
    windowing: WindowingConfig
    sift: SiftConfig
    standardizer: StandardizerState
    reduction: str  # none | pca | relief
    pca: PcaModel | None
    relief_columns: tuple[int, ...] | None
    classifier_type: str
    classifier: object
    wamp_threshold: float = 10.0
    zc_threshold: float = 0.0
    if_edge_trim: float = 0.1
    fs: float = 500.0

    def schema(self) -> FeatureSchema:
        return schema_for(self.schema_id, self.channels)

    def transform(self, X: np.ndarray) -> np.ndarray:
        from .dimred import pca_transform, standardize_apply

        Z = standardize_apply(self.standardizer, X)
        if self.reduction == "pca":
            Z = pca_transform(self.pca, Z)
        elif self.reduction == "relief":
            Z = Z[:, list(self.relief_columns)]
        return Z

    def predict(self, X: np.ndarray):
        return _PREDICTORS[self.classifier_type](self.classifier, self.transform(X))


def pipeline_model_to_json(model: PipelineModel) -> str:
    doc = {
        "schema_id": model.schema_id,
        "channels": model.channels,
        "windowing": {
            "window_len": model.windowing.window_len,
            "step": model.windowing.step,
            "tail_trim": model.windowing.tail_trim,
            "onset_window": model.windowing.onset_window,
            "onset_threshold": model.windowing.onset_threshold,
        },
        "sift": {
            "max_modes": model.sift.max_modes,
            "fixed_sift_iters": model.sift.fixed_sift_iters,
        },
        "standardizer": {
            "mean": _arr(model.standardizer.mean),
            "std": _arr(model.standardizer.std),
            "dropped": list(model.standardizer.dropped),
            "n_features_in": model.standardizer.n_features_in,
        },
        "reduction": model.reduction,
        "pca": None
        if model.pca is None
        else {
            "mean": _arr(model.pca.mean),
            "components": _arr(model.pca.components),
            "eigenvalues": _arr(model.pca.eigenvalues),
            "retained": model.pca.retained,
        },
        "relief_columns": None if model.relief_columns is None else list(model.relief_columns),
        "classifier": _classifier_to_doc(model.classifier),
        "wamp_threshold": model.wamp_threshold,
        "zc_threshold": model.zc_threshold,
        "if_edge_trim": model.if_edge_trim,
        "fs": model.fs,
    }
    return json.dumps(doc, indent=2) + "\n"


def pipeline_model_from_json(text: str) -> PipelineModel:
    doc = json.loads(text)
    clf_doc = doc["classifier"]
    pca_doc = doc["pca"]
    return PipelineModel(
        schema_id=doc["schema_id"],
        channels=int(doc["channels"]),
        windowing=WindowingConfig(**doc["windowing"]),
        sift=SiftConfig(**doc["sift"]),
        standardizer=StandardizerState(
            np.asarray(doc["standardizer"]["mean"], dtype=np.float64),
            np.asarray(doc["standardizer"]["std"], dtype=np.float64),
            tuple(doc["standardizer"]["dropped"]),
            int(doc["standardizer"]["n_features_in"]),
        ),
        reduction=doc["reduction"],
        pca=None
        if pca_doc is None
        else PcaModel(
            np.asarray(pca_doc["mean"], dtype=np.float64),
            np.asarray(pca_doc["components"], dtype=np.float64),
            np.asarray(pca_doc["eigenvalues"], dtype=np.float64),
            int(pca_doc["retained"]),
        ),
        relief_columns=None if doc["relief_columns"] is None else tuple(doc["relief_columns"]),
        classifier_type=clf_doc["type"],
        classifier=_classifier_from_doc(clf_doc),
        wamp_threshold=float(doc.get("wamp_threshold", 10.0)),
        zc_threshold=float(doc.get("zc_threshold", 0.0)),
        if_edge_trim=float(doc.get("if_edge_trim", 0.1)),
        fs=float(doc.get("fs", 500.0)),
    )
