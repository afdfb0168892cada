"""Trial-level 5x2 cross-validation with nested hyperparameter selection.

The unit of every split is the trial, never the window: each recording's
overlapping windows share 90% of their samples, so any window-level split
would leak test data into the fitted statistics. Every fit call can be
recorded by a :class:`FitAudit` to prove that no test trial is read.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import classify
from .classify import KernelSpec
from .dimred import pca_fit, pca_take, pca_transform, relief_e, select_top, standardize_apply, standardize_fit
from .emd import SiftConfig
from .features import FeatureDataset, concat_datasets, featurize_trial, schema_for
from .signals import WindowingConfig


def _rng(master_seed: int, *path: int) -> np.random.Generator:
    """Deterministic substream: one master seed, a fixed integer path."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=path))


def _subseed(master_seed: int, *path: int) -> int:
    return int(_rng(master_seed, *path).integers(2**31 - 1))


# stage codes for seed paths
_STAGE_OUTER, _STAGE_INNER, _STAGE_REDUCE, _STAGE_CLF = 0, 1, 2, 3


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Square count matrix indexed [true][predicted]."""

    classes: tuple[int, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        k = len(self.classes)
        if counts.shape != (k, k):
            raise ValueError("counts must be square over the class list")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def per_class_recall(self) -> np.ndarray:
        """Diagonal over row sums, in percent; empty rows give nan."""
        row = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return 100.0 * np.diag(self.counts) / row


def confusion_from_predictions(y_true, y_pred, classes) -> ConfusionMatrix:
    classes = tuple(int(c) for c in classes)
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(np.asarray(y_true), np.asarray(y_pred)):
        counts[index[int(t)], index[int(p)]] += 1
    return ConfusionMatrix(classes, counts)


def confusion_accumulate(matrices) -> ConfusionMatrix:
    matrices = list(matrices)
    if not matrices:
        raise ValueError("nothing to accumulate")
    classes = matrices[0].classes
    total = np.zeros_like(matrices[0].counts)
    for m in matrices:
        if m.classes != classes:
            raise ValueError("class lists differ")
        total = total + m.counts
    return ConfusionMatrix(classes, total)


def accuracy(matrix: ConfusionMatrix) -> float:
    """Percentage of diagonal mass."""
    if matrix.total == 0:
        raise ValueError("empty confusion matrix")
    return 100.0 * float(np.trace(matrix.counts)) / matrix.total


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank comparison


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min(W+, W-)
    n: int  # nonzero differences used
    p_value: float | None
    reject: bool | None  # None = no decision possible
    method: str


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def wilcoxon_signed_rank(a, b, alpha: float = 0.05) -> WilcoxonResult:
    """Two-sided paired comparison on the signed ranks of the differences.

    Zero differences are dropped. Up to 12 usable pairs the null
    distribution is enumerated exactly over all sign assignments (which is
    what the small-sample critical tables contain); larger samples use the
    normal approximation with continuity and tie corrections. All
    differences zero yields a no-decision result.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need two equal-length 1-D samples")
    diff = a - b
    diff = diff[diff != 0.0]
    n = diff.size
    if n == 0:
        return WilcoxonResult(0.0, 0, None, None, "no-decision")
    if n < 6:
        raise ValueError("need at least 6 nonzero differences")
    ranks = _midranks(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks[diff < 0].sum())
    stat = min(w_plus, w_minus)

    if n <= 12:
        sums = np.zeros(1)
        for r in ranks:
            sums = np.concatenate([sums, sums + r])
        p = min(1.0, 2.0 * float(np.count_nonzero(sums <= stat + 1e-9)) / sums.size)
        method = "exact"
    else:
        mu = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
        z = (stat - mu + 0.5) / math.sqrt(var)
        p = min(1.0, 2.0 * 0.5 * math.erfc(-z / math.sqrt(2.0)))
        method = "normal"
    return WilcoxonResult(stat, n, p, bool(p <= alpha), method)


# ---------------------------------------------------------------------------
# Pipeline configuration and the classifier factory


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "ldc"  # ldc | knn | pnn | svm | centroid
    ridge: float = 1e-6
    k: int = 1
    sigma: float = 0.1
    kernel: str = "rbf"
    degree: int = 3
    homogeneous: bool = False
    gamma: float | None = None
    c: float = 1.0
    tol: float = 1e-3
    max_passes: int = 5
    max_sweeps: int = 2000
    scheme: str = "one_vs_all"
    round_centroids: bool = False

    def __post_init__(self):
        if self.kind not in ("ldc", "knn", "pnn", "svm", "centroid"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")


class _Fitted:
    def __init__(self, train, predict):
        self._train = train
        self._predict = predict
        self.model = None

    def fit(self, X, y):
        self.model = self._train(X, y)
        return self

    def predict(self, X):
        return self._predict(self.model, X)


def build_classifier(cfg: ClassifierConfig, seed: int = 0) -> _Fitted:
    if cfg.kind == "ldc":
        return _Fitted(lambda X, y: classify.ldc_train(X, y, cfg.ridge), classify.ldc_predict)
    if cfg.kind == "knn":
        return _Fitted(lambda X, y: classify.knn_train(X, y, cfg.k), classify.knn_predict)
    if cfg.kind == "pnn":
        return _Fitted(lambda X, y: classify.pnn_train(X, y, cfg.sigma), classify.pnn_predict)
    if cfg.kind == "centroid":
        return _Fitted(
            lambda X, y: classify.centroid_fit(X, y, cfg.round_centroids), classify.centroid_predict
        )
    kernel = KernelSpec(cfg.kernel, cfg.degree, cfg.homogeneous, cfg.gamma)
    return _Fitted(
        lambda X, y: classify.svm_multiclass_train(
            X,
            y,
            kernel,
            cfg.c,
            scheme=cfg.scheme,
            tol=cfg.tol,
            max_passes=cfg.max_passes,
            seed=seed,
            max_sweeps=cfg.max_sweeps,
        ),
        classify.svm_multiclass_predict,
    )


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one evaluation run needs, seeds included."""

    schema_id: str = "part_a"
    reduction: str = "pca"  # none | pca | relief
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    windowing: WindowingConfig = field(default_factory=WindowingConfig)
    sift: SiftConfig = field(default_factory=SiftConfig)
    seed: int = 0
    grid: tuple[int, ...] = ()  # empty -> every dimension 1..d
    repetitions: int = 5
    inner_repetitions: int = 10
    inner_train_fraction: float = 0.7
    relief_m: int = 5000
    allow_unequal: bool = False
    wamp_threshold: float = 10.0
    zc_threshold: float = 0.0
    if_edge_trim: float = 0.1

    def __post_init__(self):
        if self.reduction not in ("none", "pca", "relief"):
            raise ValueError(f"unknown reduction {self.reduction!r}")
        if not 0.0 < self.inner_train_fraction < 1.0:
            raise ValueError("inner_train_fraction must be in (0, 1)")
        if self.repetitions < 1 or self.inner_repetitions < 1:
            raise ValueError("repetition counts must be >= 1")


# ---------------------------------------------------------------------------
# Fit audit: proves which trials each fitted statistic saw


@dataclass(frozen=True)
class FitEvent:
    stage: str
    repetition: int
    fold: int
    trial_keys: frozenset
    data_sha: str


class FitAudit:
    """Records (stage, fold, trial set, input hash) for every fit call."""

    def __init__(self):
        self.events: list[FitEvent] = []

    def record(self, stage: str, repetition: int, fold: int, trial_keys, X: np.ndarray):
        sha = hashlib.sha256(np.ascontiguousarray(X).tobytes()).hexdigest()
        self.events.append(FitEvent(stage, repetition, fold, frozenset(trial_keys), sha))

    def fitted_keys(self, repetition: int, fold: int) -> set:
        out: set = set()
        for e in self.events:
            if e.repetition == repetition and e.fold == fold:
                out |= e.trial_keys
        return out


class _NullAudit:
    def record(self, *args, **kwargs):
        pass


# ---------------------------------------------------------------------------
# Featurization cache and fold machinery


def compute_feature_cache(trials, cfg: PipelineConfig, cache: dict | None = None) -> dict:
    """Per-trial feature datasets, reusing any entries already in ``cache``.

    Featurization is a per-trial computation with no cross-trial state, so
    sharing it across repetitions and folds cannot leak information.
    """
    cache = dict(cache) if cache else {}
    missing = [t for t in trials if t.key not in cache]
    if missing:
        schema = schema_for(cfg.schema_id, missing[0].n_channels)
        for trial in missing:
            cache[trial.key] = featurize_trial(
                trial,
                schema,
                cfg.windowing,
                cfg.sift,
                wamp_threshold=cfg.wamp_threshold,
                zc_threshold=cfg.zc_threshold,
                edge_trim=cfg.if_edge_trim,
            )
    empty = [t.key for t in trials if cache[t.key].n_rows == 0]
    if empty:
        raise ValueError(f"no full analysis window fits trials {empty}")
    return cache


def _stack(cache: dict, keys) -> FeatureDataset:
    return concat_datasets([cache[k] for k in keys])


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _grouped_keys(trials) -> dict[int, list]:
    groups: dict[int, list] = {}
    for t in trials:
        if t.label is None:
            raise ValueError(f"trial {t.key} is unlabeled")
        groups.setdefault(int(t.label), []).append(t.key)
    return groups


class _Reducer:
    """Fit-once, take-prefix-k view of PCA or RELIEF ranking."""

    def __init__(self, kind: str, relief_m: int, relief_seed: int):
        self.kind = kind
        self.relief_m = relief_m
        self.relief_seed = relief_seed
        self._pca = None
        self._order = None

    def fit(self, X, y, max_k: int):
        if self.kind == "pca":
            self._pca = pca_fit(X, min(max_k, X.shape[1]))
        else:
            weights = relief_e(X, y, m=self.relief_m, seed=self.relief_seed).weights
            self._order = select_top(weights, X.shape[1])
        return self

    def transform(self, X, k: int):
        if self.kind == "pca":
            return pca_transform(pca_take(self._pca, k), X)
        return np.asarray(X)[:, self._order[:k]]


def _fit_and_score(cfg, clf_seed, X_train, y_train, X_test, y_test):
    clf = build_classifier(cfg.classifier, seed=clf_seed)
    clf.fit(X_train, y_train)
    predictions = clf.predict(X_test)
    return predictions, int(np.count_nonzero(predictions != y_test))


def _nested_select_std(
    per_trial: list[tuple],  # (key, X_std, label)
    cfg: PipelineConfig,
    grid,
    repetition: int,
    fold: int,
    audit,
) -> int:
    d = per_trial[0][1].shape[1]
    usable = [int(g) for g in grid if 1 <= g <= d]
    skipped = sorted(set(int(g) for g in grid) - set(usable))
    if skipped:
        warnings.warn(f"grid values {skipped} exceed the {d} available dimensions; skipped")
    if not usable:
        raise ValueError("no usable grid values")

    by_class: dict[int, list[int]] = {}
    for idx, (_, _, label) in enumerate(per_trial):
        by_class.setdefault(label, []).append(idx)

    errors = {g: 0 for g in usable}
    for inner in range(cfg.inner_repetitions):
        rng = _rng(cfg.seed, _STAGE_INNER, repetition, fold, inner)
        train_idx: list[int] = []
        val_idx: list[int] = []
        for label in sorted(by_class):
            members = by_class[label]
            perm = rng.permutation(len(members))
            n_in = min(len(members) - 1, max(1, _round_half_up(cfg.inner_train_fraction * len(members))))
            train_idx.extend(members[i] for i in perm[:n_in])
            val_idx.extend(members[i] for i in perm[n_in:])

        X_in = np.vstack([per_trial[i][1] for i in train_idx])
        y_in = np.concatenate([np.full(per_trial[i][1].shape[0], per_trial[i][2]) for i in train_idx])
        X_val = np.vstack([per_trial[i][1] for i in val_idx])
        y_val = np.concatenate([np.full(per_trial[i][1].shape[0], per_trial[i][2]) for i in val_idx])
        inner_keys = [per_trial[i][0] for i in train_idx]

        reducer = _Reducer(
            cfg.reduction, cfg.relief_m, _subseed(cfg.seed, _STAGE_REDUCE, repetition, fold, inner)
        )
        reducer.fit(X_in, y_in, max(usable))
        audit.record(
            "pca_fit" if cfg.reduction == "pca" else "relief", repetition, fold, inner_keys, X_in
        )
        for g in usable:
            Z_in = reducer.transform(X_in, g)
            Z_val = reducer.transform(X_val, g)
            clf_seed = _subseed(cfg.seed, _STAGE_CLF, repetition, fold, inner, g)
            audit.record("classifier_train", repetition, fold, inner_keys, Z_in)
            _, wrong = _fit_and_score(cfg, clf_seed, Z_in, y_in, Z_val, y_val)
            errors[g] += wrong
    return min(usable, key=lambda g: (errors[g], g))


def nested_select(train_trials, cfg: PipelineConfig, grid, *, cache=None, audit=None) -> int:
    """Pick the retained dimension count by 10 stratified 70/30 splits of
    the training trials, minimizing total validation error (ties take the
    smallest value). A singleton grid is returned without searching."""
    grid = tuple(int(g) for g in grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    if cfg.reduction == "none":
        raise ValueError("nested selection needs a reduction method")
    if len(set(grid)) == 1:
        return grid[0]
    audit = audit if audit is not None else _NullAudit()
    cache = compute_feature_cache(train_trials, cfg, cache)
    keys = [t.key for t in train_trials]
    stacked = _stack(cache, keys)
    state = standardize_fit(stacked.X)
    audit.record("standardize_fit", 0, 0, keys, stacked.X)
    per_trial = [
        (k, standardize_apply(state, cache[k].X), int(cache[k].labels[0])) for k in keys
    ]
    return _nested_select_std(per_trial, cfg, grid, repetition=0, fold=0, audit=audit)


# ---------------------------------------------------------------------------
# The 5x2 protocol


@dataclass(frozen=True)
class FoldResult:
    repetition: int
    fold: int
    accuracy: float
    selected: int | None
    n_train_trials: int
    n_test_trials: int


@dataclass(frozen=True, eq=False)
class CvReport:
    classes: tuple[int, ...]
    fold_results: tuple[FoldResult, ...]
    confusion: ConfusionMatrix
    overall_accuracy: float
    master_seed: int
    schema_id: str
    reduction: str
    classifier_kind: str
    unequal_split: bool

    def __post_init__(self):
        recomputed = accuracy(self.confusion)
        if abs(recomputed - self.overall_accuracy) > 1e-9:
            raise ValueError("overall accuracy must equal trace/total of the matrix")


def five_by_two_cv(
    trials,
    cfg: PipelineConfig,
    *,
    cache: dict | None = None,
    audit: FitAudit | None = None,
) -> CvReport:
    """Five repetitions of a swapped two-fold split at the trial level.

    Every repetition halves each class's trials at random, evaluates
    train-on-A/test-on-B, then swaps the halves. All fitted statistics
    (standardization, reduction, classifier) see only the current training
    trials; window-level predictions accumulate into one confusion matrix.
    """
    trials = list(trials)
    if not trials:
        raise ValueError("no trials")
    keys = [t.key for t in trials]
    if len(set(keys)) != len(keys):
        raise ValueError("trial keys must be unique")
    groups = _grouped_keys(trials)
    counts = {label: len(ks) for label, ks in groups.items()}
    if len(groups) < 2:
        raise ValueError("need at least two classes")
    if min(counts.values()) < 2:
        raise ValueError("need at least two trials per class")
    unequal = len(set(counts.values())) > 1
    if unequal and not cfg.allow_unequal:
        raise ValueError(f"unequal trials per class {counts}; set allow_unequal for a nearest split")

    auditor = audit if audit is not None else _NullAudit()
    cache = compute_feature_cache(trials, cfg, cache)
    classes = tuple(sorted(groups))
    grid = tuple(cfg.grid) if cfg.grid else None

    fold_results: list[FoldResult] = []
    matrices: list[ConfusionMatrix] = []
    for rep in range(cfg.repetitions):
        rng = _rng(cfg.seed, _STAGE_OUTER, rep)
        half_a: list = []
        half_b: list = []
        for label in classes:
            members = groups[label]
            perm = rng.permutation(len(members))
            n_a = len(members) // 2
            half_a.extend(members[i] for i in perm[:n_a])
            half_b.extend(members[i] for i in perm[n_a:])
        for fold, (train_keys, test_keys) in enumerate(((half_b, half_a), (half_a, half_b))):
            matrix, selected = _run_fold(
                cache, classes, train_keys, test_keys, cfg, grid, rep, fold, auditor
            )
            matrices.append(matrix)
            fold_results.append(
                FoldResult(rep, fold, accuracy(matrix), selected, len(train_keys), len(test_keys))
            )

    total = confusion_accumulate(matrices)
    return CvReport(
        classes=classes,
        fold_results=tuple(fold_results),
        confusion=total,
        overall_accuracy=accuracy(total),
        master_seed=cfg.seed,
        schema_id=cfg.schema_id,
        reduction=cfg.reduction,
        classifier_kind=cfg.classifier.kind,
        unequal_split=unequal,
    )


def _run_fold(cache, classes, train_keys, test_keys, cfg, grid, rep, fold, audit):
    train = _stack(cache, train_keys)
    test = _stack(cache, test_keys)

    state = standardize_fit(train.X)
    audit.record("standardize_fit", rep, fold, train_keys, train.X)
    X_train = standardize_apply(state, train.X)
    X_test = standardize_apply(state, test.X)

    selected = None
    if cfg.reduction != "none":
        effective_grid = grid if grid is not None else tuple(range(1, X_train.shape[1] + 1))
        if len(set(effective_grid)) == 1:
            selected = effective_grid[0]  # singleton grid: nothing to search
        else:
            per_trial = [
                (k, standardize_apply(state, cache[k].X), int(cache[k].labels[0])) for k in train_keys
            ]
            selected = _nested_select_std(per_trial, cfg, effective_grid, rep, fold, audit)
        reducer = _Reducer(cfg.reduction, cfg.relief_m, _subseed(cfg.seed, _STAGE_REDUCE, rep, fold))
        reducer.fit(X_train, train.labels, selected)
        audit.record("pca_fit" if cfg.reduction == "pca" else "relief", rep, fold, train_keys, X_train)
        X_train = reducer.transform(X_train, selected)
        X_test = reducer.transform(X_test, selected)

    clf_seed = _subseed(cfg.seed, _STAGE_CLF, rep, fold)
    audit.record("classifier_train", rep, fold, train_keys, X_train)
    predictions, _ = _fit_and_score(cfg, clf_seed, X_train, train.labels, X_test, test.labels)
    return confusion_from_predictions(test.labels, predictions, classes), selected
