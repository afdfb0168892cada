"""Train-statistics standardization, PCA, and RELIEF feature weighting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class StandardizerState:
    """Per-feature train mean/std plus the degenerate columns to drop.

    Columns whose training std is zero carry no information and would
    divide by zero, so they are removed from train and test alike.
    """

    mean: np.ndarray
    std: np.ndarray
    dropped: tuple[int, ...]
    n_features_in: int


def standardize_fit(train: np.ndarray) -> StandardizerState:
    """Estimate per-column mean and std (N-1) on training data."""
    X = np.asarray(train, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("training matrix must be 2-D and nonempty")
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    dropped = tuple(int(i) for i in np.flatnonzero(std == 0.0))
    keep = std != 0.0
    return StandardizerState(mean[keep], std[keep], dropped, X.shape[1])


def standardize_apply(state: StandardizerState, matrix: np.ndarray) -> np.ndarray:
    """Map a matrix to zero-mean/unit-variance under the training statistics."""
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != state.n_features_in:
        raise ValueError(f"matrix width {X.shape} does not match fitted width {state.n_features_in}")
    keep = np.ones(state.n_features_in, dtype=bool)
    keep[list(state.dropped)] = False
    return (X[:, keep] - state.mean) / state.std


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Data mean, orthonormal eigenvector columns and the full spectrum."""

    mean: np.ndarray
    components: np.ndarray  # (d, M) columns, descending eigenvalue order
    eigenvalues: np.ndarray  # all d, descending
    retained: int


def pca_fit(data: np.ndarray, retained: int) -> PcaModel:
    """Eigendecomposition of the sample covariance of mean-centered data.

    Eigenpairs are sorted by descending eigenvalue and the top ``retained``
    eigenvectors kept. Each eigenvector's largest-magnitude entry is made
    positive so the basis is deterministic.
    """
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least two rows")
    d = X.shape[1]
    if not 1 <= retained <= d:
        raise ValueError(f"retained count {retained} outside 1..{d}")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (X.shape[0] - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]
    top = np.argmax(np.abs(eigenvectors), axis=0)
    flip = eigenvectors[top, np.arange(d)] < 0
    eigenvectors[:, flip] *= -1.0
    return PcaModel(mean, eigenvectors[:, :retained], eigenvalues, retained)


def pca_take(model: PcaModel, retained: int) -> PcaModel:
    """Restrict a fitted model to its leading ``retained`` components."""
    if not 1 <= retained <= model.components.shape[1]:
        raise ValueError("retained count outside the fitted range")
    return PcaModel(model.mean, model.components[:, :retained], model.eigenvalues, retained)


def pca_transform(model: PcaModel, rows: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if X.shape[1] != model.mean.size:
        raise ValueError("row width does not match the fitted space")
    return (X - model.mean) @ model.components


def pca_inverse(model: PcaModel, projected: np.ndarray) -> np.ndarray:
    """Back-projection into the original (centered + mean) space."""
    Z = np.atleast_2d(np.asarray(projected, dtype=np.float64))
    return Z @ model.components.T + model.mean


@dataclass(frozen=True, eq=False)
class ReliefWeights:
    weights: np.ndarray
    m: int
    variant: str  # "binary" | "multiclass_e"


def _relief_core(X: np.ndarray, y: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """Shared weight-update loop; near-miss is the nearest other-class row.

    Feature differences are normalized by the per-feature training range,
    so range-zero features contribute nothing. Neighbor search is the full-
    dimension Euclidean distance; ties resolve to the lowest row index.
    """
    n, d = X.shape
    ranges = X.max(axis=0) - X.min(axis=0)
    safe = np.where(ranges > 0.0, ranges, 1.0)
    active = ranges > 0.0
    class_counts = {}
    for label in y:
        class_counts[label] = class_counts.get(label, 0) + 1

    # Pairwise distances fit comfortably at desk scale and make the m
    # draws O(n); fall back to per-draw distances on big inputs.
    precompute = n <= 3000
    if precompute:
        sq = np.einsum("ij,ij->i", X, X)
        dist2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)

    weights = np.zeros(d)
    draws = 0
    while draws < m:
        i = int(rng.integers(n))
        if class_counts[y[i]] < 2:
            continue  # no possible near-hit: skip and redraw
        draws += 1
        row = dist2[i] if precompute else np.einsum("ij,ij->i", X - X[i], X - X[i])
        same = y == y[i]
        hit_d = np.where(same, row, np.inf)
        hit_d[i] = np.inf
        hit = int(np.argmin(hit_d))
        miss_d = np.where(same, np.inf, row)
        miss = int(np.argmin(miss_d))
        diff_hit = np.where(active, (X[i] - X[hit]) / safe, 0.0)
        diff_miss = np.where(active, (X[i] - X[miss]) / safe, 0.0)
        weights += diff_miss * diff_miss - diff_hit * diff_hit
    return weights / m


def _check_relief_args(X, y, m):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("data and labels must align")
    if m < 1:
        raise ValueError("sample count m must be >= 1")
    return X, y


def relief(data, labels, m: int = 5000, seed: int = 0) -> ReliefWeights:
    """Binary RELIEF relevance weights.

    Each of the ``m`` draws picks a random instance, its nearest same-class
    hit and nearest other-class miss, and moves each feature weight by the
    squared normalized differences (miss added, hit subtracted).
    """
    X, y = _check_relief_args(data, labels, m)
    if np.unique(y).size != 2:
        raise ValueError("binary variant needs exactly two classes")
    rng = np.random.default_rng(seed)
    return ReliefWeights(_relief_core(X, y, m, rng), m, "binary")


def relief_e(data, labels, m: int = 5000, seed: int = 0) -> ReliefWeights:
    """Multiclass extension: the near-miss is the nearest row of any other
    class. With two classes and the same seed this reduces to ``relief``."""
    X, y = _check_relief_args(data, labels, m)
    if np.unique(y).size < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(seed)
    return ReliefWeights(_relief_core(X, y, m, rng), m, "multiclass_e")


def select_top(weights, k: int) -> list[int]:
    """Indices of the k largest weights, descending; ties go to lower index."""
    w = np.asarray(weights, dtype=np.float64)
    if not 1 <= k <= w.size:
        raise ValueError(f"k {k} outside 1..{w.size}")
    order = np.argsort(-w, kind="stable")
    return [int(i) for i in order[:k]]


def select_above(weights, tau: float) -> list[int]:
    """Threshold mode: indices with weight >= tau, in ascending index order."""
    w = np.asarray(weights, dtype=np.float64)
    return [int(i) for i in np.flatnonzero(w >= tau)]
