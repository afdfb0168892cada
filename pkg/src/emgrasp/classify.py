"""The five classifiers: LDC, k-NN, Parzen PNN, SVM trained by SMO, centroid.

All tie-breaks resolve to the lowest class in ascending class order, and
distance ties to the lowest training-row index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConvergenceError(RuntimeError):
    """SMO failed to satisfy the KKT conditions within the sweep budget."""


def _as_matrix_labels(vectors, labels):
    X = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("vectors and labels must align")
    return X, y


def _as_query(x, width):
    q = np.asarray(x, dtype=np.float64)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    if q.shape[1] != width:
        raise ValueError(f"query width {q.shape[1]} does not match model width {width}")
    return q, single


# ---------------------------------------------------------------------------
# Linear (Bayes normal) discriminant with pooled covariance


@dataclass(frozen=True, eq=False)
class LdcModel:
    classes: np.ndarray
    priors: np.ndarray
    means: np.ndarray  # (n_classes, d)
    cov_inv: np.ndarray


def ldc_train(vectors, labels, ridge: float = 1e-6) -> LdcModel:
    """Fit class means and a class-size-weighted pooled covariance.

    The pooled matrix is sum_i (n_i/N) Cov_i and is regularized by
    ``ridge * mean(diag)`` on the diagonal before inversion; a matrix that
    is still not positive definite raises ``numpy.linalg.LinAlgError``.
    """
    X, y = _as_matrix_labels(vectors, labels)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("need at least two classes")
    n, d = X.shape
    means = np.empty((classes.size, d))
    priors = np.empty(classes.size)
    pooled = np.zeros((d, d))
    for i, c in enumerate(classes):
        block = X[y == c]
        if block.shape[0] < 2:
            raise ValueError(f"class {c} needs at least two samples")
        means[i] = block.mean(axis=0)
        priors[i] = block.shape[0] / n
        pooled += priors[i] * np.cov(block, rowvar=False, ddof=1)
    pooled += ridge * np.mean(np.diag(pooled)) * np.eye(d)
    try:
        np.linalg.cholesky(pooled)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("pooled covariance singular even after regularization")
    return LdcModel(classes, priors, means, np.linalg.inv(pooled))


def ldc_decision(model: LdcModel, x) -> np.ndarray:
    """Discriminant values 2 ln P(class) - Mahalanobis^2, one row per query."""
    q, _ = _as_query(x, model.means.shape[1])
    scores = np.empty((q.shape[0], model.classes.size))
    for i in range(model.classes.size):
        diff = q - model.means[i]
        scores[:, i] = 2.0 * np.log(model.priors[i]) - np.einsum(
            "ij,jk,ik->i", diff, model.cov_inv, diff
        )
    return scores


def ldc_predict(model: LdcModel, x):
    q, single = _as_query(x, model.means.shape[1])
    picks = model.classes[np.argmax(ldc_decision(model, q), axis=1)]
    return picks[0] if single else picks


# ---------------------------------------------------------------------------
# k nearest neighbors


@dataclass(frozen=True, eq=False)
class KnnModel:
    vectors: np.ndarray
    labels: np.ndarray
    classes: np.ndarray
    k: int


def knn_train(vectors, labels, k: int) -> KnnModel:
    X, y = _as_matrix_labels(vectors, labels)
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k {k} outside 1..{X.shape[0]}")
    return KnnModel(X, y, np.unique(y), k)


def knn_predict(model: KnnModel, x):
    """Majority label among the k nearest training rows.

    Equal distances prefer the lower training index; vote ties prefer the
    smallest class.
    """
    q, single = _as_query(x, model.vectors.shape[1])
    out = np.empty(q.shape[0], dtype=model.labels.dtype)
    for row in range(q.shape[0]):
        d2 = np.einsum("ij,ij->i", model.vectors - q[row], model.vectors - q[row])
        nearest = np.argsort(d2, kind="stable")[: model.k]
        votes = np.array([np.sum(model.labels[nearest] == c) for c in model.classes])
        out[row] = model.classes[np.argmax(votes)]
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Parzen probabilistic neural network


@dataclass(frozen=True, eq=False)
class PnnModel:
    patterns: np.ndarray  # unit-normalized rows
    labels: np.ndarray
    classes: np.ndarray
    sigma: float


def pnn_train(vectors, labels, sigma: float = 0.1) -> PnnModel:
    """Store every training vector scaled to unit length."""
    X, y = _as_matrix_labels(vectors, labels)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero vectors cannot be unit-normalized")
    return PnnModel(X / norms[:, None], y, np.unique(y), sigma)


def pnn_predict(model: PnnModel, x, return_scores: bool = False):
    """Class with the largest summed kernel activation exp((net-1)/sigma^2).

    The decision is evaluated in log space so very small sigma cannot
    underflow it; reported scores are rescaled by a common positive factor
    for the same reason (their ratios are unchanged).
    """
    q, single = _as_query(x, model.patterns.shape[1])
    norms = np.linalg.norm(q, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero query cannot be normalized")
    q = q / norms[:, None]
    nets = q @ model.patterns.T
    log_activations = (nets - 1.0) / model.sigma**2

    picks = np.empty(q.shape[0], dtype=model.labels.dtype)
    scores = np.empty((q.shape[0], model.classes.size))
    for row in range(q.shape[0]):
        log_scores = np.empty(model.classes.size)
        for i, c in enumerate(model.classes):
            member = log_activations[row, model.labels == c]
            peak = member.max()
            log_scores[i] = peak + np.log(np.sum(np.exp(member - peak)))
        picks[row] = model.classes[np.argmax(log_scores)]
        scores[row] = np.exp(log_scores - log_scores.max())
    if single:
        return (picks[0], scores[0]) if return_scores else picks[0]
    return (picks, scores) if return_scores else picks


# ---------------------------------------------------------------------------
# Support vector machine, sequential minimal optimization


@dataclass(frozen=True)
class KernelSpec:
    """linear | polynomial (optionally homogeneous) | rbf | tanh.

    ``gamma`` defaults to 1/n_features when unset; the tanh kernel is not
    positive semidefinite, so SMO is not guaranteed to converge with it.
    """

    kind: str = "rbf"
    degree: int = 3
    homogeneous: bool = False
    gamma: float | None = None
    scale: float = 1.0
    offset: float = -1.0

    def __post_init__(self):
        if self.kind not in ("linear", "polynomial", "rbf", "tanh"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "polynomial" and self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")


def kernel_matrix(spec: KernelSpec, a, b) -> np.ndarray:
    A = np.atleast_2d(np.asarray(a, dtype=np.float64))
    B = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if spec.kind == "linear":
        return A @ B.T
    if spec.kind == "polynomial":
        gram = A @ B.T
        return gram**spec.degree if spec.homogeneous else (gram + 1.0) ** spec.degree
    if spec.kind == "rbf":
        gamma = spec.gamma if spec.gamma is not None else 1.0 / A.shape[1]
        sq = (
            np.einsum("ij,ij->i", A, A)[:, None]
            + np.einsum("ij,ij->i", B, B)[None, :]
            - 2.0 * (A @ B.T)
        )
        return np.exp(-gamma * np.maximum(sq, 0.0))
    return np.tanh(spec.scale * (A @ B.T) + spec.offset)


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Binary SVM state: support vectors with signed dual coefficients."""

    kernel: KernelSpec
    c: float
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i for each support vector
    support_indices: np.ndarray  # rows of the training set that are SVs
    bias: float
    n_train: int
    sweeps: int


def svm_margin(model: SvmModel, x):
    """Decision value sum(alpha_i y_i k(sv_i, x)) + bias."""
    q, single = _as_query(x, model.support_vectors.shape[1])
    if model.support_vectors.shape[0] == 0:
        margins = np.full(q.shape[0], model.bias)
    else:
        margins = kernel_matrix(model.kernel, q, model.support_vectors) @ model.dual_coef + model.bias
    return float(margins[0]) if single else margins


def svm_train_smo(
    vectors,
    labels,
    kernel: KernelSpec = KernelSpec(),
    c: float = 1.0,
    tol: float = 1e-3,
    max_passes: int = 5,
    seed: int = 0,
    max_sweeps: int = 2000,
) -> SvmModel:
    """Solve the soft-margin dual with simplified SMO (random second index).

    Sweeps over KKT-violating multipliers, solving each two-variable
    subproblem in closed form with box clipping, until ``max_passes``
    consecutive sweeps change nothing. Labels must be -1/+1.
    """
    X, y = _as_matrix_labels(vectors, labels)
    y = y.astype(np.float64)
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise ValueError("labels must contain both -1 and +1 and nothing else")
    if c <= 0 or tol <= 0:
        raise ValueError("C and tol must be positive")
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    K = kernel_matrix(kernel, X, X)

    alpha = np.zeros(n)
    bias = 0.0
    cache = np.zeros(n)  # K @ (alpha * y), maintained incrementally
    # update arithmetic leaves machine-epsilon residue on multipliers that
    # belong exactly at a box bound; treat those as at the bound
    snap = 1e-12 * max(1.0, c)
    clean_passes = 0
    sweeps = 0
    while clean_passes < max_passes:
        if sweeps >= max_sweeps:
            violations = _kkt_violation_count(y, alpha, cache + bias, c, tol)
            raise ConvergenceError(
                f"no convergence after {sweeps} sweeps: "
                f"{violations} of {n} points violate KKT at tol={tol} "
                f"(kernel={kernel.kind}; a non-PSD kernel may admit no solution)"
            )
        sweeps += 1
        changed = 0
        for i in range(n):
            err_i = cache[i] + bias - y[i]
            if not (
                (y[i] * err_i < -tol and alpha[i] < c - snap)
                or (y[i] * err_i > tol and alpha[i] > snap)
            ):
                continue
            # try partners in random order until one admits a real step
            for j in rng.permutation(n):
                j = int(j)
                if j == i:
                    continue
                err_j = cache[j] + bias - y[j]
                a_i_old, a_j_old = alpha[i], alpha[j]
                if y[i] == y[j]:
                    lo, hi = max(0.0, a_i_old + a_j_old - c), min(c, a_i_old + a_j_old)
                else:
                    lo, hi = max(0.0, a_j_old - a_i_old), min(c, c + a_j_old - a_i_old)
                if lo == hi:
                    continue
                eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
                if eta >= 0.0:
                    continue
                a_j = a_j_old - y[j] * (err_i - err_j) / eta
                a_j = min(hi, max(lo, a_j))
                if abs(a_j - a_j_old) < 1e-5:
                    continue
                a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j)
                alpha[i], alpha[j] = a_i, a_j
                b1 = bias - err_i - y[i] * (a_i - a_i_old) * K[i, i] - y[j] * (a_j - a_j_old) * K[i, j]
                b2 = bias - err_j - y[i] * (a_i - a_i_old) * K[i, j] - y[j] * (a_j - a_j_old) * K[j, j]
                if 0.0 < a_i < c:
                    bias = b1
                elif 0.0 < a_j < c:
                    bias = b2
                else:
                    bias = (b1 + b2) / 2.0
                cache += y[i] * (a_i - a_i_old) * K[i] + y[j] * (a_j - a_j_old) * K[j]
                changed += 1
                break
        clean_passes = clean_passes + 1 if changed == 0 else 0

    alpha[alpha < snap] = 0.0
    alpha[alpha > c - snap] = c
    cache = K @ (alpha * y)
    # the dual fixes the bias only up to an interval; clamp the running
    # value into the KKT-feasible range (empty range = no convergence)
    b_lo, b_hi = _bias_interval(y, alpha, cache, c, tol)
    if b_lo <= b_hi:
        bias = min(max(bias, b_lo), b_hi)

    violations = _kkt_violation_count(y, alpha, cache + bias, c, tol)
    if violations:
        # Sweeps stalled (every violating pair was unusable) before meeting
        # the optimality conditions; with a non-PSD kernel this is expected.
        raise ConvergenceError(
            f"stalled after {sweeps} sweeps with {violations} of {n} KKT "
            f"violations at tol={tol} (kernel={kernel.kind})"
        )

    support = np.flatnonzero(alpha > 0.0)
    return SvmModel(
        kernel,
        c,
        X[support].copy(),
        (alpha * y)[support],
        support,
        float(bias),
        n,
        sweeps,
    )


def _bias_interval(y, alpha, g, c, tol) -> tuple[float, float]:
    """Bias range satisfying every point's KKT case, given margins-sans-bias g.

    alpha=0 wants y(g+b) >= 1-tol, alpha=C wants y(g+b) <= 1+tol, and free
    multipliers want both; each inequality is a one-sided bound on b whose
    direction depends on the label sign.
    """
    lo, hi = -np.inf, np.inf
    for i in range(y.size):
        lower_margin = alpha[i] > 0.0  # y(g+b) <= 1+tol applies
        raise_margin = alpha[i] < c  # y(g+b) >= 1-tol applies
        if y[i] > 0:
            if raise_margin:
                lo = max(lo, (1.0 - tol) - g[i])
            if lower_margin:
                hi = min(hi, (1.0 + tol) - g[i])
        else:
            if raise_margin:
                hi = min(hi, -(1.0 - tol) - g[i])
            if lower_margin:
                lo = max(lo, -(1.0 + tol) - g[i])
    return lo, hi


def _kkt_violation_count(y, alpha, f, c, tol) -> int:
    ym = y * f
    v_zero = (alpha <= 0.0) & (ym < 1.0 - tol)
    v_box = (alpha >= c) & (ym > 1.0 + tol)
    v_mid = (alpha > 0.0) & (alpha < c) & (np.abs(ym - 1.0) > tol)
    return int(np.count_nonzero(v_zero | v_box | v_mid))


def svm_full_alphas(model: SvmModel) -> np.ndarray:
    """Per-training-row multipliers (zero off the support set)."""
    alphas = np.zeros(model.n_train)
    alphas[model.support_indices] = np.abs(model.dual_coef)
    return alphas


def svm_kkt_ok(model: SvmModel, vectors, labels, tol: float) -> bool:
    """Check every training point's KKT case within tol."""
    X, y = _as_matrix_labels(vectors, labels)
    margins = svm_margin(model, X)
    alphas = svm_full_alphas(model)
    return _kkt_violation_count(y.astype(float), alphas, margins, model.c, tol) == 0


@dataclass(frozen=True, eq=False)
class MulticlassSvm:
    scheme: str  # "one_vs_all" | "one_vs_one"
    classes: np.ndarray
    models: tuple[SvmModel, ...]
    pairs: tuple[tuple[int, int], ...]  # class-index pairs; empty for one_vs_all


def svm_multiclass_train(
    vectors,
    labels,
    kernel: KernelSpec = KernelSpec(),
    c: float = 1.0,
    scheme: str = "one_vs_all",
    **smo_kwargs,
) -> MulticlassSvm:
    X, y = _as_matrix_labels(vectors, labels)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("need at least two classes")
    models = []
    pairs: list[tuple[int, int]] = []
    if scheme == "one_vs_all":
        for cls in classes:
            target = np.where(y == cls, 1.0, -1.0)
            models.append(svm_train_smo(X, target, kernel, c, **smo_kwargs))
    elif scheme == "one_vs_one":
        for a in range(classes.size):
            for b in range(a + 1, classes.size):
                mask = (y == classes[a]) | (y == classes[b])
                target = np.where(y[mask] == classes[a], 1.0, -1.0)
                models.append(svm_train_smo(X[mask], target, kernel, c, **smo_kwargs))
                pairs.append((a, b))
    else:
        raise ValueError(f"unknown multiclass scheme {scheme!r}")
    return MulticlassSvm(scheme, classes, tuple(models), tuple(pairs))


def svm_multiclass_predict(model: MulticlassSvm, x):
    """One-vs-all takes the winner's largest margin; one-vs-one counts
    max-wins votes and breaks vote ties by the summed signed margins."""
    width = model.models[0].support_vectors.shape[1]
    q, single = _as_query(x, width)
    n = q.shape[0]
    if model.scheme == "one_vs_all":
        margins = np.column_stack([svm_margin(m, q) for m in model.models])
        picks = model.classes[np.argmax(margins, axis=1)]
    else:
        votes = np.zeros((n, model.classes.size))
        sums = np.zeros((n, model.classes.size))
        for (a, b), m in zip(model.pairs, model.models):
            margin = svm_margin(m, q)
            favors_a = margin > 0
            votes[favors_a, a] += 1
            votes[~favors_a, b] += 1
            sums[:, a] += margin
            sums[:, b] -= margin
        picks = np.empty(n, dtype=model.classes.dtype)
        for row in range(n):
            best = np.flatnonzero(votes[row] == votes[row].max())
            winner = best[np.argmax(sums[row, best])] if best.size > 1 else best[0]
            picks[row] = model.classes[winner]
    return picks[0] if single else picks


# ---------------------------------------------------------------------------
# Class-centroid classifier (the embedded-target port)


@dataclass(frozen=True, eq=False)
class CentroidModel:
    classes: np.ndarray
    centroids: np.ndarray
    rounded: bool


def centroid_fit(vectors, labels, round_means: bool = False) -> CentroidModel:
    """Per-class arithmetic means, optionally rounded to integers like the
    lookup table burned into the microcontroller build."""
    X, y = _as_matrix_labels(vectors, labels)
    classes = np.unique(y)
    centroids = np.vstack([X[y == c].mean(axis=0) for c in classes])
    if round_means:
        centroids = np.round(centroids)
    return CentroidModel(classes, centroids, round_means)


def centroid_predict(model: CentroidModel, x):
    q, single = _as_query(x, model.centroids.shape[1])
    d2 = np.empty((q.shape[0], model.classes.size))
    for i in range(model.classes.size):
        diff = q - model.centroids[i]
        d2[:, i] = np.einsum("ij,ij->i", diff, diff)
    picks = model.classes[np.argmin(d2, axis=1)]
    return picks[0] if single else picks
