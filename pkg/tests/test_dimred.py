import numpy as np
import pytest

from emgrasp.dimred import (
    pca_fit,
    pca_inverse,
    pca_take,
    pca_transform,
    relief,
    relief_e,
    select_above,
    select_top,
    standardize_apply,
    standardize_fit,
)


class TestStandardizer:
    def test_single_column_exact(self):
        state = standardize_fit(np.array([[1.0], [2.0], [3.0]]))
        out = standardize_apply(state, np.array([[1.0], [2.0], [3.0]]))
        assert np.allclose(out[:, 0], [-1.0, 0.0, 1.0])

    def test_constant_column_dropped_everywhere(self):
        train = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        state = standardize_fit(train)
        assert state.dropped == (1,)
        test = np.array([[10.0, 99.0]])
        assert standardize_apply(state, test).shape == (1, 1)

    def test_train_maps_to_zero_mean_unit_std(self):
        rng = np.random.default_rng(0)
        train = rng.normal(5, 3, size=(40, 6))
        state = standardize_fit(train)
        out = standardize_apply(state, train)
        assert np.all(np.abs(out.mean(axis=0)) < 1e-12)
        assert np.allclose(out.std(axis=0, ddof=1), 1.0)

    def test_width_mismatch(self):
        state = standardize_fit(np.ones((3, 2)) * np.arange(3)[:, None])
        with pytest.raises(ValueError):
            standardize_apply(state, np.ones((2, 3)))


class TestPca:
    def test_diagonal_line_axis_with_sign_fix(self):
        pts = np.array([[-2.0, -2.0], [-1.0, -1.0], [1.0, 1.0], [2.0, 2.0]])
        model = pca_fit(pts, 2)
        assert np.allclose(model.components[:, 0], [1 / np.sqrt(2), 1 / np.sqrt(2)])

    def test_m1_projection_tracks_position_on_line(self):
        pts = np.array([[-2.0, -2.0], [-1.0, -1.0], [1.0, 1.0], [2.0, 2.0]])
        model = pca_fit(pts, 1)
        z = pca_transform(model, pts)[:, 0]
        # brute-force oracle: dot each centered point with the unit diagonal
        want = (pts - pts.mean(axis=0)) @ np.array([1.0, 1.0]) / np.sqrt(2)
        assert np.allclose(z, want)

    def test_isotropic_data_contract(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((400, 3))
        model = pca_fit(X, 3)
        E = model.components
        assert np.max(np.abs(E.T @ E - np.eye(3))) <= 1e-10
        assert np.all(np.diff(model.eigenvalues) <= 1e-12)

    def test_orthonormality_and_trace_identity(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((60, 10)) @ rng.standard_normal((10, 10))
        model = pca_fit(X, 10)
        E = model.components
        assert np.max(np.abs(E.T @ E - np.eye(10))) <= 1e-10
        cov = np.cov(X, rowvar=False)
        assert model.eigenvalues.sum() == pytest.approx(np.trace(cov), rel=1e-8)
        assert np.all(model.eigenvalues >= -1e-10)

    def test_full_rank_round_trip(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((30, 7))
        model = pca_fit(X, 7)
        back = pca_inverse(model, pca_transform(model, X))
        assert np.max(np.abs(back - X)) <= 1e-8

    def test_projected_training_covariance_is_diagonal_descending(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((80, 6)) * np.array([5, 4, 3, 2, 1, 0.5])
        model = pca_fit(X, 6)
        Z = pca_transform(model, X)
        cov = np.cov(Z, rowvar=False)
        off = cov - np.diag(np.diag(cov))
        assert np.max(np.abs(off)) <= 1e-8
        assert np.all(np.diff(np.diag(cov)) <= 1e-8)

    def test_mean_vector_projects_to_zero(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((20, 4))
        model = pca_fit(X, 2)
        assert np.allclose(pca_transform(model, model.mean), 0.0)

    def test_reconstruction_error_monotone_in_m(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((50, 8)) @ rng.standard_normal((8, 8))
        full = pca_fit(X, 8)
        errs = []
        for m in range(1, 9):
            model = pca_take(full, m)
            back = pca_inverse(model, pca_transform(model, X))
            errs.append(np.sum((back - X) ** 2))
        assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))

    def test_bad_retained_count(self):
        X = np.random.default_rng(7).standard_normal((10, 3))
        with pytest.raises(ValueError):
            pca_fit(X, 0)
        with pytest.raises(ValueError):
            pca_fit(X, 4)


def labeled_informative(rng, n_per_class=10, classes=2, noise_features=5):
    """Feature 0 equals the class label exactly; the rest is pure noise."""
    rows, labels = [], []
    for c in range(classes):
        block = rng.standard_normal((n_per_class, noise_features))
        rows.append(np.hstack([np.full((n_per_class, 1), float(c)), block]))
        labels.extend([c] * n_per_class)
    return np.vstack(rows), np.array(labels)


class TestRelief:
    def test_informative_feature_wins_over_seeds(self):
        wins = 0
        for seed in range(100):
            X, y = labeled_informative(np.random.default_rng(1000 + seed))
            w = relief(X, y, m=200, seed=seed).weights
            wins += int(np.argmax(w) == 0)
        assert wins >= 95

    def test_duplicated_column_gets_equal_weight(self):
        rng = np.random.default_rng(8)
        X, y = labeled_informative(rng)
        X2 = np.hstack([X, X[:, [0]]])
        w = relief(X2, y, m=300, seed=3).weights
        assert w[0] == w[-1]

    def test_identical_instances_have_zero_weights(self):
        X = np.ones((10, 4))
        y = np.array([0] * 5 + [1] * 5)
        assert np.all(relief(X, y, m=50, seed=0).weights == 0.0)

    def test_binary_requires_two_classes(self):
        X = np.random.default_rng(9).standard_normal((6, 2))
        with pytest.raises(ValueError):
            relief(X, np.zeros(6, dtype=int), m=10)

    def test_uniform_rescaling_leaves_weights_unchanged(self):
        # scaling every feature by the same c > 0 provably preserves
        # neighbor order, and diff normalizes by the scaled range
        rng = np.random.default_rng(10)
        X, y = labeled_informative(rng, classes=3)
        a = relief_e(X, y, m=150, seed=5).weights
        b = relief_e(7.5 * X, y, m=150, seed=5).weights
        assert np.max(np.abs(a - b)) <= 1e-12

    def test_singleton_class_draw_is_skipped(self):
        X = np.array([[0.0, 1.0], [5.0, 2.0], [5.1, 1.5], [4.9, 2.2]])
        y = np.array([0, 1, 1, 1])
        w = relief(X, y, m=40, seed=2)
        assert np.all(np.isfinite(w.weights))


class TestReliefE:
    def test_two_class_reduction_is_bitwise(self):
        rng = np.random.default_rng(11)
        X, y = labeled_informative(rng)
        a = relief(X, y, m=120, seed=7).weights
        b = relief_e(X, y, m=120, seed=7).weights
        assert np.array_equal(a, b)

    def test_six_class_informative_feature_ranks_first(self):
        wins = 0
        for seed in range(40):
            X, y = labeled_informative(
                np.random.default_rng(2000 + seed), n_per_class=8, classes=6, noise_features=8
            )
            w = relief_e(X, y, m=300, seed=seed).weights
            wins += int(select_top(w, 1)[0] == 0)
        assert wins >= 38

    def test_weights_concentrate_as_m_grows(self):
        X, y = labeled_informative(np.random.default_rng(12), classes=3)
        small = np.array([relief_e(X, y, m=60, seed=s).weights for s in range(12)])
        large = np.array([relief_e(X, y, m=600, seed=s).weights for s in range(12)])
        assert large.std(axis=0).mean() < 0.7 * small.std(axis=0).mean()


class TestSelect:
    def test_ranked(self):
        assert select_top([3.0, 1.0, 2.0], 2) == [0, 2]

    def test_tie_break_by_index(self):
        assert select_top([1.0, 1.0, 1.0], 2) == [0, 1]

    def test_full_selection_is_permutation(self):
        w = [0.5, 2.0, 1.0, 2.0]
        assert sorted(select_top(w, 4)) == [0, 1, 2, 3]
        assert select_top(w, 4) == [1, 3, 2, 0]

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            select_top([1.0], 2)
        with pytest.raises(ValueError):
            select_top([1.0], 0)

    def test_threshold_mode(self):
        assert select_above([0.1, 0.9, 0.5], 0.5) == [1, 2]
