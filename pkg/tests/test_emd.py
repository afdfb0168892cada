import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from emgrasp.emd import (
    Decomposition,
    MonotonicSignalError,
    SiftConfig,
    count_zero_crossings,
    emd,
    envelope_mean,
    find_extrema,
    hilbert_track,
    is_imf,
    sift_one_imf,
)

FS = 500.0


def tone(freq, seconds=1.0, amp=1.0, fs=FS):
    t = np.arange(int(seconds * fs)) / fs
    return amp * np.sin(2 * np.pi * freq * t)


def two_tone(seconds=1.0, fs=FS):
    return tone(50, seconds, 1.0, fs) + tone(5, seconds, 0.5, fs)


def corr(a, b):
    return np.corrcoef(a, b)[0, 1]


class TestFindExtrema:
    def test_single_oscillation(self):
        mx, mn = find_extrema(np.array([0.0, 1.0, 0.0, -1.0, 0.0]))
        assert mx.tolist() == [1]
        assert mn.tolist() == [3]

    def test_monotone_ramp(self):
        mx, mn = find_extrema(np.linspace(0, 1, 40))
        assert mx.size == 0 and mn.size == 0

    def test_sine_counts_match_sign_change_oracle(self):
        x = tone(5)
        mx, mn = find_extrema(x)
        # oracle: enumerate sign changes of the first difference
        d = np.sign(np.diff(x))
        nz = np.flatnonzero(d)
        flips = np.flatnonzero(d[nz][1:] != d[nz][:-1])
        n_max_oracle = int(np.sum(d[nz][flips] > 0))
        n_min_oracle = int(np.sum(d[nz][flips] < 0))
        assert (mx.size, mn.size) == (n_max_oracle, n_min_oracle) == (5, 5)

    def test_plateau_reports_midpoint_once(self):
        mx, mn = find_extrema(np.array([0.0, 2.0, 2.0, 2.0, 0.0, -1.0, -1.0, 0.0]))
        assert mx.tolist() == [2]
        assert mn.tolist() == [5]

    @given(arrays(np.float64, st.integers(3, 120), elements=st.floats(-10, 10)))
    @settings(max_examples=80)
    def test_extrema_are_interior_and_strictly_extremal(self, x):
        mx, mn = find_extrema(x)
        for i in mx:
            assert 0 < i < len(x) - 1
            left = x[:i][::-1]
            right = x[i + 1 :]
            assert left[left != x[i]].size == 0 or left[left != x[i]][0] < x[i]
            assert right[right != x[i]].size == 0 or right[right != x[i]][0] < x[i]
        for i in mn:
            assert 0 < i < len(x) - 1


class TestEnvelopeMean:
    def test_pure_sine_interior_mean_near_zero(self):
        x = tone(10, seconds=2.0)
        m = envelope_mean(x)
        interior = m[100:-100]
        assert np.max(np.abs(interior)) < 0.02

    def test_constant_shift_moves_mean_exactly(self):
        x = two_tone()
        m0 = envelope_mean(x)
        m7 = envelope_mean(x + 7.0)
        assert np.allclose(m7 - m0, 7.0, atol=1e-9)

    def test_two_tone_mean_tracks_slow_component(self):
        x = two_tone(seconds=2.0)
        slow = tone(5, seconds=2.0, amp=0.5)
        m = envelope_mean(x)
        assert corr(m[100:-100], slow[100:-100]) > 0.95

    def test_insufficient_extrema_signals_monotonic(self):
        with pytest.raises(MonotonicSignalError):
            envelope_mean(np.linspace(0, 1, 50))
        with pytest.raises(MonotonicSignalError):
            envelope_mean(np.array([0.0, 1.0, 0.0, -1.0, 0.0]))  # 1 max, 1 min


class TestSift:
    def test_pure_sine_is_near_fixed_point(self):
        x = tone(25, seconds=1.0)
        out = sift_one_imf(x, SiftConfig())
        assert np.linalg.norm(out - x) / np.linalg.norm(x) < 0.01

    def test_single_iteration_is_one_mean_removal(self):
        x = two_tone()
        out = sift_one_imf(x, SiftConfig(fixed_sift_iters=1))
        assert np.array_equal(out, x - envelope_mean(x))

    def test_two_tone_first_imf_is_fast_tone(self):
        x = two_tone(seconds=2.0)
        fast = tone(50, seconds=2.0)
        out = sift_one_imf(x, SiftConfig())
        assert corr(out[100:-100], fast[100:-100]) > 0.95

    def test_monotone_raises(self):
        with pytest.raises(MonotonicSignalError):
            sift_one_imf(np.linspace(0, 1, 50), SiftConfig())


class TestEmd:
    def test_monotone_input_yields_no_imfs(self):
        x = np.linspace(-1, 1, 80)
        dec = emd(x)
        assert dec.imfs == ()
        assert np.array_equal(dec.residual, x)

    def test_reconstruction_identity_random(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            x = rng.standard_normal(150)
            dec = emd(x, SiftConfig(max_modes=3, fixed_sift_iters=10))
            err = np.max(np.abs(x - dec.reconstruct()))
            assert err <= 1e-9 * np.max(np.abs(x))

    def test_two_tone_recovers_components(self):
        x = two_tone(seconds=2.0)
        dec = emd(x, SiftConfig(max_modes=2))
        assert len(dec.imfs) == 2
        fast = tone(50, seconds=2.0)
        slow = tone(5, seconds=2.0, amp=0.5)
        sl = slice(100, -100)
        assert np.linalg.norm(dec.imfs[0][sl] - fast[sl]) / np.linalg.norm(fast[sl]) < 0.15
        assert np.linalg.norm(dec.imfs[1][sl] - slow[sl]) / np.linalg.norm(slow[sl]) < 0.15

    def test_max_modes_caps_extraction(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(400)
        assert len(emd(x, SiftConfig(max_modes=1)).imfs) == 1

    def test_zero_crossing_count_nonincreasing_over_modes(self):
        x = tone(80, 2.0) + 0.7 * tone(17, 2.0) + 0.4 * tone(3, 2.0)
        dec = emd(x, SiftConfig(max_modes=3))
        counts = [count_zero_crossings(imf) for imf in dec.imfs]
        assert counts == sorted(counts, reverse=True)

    def test_positive_scaling_equivariance(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal(200)
        c = 3.7
        base = emd(x)
        scaled = emd(c * x)
        assert len(base.imfs) == len(scaled.imfs)
        for a, b in zip(base.imfs, scaled.imfs):
            assert np.max(np.abs(c * a - b)) <= 1e-9 * max(1.0, np.max(np.abs(c * a)))

    def test_too_short_input_rejected(self):
        with pytest.raises(ValueError):
            emd(np.array([1.0, 2.0, 1.0]))

    @given(arrays(np.float64, st.integers(16, 200), elements=st.floats(-100, 100)))
    @settings(max_examples=60, deadline=None)
    def test_reconstruction_property(self, x):
        dec = emd(x, SiftConfig(max_modes=3, fixed_sift_iters=10))
        scale = max(np.max(np.abs(x)), 1e-30)
        assert np.max(np.abs(x - dec.reconstruct())) <= 1e-9 * scale

    def test_most_emitted_imfs_pass_the_relaxed_check(self):
        # fixed-count sifting is approximate by design: demand >=90% over
        # randomized two-tone mixtures rather than all
        rng = np.random.default_rng(21)
        total = passed = 0
        for _ in range(60):
            f_fast = rng.uniform(40, 80)
            f_slow = rng.uniform(3, 8)
            t = np.arange(600) / FS
            x = np.sin(2 * np.pi * f_fast * t + rng.uniform(0, 6.28)) + rng.uniform(
                0.3, 0.7
            ) * np.sin(2 * np.pi * f_slow * t + rng.uniform(0, 6.28))
            dec = emd(x, SiftConfig(max_modes=2))
            for imf in dec.imfs:
                total += 1
                passed += bool(is_imf(imf))
        assert passed / total >= 0.9


class TestIsImf:
    def test_pure_sine(self):
        assert is_imf(tone(20)).ok

    def test_sine_with_large_offset_fails_envelope_condition(self):
        check = is_imf(tone(20) + 5.0)
        assert not check.ok
        assert check.envelope_ratio > 0.05

    def test_ramp_fails(self):
        assert not is_imf(np.linspace(-1, 1, 50)).ok


class TestHilbertTrack:
    def test_tone_frequency(self):
        x = tone(50)
        tr = hilbert_track(x, FS)
        interior = tr.inst_freq[50:-50]
        assert 49.0 <= np.median(interior) <= 51.0
        assert interior.std() < 1.0

    def test_tone_amplitude_constant(self):
        tr = hilbert_track(tone(50, amp=2.0), FS)
        interior = tr.amplitude[50:-50]
        assert np.all(np.abs(interior - 2.0) < 0.04)

    def test_amplitude_scaling(self):
        x = tone(35)
        a = hilbert_track(x, FS)
        b = hilbert_track(4.0 * x, FS)
        assert np.max(np.abs(b.amplitude - 4.0 * a.amplitude)) < 1e-9
        assert np.max(np.abs(b.inst_freq - a.inst_freq)) < 1e-9

    def test_short_input_rejected(self):
        with pytest.raises(ValueError):
            hilbert_track(np.ones(5), FS)


class TestDecomposition:
    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Decomposition((np.zeros(5),), np.zeros(4), 5)
