import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from emgrasp.emd import SiftConfig
from emgrasp.features import (
    FeatureSchema,
    assemble_embedded,
    assemble_part_a,
    ar_coeffs,
    concat_datasets,
    embedded_schema,
    featurize_trial,
    freq_features,
    if_stats,
    part_a_schema,
    power_spectrum,
    raw_schema,
    rms,
    schema_for,
    time_features,
)
from emgrasp.signals import MovementClass, SampledSignal, Trial, WindowingConfig

FS = 500.0


def sig(values, fs=FS):
    return SampledSignal(np.asarray(values, dtype=float), fs)


# literal evaluations of the defining formulas live beside the other oracles
from _oracles import brute_time_features  # noqa: E402


class TestTimeFeatures:
    def test_alternating_window(self):
        tf = time_features([1, -1, 1, -1], wamp_threshold=10, zc_threshold=0)
        assert tf.mean_abs == 1.0
        assert tf.variance == pytest.approx(4 / 3)
        assert tf.zero_crossings == 3
        assert tf.slope_sign_changes == 2
        assert tf.waveform_length == 6.0
        assert tf.wamp == 0
        assert tf.skewness == 0.0
        assert tf.kurtosis == 1.0

    def test_all_zero_window(self):
        tf = time_features(np.zeros(20))
        assert tf.as_array().tolist() == [0.0] * 8

    def test_sign_flip_symmetry(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(100)
        a = time_features(x, 0.5, 0.1)
        b = time_features(-x, 0.5, 0.1)
        assert a.mean_abs == b.mean_abs
        assert a.variance == b.variance
        assert a.zero_crossings == b.zero_crossings
        assert a.slope_sign_changes == b.slope_sign_changes
        assert a.waveform_length == b.waveform_length
        assert a.wamp == b.wamp
        assert a.kurtosis == pytest.approx(b.kurtosis)
        assert a.skewness == pytest.approx(-b.skewness)

    def test_too_short(self):
        with pytest.raises(ValueError):
            time_features([1.0, 2.0])

    @given(
        arrays(
            np.float64,
            st.integers(3, 80),
            elements=st.floats(-100, 100).filter(lambda v: v == 0 or abs(v) > 1e-6),
        ),
        st.floats(0, 20),
        st.floats(0, 5),
    )
    @settings(max_examples=100)
    def test_matches_literal_formulas(self, x, wamp_thr, zc_thr):
        got = time_features(x, wamp_thr, zc_thr).as_array()
        want = brute_time_features(x, wamp_thr, zc_thr)
        assert np.allclose(got, want, rtol=1e-10, atol=1e-12)

    @given(arrays(np.float64, st.integers(3, 60), elements=st.floats(-50, 50)))
    @settings(max_examples=60)
    def test_counts_nonincreasing_in_thresholds(self, x):
        for lo, hi in [(0.0, 1.0), (1.0, 5.0)]:
            a = time_features(x, wamp_threshold=lo, zc_threshold=lo)
            b = time_features(x, wamp_threshold=hi, zc_threshold=hi)
            assert b.wamp <= a.wamp
            assert b.zero_crossings <= a.zero_crossings

    def test_dc_shift_behavior(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal(80)
        base = time_features(x).as_array()
        shifted = time_features(x + 3.5).as_array()
        # shift-invariant by construction: SSC, WL, kurtosis, skewness
        for idx in (3, 4, 6, 7):
            assert shifted[idx] == pytest.approx(base[idx], rel=1e-9)
        # the rest follow their formulas on the shifted samples
        assert np.allclose(shifted, brute_time_features(x + 3.5, 10.0, 0.0), rtol=1e-10)


class TestRms:
    def test_two_elements(self):
        assert rms([3.0, 4.0]) == pytest.approx(np.sqrt(12.5))

    def test_constant(self):
        assert rms(np.full(17, -2.5)) == pytest.approx(2.5)

    def test_unit_sine_whole_periods(self):
        t = np.arange(1000) / FS
        assert rms(np.sin(2 * np.pi * 10 * t)) == pytest.approx(1 / np.sqrt(2), abs=1e-3)


class TestArCoeffs:
    def test_white_noise_order1_near_zero(self):
        rng = np.random.default_rng(0)
        a = ar_coeffs(rng.standard_normal(10000), 1)
        assert abs(a[0]) < 0.1

    def test_ar1_process_recovers_negated_pole(self):
        rng = np.random.default_rng(1)
        n = 20000
        x = np.zeros(n)
        w = rng.standard_normal(n)
        for i in range(1, n):
            x[i] = 0.9 * x[i - 1] + w[i]
        a = ar_coeffs(x, 1)
        assert a[0] == pytest.approx(-0.9, abs=0.05)

    def test_order1_matches_direct_yule_walker(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(500)
        n = len(x)
        r0 = np.dot(x, x) / n
        r1 = np.dot(x[:-1], x[1:]) / n
        assert ar_coeffs(x, 1)[0] == pytest.approx(-r1 / r0, abs=1e-12)

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError):
            ar_coeffs(np.zeros(50), 2)

    def test_order_bounds(self):
        with pytest.raises(ValueError):
            ar_coeffs(np.ones(5), 5)


class TestPowerSpectrum:
    def test_pure_tone_concentrates_in_one_bin(self):
        n = 256
        t = np.arange(n) / FS
        x = np.sin(2 * np.pi * (8 * FS / n) * t)  # exactly bin 8
        freqs, powers = power_spectrum(x, FS)
        non_dc = powers[1:]
        assert non_dc.max() / non_dc.sum() > 0.99
        assert freqs[np.argmax(powers)] == pytest.approx(8 * FS / n)

    def test_parseval_two_sided(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(128)
        full = np.abs(np.fft.fft(x)) ** 2 / len(x)
        assert full.sum() == pytest.approx(np.sum(x * x), rel=1e-9)
        # the one-sided output is the two-sided prefix
        _, powers = power_spectrum(x, FS)
        assert np.allclose(powers, full[: len(powers)])

    def test_zero_signal(self):
        _, powers = power_spectrum(np.zeros(32), FS)
        assert np.all(powers == 0.0)


class TestFreqFeatures:
    def test_point_mass(self):
        freqs = np.array([0.0, 25.0, 50.0, 75.0])
        powers = np.array([0.0, 0.0, 4.0, 0.0])
        ff = freq_features(freqs, powers, peak_halfwidth=1)
        assert ff.fmd == 50.0
        assert ff.fmn == 50.0
        assert ff.psr == 1.0

    def test_two_equal_bins(self):
        freqs = np.array([0.0, 10.0, 20.0, 30.0])
        powers = np.array([0.0, 2.0, 0.0, 2.0])
        ff = freq_features(freqs, powers)
        assert ff.fmn == 20.0
        assert ff.fmd == 10.0  # cumulative reaches half exactly at 10 Hz

    def test_flat_spectrum(self):
        freqs = np.arange(16.0)
        powers = np.full(16, 3.0)
        ff = freq_features(freqs, powers)
        assert ff.mnp == pytest.approx(ff.total_power / 16)

    def test_zero_spectrum_rejected(self):
        with pytest.raises(ValueError):
            freq_features(np.arange(4.0), np.zeros(4))


class TestIfStats:
    def test_constant_sequence(self):
        med, std, kurt = if_stats(np.full(50, 42.0), 0.1)
        assert (med, std, kurt) == (42.0, 0.0, 0.0)

    def test_even_count_uses_lower_middle(self):
        seq = np.concatenate([np.full(100, 40.0), np.full(100, 60.0)])
        med, _, _ = if_stats(seq, 0.0)
        assert med == 40.0

    def test_tone_track(self):
        from emgrasp.emd import hilbert_track

        t = np.arange(500) / FS
        track = hilbert_track(np.sin(2 * np.pi * 50 * t), FS)
        med, std, _ = if_stats(track, 0.1)
        assert 49.0 <= med <= 51.0
        assert std < 1.0

    def test_trim_everything_rejected(self):
        with pytest.raises(ValueError):
            if_stats(np.ones(2), 0.5)


class TestSchemas:
    def test_part_a_width(self):
        for ch in (1, 2, 3):
            assert len(part_a_schema(ch)) == 49 * ch

    def test_subset_schemas(self):
        assert len(raw_schema(2)) == 16
        assert len(schema_for("imf1", 2)) == 16
        assert len(embedded_schema(3)) == 18

    def test_unknown_schema(self):
        with pytest.raises(ValueError):
            schema_for("nope", 2)

    def test_duplicate_slot_names_rejected(self):
        slot = part_a_schema(1).slots[0]
        with pytest.raises(ValueError):
            FeatureSchema("bad", 1, (slot, slot))


class TestAssemblePartA:
    def test_two_channels_give_98(self):
        rng = np.random.default_rng(7)
        chans = [sig(rng.standard_normal(150)) for _ in range(2)]
        vec = assemble_part_a(chans, SiftConfig())
        assert vec.values.shape == (98,)

    def test_zero_window_is_all_zero(self):
        vec = assemble_part_a([sig(np.zeros(150))], SiftConfig())
        assert np.all(vec.values == 0.0)

    def test_duplicate_channel_blocks_equal(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal(150)
        vec = assemble_part_a([sig(x), sig(x)], SiftConfig())
        assert np.array_equal(vec.values[:49], vec.values[49:])

    def test_raw_block_layout_matches_time_features(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal(150)
        vec = assemble_part_a([sig(x)], SiftConfig())
        assert np.allclose(vec.values[:8], time_features(x).as_array())


class TestAssembleEmbedded:
    def test_reference_values(self):
        vec = assemble_embedded([sig([1, -1, 1, -1])])
        want = [1.0, 1.0, (4 / 3) / 100, 0.6, 0.0, np.sqrt(4 / 3)]
        assert np.allclose(vec.values, want, rtol=1e-12)

    def test_zero_signal(self):
        assert np.all(assemble_embedded([sig(np.zeros(30))]).values == 0.0)

    def test_scaling_degrees(self):
        rng = np.random.default_rng(10)
        x = rng.uniform(1, 5, 60)
        base = assemble_embedded([sig(x)]).values
        scaled = assemble_embedded([sig(10 * x)]).values
        # max, iemg, wl/10, std scale linearly; var/100 quadratically; wamp jumps
        assert np.allclose(scaled[[0, 1, 3, 5]], 10 * base[[0, 1, 3, 5]], rtol=1e-12)
        assert scaled[2] == pytest.approx(100 * base[2], rel=1e-12)


class TestFeaturizeTrial:
    def trial(self, n=1200, channels=2, label=MovementClass.TIP):
        rng = np.random.default_rng(11)
        chans = tuple(sig(np.r_[np.zeros(100), rng.standard_normal(n - 100) * 5]) for _ in range(channels))
        return Trial(channels=chans, label=label, subject_id="s1", trial_index=3)

    def cfg(self):
        return WindowingConfig(window_len=150, step=50, tail_trim=100)

    def test_part_a_rows(self):
        trial = self.trial()
        ds = featurize_trial(trial, part_a_schema(2), self.cfg())
        assert ds.X.shape[1] == 98
        assert ds.n_rows > 0
        assert set(ds.labels.tolist()) == {int(MovementClass.TIP)}
        assert all(k == trial.key for k in ds.trial_keys)

    def test_raw_matches_part_a_columns(self):
        trial = self.trial()
        full = featurize_trial(trial, part_a_schema(2), self.cfg())
        raw = featurize_trial(trial, raw_schema(2), self.cfg())
        assert np.allclose(raw.X, full.select_schema(raw_schema(2)).X)

    def test_channel_count_mismatch(self):
        with pytest.raises(ValueError):
            featurize_trial(self.trial(channels=1), part_a_schema(2), self.cfg())

    def test_embedded_single_row(self):
        ds = featurize_trial(self.trial(), embedded_schema(2))
        assert ds.X.shape == (1, 12)

    def test_concat(self):
        a = featurize_trial(self.trial(), raw_schema(2), self.cfg())
        b = featurize_trial(self.trial(), raw_schema(2), self.cfg())
        both = concat_datasets([a, b])
        assert both.n_rows == a.n_rows + b.n_rows
