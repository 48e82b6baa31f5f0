"""
Tests for the synthetic corpus generator.
"""

import numpy as np
import pytest

from acoustics.signal_io import read_manifest
from acoustics.spectral import band_filter, periodogram, welch_psd
from acoustics.synth import (
    BubblePopulation,
    BubbleSpec,
    CorpusConfig,
    LeakScenario,
    bubble_pulse,
    gen_background,
    gen_corpus,
    gen_leak_signal,
    minnaert_frequency,
    plan_corpus
)

FS = 8000


def band_power(samples, fs=FS, lo=150.0, hi=500.0):
    psd = welch_psd(samples, fs, segment_len=2048, segment_overlap=1024)
    fv = band_filter(psd, lo, hi)
    return fv.values.sum() * psd.bin_width


class TestMinnaert:
    """Bubble resonance."""

    def test_three_mm_bubble_near_one_kilohertz(self):
        """A 3.26 mm radius bubble at the surface resonates close to 1 kHz."""
        freq = minnaert_frequency(BubbleSpec(radius=3.26e-3, depth=0.0, rho=1000.0))
        assert freq == pytest.approx(1000.0, rel=0.02)

    def test_inverse_in_radius(self):
        """Halving the radius doubles the frequency."""
        f1 = minnaert_frequency(BubbleSpec(radius=0.01))
        f2 = minnaert_frequency(BubbleSpec(radius=0.005))
        assert f2 == pytest.approx(2 * f1)

    def test_deeper_is_higher(self):
        """Hydrostatic pressure raises the resonance."""
        assert minnaert_frequency(BubbleSpec(radius=0.01, depth=20)) > minnaert_frequency(BubbleSpec(radius=0.01, depth=0))

    def test_one_centimetre_bubble_at_surface(self):
        """A 1 cm radius bubble at the surface in seawater resonates near 324 Hz."""
        spec = BubbleSpec(radius=0.01, depth=0.0, gamma=1.4, rho=1025.0, p_atm=101325.0)
        assert minnaert_frequency(spec) == pytest.approx(324.3, abs=0.5)

    def test_depth_scales_with_root_pressure(self):
        """8 m of seawater raises the frequency by sqrt(P(8 m) / P(0 m)) ≈ 1.3394."""
        ratio = minnaert_frequency(BubbleSpec(radius=0.01, depth=8.0)) / minnaert_frequency(BubbleSpec(radius=0.01, depth=0.0))
        assert ratio == pytest.approx(np.sqrt((101325.0 + 1025.0 * 9.81 * 8.0) / 101325.0), rel=1e-12)
        assert ratio == pytest.approx(1.3394, rel=1e-4)

    def test_nyquist_violation(self):
        """Resonance at or above fs/2 is rejected when a sample rate is given."""
        with pytest.raises(ValueError, match="Nyquist"):
            minnaert_frequency(BubbleSpec(radius=1e-4), sample_rate=FS)

    def test_invalid_radius(self):
        """Radius must be positive."""
        with pytest.raises(ValueError, match="radius must be positive"):
            BubbleSpec(radius=0.0)


class TestBubblePulse:
    """Damped sinusoid pulses."""

    def test_undamped_tone_on_bin(self):
        """Zero damping at an exact bin frequency peaks in that bin."""
        radius = BubblePopulation(median_frequency=250.0, min_freq=200.0).median_radius
        spec = BubbleSpec(radius=radius, damping=0.0)
        pulse = bubble_pulse(spec, FS, FS)
        assert np.argmax(periodogram(pulse, FS).values) == 250

    def test_pulse_energy_in_band(self):
        """A 324 Hz pulse keeps at least 90% of its power inside 150-500 Hz."""
        radius = BubblePopulation(median_frequency=324.0).median_radius
        pulse = bubble_pulse(BubbleSpec(radius=radius), FS, FS // 2)
        psd = periodogram(pulse, FS)
        in_band = band_filter(psd, 150, 500).values.sum()
        assert in_band / psd.values.sum() >= 0.9

    def test_envelope_decays(self):
        """Amplitude starts at the configured peak and decays."""
        radius = BubblePopulation().median_radius
        pulse = bubble_pulse(BubbleSpec(radius=radius, amplitude=0.2), FS, FS // 4)
        assert np.abs(pulse).max() <= 0.2
        assert np.abs(pulse[-200:]).max() < 0.01 * 0.2


class TestBubblePopulation:
    """Radius sampling."""

    def test_frequencies_within_limits(self):
        """Sampled bubbles resonate inside [min_freq, max_freq]."""
        pop = BubblePopulation(radius_sigma=1.0)
        freqs = pop.frequencies(pop.sample_radii(np.random.default_rng(0), 5000))
        assert freqs.min() >= pop.min_freq * (1 - 1e-9)
        assert freqs.max() <= pop.max_freq * (1 + 1e-9)

    def test_median_frequency(self):
        """The median radius resonates at the median frequency."""
        pop = BubblePopulation()
        assert minnaert_frequency(pop.spec(pop.median_radius)) == pytest.approx(320.0)

    def test_invalid_limits(self):
        """Median outside the limits is rejected."""
        with pytest.raises(ValueError, match="min_freq"):
            BubblePopulation(median_frequency=600.0)


class TestBackground:
    """Colored background noise."""

    def test_rms_matches_level(self):
        """Output RMS equals noise_level."""
        rec = gen_background(2.0, FS, 0.05, seed=1, session_character=0.5)
        assert np.sqrt(np.mean(rec.samples ** 2)) == pytest.approx(0.05, rel=1e-9)
        assert rec.label == 'noise'

    def test_silence(self):
        """noise_level 0 yields exact zeros."""
        rec = gen_background(1.0, FS, 0.0, seed=1)
        assert np.all(rec.samples == 0.0)

    def test_deterministic(self):
        """Same seed, same samples."""
        a = gen_background(1.0, FS, 0.05, seed=3)
        b = gen_background(1.0, FS, 0.05, seed=3)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_white_background_is_flat(self):
        """α = 0 gives a Welch PSD within 10% of 2σ²/fs across 150-500 Hz."""
        rec = gen_background(120.0, FS, 0.05, seed=4, session_character=0.0)
        psd = welch_psd(rec.samples, FS, segment_len=256, segment_overlap=128)
        fv = band_filter(psd, 150, 500)
        level = 2 * 0.05 ** 2 / FS
        assert np.max(np.abs(fv.values / level - 1.0)) < 0.1

    def test_tilt_shifts_power_low(self):
        """A larger spectral tilt moves power toward low frequencies."""
        def low_high_ratio(alpha):
            rec = gen_background(10.0, FS, 0.05, seed=2, session_character=alpha)
            return band_power(rec.samples, lo=50, hi=500) / band_power(rec.samples, lo=2000, hi=3500)

        assert low_high_ratio(1.0) > 3 * low_high_ratio(0.0)


class TestLeakSignal:
    """Bubble pulses over background."""

    def test_zero_flow_is_background(self):
        """Flow 0 reproduces the background exactly and is labeled noise."""
        scenario = LeakScenario(flow_lpm=0.0, duration=2.0, sample_rate=FS, seed=5)
        rec = gen_leak_signal(scenario)
        np.testing.assert_array_equal(rec.samples, gen_background(2.0, FS, 0.05, 5).samples)
        assert rec.label == 'noise'

    def test_quiet_before_onset(self):
        """Samples before the onset equal the background."""
        scenario = LeakScenario(flow_lpm=10.0, duration=6.0, onset=3.0, sample_rate=FS, seed=5)
        rec = gen_leak_signal(scenario)
        background = gen_background(6.0, FS, 0.05, 5)
        np.testing.assert_array_equal(rec.samples[:3 * FS], background.samples[:3 * FS])
        assert not np.array_equal(rec.samples[3 * FS:], background.samples[3 * FS:])
        assert (rec.label, rec.flow_lpm, rec.onset) == ('leak', 10.0, 3.0)

    def test_band_power_grows_with_flow(self):
        """Flow 10 carries more 150-500 Hz power than flow 2 after the onset."""
        powers = {}
        for flow in (2.0, 10.0):
            rec = gen_leak_signal(LeakScenario(flow_lpm=flow, duration=20.0, onset=2.0, sample_rate=FS, seed=9))
            powers[flow] = band_power(rec.samples[2 * FS:])
        assert powers[10.0] > powers[2.0]

    def test_deterministic(self):
        """Same scenario, same samples."""
        scenario = LeakScenario(flow_lpm=5.0, duration=3.0, sample_rate=FS, seed=11)
        np.testing.assert_array_equal(gen_leak_signal(scenario).samples, gen_leak_signal(scenario).samples)

    def test_pulses_are_bubble_pulses(self):
        """Over silence the signal is the sum of bubble_pulse shapes at the drawn arrivals."""
        scenario = LeakScenario(flow_lpm=2.0, duration=3.0, onset=0.5, sample_rate=FS, noise_level=0.0, seed=13)
        population = BubblePopulation()
        rec = gen_leak_signal(scenario, population)

        rng = np.random.default_rng([13, 1])
        n_pulses = rng.poisson(1.5 * 2.0 * 2.5)
        arrivals = np.sort(rng.uniform(0.5, 3.0, n_pulses))
        radii = population.sample_radii(rng, n_pulses)
        expected = np.zeros(3 * FS)
        pulse_len = int(np.ceil(12.0 * FS / population.damping))
        for arrival, radius in zip(arrivals, radii):
            start = int(round(arrival * FS))
            if start >= expected.size:
                continue
            stop = min(start + pulse_len, expected.size)
            expected[start:stop] += bubble_pulse(population.spec(radius), FS, stop - start)
        assert n_pulses > 0
        np.testing.assert_allclose(rec.samples, expected, rtol=0, atol=1e-15)

    def test_invalid_onset(self):
        """Onset must fall inside the recording."""
        with pytest.raises(ValueError, match="onset"):
            LeakScenario(flow_lpm=5.0, duration=3.0, onset=3.0)


def small_corpus(seed=0):
    return CorpusConfig(sample_rate=FS, seed=seed, recording_seconds=5.0,
                        train_leak_seconds=10.0, train_noise_seconds=7.0,
                        test_flows=(2.0, 5.0), test_leak_seconds=5.0, test_noise_seconds=5.0,
                        detection_seconds=10.0, detection_onset=4.0)


class TestCorpus:
    """Corpus layout and files."""

    def test_default_plan(self):
        """The default layout has 8 + 5 training, 4 + 4 + 4 test and 1 detection recording."""
        plans = plan_corpus(CorpusConfig())
        groups = [p.group for p in plans]
        assert groups.count('train') == 13
        assert groups.count('test') == 12
        assert groups.count('detect') == 1
        train_leak = sum(p.scenario.duration for p in plans if p.group == 'train' and p.label == 'leak')
        train_noise = sum(p.scenario.duration for p in plans if p.group == 'train' and p.label == 'noise')
        assert (train_leak, train_noise) == (476.0, 266.0)

    def test_sessions_unique_and_ordered(self):
        """Session ids are unique and start times increase."""
        plans = plan_corpus(CorpusConfig())
        ids = [p.scenario.session_id for p in plans]
        assert len(set(ids)) == len(ids)
        starts = [p.scenario.start_time for p in plans]
        assert starts == sorted(starts)

    def test_detection_recording(self):
        """The detection recording leaks from 48 s of 100 s."""
        detect = [p for p in plan_corpus(CorpusConfig()) if p.group == 'detect'][0]
        assert (detect.scenario.duration, detect.scenario.onset, detect.scenario.flow_lpm) == (100.0, 48.0, 10.0)

    def test_gen_corpus_writes_manifests(self, tmp_path):
        """WAVs plus the four manifests land in the output directory."""
        entries = gen_corpus(small_corpus(), tmp_path)
        for name in ('manifest.csv', 'train_manifest.csv', 'test_manifest.csv', 'detect_manifest.csv'):
            assert (tmp_path / name).exists()
        assert len(read_manifest(tmp_path / 'manifest.csv')) == len(entries)
        test = read_manifest(tmp_path / 'test_manifest.csv')
        assert sorted({e.flow_lpm for e in test if e.label == 'leak'}) == [2.0, 5.0]
        assert all(e.path.exists() for e in entries)

    def test_zero_recordings(self, tmp_path):
        """A layout without recordings writes empty manifests and no WAVs."""
        config = CorpusConfig(sample_rate=FS, train_leak_seconds=0.0, train_noise_seconds=0.0,
                              test_flows=(), test_noise_seconds=0.0, detection_seconds=0.0)
        assert gen_corpus(config, tmp_path) == []
        assert not list(tmp_path.glob('*.wav'))
        for name in ('manifest.csv', 'train_manifest.csv', 'test_manifest.csv', 'detect_manifest.csv'):
            assert read_manifest(tmp_path / name) == []

    def test_byte_identical_with_same_seed(self, tmp_path):
        """Same seed, same bytes."""
        gen_corpus(small_corpus(7), tmp_path / 'a')
        gen_corpus(small_corpus(7), tmp_path / 'b')
        for path in sorted((tmp_path / 'a').iterdir()):
            assert path.read_bytes() == (tmp_path / 'b' / path.name).read_bytes()
