"""
Synthetic Leak Corpora

Generates labeled hydrophone-like recordings: background noise with a
session-dependent spectral tilt, plus (for leaks) damped bubble pulses
arriving as a Poisson process whose rate grows with gas flow.

Bubble resonance (Minnaert):
    f = (1 / (2πa)) · sqrt(3γP / ρ),   P = p_atm + ρ·g·depth

Bubble pulse:
    s[n] = A · exp(-d·n/fs) · sin(2π f n / fs)

Background:
    white Gaussian noise shaped to a power spectrum ∝ 1/f^α
    (α = session character), rescaled to the requested RMS level

Pulse arrivals:
    λ = c · flow_lpm pulses per second after the onset

The default knobs (c = 1.5 pulses/s per l/min, amplitude 0.1, noise RMS
0.05, white background) give a flow-10 band SNR near 10 dB over 150-500 Hz.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .signal_io import Recording, SessionDescriptor, write_manifest, write_wav

logger = logging.getLogger(__name__)

GRAVITY = 9.81  # m/s²
SEAWATER_DENSITY = 1025.0  # kg/m³
ATMOSPHERIC_PRESSURE = 101325.0  # Pa


def derive_seed(seed: int, *keys: int) -> int:
    """Independent child seed for (seed, keys...), stable across runs."""
    return int(np.random.SeedSequence([int(seed), *[int(k) for k in keys]]).generate_state(1)[0])


def _minnaert(radius, depth, gamma, rho, p_atm):
    pressure = p_atm + rho * GRAVITY * depth
    return np.sqrt(3.0 * gamma * pressure / rho) / (2.0 * np.pi * radius)


def _radius_for(frequency, depth, gamma, rho, p_atm):
    return _minnaert(1.0, depth, gamma, rho, p_atm) / frequency


@dataclass(frozen=True)
class BubbleSpec:
    """
    Physical description of one bubble.

    Attributes:
        radius: m
        depth: m (8 m hydrophone/outlet depth by default)
        gamma: Polytropic exponent
        rho: Water density, kg/m³
        p_atm: Surface pressure, Pa
        damping: Pulse decay rate, 1/s
        amplitude: Peak pulse amplitude (dimensionless)
    """
    radius: float
    depth: float = 8.0
    gamma: float = 1.4
    rho: float = SEAWATER_DENSITY
    p_atm: float = ATMOSPHERIC_PRESSURE
    damping: float = 100.0
    amplitude: float = 0.1

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"Bubble radius must be positive, got {self.radius}")
        if self.depth < 0:
            raise ValueError(f"Depth must be non-negative, got {self.depth}")
        for name in ('gamma', 'rho', 'p_atm'):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.damping < 0:
            raise ValueError(f"Damping must be non-negative, got {self.damping}")
        if self.amplitude < 0:
            raise ValueError(f"Amplitude must be non-negative, got {self.amplitude}")


def minnaert_frequency(spec: BubbleSpec, sample_rate: Optional[float] = None) -> float:
    """
    Resonance frequency of a gas bubble in water.

    Parameters:
        spec: Bubble description
        sample_rate: When given, the frequency must lie below sample_rate/2

    Returns:
        Frequency in Hz

    Raises:
        ValueError: frequency at or above Nyquist for sample_rate
    """
    freq = float(_minnaert(spec.radius, spec.depth, spec.gamma, spec.rho, spec.p_atm))
    if sample_rate is not None and freq >= sample_rate / 2:
        raise ValueError(
            f"Minnaert frequency {freq:.1f} Hz is at or above Nyquist ({sample_rate / 2} Hz)"
        )
    return freq


def bubble_pulse(spec: BubbleSpec, sample_rate: float, length: int) -> np.ndarray:
    """
    Exponentially damped sinusoid at the bubble's Minnaert frequency.

    Raises:
        ValueError: Nyquist violation or negative length
    """
    if length < 0:
        raise ValueError(f"length must be non-negative, got {length}")
    freq = minnaert_frequency(spec, sample_rate)
    n = np.arange(length) / sample_rate
    return spec.amplitude * np.exp(-spec.damping * n) * np.sin(2.0 * np.pi * freq * n)


@dataclass(frozen=True)
class BubblePopulation:
    """
    Log-normal bubble radii, clipped so resonances stay inside [min_freq, max_freq].

    The default median radius resonates at 320 Hz at 8 m depth.
    """
    median_frequency: float = 320.0
    radius_sigma: float = 0.12
    min_freq: float = 230.0
    max_freq: float = 430.0
    depth: float = 8.0
    gamma: float = 1.4
    rho: float = SEAWATER_DENSITY
    p_atm: float = ATMOSPHERIC_PRESSURE
    damping: float = 100.0
    amplitude: float = 0.1

    def __post_init__(self):
        if not 0 < self.min_freq <= self.median_frequency <= self.max_freq:
            raise ValueError(
                f"need 0 < min_freq ≤ median_frequency ≤ max_freq, got "
                f"{self.min_freq}, {self.median_frequency}, {self.max_freq}"
            )
        if self.radius_sigma < 0:
            raise ValueError(f"radius_sigma must be non-negative, got {self.radius_sigma}")

    def _physics(self) -> Tuple[float, float, float, float]:
        return self.depth, self.gamma, self.rho, self.p_atm

    @property
    def median_radius(self) -> float:
        return float(_radius_for(self.median_frequency, *self._physics()))

    def sample_radii(self, rng: np.random.Generator, size: int) -> np.ndarray:
        radii = self.median_radius * np.exp(self.radius_sigma * rng.standard_normal(size))
        r_min = _radius_for(self.max_freq, *self._physics())
        r_max = _radius_for(self.min_freq, *self._physics())
        return np.clip(radii, r_min, r_max)

    def frequencies(self, radii: np.ndarray) -> np.ndarray:
        return _minnaert(radii, *self._physics())

    def spec(self, radius: float) -> BubbleSpec:
        return BubbleSpec(radius=float(radius), depth=self.depth, gamma=self.gamma, rho=self.rho,
                          p_atm=self.p_atm, damping=self.damping, amplitude=self.amplitude)


@dataclass(frozen=True)
class LeakScenario:
    """
    One synthetic recording.

    Attributes:
        flow_lpm: Gas flow (0 yields background only)
        duration: Seconds
        onset: Seconds into the recording where bubbling starts
        sample_rate: Hz
        noise_level: Background RMS
        seed: Random seed
        session_character: Background spectral tilt α
        pulse_rate_per_lpm: Pulses per second per l/min
    """
    flow_lpm: float
    duration: float
    onset: float = 0.0
    sample_rate: int = 48000
    noise_level: float = 0.05
    seed: int = 0
    session_character: float = 0.0
    pulse_rate_per_lpm: float = 1.5
    session_id: str = 'synthetic'
    start_time: float = 0.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if not 0 <= self.onset < self.duration:
            raise ValueError(f"onset must be in [0, duration), got {self.onset}")
        if self.flow_lpm < 0:
            raise ValueError(f"flow_lpm must be non-negative, got {self.flow_lpm}")
        if self.pulse_rate_per_lpm < 0:
            raise ValueError(f"pulse_rate_per_lpm must be non-negative, got {self.pulse_rate_per_lpm}")


def gen_background(
    duration: float,
    sample_rate: int,
    noise_level: float,
    seed: int,
    session_character: float = 0.0,
    session_id: str = 'background',
    start_time: float = 0.0
) -> Recording:
    """
    Gaussian noise with a 1/f^α power spectrum and the requested RMS.

    DC and Nyquist bins are zeroed so no component sits at fs/2.
    """
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    if noise_level < 0:
        raise ValueError(f"noise_level must be non-negative, got {noise_level}")

    n = int(round(duration * sample_rate))
    if n < 1:
        raise ValueError(f"duration {duration} s is shorter than one sample at {sample_rate} Hz")

    if noise_level == 0:
        samples = np.zeros(n)
    else:
        rng = np.random.default_rng(seed)
        spectrum = np.fft.rfft(rng.standard_normal(n))
        freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
        gain = np.zeros_like(freqs)
        gain[1:] = freqs[1:] ** (-session_character / 2.0)
        if n % 2 == 0:
            gain[-1] = 0.0
        samples = np.fft.irfft(spectrum * gain, n)
        rms = np.sqrt(np.mean(samples ** 2))
        samples = samples * (noise_level / rms) if rms > 0 else samples

    return Recording(samples=samples, sample_rate=sample_rate, session_id=session_id,
                     start_time=start_time, label='noise')


def gen_leak_signal(scenario: LeakScenario, bubble_population: Optional[BubblePopulation] = None) -> Recording:
    """
    Background plus Poisson-timed bubble pulses from the onset onward.

    With flow 0 the result equals gen_background for the same seed and is
    labeled noise.
    """
    population = bubble_population or BubblePopulation()
    fs = scenario.sample_rate
    background = gen_background(
        scenario.duration, fs, scenario.noise_level, scenario.seed,
        scenario.session_character, scenario.session_id, scenario.start_time
    )
    if scenario.flow_lpm == 0:
        return background

    if population.max_freq >= fs / 2:
        raise ValueError(f"population max_freq {population.max_freq} Hz is at or above Nyquist ({fs / 2} Hz)")

    rng = np.random.default_rng([int(scenario.seed), 1])
    rate = scenario.pulse_rate_per_lpm * scenario.flow_lpm
    active = scenario.duration - scenario.onset
    n_pulses = rng.poisson(rate * active)
    arrivals = np.sort(rng.uniform(scenario.onset, scenario.duration, n_pulses))
    radii = population.sample_radii(rng, n_pulses)

    samples = np.array(background.samples)
    n_total = samples.size
    # 12 time constants; the tail is below 1e-5 of the peak
    pulse_len = int(np.ceil(12.0 * fs / population.damping)) if population.damping > 0 else n_total
    for start_time, radius in zip(arrivals, radii):
        start = int(round(start_time * fs))
        if start >= n_total:
            continue
        stop = min(start + pulse_len, n_total)
        samples[start:stop] += bubble_pulse(population.spec(radius), fs, stop - start)

    logger.debug("%s: %d pulses at %.1f/s after %.1f s", scenario.session_id, n_pulses, rate, scenario.onset)

    return Recording(samples=samples, sample_rate=fs, session_id=scenario.session_id,
                     start_time=scenario.start_time, label='leak', flow_lpm=scenario.flow_lpm,
                     onset=scenario.onset)


@dataclass(frozen=True)
class CorpusConfig:
    """
    Corpus layout. Defaults mirror a 742 s training set (476 s of 10 l/min
    leak, 266 s of noise), later test sessions at 2 and 5 l/min, and a 100 s
    detection recording with the leak starting at 48 s.
    """
    sample_rate: int = 48000
    seed: int = 0
    noise_level: float = 0.05
    start_time: float = 1546333200.0
    recording_seconds: float = 60.0
    train_flow: float = 10.0
    train_leak_seconds: float = 476.0
    train_noise_seconds: float = 266.0
    train_session_characters: Tuple[float, ...] = (0.0, 0.2)
    test_flows: Tuple[float, ...] = (2.0, 5.0)
    test_leak_seconds: float = 240.0
    test_noise_seconds: float = 240.0
    test_session_characters: Tuple[float, ...] = (0.1, 0.3)
    detection_seconds: float = 100.0
    detection_onset: float = 48.0
    detection_flow: float = 10.0
    detection_session_character: float = 0.1
    pulse_rate_per_lpm: float = 1.5
    bubble_amplitude: float = 0.1
    bubble_damping: float = 100.0
    bubble_depth: float = 8.0
    bubble_median_frequency: float = 320.0
    bubble_radius_sigma: float = 0.12

    def population(self) -> BubblePopulation:
        return BubblePopulation(
            median_frequency=self.bubble_median_frequency,
            radius_sigma=self.bubble_radius_sigma,
            depth=self.bubble_depth,
            damping=self.bubble_damping,
            amplitude=self.bubble_amplitude
        )


@dataclass(frozen=True)
class RecordingPlan:
    """One planned corpus recording."""
    group: str
    scenario: LeakScenario

    @property
    def label(self) -> str:
        return 'leak' if self.scenario.flow_lpm > 0 else 'noise'


def _chunks(total: float, size: float) -> List[float]:
    out = []
    remaining = total
    while remaining > 1e-9:
        out.append(min(size, remaining))
        remaining -= size
    return out


def plan_corpus(config: CorpusConfig) -> List[RecordingPlan]:
    """Deterministic list of recordings for a corpus configuration."""
    if config.recording_seconds <= 0:
        raise ValueError(f"recording_seconds must be positive, got {config.recording_seconds}")

    groups: List[Tuple[str, str, float, float, Sequence[float], float]] = [
        ('train', f"train-leak-{config.train_flow:g}", config.train_flow,
         config.train_leak_seconds, config.train_session_characters, 0.0),
        ('train', 'train-noise', 0.0, config.train_noise_seconds, config.train_session_characters, 0.0),
    ]
    for flow in config.test_flows:
        groups.append(('test', f"test-leak-{flow:g}", flow, config.test_leak_seconds,
                       config.test_session_characters, 0.0))
    groups.append(('test', 'test-noise', 0.0, config.test_noise_seconds, config.test_session_characters, 0.0))

    plans = []
    clock = config.start_time
    for group, prefix, flow, seconds, characters, onset in groups:
        for i, length in enumerate(_chunks(seconds, config.recording_seconds)):
            plans.append(RecordingPlan(group, LeakScenario(
                flow_lpm=flow, duration=length, onset=onset,
                sample_rate=config.sample_rate, noise_level=config.noise_level,
                seed=derive_seed(config.seed, len(plans)),
                session_character=characters[i % len(characters)] if characters else 0.0,
                pulse_rate_per_lpm=config.pulse_rate_per_lpm,
                session_id=f"{prefix}-{i:03d}", start_time=clock
            )))
            clock += length + 60.0

    if config.detection_seconds > 0:
        plans.append(RecordingPlan('detect', LeakScenario(
            flow_lpm=config.detection_flow, duration=config.detection_seconds,
            onset=config.detection_onset, sample_rate=config.sample_rate,
            noise_level=config.noise_level, seed=derive_seed(config.seed, len(plans)),
            session_character=config.detection_session_character,
            pulse_rate_per_lpm=config.pulse_rate_per_lpm,
            session_id='detect-000', start_time=clock
        )))
    return plans


def gen_corpus(config: CorpusConfig, output_dir: Union[str, Path]) -> List[SessionDescriptor]:
    """
    Write corpus WAVs (16-bit PCM) and manifests into output_dir.

    Manifests: manifest.csv (everything) plus train_manifest.csv,
    test_manifest.csv and detect_manifest.csv.

    Returns:
        Manifest entries in write order
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    population = config.population()

    entries: List[SessionDescriptor] = []
    by_group = {'train': [], 'test': [], 'detect': []}
    for plan in plan_corpus(config):
        recording = gen_leak_signal(plan.scenario, population)
        wav_path = output_dir / f"{plan.scenario.session_id}.wav"
        write_wav(recording, wav_path)
        entry = replace(recording.descriptor, path=wav_path)
        entries.append(entry)
        by_group[plan.group].append(entry)
        logger.info("Wrote %s (%s, %.1f s)", wav_path.name, plan.label, plan.scenario.duration)

    write_manifest(entries, output_dir / 'manifest.csv')
    for group, group_entries in by_group.items():
        write_manifest(group_entries, output_dir / f"{group}_manifest.csv")
    return entries
