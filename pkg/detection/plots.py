"""
Static report figures: detection traces, spectrograms, selection heatmaps
and per-flow precision bars.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402
from scipy import signal as sp_signal  # noqa: E402

from acoustics.signal_io import Recording  # noqa: E402
from .hmm import DetectionTrace  # noqa: E402

logger = logging.getLogger(__name__)


def _save(fig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150, bbox_inches='tight')
    plt.close(fig)
    logger.info("Figure saved to %s", path)
    return path


def plot_trace(
    trace: DetectionTrace,
    path: Union[str, Path],
    title: str = '',
    window_duration: Optional[float] = None,
    onset: Optional[float] = None
) -> Path:
    """Classifier score, thresholded class and leak probability over time."""
    offsets = np.asarray(trace.start_offset)
    t = offsets + (window_duration / 2 if window_duration else 0.0)

    fig, axes = plt.subplots(3, 1, figsize=(12, 8), sharex=True)
    fig.suptitle(title or f'Leak detection (threshold {trace.threshold:g})', fontsize=14, fontweight='bold')

    axes[0].plot(t, trace.score, color='steelblue', lw=1.5)
    axes[0].axhline(y=trace.threshold, color='red', linestyle='--', linewidth=1.5, label='threshold')
    axes[0].set_ylabel('Score', fontsize=11)
    axes[0].set_ylim(-0.05, 1.05)
    axes[0].legend(loc='upper left')

    axes[1].step(t, trace.y, where='mid', color='darkorange', lw=1.5)
    axes[1].set_ylabel('Class', fontsize=11)
    axes[1].set_yticks([0, 1])
    axes[1].set_yticklabels(['noise', 'leak'])

    axes[2].plot(t, trace.pi_leak, color='teal', lw=2)
    axes[2].set_ylabel('P(leak)', fontsize=11)
    axes[2].set_ylim(-0.05, 1.05)
    axes[2].set_xlabel('Time (s)', fontsize=11)

    for ax in axes:
        ax.grid(True, alpha=0.3)
        if onset is not None:
            ax.axvline(x=onset, color='gray', linestyle=':', linewidth=1.5)
    return _save(fig, path)


def plot_spectrogram(
    recording: Recording,
    path: Union[str, Path],
    band: tuple = (150.0, 500.0),
    max_frequency: float = 1000.0,
    segment_seconds: float = 0.25
) -> Path:
    """Power spectrogram in dB with the feature band marked."""
    fs = recording.sample_rate
    nperseg = min(recording.samples.size, max(16, int(segment_seconds * fs)))
    freqs, times, power = sp_signal.spectrogram(recording.samples, fs=fs, window='hann',
                                                nperseg=nperseg, noverlap=nperseg // 2)
    keep = freqs <= min(max_frequency, fs / 2)
    db = 10.0 * np.log10(power[keep] + 1e-20)

    fig, ax = plt.subplots(figsize=(12, 5))
    mesh = ax.pcolormesh(times, freqs[keep], db, shading='auto', cmap='viridis')
    fig.colorbar(mesh, ax=ax, label='Power (dB re 1/Hz)')
    for edge in band:
        ax.axhline(y=edge, color='white', linestyle='--', linewidth=1)
    if recording.onset is not None:
        ax.axvline(x=recording.onset, color='red', linestyle=':', linewidth=1.5)
    ax.set_xlabel('Time (s)', fontsize=11)
    ax.set_ylabel('Frequency (Hz)', fontsize=11)
    ax.set_title(f'Spectrogram: {recording.session_id}', fontsize=12, fontweight='bold')
    return _save(fig, path)


def plot_selection_heatmap(report: pd.DataFrame, path: Union[str, Path]) -> Path:
    """CV accuracy per window setting (rows) and algorithm/feature (columns)."""
    table = report.assign(
        window=report['duration'].map('{:g}'.format) + ' s / ' + report['overlap'].map('{:g}'.format) + ' s',
        model=report['algorithm'] + ' + ' + report['feature']
    ).pivot_table(index='window', columns='model', values='accuracy_cv', sort=False)

    fig, ax = plt.subplots(figsize=(8, max(3, 0.5 * len(table) + 1.5)))
    sns.heatmap(table, annot=True, fmt='.3f', cmap='YlGnBu', vmin=0.5, vmax=1.0, ax=ax,
                cbar_kws={'label': 'CV accuracy'})
    ax.set_xlabel('Algorithm + feature', fontsize=11)
    ax.set_ylabel('Duration / overlap', fontsize=11)
    ax.set_title('Classifier and Feature Selection', fontsize=12, fontweight='bold')
    return _save(fig, path)


def plot_flow_precision(report: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Precision per leak flow."""
    data = report.assign(flow=report['flow'].map('{:g} l/min'.format))
    fig, ax = plt.subplots(figsize=(7, 4))
    sns.barplot(data=data, x='flow', y='precision', hue='algorithm', ax=ax, alpha=0.8)
    ax.set_ylim(0, 1.05)
    ax.set_xlabel('Leak flow', fontsize=11)
    ax.set_ylabel('Precision', fontsize=11)
    ax.set_title('Precision on Different Leak Flows', fontsize=12, fontweight='bold')
    ax.grid(True, alpha=0.3, axis='y')
    return _save(fig, path)
