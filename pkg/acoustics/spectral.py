"""
Spectral Features for Leak Detection

Power spectral density estimates per window, reduced to the band where bubble
acoustic emission is expected (150-500 Hz by default).

Estimators (one-sided, power per Hz):
    Periodogram (rectangular taper):
        P[k] = c_k |X[k]|² / (fs · N)
    Welch (Hann taper w, segments of length L, averaged over M segments):
        P[k] = (1/M) Σ_m c_k |X_m[k]|² / (fs · Σ w²)

    with c_k = 2 for interior bins and 1 for DC and Nyquist, so that
    Σ P[k] · (fs/N) equals the mean square of the samples (Parseval).

Normalizing the Hann taper by Σ w² (its mean-square times L) keeps white-noise
levels identical between the two estimators: σ² / (fs/2) per Hz.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Union

import numpy as np
import pandas as pd
from scipy import signal as sp_signal

from .signal_io import Recording, Window, frame

logger = logging.getLogger(__name__)

FeatureKind = Literal['periodogram', 'welch']
FEATURE_KINDS = ('periodogram', 'welch')
ID_COLUMNS = ['session_id', 'start_offset', 'label']

# Relative slack when comparing bin frequencies against band edges.
_EDGE_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class Psd:
    """
    One-sided power spectral density.

    Attributes:
        values: Power per bin (amplitude²/Hz), non-negative
        bin_width: Frequency spacing in Hz
        sample_rate: Sampling rate in Hz
        kind: Estimator that produced the values
    """
    values: np.ndarray
    bin_width: float
    sample_rate: float
    kind: FeatureKind = 'periodogram'

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.values.size) * self.bin_width

    def total_power(self) -> float:
        """Σ P · Δf, the mean square of the source samples."""
        return float(np.sum(self.values) * self.bin_width)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Band-limited PSD values for one window."""
    values: np.ndarray
    frequencies: np.ndarray
    band_lo: float
    band_hi: float
    feature_kind: FeatureKind

    def __len__(self) -> int:
        return self.values.size


def _as_samples(window: Union[Window, np.ndarray]) -> np.ndarray:
    samples = window.samples if isinstance(window, Window) else window
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    if samples.size == 0:
        raise ValueError("empty window")
    return samples


def periodogram(window: Union[Window, np.ndarray], sample_rate: float) -> Psd:
    """
    Rectangular-window periodogram.

    Parameters:
        window: Window (or raw samples)
        sample_rate: Hz

    Returns:
        Psd of length floor(N/2) + 1 with bin width fs/N

    Raises:
        ValueError: empty window
    """
    x = _as_samples(window)
    freqs, values = sp_signal.periodogram(
        x, fs=sample_rate, window='boxcar', detrend=False,
        return_onesided=True, scaling='density'
    )
    return Psd(values=np.maximum(values, 0.0), bin_width=sample_rate / x.size,
               sample_rate=sample_rate, kind='periodogram')


def welch_psd(
    window: Union[Window, np.ndarray],
    sample_rate: float,
    segment_len: int,
    segment_overlap: int
) -> Psd:
    """
    Welch estimate: mean of Hann-tapered, power-corrected segment periodograms.

    Parameters:
        window: Window (or raw samples)
        sample_rate: Hz
        segment_len: Samples per segment (≤ window length)
        segment_overlap: Samples shared by consecutive segments (< segment_len)

    Returns:
        Psd of length floor(segment_len/2) + 1

    Raises:
        ValueError: segment longer than window or overlap ≥ segment length
    """
    x = _as_samples(window)
    segment_len = int(segment_len)
    segment_overlap = int(segment_overlap)
    if segment_len < 1:
        raise ValueError(f"segment_len must be positive, got {segment_len}")
    if segment_len > x.size:
        raise ValueError(f"segment longer than window: {segment_len} > {x.size}")
    if not 0 <= segment_overlap < segment_len:
        raise ValueError(
            f"segment_overlap must be in [0, segment_len), got {segment_overlap} for segment_len {segment_len}"
        )

    freqs, values = sp_signal.welch(
        x, fs=sample_rate, window='hann', nperseg=segment_len,
        noverlap=segment_overlap, detrend=False, return_onesided=True,
        scaling='density', average='mean'
    )
    return Psd(values=np.maximum(values, 0.0), bin_width=sample_rate / segment_len,
               sample_rate=sample_rate, kind='welch')


def band_mask(frequencies: np.ndarray, band_lo: float, band_hi: float, bin_width: float) -> np.ndarray:
    """Boolean mask of bins with band_lo ≤ f ≤ band_hi (inclusive)."""
    slack = _EDGE_TOLERANCE * bin_width
    return (frequencies >= band_lo - slack) & (frequencies <= band_hi + slack)


def band_filter(psd: Psd, band_lo: float = 150.0, band_hi: float = 500.0) -> FeatureVector:
    """
    Keep the bins whose frequency lies in [band_lo, band_hi].

    Raises:
        ValueError: invalid band or no bin inside it
    """
    nyquist = psd.sample_rate / 2
    if band_lo < 0 or band_lo >= band_hi:
        raise ValueError(f"band must satisfy 0 ≤ band_lo < band_hi, got [{band_lo}, {band_hi}]")
    if band_hi > nyquist * (1 + _EDGE_TOLERANCE):
        raise ValueError(f"band_hi {band_hi} Hz exceeds Nyquist frequency {nyquist} Hz")

    freqs = psd.frequencies
    mask = band_mask(freqs, band_lo, band_hi, psd.bin_width)
    if not np.any(mask):
        raise ValueError(
            f"empty band after filtering: no bin in [{band_lo}, {band_hi}] Hz at bin width {psd.bin_width} Hz"
        )
    return FeatureVector(
        values=psd.values[mask].copy(),
        frequencies=freqs[mask],
        band_lo=float(band_lo),
        band_hi=float(band_hi),
        feature_kind=psd.kind
    )


@dataclass(frozen=True)
class FeatureExtraction:
    """
    Window and estimator settings shared by feature extraction and detection.

    Defaults: 4 s windows with 3 s overlap, Welch with 8192-sample segments
    at 50% overlap, 150-500 Hz band.
    """
    duration: float = 4.0
    overlap: float = 3.0
    feature_kind: FeatureKind = 'welch'
    band_lo: float = 150.0
    band_hi: float = 500.0
    segment_len: int = 8192
    segment_overlap: int = 4096

    def __post_init__(self):
        if self.feature_kind not in FEATURE_KINDS:
            raise ValueError(f"feature_kind must be one of {FEATURE_KINDS}, got {self.feature_kind!r}")

    def segments_for(self, n_window: int) -> tuple[int, int]:
        """Welch segmentation that fits an n_window-sample window."""
        if self.segment_len <= n_window:
            return int(self.segment_len), int(self.segment_overlap)
        return n_window, n_window // 2

    def as_metadata(self, sample_rate: Optional[float] = None) -> Dict[str, object]:
        meta = asdict(self)
        if sample_rate is not None:
            meta['sample_rate'] = sample_rate
        return meta

    @classmethod
    def from_metadata(cls, meta: Dict[str, object]) -> 'FeatureExtraction':
        names = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for name in names:
            if name in meta:
                value = meta[name]
                if name in ('segment_len', 'segment_overlap'):
                    value = int(float(value))
                elif name == 'feature_kind':
                    value = str(value)
                else:
                    value = float(value)
                kwargs[name] = value
        return cls(**kwargs)


def window_features(window: Window, sample_rate: float, extraction: FeatureExtraction) -> FeatureVector:
    """PSD of one window (per the configured estimator) reduced to the band."""
    if extraction.feature_kind == 'welch':
        seg_len, seg_overlap = extraction.segments_for(window.samples.size)
        psd = welch_psd(window, sample_rate, seg_len, seg_overlap)
    else:
        psd = periodogram(window, sample_rate)
    return band_filter(psd, extraction.band_lo, extraction.band_hi)


def _column_name(freq: float) -> str:
    # repr round-trips exactly through float()
    return f"f_{float(freq)!r}"


def extract_features(recording: Recording, extraction: FeatureExtraction) -> pd.DataFrame:
    """
    Frame a recording and compute one feature row per window.

    Returns:
        DataFrame with columns session_id, start_offset, label, f_<Hz>...;
        extraction metadata in ``df.attrs['extraction']``
    """
    windows = frame(recording, extraction.duration, extraction.overlap)
    rows = [window_features(w, recording.sample_rate, extraction) for w in windows]
    matrix = np.vstack([fv.values for fv in rows])
    columns = [_column_name(f) for f in rows[0].frequencies]

    df = pd.DataFrame(matrix, columns=columns)
    df.insert(0, 'label', recording.label)
    df.insert(0, 'start_offset', [w.start_offset for w in windows])
    df.insert(0, 'session_id', recording.session_id)
    df.attrs['extraction'] = extraction.as_metadata(recording.sample_rate)

    logger.info("Extracted %d x %d %s features from %s",
                matrix.shape[0], matrix.shape[1], extraction.feature_kind, recording.session_id)
    return df


def extract_corpus(recordings: Iterable[Recording], extraction: FeatureExtraction) -> pd.DataFrame:
    """Feature table over many recordings (rows in recording order)."""
    tables = [extract_features(rec, extraction) for rec in recordings]
    if not tables:
        raise ValueError("no recordings to extract features from")
    rates = {t.attrs['extraction']['sample_rate'] for t in tables}
    if len(rates) > 1:
        raise ValueError(f"recordings have mixed sample rates {sorted(rates)}")
    df = pd.concat(tables, ignore_index=True)
    df.attrs['extraction'] = tables[0].attrs['extraction']
    return df


def feature_columns(df: pd.DataFrame) -> List[str]:
    return [c for c in df.columns if c.startswith('f_')]


def write_feature_table(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    """CSV with '# key = value' extraction metadata ahead of the header row."""
    path = Path(path)
    meta = df.attrs.get('extraction', {})
    with open(path, 'w', newline='') as f:
        for key in sorted(meta):
            f.write(f"# {key} = {meta[key]}\n")
        df.to_csv(f, index=False, lineterminator='\n')
    return path


def read_feature_table(path: Union[str, Path]) -> pd.DataFrame:
    """Inverse of write_feature_table; metadata lands in ``df.attrs['extraction']``."""
    path = Path(path)
    meta: Dict[str, object] = {}
    with open(path) as f:
        for line in f:
            if not line.startswith('#'):
                break
            key, _, value = line[1:].partition('=')
            meta[key.strip()] = value.strip()

    df = pd.read_csv(path, comment='#', dtype={'session_id': str, 'label': str},
                     float_precision='round_trip')
    missing = [c for c in ID_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"feature table {path} is missing columns {missing}")
    if not feature_columns(df):
        raise ValueError(f"feature table {path} has no f_<Hz> columns")
    if 'sample_rate' in meta:
        meta['sample_rate'] = float(meta['sample_rate'])
    df.attrs['extraction'] = meta
    return df
