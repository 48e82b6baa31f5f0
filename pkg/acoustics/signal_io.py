"""
Hydrophone Recording I/O and Windowing

This module ingests PCM WAV recordings, attaches the session metadata that
drives time-based train/test splits, and slices each recording into the
fixed-duration overlapping windows used as classifier sample units.

Windowing:
    window samples   n_w = round(duration × fs)
    overlap samples  n_o = round(overlap × fs)
    hop samples      n_h = n_w - n_o
    window k covers  [k·n_h, k·n_h + n_w)

    count = floor((N - n_w) / n_h) + 1   for N ≥ n_w

Trailing samples that do not fill a whole window are discarded.

Manifest format (CSV, one line per recording):
    path,session_id,start_time,label,flow_lpm
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd
import soundfile as sf

logger = logging.getLogger(__name__)

Label = Literal['leak', 'noise', 'unlabeled']
LABELS = ('leak', 'noise', 'unlabeled')
MANIFEST_COLUMNS = ['path', 'session_id', 'start_time', 'label', 'flow_lpm']

# Subtypes decoded as linear PCM (integer or IEEE float).
PCM_SUBTYPES = {'PCM_S8', 'PCM_U8', 'PCM_16', 'PCM_24', 'PCM_32', 'FLOAT', 'DOUBLE'}

_SOUNDFILE_ERRORS = (RuntimeError, OSError, getattr(sf, 'SoundFileError', RuntimeError))


class AudioFormatError(ValueError):
    """Raised when a file cannot be decoded as PCM audio."""


def _check_label(label: str, flow_lpm: Optional[float]) -> Optional[float]:
    if label not in LABELS:
        raise ValueError(f"label must be one of {LABELS}, got {label!r}")
    if label == 'leak':
        if flow_lpm is None or not np.isfinite(flow_lpm) or flow_lpm <= 0:
            raise ValueError(f"leak label requires a positive flow_lpm, got {flow_lpm}")
        return float(flow_lpm)
    return None


@dataclass(frozen=True)
class SessionDescriptor:
    """
    Metadata for one recording, as listed in a manifest.

    Attributes:
        session_id: Opaque session identifier
        start_time: Session start, seconds since epoch
        label: 'leak', 'noise' or 'unlabeled'
        flow_lpm: Gas flow in liters/minute (leak recordings only)
        path: Location of the WAV file
    """
    session_id: str
    start_time: float = 0.0
    label: Label = 'unlabeled'
    flow_lpm: Optional[float] = None
    path: Optional[Path] = None

    def __post_init__(self):
        object.__setattr__(self, 'session_id', str(self.session_id))
        object.__setattr__(self, 'start_time', float(self.start_time))
        object.__setattr__(self, 'flow_lpm', _check_label(self.label, self.flow_lpm))
        if self.path is not None:
            object.__setattr__(self, 'path', Path(self.path))


@dataclass(frozen=True, eq=False)
class Recording:
    """
    Labeled audio stream.

    Attributes:
        samples: Normalized amplitude in [-1, 1] (read-only float64 array)
        sample_rate: Hz
        session_id: Session identifier
        start_time: Seconds since epoch
        label: 'leak', 'noise' or 'unlabeled'
        flow_lpm: Gas flow for leak recordings
        onset: Leak onset within the recording (seconds), when known
        sensitivity_db: Hydrophone sensitivity, metadata only
    """
    samples: np.ndarray
    sample_rate: int
    session_id: str
    start_time: float = 0.0
    label: Label = 'unlabeled'
    flow_lpm: Optional[float] = None
    onset: Optional[float] = None
    sensitivity_db: float = -154.0

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64).reshape(-1)
        if samples.size == 0:
            raise ValueError("Recording samples must be non-empty")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate', int(self.sample_rate))
        object.__setattr__(self, 'session_id', str(self.session_id))
        object.__setattr__(self, 'flow_lpm', _check_label(self.label, self.flow_lpm))

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return self.samples.size / self.sample_rate

    @property
    def descriptor(self) -> SessionDescriptor:
        return SessionDescriptor(
            session_id=self.session_id,
            start_time=self.start_time,
            label=self.label,
            flow_lpm=self.flow_lpm
        )


@dataclass(frozen=True, eq=False)
class Window:
    """Fixed-duration slice of a Recording."""
    samples: np.ndarray
    start_offset: float
    source: str
    label: Label
    flow_lpm: Optional[float] = None
    sample_rate: int = field(default=0)


def load_recording(path: Union[str, Path], metadata: SessionDescriptor) -> Recording:
    """
    Read a PCM WAV file into a Recording.

    Integer PCM is divided by the magnitude of the type's most negative
    value, so 16-bit data lands in [-1, 1). Only the first channel of a
    multichannel file is kept.

    Parameters:
        path: WAV file
        metadata: Session descriptor (label, session, start time)

    Returns:
        Recording

    Raises:
        AudioFormatError: unreadable file, non-WAV container, non-PCM encoding
            or zero-length audio
    """
    path = Path(path)
    try:
        info = sf.info(str(path))
    except _SOUNDFILE_ERRORS as exc:
        raise AudioFormatError(f"unreadable file {path}: {exc}") from exc

    if info.format != 'WAV':
        raise AudioFormatError(f"not a WAV container ({info.format}) in {path}")
    if info.subtype not in PCM_SUBTYPES:
        raise AudioFormatError(f"non-PCM encoding {info.subtype} in {path}")
    if info.frames == 0:
        raise AudioFormatError(f"zero-length audio in {path}")

    data, sample_rate = sf.read(str(path), dtype='float64', always_2d=True)
    if data.shape[0] == 0:
        raise AudioFormatError(f"zero-length audio in {path}")
    samples = data[:, 0]

    if info.subtype in ('FLOAT', 'DOUBLE') and np.max(np.abs(samples)) > 1.0:
        warnings.warn(f"{path}: float samples exceed unit amplitude, clipping to [-1, 1]")
        samples = np.clip(samples, -1.0, 1.0)

    logger.debug("Loaded %s: %d samples at %d Hz (%s, %d channel(s))",
                 path, samples.size, sample_rate, info.subtype, info.channels)

    return Recording(
        samples=samples,
        sample_rate=int(sample_rate),
        session_id=metadata.session_id,
        start_time=metadata.start_time,
        label=metadata.label,
        flow_lpm=metadata.flow_lpm
    )


def write_wav(recording: Recording, path: Union[str, Path], subtype: str = 'PCM_16') -> Path:
    """
    Write a Recording as WAV, clipping to [-1, 1].

    Returns:
        The written path

    Raises:
        OSError: the file cannot be created or written
    """
    path = Path(path)
    samples = recording.samples
    if np.max(np.abs(samples)) > 1.0:
        warnings.warn(f"{recording.session_id}: clipping samples to [-1, 1] for {subtype}")
        samples = np.clip(samples, -1.0, 1.0)
    try:
        sf.write(str(path), samples, recording.sample_rate, subtype=subtype, format='WAV')
    except _SOUNDFILE_ERRORS as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def frame(recording: Recording, duration: float, overlap: float) -> List[Window]:
    """
    Slice a recording into overlapping windows of equal length.

    Parameters:
        recording: Source recording
        duration: Window length in seconds
        overlap: Seconds shared by consecutive windows (0 ≤ overlap < duration)

    Returns:
        Windows in time order; window k starts at k × (duration - overlap) s

    Raises:
        ValueError: overlap ≥ duration, window shorter than one sample,
            or recording shorter than one window
    """
    if overlap < 0:
        raise ValueError(f"overlap must be non-negative, got {overlap}")
    if overlap >= duration:
        raise ValueError(f"overlap must be smaller than duration, got overlap={overlap}, duration={duration}")

    fs = recording.sample_rate
    n_window = int(round(duration * fs))
    n_overlap = int(round(overlap * fs))
    if n_window < 1:
        raise ValueError(f"window of {duration} s is shorter than one sample at {fs} Hz")
    n_hop = n_window - n_overlap
    if n_hop < 1:
        raise ValueError(f"overlap must be smaller than duration, got overlap={overlap}, duration={duration}")

    n_samples = recording.samples.size
    if n_samples < n_window:
        raise ValueError(
            f"recording shorter than one window: {n_samples / fs:.3f} s < {duration} s"
        )

    count = (n_samples - n_window) // n_hop + 1
    windows = []
    for k in range(count):
        start = k * n_hop
        windows.append(Window(
            samples=recording.samples[start:start + n_window],
            start_offset=start / fs,
            source=recording.session_id,
            label=recording.label,
            flow_lpm=recording.flow_lpm,
            sample_rate=fs
        ))

    logger.debug("Framed %s into %d windows (%d samples, hop %d)",
                 recording.session_id, count, n_window, n_hop)
    return windows


def read_manifest(path: Union[str, Path]) -> List[SessionDescriptor]:
    """
    Parse a manifest CSV; relative WAV paths resolve against its directory.

    Raises:
        ValueError: missing columns, unknown labels or invalid flows
    """
    path = Path(path)
    df = pd.read_csv(path, dtype={'path': str, 'session_id': str, 'label': str},
                     keep_default_na=False, skipinitialspace=True)
    missing = [c for c in MANIFEST_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"manifest {path} is missing columns {missing}")

    entries = []
    for row in df.itertuples(index=False):
        flow = str(row.flow_lpm).strip()
        wav_path = Path(row.path)
        if not wav_path.is_absolute():
            wav_path = path.parent / wav_path
        entries.append(SessionDescriptor(
            session_id=row.session_id,
            start_time=float(row.start_time),
            label=row.label.strip(),
            flow_lpm=float(flow) if flow not in ('', 'nan') else None,
            path=wav_path
        ))
    return entries


def write_manifest(entries: Sequence[SessionDescriptor], path: Union[str, Path]) -> Path:
    """Write manifest entries; paths are stored relative to the manifest when possible."""
    path = Path(path)
    rows = []
    for entry in entries:
        wav_path = entry.path if entry.path is not None else Path('')
        try:
            wav_path = wav_path.relative_to(path.parent)
        except ValueError:
            pass
        rows.append({
            'path': wav_path.as_posix(),
            'session_id': entry.session_id,
            'start_time': repr(entry.start_time),
            'label': entry.label,
            'flow_lpm': '' if entry.flow_lpm is None else repr(entry.flow_lpm)
        })
    pd.DataFrame(rows, columns=MANIFEST_COLUMNS).to_csv(path, index=False)
    return path


def load_manifest(path: Union[str, Path]) -> List[Recording]:
    """Load every recording listed in a manifest."""
    return [load_recording(entry.path, entry) for entry in read_manifest(path)]
