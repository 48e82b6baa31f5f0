"""
Tests for recording ingestion, windowing and manifests.

Covers:
- Recording validation and immutability
- Window counts, offsets and lengths for overlapping frames
- PCM WAV decoding (16-bit, float, multichannel) and rejection of bad files
- Manifest round trips and label/flow validation
"""

import warnings

import numpy as np
import pytest
import soundfile as sf

from acoustics.signal_io import (
    AudioFormatError,
    Recording,
    SessionDescriptor,
    frame,
    load_manifest,
    load_recording,
    read_manifest,
    write_manifest,
    write_wav
)

FS = 8000


def make_recording(seconds=10.0, fs=FS, label='noise', flow=None, seed=0, session_id='s1'):
    rng = np.random.default_rng(seed)
    return Recording(samples=0.1 * rng.standard_normal(int(seconds * fs)), sample_rate=fs,
                     session_id=session_id, label=label, flow_lpm=flow)


class TestRecording:
    """Construction-time validation."""

    def test_empty_samples(self):
        """Zero samples are rejected."""
        with pytest.raises(ValueError, match="non-empty"):
            Recording(samples=np.array([]), sample_rate=FS, session_id='x')

    def test_invalid_sample_rate(self):
        """Sample rate must be a positive integer."""
        with pytest.raises(ValueError, match="sample_rate"):
            Recording(samples=np.ones(10), sample_rate=0, session_id='x')
        with pytest.raises(ValueError, match="sample_rate"):
            Recording(samples=np.ones(10), sample_rate=8000.5, session_id='x')

    def test_leak_requires_flow(self):
        """A leak label without a positive flow is rejected."""
        with pytest.raises(ValueError, match="positive flow_lpm"):
            Recording(samples=np.ones(10), sample_rate=FS, session_id='x', label='leak')
        with pytest.raises(ValueError, match="positive flow_lpm"):
            Recording(samples=np.ones(10), sample_rate=FS, session_id='x', label='leak', flow_lpm=0)

    def test_unknown_label(self):
        """Labels outside leak/noise/unlabeled are rejected."""
        with pytest.raises(ValueError, match="label must be one of"):
            Recording(samples=np.ones(10), sample_rate=FS, session_id='x', label='boat')

    def test_noise_drops_flow(self):
        """Flow is only kept for leak recordings."""
        rec = Recording(samples=np.ones(10), sample_rate=FS, session_id='x', label='noise', flow_lpm=5)
        assert rec.flow_lpm is None

    def test_samples_read_only(self):
        """Samples cannot be modified in place."""
        rec = make_recording(1.0)
        with pytest.raises(ValueError):
            rec.samples[0] = 1.0

    def test_duration(self):
        """Duration is sample count over sample rate."""
        assert make_recording(2.5).duration == pytest.approx(2.5)


class TestFrame:
    """Overlapping window slicing."""

    def test_frame_count(self):
        """10 s at 4 s windows and 3 s overlap gives 7 windows."""
        windows = frame(make_recording(10.0), duration=4.0, overlap=3.0)
        assert len(windows) == 7
        assert [w.start_offset for w in windows] == pytest.approx([0, 1, 2, 3, 4, 5, 6])

    def test_window_length_exact(self):
        """Every window has round(duration × fs) samples."""
        windows = frame(make_recording(10.0), duration=0.3337, overlap=0.1)
        n = int(round(0.3337 * FS))
        assert all(w.samples.size == n for w in windows)

    def test_no_overlap_discards_tail(self):
        """Trailing samples shorter than a window are dropped."""
        windows = frame(make_recording(10.0), duration=4.0, overlap=0.0)
        assert len(windows) == 2
        assert windows[1].start_offset == pytest.approx(4.0)

    def test_windows_match_source(self):
        """Window samples are the corresponding slice of the recording."""
        rec = make_recording(5.0)
        windows = frame(rec, duration=2.0, overlap=1.0)
        start = int(windows[2].start_offset * FS)
        np.testing.assert_array_equal(windows[2].samples, rec.samples[start:start + 2 * FS])

    @pytest.mark.parametrize('overlap', [0.3, 1.0 / 3.0, 0.5])
    def test_consecutive_windows_share_overlap(self, overlap):
        """Neighbouring windows share exactly round(overlap · fs) samples."""
        shared = int(round(overlap * FS))
        windows = frame(make_recording(5.0), duration=1.0, overlap=overlap)
        for a, b in zip(windows[:-1], windows[1:]):
            np.testing.assert_array_equal(a.samples[a.samples.size - shared:], b.samples[:shared])
            assert round((b.start_offset - a.start_offset) * FS) == FS - shared

    def test_label_inherited(self):
        """Windows carry the recording's label, flow and session."""
        rec = make_recording(5.0, label='leak', flow=10.0, session_id='leak-1')
        w = frame(rec, 1.0, 0.5)[0]
        assert (w.label, w.flow_lpm, w.source) == ('leak', 10.0, 'leak-1')

    def test_overlap_not_smaller_than_duration(self):
        """overlap ≥ duration is rejected."""
        with pytest.raises(ValueError, match="overlap must be smaller than duration"):
            frame(make_recording(10.0), duration=2.0, overlap=2.0)

    def test_negative_overlap(self):
        """Negative overlap is rejected."""
        with pytest.raises(ValueError, match="non-negative"):
            frame(make_recording(10.0), duration=2.0, overlap=-1.0)

    def test_recording_shorter_than_window(self):
        """A recording shorter than one window is an error."""
        with pytest.raises(ValueError, match="recording shorter than one window"):
            frame(make_recording(1.0), duration=2.0, overlap=0.0)


class TestLoadRecording:
    """PCM WAV decoding."""

    def test_pcm16_round_trip(self, tmp_path):
        """16-bit write/read preserves samples to quantization accuracy."""
        rec = make_recording(1.0)
        path = write_wav(rec, tmp_path / 'a.wav')
        loaded = load_recording(path, SessionDescriptor('a', start_time=12.0))
        assert loaded.sample_rate == FS
        assert loaded.start_time == 12.0
        np.testing.assert_allclose(loaded.samples, rec.samples, atol=1e-4)

    def test_first_channel_of_stereo(self, tmp_path):
        """Only channel 0 of a multichannel file is kept."""
        left = np.full(100, 0.25)
        right = np.full(100, -0.5)
        path = tmp_path / 'stereo.wav'
        sf.write(str(path), np.column_stack([left, right]), FS, subtype='PCM_16')
        loaded = load_recording(path, SessionDescriptor('st'))
        np.testing.assert_allclose(loaded.samples, 0.25, atol=1e-4)

    def test_float_wav_clipped(self, tmp_path):
        """Float samples beyond unit amplitude are clipped with a warning."""
        path = tmp_path / 'float.wav'
        sf.write(str(path), np.array([0.5, 1.5, -2.0, 0.0]), FS, subtype='FLOAT')
        with pytest.warns(UserWarning, match="clipping"):
            loaded = load_recording(path, SessionDescriptor('f'))
        assert loaded.samples.max() == 1.0
        assert loaded.samples.min() == -1.0

    def test_unreadable_file(self, tmp_path):
        """Non-audio content raises AudioFormatError."""
        path = tmp_path / 'junk.wav'
        path.write_text("not audio at all")
        with pytest.raises(AudioFormatError, match="unreadable file"):
            load_recording(path, SessionDescriptor('j'))

    def test_missing_file(self, tmp_path):
        """A missing path is reported as unreadable."""
        with pytest.raises(AudioFormatError, match="unreadable file"):
            load_recording(tmp_path / 'none.wav', SessionDescriptor('n'))

    def test_non_pcm_encoding(self, tmp_path):
        """μ-law WAV is rejected."""
        path = tmp_path / 'ulaw.wav'
        sf.write(str(path), np.zeros(100), FS, subtype='ULAW', format='WAV')
        with pytest.raises(AudioFormatError, match="non-PCM encoding"):
            load_recording(path, SessionDescriptor('u'))

    def test_flac_container_rejected(self, tmp_path):
        """PCM data in a FLAC container is not accepted as WAV."""
        path = tmp_path / 'disguised.wav'
        sf.write(str(path), np.full(100, 0.1), FS, subtype='PCM_16', format='FLAC')
        with pytest.raises(AudioFormatError, match="not a WAV container"):
            load_recording(path, SessionDescriptor('d'))

    def test_zero_length(self, tmp_path):
        """A WAV without frames is rejected."""
        path = tmp_path / 'empty.wav'
        sf.write(str(path), np.zeros(0), FS, subtype='PCM_16')
        with pytest.raises(AudioFormatError, match="zero-length audio"):
            load_recording(path, SessionDescriptor('e'))

    def test_write_clips_with_warning(self, tmp_path):
        """Writing out-of-range samples warns and clips."""
        rec = Recording(samples=np.array([0.0, 2.0, -3.0]), sample_rate=FS, session_id='c')
        with pytest.warns(UserWarning, match="clipping"):
            write_wav(rec, tmp_path / 'c.wav')
        loaded = load_recording(tmp_path / 'c.wav', SessionDescriptor('c'))
        assert np.all(np.abs(loaded.samples) <= 1.0)

    def test_write_to_directory_path(self, tmp_path):
        """A target path that is a directory raises OSError."""
        target = tmp_path / 'taken.wav'
        target.mkdir()
        with pytest.raises(OSError, match="cannot write"):
            write_wav(make_recording(0.5), target)

    def test_no_warning_in_range(self, tmp_path):
        """In-range samples are written silently."""
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            write_wav(make_recording(0.5), tmp_path / 'ok.wav')
        assert not [w for w in caught if 'clipping' in str(w.message)]


class TestManifest:
    """Manifest CSV handling."""

    def test_round_trip(self, tmp_path):
        """Entries survive write/read with paths resolved against the manifest."""
        entries = [
            SessionDescriptor('leak-1', 100.0, 'leak', 10.0, tmp_path / 'leak-1.wav'),
            SessionDescriptor('noise-1', 200.5, 'noise', None, tmp_path / 'noise-1.wav'),
        ]
        path = write_manifest(entries, tmp_path / 'manifest.csv')
        assert 'leak-1.wav' in path.read_text()
        assert str(tmp_path) not in path.read_text()
        assert read_manifest(path) == entries

    def test_missing_column(self, tmp_path):
        """A manifest without the flow column is rejected."""
        path = tmp_path / 'bad.csv'
        path.write_text("path,session_id,start_time,label\na.wav,a,0,noise\n")
        with pytest.raises(ValueError, match="missing columns"):
            read_manifest(path)

    def test_leak_without_flow(self, tmp_path):
        """Leak rows need a flow."""
        path = tmp_path / 'bad.csv'
        path.write_text("path,session_id,start_time,label,flow_lpm\na.wav,a,0,leak,\n")
        with pytest.raises(ValueError, match="positive flow_lpm"):
            read_manifest(path)

    def test_load_manifest(self, tmp_path):
        """load_manifest returns labeled recordings."""
        write_wav(make_recording(1.0), tmp_path / 'n.wav')
        write_manifest([SessionDescriptor('n', 5.0, 'noise', None, tmp_path / 'n.wav')],
                       tmp_path / 'm.csv')
        (rec,) = load_manifest(tmp_path / 'm.csv')
        assert rec.session_id == 'n'
        assert rec.label == 'noise'
        assert rec.start_time == 5.0
