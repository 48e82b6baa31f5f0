"""Hydrophone audio ingestion, spectral features and synthetic corpora."""
from .signal_io import (
    AudioFormatError,
    Recording,
    SessionDescriptor,
    Window,
    frame,
    load_manifest,
    load_recording,
    read_manifest,
    write_manifest,
    write_wav
)
from .spectral import (
    FeatureExtraction,
    FeatureVector,
    Psd,
    band_filter,
    extract_corpus,
    extract_features,
    periodogram,
    read_feature_table,
    welch_psd,
    write_feature_table
)
from .synth import (
    BubblePopulation,
    BubbleSpec,
    CorpusConfig,
    LeakScenario,
    bubble_pulse,
    gen_background,
    gen_corpus,
    gen_leak_signal,
    minnaert_frequency
)

__all__ = [
    'AudioFormatError',
    'Recording',
    'SessionDescriptor',
    'Window',
    'frame',
    'load_manifest',
    'load_recording',
    'read_manifest',
    'write_manifest',
    'write_wav',
    'FeatureExtraction',
    'FeatureVector',
    'Psd',
    'band_filter',
    'extract_corpus',
    'extract_features',
    'periodogram',
    'read_feature_table',
    'welch_psd',
    'write_feature_table',
    'BubblePopulation',
    'BubbleSpec',
    'CorpusConfig',
    'LeakScenario',
    'bubble_pulse',
    'gen_background',
    'gen_corpus',
    'gen_leak_signal',
    'minnaert_frequency'
]
