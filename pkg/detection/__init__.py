"""HMM smoothing of classifier output and the pipeline commands."""
from .hmm import (
    DegenerateObservationError,
    DetectionTrace,
    HmmParams,
    brute_force_filter,
    build_trace,
    emissions_from_cv,
    forward_update,
    smooth_sequence,
    sweep_thresholds
)
from .config import ConfigError, PipelineConfig, load_corpus_config, load_pipeline_config

__all__ = [
    'DegenerateObservationError',
    'DetectionTrace',
    'HmmParams',
    'brute_force_filter',
    'build_trace',
    'emissions_from_cv',
    'forward_update',
    'smooth_sequence',
    'sweep_thresholds',
    'ConfigError',
    'PipelineConfig',
    'load_corpus_config',
    'load_pipeline_config'
]
