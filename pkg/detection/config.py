"""
Pipeline configuration.

Settings come from dataclass defaults, then an optional ``key = value`` file,
then command-line flags, each layer overriding the previous one:

    # detector.conf
    duration = 4
    overlap = 3
    feature_kind = welch
    algorithm = gbt
    thresholds = 0.25, 0.5, 0.75

Lists are comma-separated; ``#`` starts a comment; unknown keys are errors.
"""

from __future__ import annotations

import logging
import typing
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Type, TypeVar, Union

from acoustics.spectral import FEATURE_KINDS, FeatureExtraction
from acoustics.synth import CorpusConfig
from classifiers.trees import ALGORITHMS, SHORT_NAMES
from .hmm import HmmParams

logger = logging.getLogger(__name__)

T = TypeVar('T')

_TRUE = {'true', 'yes', 'on', '1'}
_FALSE = {'false', 'no', 'off', '0'}

# Window grid of the selection protocol: (duration, overlap) in seconds.
DEFAULT_WINDOW_GRID = ((1.0, 0.0), (1.0, 0.5), (2.0, 0.0), (2.0, 1.0), (3.0, 1.0),
                       (3.0, 2.0), (4.0, 2.0), (4.0, 3.0), (5.0, 3.0), (5.0, 4.0))


class ConfigError(ValueError):
    """Unknown key, unparsable value or inconsistent settings."""


@dataclass(frozen=True)
class PipelineConfig:
    """
    Every tunable of the detection pipeline.

    Window and band settings must match between feature extraction, training
    and detection; models record them and detect refuses a mismatch.
    """
    seed: int = 0
    # windowing and features
    duration: float = 4.0
    overlap: float = 3.0
    feature_kind: str = 'welch'
    band_lo: float = 150.0
    band_hi: float = 500.0
    segment_len: int = 8192
    segment_overlap: int = 4096
    # classifier
    algorithm: str = 'gbt'
    n_trees: int = 100
    n_rounds: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    feature_subset_size: Optional[int] = None
    reg_lambda: float = 1.0
    bootstrap: bool = True
    n_jobs: int = 1
    # selection
    folds: int = 5
    respect_sessions: bool = False
    algorithms: Tuple[str, ...] = ('rf', 'gbt')
    feature_kinds: Tuple[str, ...] = FEATURE_KINDS
    durations: Tuple[float, ...] = tuple(d for d, _ in DEFAULT_WINDOW_GRID)
    overlaps: Tuple[float, ...] = tuple(o for _, o in DEFAULT_WINDOW_GRID)
    grid_n_estimators: Tuple[int, ...] = (100, 300)
    grid_max_depth: Tuple[int, ...] = (3, 6)
    grid_learning_rate: Tuple[float, ...] = (0.1, 0.3)
    # detection
    thresholds: Tuple[float, ...] = (0.5,)
    epsilon: float = 0.1
    delta: float = 1e-5
    emission_folds: int = 10
    holdout: Tuple[str, ...] = ()
    report_threshold: float = 0.5

    def __post_init__(self):
        if self.feature_kind not in FEATURE_KINDS:
            raise ConfigError(f"feature_kind must be one of {FEATURE_KINDS}, got {self.feature_kind!r}")
        bad = [k for k in self.feature_kinds if k not in FEATURE_KINDS]
        if bad:
            raise ConfigError(f"feature_kinds must be drawn from {FEATURE_KINDS}, got {bad}")
        names = set(ALGORITHMS) | set(SHORT_NAMES)
        for name in (self.algorithm, *self.algorithms):
            if name not in names:
                raise ConfigError(f"algorithm must be one of {sorted(ALGORITHMS)}, got {name!r}")
        if len(self.durations) != len(self.overlaps):
            raise ConfigError(
                f"durations and overlaps must pair up, got {len(self.durations)} and {len(self.overlaps)} values"
            )
        for d, o in self.window_grid():
            if not 0 <= o < d:
                raise ConfigError(f"window grid needs 0 ≤ overlap < duration, got ({d}, {o})")
        if not 0 <= self.overlap < self.duration:
            raise ConfigError(f"overlap must be in [0, duration), got overlap={self.overlap}, duration={self.duration}")
        for t in (*self.thresholds, self.report_threshold):
            if not 0.0 <= t <= 1.0:
                raise ConfigError(f"thresholds must lie in [0, 1], got {t}")
        if not self.thresholds:
            raise ConfigError("thresholds must be non-empty")
        if self.folds < 2 or self.emission_folds < 2:
            raise ConfigError(f"fold counts must be ≥ 2, got folds={self.folds}, emission_folds={self.emission_folds}")

    def extraction(self) -> FeatureExtraction:
        return FeatureExtraction(
            duration=self.duration, overlap=self.overlap, feature_kind=self.feature_kind,
            band_lo=self.band_lo, band_hi=self.band_hi,
            segment_len=self.segment_len, segment_overlap=self.segment_overlap
        )

    def window_grid(self) -> List[Tuple[float, float]]:
        return list(zip(self.durations, self.overlaps))

    def hmm_params(self) -> HmmParams:
        """Transition settings; emissions are filled in per threshold."""
        return HmmParams(epsilon=self.epsilon, delta=self.delta)

    def model_params(self, algorithm: Optional[str] = None) -> Dict[str, Any]:
        """Flat hyperparameter record for classifiers.trees.fit_model."""
        algorithm = algorithm or self.algorithm
        common = {'max_depth': self.max_depth, 'min_samples_leaf': self.min_samples_leaf,
                  'feature_subset_size': self.feature_subset_size, 'seed': self.seed}
        if ALGORITHMS.get(algorithm, algorithm) == 'random_forest':
            return {**common, 'n_trees': self.n_trees, 'bootstrap': self.bootstrap, 'n_jobs': self.n_jobs}
        return {**common, 'n_rounds': self.n_rounds, 'learning_rate': self.learning_rate,
                'reg_lambda': self.reg_lambda}

    def grid(self, algorithm: str) -> List[Dict[str, Any]]:
        """Cartesian hyperparameter grid on top of model_params."""
        base = self.model_params(algorithm)
        if ALGORITHMS.get(algorithm, algorithm) == 'random_forest':
            return [{**base, 'n_trees': n, 'max_depth': d}
                    for n in self.grid_n_estimators for d in self.grid_max_depth]
        return [{**base, 'n_rounds': n, 'max_depth': d, 'learning_rate': lr}
                for n in self.grid_n_estimators for d in self.grid_max_depth
                for lr in self.grid_learning_rate]

    def as_header(self) -> Dict[str, str]:
        """Effective settings as report header values."""
        return {key: format_value(value) for key, value in asdict(self).items()}


def format_value(value: Any) -> str:
    if isinstance(value, (tuple, list)):
        return ', '.join(format_value(v) for v in value)
    if value is None:
        return 'none'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    return str(value)


def parse_config_text(text: str, source: str = '<config>') -> Dict[str, str]:
    """
    Raw ``key = value`` pairs.

    Raises:
        ConfigError: line without '=' or a repeated key
    """
    values: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition('=')
        key = key.strip()
        if not eq or not key:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {line!r}")
        if key in values:
            raise ConfigError(f"{source}:{number}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def _coerce(key: str, raw: str, hint: Any) -> Any:
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    try:
        if origin is Union:
            inner = [a for a in args if a is not type(None)][0]
            return None if raw.lower() in ('', 'none', 'null') else _coerce(key, raw, inner)
        if origin in (tuple, Tuple):
            return tuple(_coerce(key, item.strip(), args[0]) for item in raw.split(',') if item.strip())
        if hint is bool:
            lowered = raw.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(raw)
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        return str(raw)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {getattr(hint, '__name__', hint)}") from exc


def coerce_values(cls: Type[T], raw: Mapping[str, str]) -> Dict[str, Any]:
    """
    Convert raw strings to the field types of a config dataclass.

    Raises:
        ConfigError: unknown key or unparsable value
    """
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s) for {cls.__name__}: {unknown}")
    return {key: _coerce(key, value, hints[key]) for key, value in raw.items()}


def build_config(
    cls: Type[T],
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None
) -> T:
    """
    Defaults, then the file at path, then non-None overrides.

    Raises:
        ConfigError: unknown key, bad value, or settings rejected by cls
    """
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        values.update(coerce_values(cls, parse_config_text(text, str(path))))
    known = {f.name for f in fields(cls)}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in known:
            raise ConfigError(f"unknown config key for {cls.__name__}: {key!r}")
        values[key] = tuple(value) if isinstance(value, list) else value
    try:
        config = cls(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    logger.debug("Effective %s: %s", cls.__name__, config)
    return config


def load_pipeline_config(path=None, overrides=None) -> PipelineConfig:
    return build_config(PipelineConfig, path, overrides)


def load_corpus_config(path=None, overrides=None) -> CorpusConfig:
    return build_config(CorpusConfig, path, overrides)


def check_model_extraction(model_metadata: Mapping[str, Any], extraction: FeatureExtraction):
    """
    Refuse detection when the model was trained on other windows or bands.

    Raises:
        ConfigError: window or band mismatch
    """
    recorded = model_metadata.get('extraction')
    if not recorded:
        raise ConfigError("model file carries no extraction settings")
    trained = FeatureExtraction.from_metadata(recorded)
    mismatched = [
        f"{name}: model {getattr(trained, name)} vs config {getattr(extraction, name)}"
        for name in ('duration', 'overlap', 'feature_kind', 'band_lo', 'band_hi',
                     'segment_len', 'segment_overlap')
        if getattr(trained, name) != getattr(extraction, name)
    ]
    if mismatched:
        raise ConfigError("band/window mismatch between model and config: " + '; '.join(mismatched))
