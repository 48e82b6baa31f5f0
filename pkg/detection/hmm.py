"""
Two-State HMM Smoothing of Window Predictions

Hidden state X_t ∈ {0 = no leak, 1 = leak}; observation Y_t ∈ {0, 1} is the
thresholded classifier output for window t.

Transitions:
    P(X_t = 1 | X_{t-1} = 0) = ε   (leak starts)
    P(X_t = 0 | X_{t-1} = 1) = δ   (leak stops)

Emissions (estimated from cross-validated recalls):
    P(Y = 1 | X = 1) = p_detect    (positive recall)
    P(Y = 0 | X = 0) = p_reject    (negative recall)

Forward recursion:
    π_t(x) ∝ P(y_t | x) · Σ_{x'} P(x | x') · π_{t-1}(x')

π_0 is a point mass on X_0 = 0; the first observation is processed as
transition-then-emission. Everything runs in linear probability space with
per-step normalization.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from classifiers.evaluation import confusion_matrix

logger = logging.getLogger(__name__)

RECALL_FLOOR = 1e-6
TRACE_COLUMNS = ['start_offset', 'score', 'y', 'pi_leak']

# Largest sequence the path-enumeration oracle accepts.
BRUTE_FORCE_MAX_LENGTH = 16


class DegenerateObservationError(ValueError):
    """Both unnormalized forward masses are zero."""


@dataclass(frozen=True)
class HmmParams:
    """
    Transition and emission probabilities of the two-state chain.

    Defaults: ε = 0.1, δ = 1e-5, initial state 'no leak'.
    """
    epsilon: float = 0.1
    delta: float = 1e-5
    p_detect: float = 0.9
    p_reject: float = 0.9
    initial: Tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        for name in ('epsilon', 'delta', 'p_detect', 'p_reject'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        initial = tuple(float(v) for v in self.initial)
        if len(initial) != 2 or min(initial) < 0 or abs(sum(initial) - 1.0) > 1e-12:
            raise ValueError(f"initial must be a distribution over two states, got {self.initial}")
        object.__setattr__(self, 'initial', initial)

    @property
    def transition(self) -> np.ndarray:
        """Row-stochastic matrix A[from, to]."""
        return np.array([[1.0 - self.epsilon, self.epsilon],
                         [self.delta, 1.0 - self.delta]])

    def emission(self, y: int) -> np.ndarray:
        """(P(y | X=0), P(y | X=1))."""
        if y == 1:
            return np.array([1.0 - self.p_reject, self.p_detect])
        if y == 0:
            return np.array([self.p_reject, 1.0 - self.p_detect])
        raise ValueError(f"observation must be 0 or 1, got {y}")

    def with_emissions(self, p_detect: float, p_reject: float) -> 'HmmParams':
        """Copy with recalls clamped to [1e-6, 1 - 1e-6]."""
        return replace(self, p_detect=clamp_recall(p_detect, 'p_detect'),
                       p_reject=clamp_recall(p_reject, 'p_reject'))


def clamp_recall(value: float, name: str = 'recall') -> float:
    """Keep a recall estimate away from 0 and 1 so no observation is impossible."""
    clamped = min(max(float(value), RECALL_FLOOR), 1.0 - RECALL_FLOOR)
    if clamped != value:
        warnings.warn(f"{name} estimate {value} clamped to {clamped}")
    return clamped


def forward_update(prior: Sequence[float], y: int, params: HmmParams) -> np.ndarray:
    """
    One step of the forward recursion.

    Parameters:
        prior: Distribution over X_{t-1}
        y: Observation at t
        params: Chain probabilities

    Returns:
        Distribution over X_t

    Raises:
        DegenerateObservationError: y has zero probability under both states
    """
    prior = np.asarray(prior, dtype=np.float64)
    if prior.shape != (2,) or prior.min() < 0 or abs(prior.sum() - 1.0) > 1e-9:
        raise ValueError(f"prior must be a distribution over two states, got {prior}")
    unnormalized = params.emission(int(y)) * (prior @ params.transition)
    total = unnormalized.sum()
    if total <= 0.0:
        raise DegenerateObservationError(
            f"observation y={y} is impossible under both states "
            f"(p_detect={params.p_detect}, p_reject={params.p_reject})"
        )
    return unnormalized / total


def smooth_sequence(y: Sequence[int], params: HmmParams) -> np.ndarray:
    """π_t(1) for each observation, starting from params.initial."""
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if y.size == 0:
        raise ValueError("observation sequence must be non-empty")
    pi = np.empty(y.size)
    state = np.asarray(params.initial)
    for t, obs in enumerate(y):
        state = forward_update(state, obs, params)
        pi[t] = state[1]
    return pi


def brute_force_filter(y: Sequence[int], params: HmmParams) -> np.ndarray:
    """
    π_t(1) by enumerating every hidden path x_0..x_t.

    Exponential in the sequence length; limited to 16 observations.
    """
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if y.size == 0:
        raise ValueError("observation sequence must be non-empty")
    if y.size > BRUTE_FORCE_MAX_LENGTH:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_LENGTH} observations, got {y.size}")

    A = params.transition
    initial = np.asarray(params.initial)
    emissions = np.array([params.emission(int(obs)) for obs in y])
    pi = np.empty(y.size)
    for t in range(1, y.size + 1):
        codes = np.arange(2 ** (t + 1))
        paths = (codes[:, None] >> np.arange(t + 1)) & 1
        weight = initial[paths[:, 0]]
        for s in range(1, t + 1):
            weight = weight * A[paths[:, s - 1], paths[:, s]] * emissions[s - 1, paths[:, s]]
        total = weight.sum()
        if total <= 0.0:
            raise DegenerateObservationError(f"observation sequence has zero probability at t={t}")
        pi[t - 1] = weight[paths[:, t] == 1].sum() / total
    return pi


def emissions_from_cv(scores: Sequence[float], labels: Sequence[int], threshold: float) -> Dict[str, float]:
    """
    Positive and negative recall of thresholded out-of-fold scores.

    score ≥ threshold counts as a leak prediction.

    Returns:
        {'p_detect': TP/(TP+FN), 'p_reject': TN/(TN+FP)}

    Raises:
        ValueError: a class absent from labels
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    if not np.any(labels == 1) or not np.any(labels == 0):
        raise ValueError("cv scores must contain both leak and noise windows")
    cm = confusion_matrix(labels, (scores >= threshold).astype(np.int64))
    return {'p_detect': cm.tp / (cm.tp + cm.fn), 'p_reject': cm.tn / (cm.tn + cm.fp)}


@dataclass(eq=False)
class DetectionTrace:
    """Per-window scores, thresholded classes and filtered leak probability."""
    start_offset: np.ndarray
    score: np.ndarray
    y: np.ndarray
    pi_leak: np.ndarray
    threshold: float
    params: HmmParams = field(default_factory=HmmParams)

    def __post_init__(self):
        n = len(self.score)
        if not (len(self.start_offset) == len(self.y) == len(self.pi_leak) == n):
            raise ValueError("trace series lengths differ")

    def __len__(self) -> int:
        return len(self.score)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'start_offset': np.asarray(self.start_offset, dtype=np.float64),
            'score': np.asarray(self.score, dtype=np.float64),
            'y': np.asarray(self.y, dtype=np.int64),
            'pi_leak': np.asarray(self.pi_leak, dtype=np.float64),
        }, columns=TRACE_COLUMNS)

    def first_alarm(self, level: float = 0.9) -> Optional[float]:
        """Start offset of the first window with π ≥ level."""
        hits = np.flatnonzero(np.asarray(self.pi_leak) >= level)
        return float(self.start_offset[hits[0]]) if hits.size else None


def build_trace(
    scores: Sequence[float],
    start_offsets: Sequence[float],
    threshold: float,
    params: HmmParams
) -> DetectionTrace:
    """Threshold scores (≥ rule) and filter them into a DetectionTrace."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    y = (scores >= threshold).astype(np.int64)
    pi = smooth_sequence(y, params)
    logger.debug("Trace at threshold %.2f: %d/%d positive windows, max π %.3f",
                 threshold, y.sum(), y.size, pi.max())
    return DetectionTrace(start_offset=np.asarray(start_offsets, dtype=np.float64), score=scores,
                          y=y, pi_leak=pi, threshold=float(threshold), params=params)


def sweep_thresholds(
    scores: Sequence[float],
    start_offsets: Sequence[float],
    cv_scores: Sequence[float],
    cv_labels: Sequence[int],
    thresholds: Sequence[float],
    base: HmmParams = HmmParams()
) -> Dict[float, DetectionTrace]:
    """One trace per threshold, each with emissions re-estimated at that threshold."""
    traces = {}
    for threshold in thresholds:
        recalls = emissions_from_cv(cv_scores, cv_labels, threshold)
        params = base.with_emissions(recalls['p_detect'], recalls['p_reject'])
        logger.info("Threshold %.2f: p_detect %.4f, p_reject %.4f",
                    threshold, params.p_detect, params.p_reject)
        traces[float(threshold)] = build_trace(scores, start_offsets, threshold, params)
    return traces


def write_trace(trace: DetectionTrace, path: Union[str, Path], header: Optional[Mapping[str, object]] = None) -> Path:
    """Trace CSV preceded by '# key = value' lines (threshold and HMM params first)."""
    path = Path(path)
    meta = {
        'threshold': trace.threshold,
        'epsilon': trace.params.epsilon,
        'delta': trace.params.delta,
        'p_detect': trace.params.p_detect,
        'p_reject': trace.params.p_reject,
    }
    meta.update(header or {})
    with open(path, 'w', newline='') as f:
        for key, value in meta.items():
            f.write(f"# {key} = {value}\n")
        trace.to_frame().to_csv(f, index=False, lineterminator='\n')
    return path
