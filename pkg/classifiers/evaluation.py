"""
Evaluation Protocol

Confusion-matrix metrics, cross-validation folds and the session/time-based
train-test splits used to judge leak classifiers.

Metrics (undefined ratios are None, never 0):
    accuracy    = (tp + tn) / total
    precision   = tp / (tp + fp)
    recall_pos  = tp / (tp + fn)      (probability of detection)
    recall_neg  = tn / (tn + fp)
    false alarm = fp / (fp + tn)

Splits:
    stratified_kfold        label-stratified folds over windows (windows of
                            one recording may overlap across folds)
    stratified_group_kfold  label-stratified folds that keep every session
                            on one side
    split_by_session        named sessions form the test set
    split_holdout_segment   a continuous time segment of one session is held out
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Literal, Mapping, Optional, Sequence

import numpy as np
from sklearn.metrics import confusion_matrix as sk_confusion_matrix
from sklearn.model_selection import StratifiedGroupKFold, StratifiedKFold

from .trees import Dataset, TreeEnsembleModel, predict_scores

logger = logging.getLogger(__name__)

SplitStrategy = Literal['by_session', 'stratified_kfold', 'stratified_group_kfold', 'holdout_segment']


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ('tp', 'fp', 'tn', 'fn'):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den > 0 else None


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionMatrix:
    """Counts for labels 1 = leak (positive), 0 = noise."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"y_true and y_pred lengths differ: {y_true.size} vs {y_pred.size}")
    if y_true.size == 0:
        return ConfusionMatrix(0, 0, 0, 0)
    tn, fp, fn, tp = sk_confusion_matrix(y_true, y_pred, labels=[0, 1]).ravel()
    return ConfusionMatrix(tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn))


def metrics(cm: ConfusionMatrix) -> Dict[str, Optional[float]]:
    """
    Accuracy, precision and both recalls from a confusion matrix.

    Raises:
        ValueError: empty matrix
    """
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    return {
        'accuracy': (cm.tp + cm.tn) / cm.total,
        'precision': _ratio(cm.tp, cm.tp + cm.fp),
        'recall_pos': _ratio(cm.tp, cm.tp + cm.fn),
        'recall_neg': _ratio(cm.tn, cm.tn + cm.fp),
    }


def false_alarm_ratio(cm: ConfusionMatrix) -> Optional[float]:
    """Fraction of noise windows flagged as leaks."""
    return _ratio(cm.fp, cm.fp + cm.tn)


def cv_summary(fold_accuracies: Iterable[float]) -> tuple[float, float]:
    """Mean and population standard deviation of fold accuracies."""
    values = np.asarray(list(fold_accuracies), dtype=np.float64)
    if values.size == 0:
        raise ValueError("no fold accuracies to summarize")
    return float(values.mean()), float(values.std())


@dataclass(frozen=True, eq=False)
class SplitPlan:
    """
    Row partition for one train/test evaluation.

    Rows in neither set are listed in excluded_row_ids (windows that straddle
    a held-out segment).
    """
    train_row_ids: np.ndarray
    test_row_ids: np.ndarray
    strategy: SplitStrategy
    excluded_row_ids: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))

    def __post_init__(self):
        for name in ('train_row_ids', 'test_row_ids', 'excluded_row_ids'):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        if np.intersect1d(self.train_row_ids, self.test_row_ids).size:
            raise ValueError("train and test rows overlap")


def _check_folds(labels: np.ndarray, k: int):
    if k < 2:
        raise ValueError(f"k must be ≥ 2, got {k}")
    for cls, name in ((1, 'leak'), (0, 'noise')):
        count = int(np.sum(labels == cls))
        if count < k:
            raise ValueError(f"class smaller than k: {count} {name} rows for {k} folds")


def stratified_kfold(data: Dataset, k: int = 5, seed: int = 0) -> List[SplitPlan]:
    """
    Label-stratified folds; each class's share per fold is within one row of
    its global share.

    Raises:
        ValueError: k < 2 or a class with fewer than k rows
    """
    _check_folds(data.labels, k)
    folds = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    return [SplitPlan(train, test, 'stratified_kfold')
            for train, test in folds.split(data.features, data.labels)]


def stratified_group_kfold(data: Dataset, k: int = 5, seed: int = 0) -> List[SplitPlan]:
    """
    Label-stratified folds that never split a session across train and test.

    Raises:
        ValueError: fewer than k sessions, a class smaller than k, or a test
            fold missing a class
    """
    _check_folds(data.labels, k)
    n_groups = np.unique(data.groups).size
    if n_groups < k:
        raise ValueError(f"need at least {k} sessions for {k} group folds, got {n_groups}")
    folds = StratifiedGroupKFold(n_splits=k, shuffle=True, random_state=seed)
    plans = []
    for train, test in folds.split(data.features, data.labels, groups=data.groups.astype(str)):
        if np.unique(data.labels[test]).size < 2:
            raise ValueError("fold without both classes: sessions are too coarse for group folds")
        plans.append(SplitPlan(train, test, 'stratified_group_kfold'))
    return plans


def split_by_session(data: Dataset, test_sessions: Iterable[str]) -> SplitPlan:
    """
    All windows of the named sessions form the test set.

    Raises:
        ValueError: empty or unknown session ids, or no training rows left
    """
    test_sessions = {str(s) for s in test_sessions}
    if not test_sessions:
        raise ValueError("test_sessions must be non-empty")
    known = set(data.groups.astype(str))
    unknown = sorted(test_sessions - known)
    if unknown:
        raise ValueError(f"unknown session id(s): {unknown}")
    in_test = np.isin(data.groups.astype(str), sorted(test_sessions))
    if in_test.all():
        raise ValueError("empty training set: every session is in the test set")
    return SplitPlan(np.flatnonzero(~in_test), np.flatnonzero(in_test), 'by_session')


def split_holdout_segment(
    data: Dataset,
    session_id: str,
    start: float,
    end: float,
    window_duration: float
) -> SplitPlan:
    """
    Hold out a continuous section of one session.

    Windows of the session lying wholly inside [start, end) are test rows;
    windows of the session that only partly overlap it are excluded from
    both sides. Every other row trains.

    Raises:
        ValueError: unknown session, missing offsets, empty segment or no
            window inside it
    """
    if data.offsets is None:
        raise ValueError("dataset has no window offsets")
    if end <= start:
        raise ValueError(f"segment end must exceed start, got [{start}, {end})")
    if window_duration <= 0:
        raise ValueError(f"window_duration must be positive, got {window_duration}")
    groups = data.groups.astype(str)
    in_session = groups == str(session_id)
    if not in_session.any():
        raise ValueError(f"unknown session id: {session_id!r}")

    w_start = data.offsets
    w_end = data.offsets + window_duration
    inside = in_session & (w_start >= start) & (w_end <= end + 1e-9)
    touching = in_session & (w_start < end) & (w_end > start) & ~inside
    if not inside.any():
        raise ValueError(f"no window of {session_id!r} lies inside [{start}, {end})")
    train = ~inside & ~touching
    return SplitPlan(np.flatnonzero(train), np.flatnonzero(inside), 'holdout_segment',
                     excluded_row_ids=np.flatnonzero(touching))


def evaluate(model: TreeEnsembleModel, data: Dataset, threshold: float = 0.5) -> ConfusionMatrix:
    """Confusion matrix of model predictions (score ≥ threshold → leak)."""
    if data.n_rows == 0:
        raise ValueError("empty corpus")
    predictions = (predict_scores(model, data.features) >= threshold).astype(np.int64)
    return confusion_matrix(data.labels, predictions)


def flow_generalization_eval(
    model: TreeEnsembleModel,
    corpora: Mapping[float, Dataset],
    threshold: float = 0.5
) -> Dict[float, Dict[str, Optional[float]]]:
    """
    Precision (plus the other metrics) of one model on per-flow corpora.

    Parameters:
        model: Classifier trained on the highest-flow corpus
        corpora: flow_lpm → Dataset (that flow's leak windows and noise windows)
        threshold: Score threshold for the leak class

    Returns:
        flow → metrics dict extended with 'false_alarm' and 'n_windows'

    Raises:
        ValueError: empty corpus or a corpus without leak windows
    """
    table = {}
    for flow in sorted(corpora):
        data = corpora[flow]
        if data.n_rows == 0:
            raise ValueError(f"empty corpus for flow {flow:g} l/min")
        if data.labels.sum() == 0:
            raise ValueError(f"corpus for flow {flow:g} l/min has zero positive windows")
        cm = evaluate(model, data, threshold)
        row = metrics(cm)
        row['false_alarm'] = false_alarm_ratio(cm)
        row['n_windows'] = data.n_rows
        table[flow] = row
        logger.info("Flow %g l/min: precision %s over %d windows", flow, row['precision'], data.n_rows)
    return table


def warn_overlapping_windows(overlap: float):
    """Warn that window-level folds leak shared samples between train and test."""
    if overlap > 0:
        warnings.warn(
            "stratified folds over overlapping windows share samples between train and test; "
            "CV accuracy is optimistic (use respect_sessions for session-level folds)"
        )
