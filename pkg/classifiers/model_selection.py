"""
Hyperparameter search and out-of-fold scoring.

Every grid point is scored on the same folds, so accuracies are comparable
across points; the arg-max keeps the first point on ties.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .evaluation import SplitPlan, cv_summary, stratified_group_kfold, stratified_kfold
from .trees import Dataset, fit_model, predict_scores, resolve_algorithm

logger = logging.getLogger(__name__)


@dataclass
class GridPointResult:
    params: Dict[str, object]
    fold_accuracies: List[float]

    @property
    def mean_accuracy(self) -> float:
        return cv_summary(self.fold_accuracies)[0]

    @property
    def std_accuracy(self) -> float:
        return cv_summary(self.fold_accuracies)[1]


@dataclass
class GridSearchResult:
    algorithm: str
    best_params: Dict[str, object]
    best_accuracy: float
    points: List[GridPointResult] = field(default_factory=list)

    @property
    def cv_accuracy(self) -> List[float]:
        return [p.mean_accuracy for p in self.points]


def _folds(data: Dataset, k: int, seed: int, respect_sessions: bool) -> List[SplitPlan]:
    if respect_sessions:
        return stratified_group_kfold(data, k, seed)
    return stratified_kfold(data, k, seed)


def grid_search_cv(
    data: Dataset,
    algorithm: str,
    grid: Sequence[Mapping[str, object]],
    k: int = 5,
    seed: int = 0,
    respect_sessions: bool = False
) -> GridSearchResult:
    """
    k-fold cross-validated accuracy for each grid point.

    Parameters:
        data: Training rows
        algorithm: 'rf' or 'gbt' (or the long model-kind names)
        grid: Hyperparameter records passed to fit_model
        k: Number of folds
        seed: Fold shuffling and model seed
        respect_sessions: Use session-level folds instead of window-level ones

    Returns:
        GridSearchResult with the arg-max point (first in grid order on ties)

    Raises:
        ValueError: empty grid or folds that cannot hold both classes
    """
    if not grid:
        raise ValueError("grid must be non-empty")
    resolve_algorithm(algorithm)
    folds = _folds(data, k, seed, respect_sessions)
    for plan in folds:
        if np.unique(data.labels[plan.test_row_ids]).size < 2:
            raise ValueError("fold without both classes")

    points = []
    for params in grid:
        accuracies = []
        for plan in folds:
            model = fit_model(data.subset(plan.train_row_ids), algorithm, params, seed)
            test = data.subset(plan.test_row_ids)
            predicted = predict_scores(model, test.features) >= 0.5
            accuracies.append(float(np.mean(predicted == test.labels.astype(bool))))
        point = GridPointResult(dict(params), accuracies)
        points.append(point)
        logger.info("%s %s: CV accuracy %.4f ± %.4f", algorithm, dict(params),
                    point.mean_accuracy, point.std_accuracy)

    means = [p.mean_accuracy for p in points]
    best = int(np.argmax(means))
    return GridSearchResult(algorithm=algorithm, best_params=dict(points[best].params),
                            best_accuracy=means[best], points=points)


def out_of_fold_scores(
    data: Dataset,
    algorithm: str,
    params: Optional[Mapping[str, object]] = None,
    k: int = 10,
    seed: int = 0
) -> np.ndarray:
    """
    Score every row with the model trained on the other k-1 folds.

    Returns:
        Array of scores aligned with data rows
    """
    scores = np.full(data.n_rows, np.nan)
    for plan in stratified_kfold(data, k, seed):
        model = fit_model(data.subset(plan.train_row_ids), algorithm, params, seed)
        scores[plan.test_row_ids] = predict_scores(model, data.features[plan.test_row_ids])
    return scores
