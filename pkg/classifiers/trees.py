"""
Tree Ensembles for Window Classification

From-scratch CART trees and the two ensembles compared for leak detection:
Random Forests (bagged trees on random feature subspaces) and Gradient
Boosted Trees (stagewise additive logistic model).

CART split search (classification):
    Gini(S) = 1 - Σ_c p_c²
    gain    = Gini(S) - (|L|/|S|)·Gini(L) - (|R|/|S|)·Gini(R)
    candidates: midpoints between consecutive distinct sorted values,
    x ≤ threshold goes left; ties in gain go to the lowest feature index,
    then the lowest threshold.

Random Forest:
    tree t is grown on a bootstrap resample drawn from the stream
    default_rng([seed, t]) and draws feature_subset_size candidate features
    per node (default ceil(sqrt(d))). Score = fraction of trees voting leak.

Gradient Boosted Trees (logistic loss):
    F_0 = log(p̄ / (1 - p̄))
    each round: p = σ(F), residual r = y - p, hessian h = p(1 - p)
    a regression tree splits on squared error of r; leaf weight
        w = Σ r / (Σ h + λ)
    F ← F + η · w(x),   score = σ(F)
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.special import expit

logger = logging.getLogger(__name__)

ModelKind = Literal['random_forest', 'gradient_boosted']
ALGORITHMS = {'rf': 'random_forest', 'gbt': 'gradient_boosted'}
SHORT_NAMES = {v: k for k, v in ALGORITHMS.items()}

# Gains closer than this are treated as equal when picking a split.
GAIN_TOLERANCE = 1e-12


def resolve_algorithm(name: str) -> ModelKind:
    """Accept 'rf'/'gbt' or the long model-kind names."""
    if name in ALGORITHMS:
        return ALGORITHMS[name]  # type: ignore[return-value]
    if name in SHORT_NAMES:
        return name  # type: ignore[return-value]
    raise ValueError(f"Unknown algorithm {name!r}; expected one of {sorted(ALGORITHMS) + sorted(SHORT_NAMES)}")


@dataclass(eq=False)
class Dataset:
    """
    Feature matrix with binary labels and per-row session ids.

    Attributes:
        features: (n_rows, n_features) band PSD values
        labels: 0 = noise, 1 = leak
        groups: session_id of each row
        offsets: window start offsets in seconds (optional)
        flows: leak flow per row, NaN for noise (optional)
        frequencies: bin frequencies of the feature columns (optional)
    """
    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    offsets: Optional[np.ndarray] = None
    flows: Optional[np.ndarray] = None
    frequencies: Optional[np.ndarray] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features.reshape(-1, 1)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        self.groups = np.asarray(self.groups, dtype=object).reshape(-1)
        n = self.features.shape[0]
        if self.labels.size != n or self.groups.size != n:
            raise ValueError(
                f"row count mismatch: {n} feature rows, {self.labels.size} labels, {self.groups.size} groups"
            )
        if not np.all(np.isin(self.labels, (0, 1))):
            raise ValueError("labels must be 0 (noise) or 1 (leak)")
        if self.offsets is not None:
            self.offsets = np.asarray(self.offsets, dtype=np.float64)
        if self.flows is not None:
            self.flows = np.asarray(self.flows, dtype=np.float64)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        n_pos = int(self.labels.sum())
        return self.n_rows - n_pos, n_pos

    def subset(self, rows: Sequence[int]) -> 'Dataset':
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            features=self.features[rows],
            labels=self.labels[rows],
            groups=self.groups[rows],
            offsets=None if self.offsets is None else self.offsets[rows],
            flows=None if self.flows is None else self.flows[rows],
            frequencies=self.frequencies
        )

    @classmethod
    def from_feature_table(cls, table: pd.DataFrame, flows: Optional[Mapping[str, float]] = None) -> 'Dataset':
        """
        Build a Dataset from a feature table (leak → 1, noise → 0).

        Parameters:
            table: session_id, start_offset, label, f_<Hz>... columns
            flows: Optional session_id → flow_lpm lookup

        Raises:
            ValueError: unlabeled rows or unknown labels
        """
        labels = table['label'].astype(str)
        unknown = sorted(set(labels) - {'leak', 'noise'})
        if unknown:
            raise ValueError(f"feature table has rows without a leak/noise label: {unknown}")
        columns = [c for c in table.columns if c.startswith('f_')]
        sessions = table['session_id'].astype(str).to_numpy(dtype=object)
        flow_values = None
        if flows is not None:
            flow_values = np.array([
                flows.get(s, np.nan) if lab == 'leak' else np.nan
                for s, lab in zip(sessions, labels)
            ], dtype=np.float64)
        return cls(
            features=table[columns].to_numpy(dtype=np.float64),
            labels=(labels == 'leak').to_numpy(dtype=np.int64),
            groups=sessions,
            offsets=table['start_offset'].to_numpy(dtype=np.float64),
            flows=flow_values,
            frequencies=np.array([float(c[2:]) for c in columns])
        )


@dataclass(eq=False)
class Tree:
    """
    Binary tree in flat arrays; node 0 is the root.

    Split nodes have feature ≥ 0 and two children. Leaves have feature = -1
    and a value: the leak probability for classification trees, the margin
    increment for boosting trees.
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: int

    @property
    def node_count(self) -> int:
        return self.feature.size

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def depth(self) -> int:
        depths = np.zeros(self.node_count, dtype=np.int64)
        for node in range(self.node_count):
            if not self.is_leaf(node):
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def class_distribution(self, node: int) -> np.ndarray:
        p1 = float(self.value[node])
        return np.array([1.0 - p1, p1])

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.atleast_2d(X)
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[nodes]
            active = feat >= 0
            if not np.any(active):
                return nodes
            go_left = X[rows[active], feat[active]] <= self.threshold[nodes[active]]
            nodes[active] = np.where(go_left, self.left[nodes[active]], self.right[nodes[active]])

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Majority class per row; a 50/50 leaf votes noise."""
        return (self.predict_value(X) > 0.5).astype(np.int64)


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 6
    min_samples_leaf: int = 1
    feature_subset_size: Optional[int] = None


class _TreeGrower:
    """Greedy depth-first growth shared by classification and boosting trees."""

    def __init__(self, X: np.ndarray, params: TreeParams, rng: Optional[np.random.Generator]):
        if params.max_depth < 1:
            raise ValueError(f"max_depth must be ≥ 1, got {params.max_depth}")
        if params.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be ≥ 1, got {params.min_samples_leaf}")
        self.X = X
        self.n_features = X.shape[1]
        subset = params.feature_subset_size or self.n_features
        if not 1 <= subset <= self.n_features:
            raise ValueError(f"feature_subset_size must be in [1, {self.n_features}], got {subset}")
        self.subset = subset
        self.params = params
        self.rng = rng
        if subset < self.n_features and rng is None:
            raise ValueError("a random generator is required when feature_subset_size < n_features")
        self._feature: List[int] = []
        self._threshold: List[float] = []
        self._left: List[int] = []
        self._right: List[int] = []
        self._value: List[float] = []

    # Hooks for subclasses
    def _is_pure(self, idx: np.ndarray) -> bool:
        raise NotImplementedError

    def _leaf_value(self, idx: np.ndarray) -> float:
        raise NotImplementedError

    def _split_scores(self, idx_sorted: np.ndarray, cut: np.ndarray) -> tuple[np.ndarray, float]:
        """Gain of each cut (left = first cut+1 sorted rows) and the parent term."""
        raise NotImplementedError

    def grow(self, idx: np.ndarray) -> Tree:
        self._build(idx, 0)
        return Tree(
            feature=np.array(self._feature, dtype=np.int64),
            threshold=np.array(self._threshold, dtype=np.float64),
            left=np.array(self._left, dtype=np.int64),
            right=np.array(self._right, dtype=np.int64),
            value=np.array(self._value, dtype=np.float64),
            max_depth=self.params.max_depth
        )

    def _add_node(self) -> int:
        self._feature.append(-1)
        self._threshold.append(np.nan)
        self._left.append(-1)
        self._right.append(-1)
        self._value.append(np.nan)
        return len(self._feature) - 1

    def _candidate_features(self) -> np.ndarray:
        if self.subset == self.n_features:
            return np.arange(self.n_features)
        return np.sort(self.rng.choice(self.n_features, size=self.subset, replace=False))

    def best_split(self, idx: np.ndarray) -> Optional[tuple[int, float, float]]:
        """(feature, threshold, gain) of the best admissible split, or None."""
        n = idx.size
        msl = self.params.min_samples_leaf
        best: Optional[tuple[int, float, float]] = None
        for f in self._candidate_features():
            values = self.X[idx, f]
            order = np.argsort(values, kind='stable')
            xs = values[order]
            cut = np.nonzero(xs[:-1] < xs[1:])[0]
            n_left = cut + 1
            cut = cut[(n_left >= msl) & (n - n_left >= msl)]
            if cut.size == 0:
                continue
            gains = self._split_scores(idx[order], cut)
            top = gains.max()
            if top <= GAIN_TOLERANCE:
                continue
            if best is not None and top <= best[2] + GAIN_TOLERANCE:
                continue
            i = cut[np.argmax(gains >= top - GAIN_TOLERANCE)]
            threshold = (xs[i] + xs[i + 1]) / 2.0
            if threshold >= xs[i + 1]:
                threshold = xs[i]
            best = (int(f), float(threshold), float(top))
        return best

    def _build(self, idx: np.ndarray, depth: int) -> int:
        node = self._add_node()
        split = None
        if (depth < self.params.max_depth and idx.size >= 2 * self.params.min_samples_leaf
                and not self._is_pure(idx)):
            split = self.best_split(idx)
        if split is None:
            self._value[node] = self._leaf_value(idx)
            return node

        f, threshold, _ = split
        goes_left = self.X[idx, f] <= threshold
        self._feature[node] = f
        self._threshold[node] = threshold
        left = self._build(idx[goes_left], depth + 1)
        right = self._build(idx[~goes_left], depth + 1)
        self._left[node] = left
        self._right[node] = right
        return node


class _GiniGrower(_TreeGrower):
    def __init__(self, X, y, params, rng):
        super().__init__(X, params, rng)
        self.y = y

    def _is_pure(self, idx):
        first = self.y[idx[0]]
        return bool(np.all(self.y[idx] == first))

    def _leaf_value(self, idx):
        return float(np.mean(self.y[idx]))

    def _split_scores(self, idx_sorted, cut):
        y = self.y[idx_sorted]
        n = y.size
        n_pos = y.sum()
        pos_left = np.cumsum(y)[cut].astype(np.float64)
        n_left = (cut + 1).astype(np.float64)
        pos_right = n_pos - pos_left
        n_right = n - n_left
        score = ((pos_left ** 2 + (n_left - pos_left) ** 2) / n_left
                 + (pos_right ** 2 + (n_right - pos_right) ** 2) / n_right)
        parent = (n_pos ** 2 + (n - n_pos) ** 2) / n
        return (score - parent) / n


class _ResidualGrower(_TreeGrower):
    def __init__(self, X, residual, hessian, reg_lambda, params, rng):
        super().__init__(X, params, rng)
        self.residual = residual
        self.hessian = hessian
        self.reg_lambda = reg_lambda

    def _is_pure(self, idx):
        r = self.residual[idx]
        return bool(np.all(r == r[0]))

    def _leaf_value(self, idx):
        return float(self.residual[idx].sum() / (self.hessian[idx].sum() + self.reg_lambda))

    def _split_scores(self, idx_sorted, cut):
        r = self.residual[idx_sorted]
        n = r.size
        total = r.sum()
        s_left = np.cumsum(r)[cut]
        n_left = (cut + 1).astype(np.float64)
        s_right = total - s_left
        n_right = n - n_left
        return s_left ** 2 / n_left + s_right ** 2 / n_right - total ** 2 / n


def fit_cart(data: Dataset, params: TreeParams = TreeParams(),
             rng: Optional[np.random.Generator] = None) -> Tree:
    """
    Grow a Gini CART tree.

    Parameters:
        data: Training rows
        params: max_depth, min_samples_leaf, feature_subset_size
        rng: Generator for per-node feature subsets

    Returns:
        Tree whose leaves hold the leak fraction of their training rows

    Raises:
        ValueError: empty dataset or invalid parameters
    """
    if data.n_rows == 0:
        raise ValueError("empty dataset")
    grower = _GiniGrower(data.features, data.labels.astype(np.float64), params, rng)
    return grower.grow(np.arange(data.n_rows))


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 6
    min_samples_leaf: int = 1
    feature_subset_size: Optional[int] = None
    bootstrap: bool = True
    seed: int = 0
    n_jobs: int = 1


@dataclass(frozen=True)
class BoostingParams:
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_leaf: int = 1
    reg_lambda: float = 1.0
    feature_subset_size: Optional[int] = None
    seed: int = 0


@dataclass(eq=False)
class TreeEnsembleModel:
    """
    Trained forest or boosted sequence.

    Attributes:
        kind: 'random_forest' or 'gradient_boosted'
        trees: Member trees (in boosting order for GBT)
        n_features: Training feature dimension
        hyperparams: All training settings
        seed: Master seed
        learning_rate: Shrinkage (GBT only)
        base_score: Initial log-odds (GBT only)
        training_loss: Mean log-loss after each round (GBT only)
        metadata: Extraction settings and other provenance
    """
    kind: ModelKind
    trees: List[Tree]
    n_features: int
    hyperparams: Dict[str, object] = field(default_factory=dict)
    seed: int = 0
    learning_rate: Optional[float] = None
    base_score: Optional[float] = None
    training_loss: List[float] = field(default_factory=list)
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.trees:
            raise ValueError("a model needs at least one tree")
        if self.kind not in SHORT_NAMES:
            raise ValueError(f"Unknown model kind {self.kind!r}")

    @property
    def algorithm(self) -> str:
        return SHORT_NAMES[self.kind]

    def margin(self, X: np.ndarray) -> np.ndarray:
        """Accumulated log-odds of a boosted model."""
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict_value(X)
        return self.base_score + self.learning_rate * total


def _fit_forest_tree(X, y, params: ForestParams, subset: int, tree_index: int) -> Tree:
    rng = np.random.default_rng([params.seed, tree_index])
    n = X.shape[0]
    rows = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
    grower = _GiniGrower(X[rows], y[rows],
                         TreeParams(params.max_depth, params.min_samples_leaf, subset), rng)
    return grower.grow(np.arange(n))


def fit_random_forest(data: Dataset, params: ForestParams = ForestParams()) -> TreeEnsembleModel:
    """
    Bagged CART trees on random feature subspaces.

    Each tree's generator is derived from (seed, tree index), so the forest
    does not depend on n_jobs or execution order.
    """
    if params.n_trees < 1:
        raise ValueError(f"n_trees must be ≥ 1, got {params.n_trees}")
    if data.n_rows == 0:
        raise ValueError("empty dataset")
    subset = params.feature_subset_size or math.ceil(math.sqrt(data.n_features))
    X = data.features
    y = data.labels.astype(np.float64)

    trees = Parallel(n_jobs=params.n_jobs)(
        delayed(_fit_forest_tree)(X, y, params, subset, t) for t in range(params.n_trees)
    )
    hyperparams = asdict(params)
    hyperparams['feature_subset_size'] = subset
    hyperparams.pop('n_jobs')
    logger.info("Trained random forest: %d trees, depth ≤ %d, %d of %d features per split",
                params.n_trees, params.max_depth, subset, data.n_features)
    return TreeEnsembleModel(kind='random_forest', trees=list(trees), n_features=data.n_features,
                             hyperparams=hyperparams, seed=params.seed)


def log_loss(y: np.ndarray, margin: np.ndarray) -> float:
    """Mean logistic loss for labels in {0, 1} and log-odds margins."""
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def fit_gbt(data: Dataset, params: BoostingParams = BoostingParams()) -> TreeEnsembleModel:
    """
    Stagewise logistic boosting with Newton leaf weights.

    Raises:
        ValueError: single-class dataset or invalid parameters
    """
    if data.n_rows == 0:
        raise ValueError("empty dataset")
    if params.n_rounds < 1:
        raise ValueError(f"n_rounds must be ≥ 1, got {params.n_rounds}")
    if not 0 < params.learning_rate <= 1:
        raise ValueError(f"learning_rate must be in (0, 1], got {params.learning_rate}")
    if params.reg_lambda < 0:
        raise ValueError(f"reg_lambda must be non-negative, got {params.reg_lambda}")
    n_neg, n_pos = data.class_counts()
    if n_neg == 0 or n_pos == 0:
        raise ValueError("single-class dataset: boosting needs both leak and noise rows")

    X = data.features
    y = data.labels.astype(np.float64)
    base_score = float(np.log(n_pos / n_neg))
    margin = np.full(data.n_rows, base_score)
    subset = params.feature_subset_size or data.n_features
    rng = np.random.default_rng(params.seed)
    tree_params = TreeParams(params.max_depth, params.min_samples_leaf, subset)

    trees: List[Tree] = []
    losses: List[float] = []
    for round_index in range(params.n_rounds):
        p = expit(margin)
        grower = _ResidualGrower(X, y - p, p * (1.0 - p), params.reg_lambda, tree_params, rng)
        tree = grower.grow(np.arange(data.n_rows))
        margin = margin + params.learning_rate * tree.predict_value(X)
        trees.append(tree)
        losses.append(log_loss(y, margin))
        logger.debug("Boosting round %d: log-loss %.6f", round_index + 1, losses[-1])

    hyperparams = asdict(params)
    hyperparams['feature_subset_size'] = subset
    logger.info("Trained gradient boosted trees: %d rounds, lr %.3g, final log-loss %.4f",
                params.n_rounds, params.learning_rate, losses[-1])
    return TreeEnsembleModel(kind='gradient_boosted', trees=trees, n_features=data.n_features,
                             hyperparams=hyperparams, seed=params.seed,
                             learning_rate=params.learning_rate, base_score=base_score,
                             training_loss=losses)


def predict_scores(model: TreeEnsembleModel, X: np.ndarray) -> np.ndarray:
    """
    Leak scores in [0, 1] for each row of X.

    Raises:
        ValueError: dimension mismatch
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise ValueError(f"dimension mismatch: model expects {model.n_features} features, got {X.shape[1]}")
    if model.kind == 'random_forest':
        votes = np.zeros(X.shape[0])
        for tree in model.trees:
            votes += tree.predict(X)
        return votes / len(model.trees)
    return expit(model.margin(X))


def predict_proba(model: TreeEnsembleModel, x) -> float:
    """
    Score of a single feature vector.

    Random forests return the fraction of trees voting leak; boosted models
    return the logistic of the accumulated margin.
    """
    values = getattr(x, 'values', x)
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size != model.n_features:
        raise ValueError(f"dimension mismatch: model expects {model.n_features} features, got {values.size}")
    return float(predict_scores(model, values.reshape(1, -1))[0])


def fit_model(data: Dataset, algorithm: str, params: Optional[Mapping[str, object]] = None,
              seed: int = 0) -> TreeEnsembleModel:
    """Train 'rf' or 'gbt' from a flat hyperparameter record."""
    kind = resolve_algorithm(algorithm)
    settings = dict(params or {})
    settings.setdefault('seed', seed)
    if kind == 'random_forest':
        return fit_random_forest(data, ForestParams(**settings))
    return fit_gbt(data, BoostingParams(**settings))


def default_grid(algorithm: str) -> List[Dict[str, object]]:
    """Declared hyperparameter grids: trees/rounds {100, 300}, depth {3, 6}, lr {0.1, 0.3}."""
    kind = resolve_algorithm(algorithm)
    if kind == 'random_forest':
        return [{'n_trees': n, 'max_depth': d} for n in (100, 300) for d in (3, 6)]
    return [{'n_rounds': n, 'max_depth': d, 'learning_rate': lr}
            for n in (100, 300) for d in (3, 6) for lr in (0.1, 0.3)]


def table_to_dataset(table: pd.DataFrame, flows: Optional[Mapping[str, float]] = None) -> Dataset:
    """Feature table → Dataset; see Dataset.from_feature_table."""
    return Dataset.from_feature_table(table, flows)
