"""
Model text format.

    # acoustic leak classifier
    kind = "random_forest"
    n_features = 36
    ...
    <blank line>
    tree_id,node_id,kind,feature_index,threshold,left_id,right_id,leaf_value
    0,0,split,4,0.0012,1,2,
    0,1,leaf,,,,,0.25

Header values are JSON. Floats are written with shortest round-trip repr
and read back with pandas' round_trip parser, so a save/load cycle
reproduces every prediction exactly.
"""

from __future__ import annotations

import io
import json
import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from .trees import Tree, TreeEnsembleModel

logger = logging.getLogger(__name__)

NODE_COLUMNS = ['tree_id', 'node_id', 'kind', 'feature_index', 'threshold', 'left_id', 'right_id', 'leaf_value']
HEADER_KEYS = ['kind', 'n_features', 'seed', 'learning_rate', 'base_score', 'hyperparams',
               'metadata', 'training_loss', 'max_depths']


def _node_rows(trees):
    rows = []
    for tree_id, tree in enumerate(trees):
        for node in range(tree.node_count):
            if tree.is_leaf(node):
                rows.append((tree_id, node, 'leaf', None, None, None, None, float(tree.value[node])))
            else:
                rows.append((tree_id, node, 'split', int(tree.feature[node]), float(tree.threshold[node]),
                             int(tree.left[node]), int(tree.right[node]), None))
    df = pd.DataFrame(rows, columns=NODE_COLUMNS)
    for col in ('feature_index', 'left_id', 'right_id'):
        df[col] = df[col].astype('Int64')
    return df


def save_model(model: TreeEnsembleModel, path: Union[str, Path]) -> Path:
    """Write a model as a JSON-valued header plus a node table."""
    path = Path(path)
    header = {
        'kind': model.kind,
        'n_features': int(model.n_features),
        'seed': int(model.seed),
        'learning_rate': model.learning_rate,
        'base_score': model.base_score,
        'hyperparams': model.hyperparams,
        'metadata': model.metadata,
        'training_loss': [float(v) for v in model.training_loss],
        'max_depths': [int(t.max_depth) for t in model.trees],
    }
    with open(path, 'w', newline='') as f:
        f.write("# acoustic leak classifier\n")
        for key in HEADER_KEYS:
            f.write(f"{key} = {json.dumps(header[key], sort_keys=True)}\n")
        f.write("\n")
        _node_rows(model.trees).to_csv(f, index=False, lineterminator='\n')
    logger.info("Saved %s model with %d trees to %s", model.kind, len(model.trees), path)
    return path


def load_model(path: Union[str, Path]) -> TreeEnsembleModel:
    """
    Read a model written by save_model.

    Raises:
        ValueError: malformed header or node table
    """
    path = Path(path)
    text = path.read_text()
    head, sep, body = text.partition('\n\n')
    if not sep:
        raise ValueError(f"{path}: missing blank line between header and node table")

    header = {}
    for line in head.splitlines():
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        key, eq, value = line.partition('=')
        if not eq:
            raise ValueError(f"{path}: malformed header line {line!r}")
        try:
            header[key.strip()] = json.loads(value.strip())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: header value for {key.strip()!r} is not JSON") from exc
    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise ValueError(f"{path}: header is missing {missing}")

    nodes = pd.read_csv(io.StringIO(body), dtype={'kind': str}, float_precision='round_trip')
    if list(nodes.columns) != NODE_COLUMNS:
        raise ValueError(f"{path}: node table columns {list(nodes.columns)} != {NODE_COLUMNS}")

    trees = []
    for tree_id, group in nodes.groupby('tree_id', sort=True):
        group = group.sort_values('node_id')
        n = int(group['node_id'].max()) + 1
        if n != len(group):
            raise ValueError(f"{path}: tree {tree_id} has gaps in its node ids")
        is_split = (group['kind'] == 'split').to_numpy()
        feature = np.where(is_split, group['feature_index'].fillna(-1), -1).astype(np.int64)
        left = np.where(is_split, group['left_id'].fillna(-1), -1).astype(np.int64)
        right = np.where(is_split, group['right_id'].fillna(-1), -1).astype(np.int64)
        threshold = np.where(is_split, group['threshold'], np.nan).astype(np.float64)
        value = np.where(is_split, np.nan, group['leaf_value']).astype(np.float64)
        trees.append(Tree(feature=feature, threshold=threshold, left=left, right=right, value=value,
                          max_depth=int(header['max_depths'][int(tree_id)])))

    return TreeEnsembleModel(
        kind=header['kind'],
        trees=trees,
        n_features=int(header['n_features']),
        hyperparams=header['hyperparams'],
        seed=int(header['seed']),
        learning_rate=header['learning_rate'],
        base_score=header['base_score'],
        training_loss=list(header['training_loss']),
        metadata=header['metadata']
    )
