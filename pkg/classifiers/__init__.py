"""Tree-ensemble leak classifiers, model files and evaluation protocol."""
from .trees import (
    BoostingParams,
    Dataset,
    ForestParams,
    Tree,
    TreeEnsembleModel,
    TreeParams,
    default_grid,
    fit_cart,
    fit_gbt,
    fit_model,
    fit_random_forest,
    predict_proba,
    predict_scores,
    table_to_dataset
)
from .persistence import load_model, save_model
from .evaluation import (
    ConfusionMatrix,
    SplitPlan,
    confusion_matrix,
    cv_summary,
    false_alarm_ratio,
    flow_generalization_eval,
    metrics,
    split_by_session,
    split_holdout_segment,
    stratified_group_kfold,
    stratified_kfold
)
from .model_selection import GridSearchResult, grid_search_cv, out_of_fold_scores

__all__ = [
    'BoostingParams',
    'Dataset',
    'ForestParams',
    'Tree',
    'TreeEnsembleModel',
    'TreeParams',
    'default_grid',
    'fit_cart',
    'fit_gbt',
    'fit_model',
    'fit_random_forest',
    'predict_proba',
    'predict_scores',
    'table_to_dataset',
    'load_model',
    'save_model',
    'ConfusionMatrix',
    'SplitPlan',
    'confusion_matrix',
    'cv_summary',
    'false_alarm_ratio',
    'flow_generalization_eval',
    'metrics',
    'split_by_session',
    'split_holdout_segment',
    'stratified_group_kfold',
    'stratified_kfold',
    'GridSearchResult',
    'grid_search_cv',
    'out_of_fold_scores'
]
