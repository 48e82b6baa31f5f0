"""
Pipeline Commands

The six steps of the leak detector as library calls; detection/cli.py maps
them onto subcommands.

    synth     write a synthetic corpus (WAVs + manifests)
    features  manifest → feature table CSV
    select    grid-searched CV accuracy per window setting, algorithm and feature
    train     feature table → model file (optionally holding out sessions)
    detect    model + recordings → per-threshold traces and figures
    report    model + manifest → precision per leak flow

Detection procedure:
    1. train the classifier on the training features (minus held-out sessions)
    2. estimate positive/negative recall by 10-fold out-of-fold scoring of
       the same training rows
    3. score every window of the input recording
    4. per threshold: threshold the scores, set the HMM emissions to the
       recalls at that threshold, run the forward filter
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from acoustics.signal_io import Recording, SessionDescriptor, load_manifest, load_recording, read_manifest
from acoustics.spectral import (
    FeatureExtraction,
    extract_corpus,
    extract_features,
    feature_columns,
    read_feature_table,
    write_feature_table
)
from acoustics.synth import CorpusConfig, gen_corpus
from classifiers.evaluation import flow_generalization_eval, split_by_session, warn_overlapping_windows
from classifiers.model_selection import grid_search_cv, out_of_fold_scores
from classifiers.persistence import load_model, save_model
from classifiers.trees import SHORT_NAMES, Dataset, TreeEnsembleModel, fit_model, predict_scores
from .config import ConfigError, PipelineConfig, check_model_extraction, format_value
from .hmm import DetectionTrace, sweep_thresholds, write_trace
from .plots import plot_flow_precision, plot_selection_heatmap, plot_spectrogram, plot_trace

logger = logging.getLogger(__name__)

SELECTION_COLUMNS = ['duration', 'overlap', 'algorithm', 'feature', 'accuracy_cv', 'accuracy_std', 'params', 'best']
FLOW_COLUMNS = ['algorithm', 'feature', 'flow', 'precision', 'recall', 'false_alarm', 'n_windows']


def write_report(df: pd.DataFrame, path: Union[str, Path], header: Mapping[str, object]) -> Path:
    """CSV preceded by '# key = value' lines; read back with comment='#'."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        for key, value in header.items():
            f.write(f"# {key} = {format_value(value)}\n")
        df.to_csv(f, index=False, lineterminator='\n')
    logger.info("Report saved to %s", path)
    return path


def run_synth(corpus: CorpusConfig, output_dir: Union[str, Path]) -> List[SessionDescriptor]:
    """Write the synthetic corpus described by corpus into output_dir."""
    entries = gen_corpus(corpus, output_dir)
    logger.info("Synthesized %d recordings into %s", len(entries), output_dir)
    return entries


def run_features(manifest: Union[str, Path], config: PipelineConfig, output: Union[str, Path]) -> pd.DataFrame:
    """Frame every manifest recording and write one feature row per window."""
    recordings = load_manifest(manifest)
    table = extract_corpus(recordings, config.extraction())
    write_feature_table(table, output)
    logger.info("Wrote %d feature rows (%d columns) to %s", len(table), len(feature_columns(table)), output)
    return table


def _table_extraction(table: pd.DataFrame) -> FeatureExtraction:
    meta = table.attrs.get('extraction') or {}
    if not meta:
        raise ConfigError("feature table carries no extraction settings")
    return FeatureExtraction.from_metadata(meta)


def _select_on_table(table: pd.DataFrame, config: PipelineConfig) -> List[Dict[str, object]]:
    extraction = _table_extraction(table)
    data = Dataset.from_feature_table(table)
    if extraction.overlap > 0 and not config.respect_sessions:
        warn_overlapping_windows(extraction.overlap)
    rows = []
    for algorithm in config.algorithms:
        result = grid_search_cv(data, algorithm, config.grid(algorithm), k=config.folds,
                                seed=config.seed, respect_sessions=config.respect_sessions)
        best = result.points[result.cv_accuracy.index(result.best_accuracy)]
        rows.append({
            'duration': extraction.duration,
            'overlap': extraction.overlap,
            'algorithm': SHORT_NAMES.get(algorithm, algorithm),
            'feature': extraction.feature_kind,
            'accuracy_cv': result.best_accuracy,
            'accuracy_std': best.std_accuracy,
            'params': ' '.join(f"{k}={v}" for k, v in sorted(result.best_params.items())
                               if k not in ('seed', 'n_jobs')),
        })
    return rows


def run_select(
    config: PipelineConfig,
    output_dir: Union[str, Path],
    features: Sequence[Union[str, Path]] = (),
    manifest: Optional[Union[str, Path]] = None
) -> pd.DataFrame:
    """
    Selection report: best CV accuracy per (duration, overlap, algorithm, feature).

    Either precomputed feature tables or a manifest is required; with a
    manifest the window grid and feature kinds of the config are extracted.

    Returns:
        Report sorted by (duration, overlap, algorithm, feature), with the
        overall best row flagged
    """
    if not features and manifest is None:
        raise ConfigError("select needs feature tables or a manifest")
    output_dir = Path(output_dir)
    rows: List[Dict[str, object]] = []
    for path in features:
        rows.extend(_select_on_table(read_feature_table(path), config))
    if manifest is not None:
        recordings = load_manifest(manifest)
        for duration, overlap in config.window_grid():
            for kind in config.feature_kinds:
                extraction = FeatureExtraction(
                    duration=duration, overlap=overlap, feature_kind=kind,
                    band_lo=config.band_lo, band_hi=config.band_hi,
                    segment_len=config.segment_len, segment_overlap=config.segment_overlap
                )
                logger.info("Selecting on %g s windows, %g s overlap, %s", duration, overlap, kind)
                rows.extend(_select_on_table(extract_corpus(recordings, extraction), config))

    report = pd.DataFrame(rows).sort_values(['duration', 'overlap', 'algorithm', 'feature'],
                                            kind='stable').reset_index(drop=True)
    report['best'] = False
    report.loc[int(np.argmax(report['accuracy_cv'].to_numpy())), 'best'] = True
    report = report[SELECTION_COLUMNS]

    write_report(report, output_dir / 'selection_report.csv', config.as_header())
    plot_selection_heatmap(report, output_dir / 'selection_heatmap.png')
    return report


def _training_data(table: pd.DataFrame, holdout: Sequence[str]) -> Dataset:
    data = Dataset.from_feature_table(table)
    if holdout:
        plan = split_by_session(data, holdout)
        data = data.subset(plan.train_row_ids)
    return data


def run_train(
    features: Union[str, Path],
    config: PipelineConfig,
    output: Union[str, Path]
) -> TreeEnsembleModel:
    """
    Train config.algorithm on a feature table and save it.

    Sessions listed in config.holdout are left out of training and recorded
    in the model header.
    """
    table = read_feature_table(features)
    extraction = _table_extraction(table)
    data = _training_data(table, config.holdout)

    model = fit_model(data, config.algorithm, config.model_params())
    model.metadata = {
        'extraction': extraction.as_metadata(table.attrs['extraction'].get('sample_rate')),
        'holdout_sessions': list(config.holdout),
        'n_train_rows': int(data.n_rows),
    }
    save_model(model, output)
    return model


def _load_inputs(inputs: Sequence[Union[str, Path]]) -> List[Recording]:
    recordings = []
    for path in inputs:
        path = Path(path)
        if path.suffix.lower() == '.csv':
            recordings.extend(load_manifest(path))
        else:
            recordings.append(load_recording(path, SessionDescriptor(session_id=path.stem)))
    if not recordings:
        raise ValueError("no input recordings")
    return recordings


def emission_scores(model: TreeEnsembleModel, table: pd.DataFrame, config: PipelineConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Out-of-fold scores and labels on the model's training rows."""
    data = _training_data(table, model.metadata.get('holdout_sessions', []))
    scores = out_of_fold_scores(data, model.algorithm, model.hyperparams,
                                k=config.emission_folds, seed=config.seed)
    return scores, data.labels


def trace_filename(session_id: str, threshold: float) -> str:
    return f"{session_id}_t{threshold:g}_trace"


def run_detect(
    model_path: Union[str, Path],
    inputs: Sequence[Union[str, Path]],
    features: Union[str, Path],
    config: PipelineConfig,
    output_dir: Union[str, Path],
    plots: bool = True
) -> Dict[Tuple[str, float], DetectionTrace]:
    """
    Score, threshold and smooth every input recording.

    Parameters:
        model_path: Model written by run_train
        inputs: WAV files or manifests
        features: Training feature table the model was fit on (emission estimates)
        config: Window/band settings must match the model
        output_dir: Trace CSVs and figures

    Returns:
        (session_id, threshold) → DetectionTrace

    Raises:
        ConfigError: window or band mismatch between model, features and config
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    model = load_model(model_path)
    extraction = config.extraction()
    check_model_extraction(model.metadata, extraction)

    table = read_feature_table(features)
    trained = _table_extraction(table)
    if trained != extraction:
        raise ConfigError(f"band/window mismatch between training features {features} and config")
    cv_scores, cv_labels = emission_scores(model, table, config)

    base = config.hmm_params()
    header = {'model': Path(model_path).name, 'algorithm': model.algorithm, **config.as_header()}
    traces: Dict[Tuple[str, float], DetectionTrace] = {}
    for recording in _load_inputs(inputs):
        windows = extract_features(recording, extraction)
        scores = predict_scores(model, windows[feature_columns(windows)].to_numpy())
        offsets = windows['start_offset'].to_numpy()
        for threshold, trace in sweep_thresholds(scores, offsets, cv_scores, cv_labels,
                                                 config.thresholds, base).items():
            name = trace_filename(recording.session_id, threshold)
            write_trace(trace, output_dir / f"{name}.csv", {'session_id': recording.session_id, **header})
            if plots:
                plot_trace(trace, output_dir / f"{name}.png",
                           title=f"{recording.session_id}: threshold {threshold:g}",
                           window_duration=extraction.duration, onset=recording.onset)
            alarm = trace.first_alarm()
            logger.info("%s @ %.2f: first π ≥ 0.9 at %s", recording.session_id, threshold,
                        'never' if alarm is None else f"{alarm:g} s")
            traces[(recording.session_id, threshold)] = trace
        if plots:
            plot_spectrogram(recording, output_dir / f"{recording.session_id}_spectrogram.png",
                             band=(extraction.band_lo, extraction.band_hi))
    return traces


def flow_corpora(table: pd.DataFrame, flows: Mapping[str, Optional[float]]) -> Dict[float, Dataset]:
    """Per leak flow: that flow's leak windows plus every noise window."""
    sessions = table['session_id'].astype(str)
    present = set(sessions)
    is_noise = table['label'] == 'noise'
    leak_flows = sorted({f for s, f in flows.items() if f is not None and s in present})
    corpora = {}
    for flow in leak_flows:
        flow_sessions = [s for s, f in flows.items() if f == flow]
        rows = is_noise | ((table['label'] == 'leak') & sessions.isin(flow_sessions))
        corpora[flow] = Dataset.from_feature_table(table[rows].reset_index(drop=True))
    return corpora


def run_report(
    model_path: Union[str, Path],
    manifest: Union[str, Path],
    config: PipelineConfig,
    output_dir: Union[str, Path]
) -> pd.DataFrame:
    """
    Precision, recall and false alarm ratio of a model per leak flow.

    Features are extracted with the settings recorded in the model.
    """
    output_dir = Path(output_dir)
    model = load_model(model_path)
    extraction = FeatureExtraction.from_metadata(model.metadata.get('extraction') or {})
    entries = read_manifest(manifest)
    flows = {e.session_id: e.flow_lpm for e in entries}
    table = extract_corpus(load_manifest(manifest), extraction)
    corpora = flow_corpora(table, flows)
    if not corpora:
        raise ValueError(f"manifest {manifest} has no leak recordings")

    results = flow_generalization_eval(model, corpora, config.report_threshold)
    report = pd.DataFrame([{
        'algorithm': model.algorithm,
        'feature': extraction.feature_kind,
        'flow': flow,
        'precision': row['precision'],
        'recall': row['recall_pos'],
        'false_alarm': row['false_alarm'],
        'n_windows': row['n_windows'],
    } for flow, row in results.items()], columns=FLOW_COLUMNS)

    header = {'model': Path(model_path).name,
              **{f"model_{k}": v for k, v in extraction.as_metadata().items()},
              **config.as_header()}
    write_report(report, output_dir / 'flow_report.csv', header)
    plot_flow_precision(report, output_dir / 'flow_precision.png')
    return report
