#!/usr/bin/env python3
"""
Pipeline Performance Benchmarks

Targets:
- Welch features for 10 minutes of 48 kHz audio in <5s
- 100-tree forest / 100-round boosting on 750 windows in <30s
- Forward filter over 100k windows in <2s
- Parallel forest training scales with n_jobs
"""

import sys
import os

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

import time

import numpy as np

from acoustics.signal_io import Recording
from acoustics.spectral import FeatureExtraction, extract_features
from classifiers.trees import BoostingParams, Dataset, ForestParams, fit_gbt, fit_random_forest
from detection.hmm import HmmParams, smooth_sequence


def _timed(fn, n_runs=3):
    times = []
    for _ in range(n_runs):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.mean(times))


def _synthetic_dataset(n_rows=750, n_features=60, seed=0):
    rng = np.random.default_rng(seed)
    y = (np.arange(n_rows) < n_rows * 0.64).astype(int)
    X = rng.lognormal(mean=-12.0, sigma=0.5, size=(n_rows, n_features))
    X[y == 1, 20:40] *= rng.uniform(1.5, 4.0, size=(int(y.sum()), 20))
    return Dataset(features=X, labels=y, groups=np.array(['s'] * n_rows, dtype=object))


def benchmark_feature_extraction():
    """Feature extraction throughput per feature kind."""
    print('=' * 80)
    print('FEATURE EXTRACTION (10 min at 48 kHz)')
    print('=' * 80)
    print()

    fs = 48000
    rng = np.random.default_rng(1)
    recording = Recording(samples=0.05 * rng.standard_normal(600 * fs), sample_rate=fs, session_id='bench')

    print(f'{"Kind":<14} {"Window":<12} {"Rows":<8} {"Target (s)":<12} {"Actual (s)":<12} {"Status":<10}')
    print('-' * 80)
    for kind in ('periodogram', 'welch'):
        for duration, overlap in ((1.0, 0.5), (4.0, 3.0)):
            extraction = FeatureExtraction(duration=duration, overlap=overlap, feature_kind=kind)
            rows = len(extract_features(recording, extraction))
            elapsed = _timed(lambda: extract_features(recording, extraction), n_runs=1)
            status = '✅ PASS' if elapsed < 5.0 else '❌ FAIL'
            print(f'{kind:<14} {f"{duration:g}/{overlap:g} s":<12} {rows:<8} {5.0:<12.1f} {elapsed:<12.2f} {status:<10}')
    print()


def benchmark_training():
    """Ensemble training time on a selection-sized table."""
    print('=' * 80)
    print('ENSEMBLE TRAINING (750 windows x 60 features)')
    print('=' * 80)
    print()

    data = _synthetic_dataset()
    cases = [
        ('RF 100 trees', lambda: fit_random_forest(data, ForestParams(n_trees=100, max_depth=6))),
        ('GBT 100 rounds', lambda: fit_gbt(data, BoostingParams(n_rounds=100, max_depth=3))),
        ('GBT 300 rounds d6', lambda: fit_gbt(data, BoostingParams(n_rounds=300, max_depth=6, learning_rate=0.3))),
    ]
    print(f'{"Model":<20} {"Target (s)":<12} {"Actual (s)":<12} {"Status":<10}')
    print('-' * 80)
    for label, fit in cases:
        target = 30.0 if '300' not in label else 90.0
        elapsed = _timed(fit, n_runs=1)
        status = '✅ PASS' if elapsed < target else '❌ FAIL'
        print(f'{label:<20} {target:<12.1f} {elapsed:<12.2f} {status:<10}')
    print()


def benchmark_parallel_forest():
    """Forest training time against n_jobs; models are identical for every setting."""
    print('=' * 80)
    print('PARALLEL FOREST SCALING')
    print('=' * 80)
    print()

    data = _synthetic_dataset()
    baseline = None
    print(f'{"n_jobs":<10} {"Time (s)":<12} {"Speedup":<10}')
    print('-' * 80)
    for n_jobs in (1, 2, 4):
        elapsed = _timed(lambda: fit_random_forest(data, ForestParams(n_trees=100, n_jobs=n_jobs)), n_runs=1)
        baseline = baseline or elapsed
        print(f'{n_jobs:<10} {elapsed:<12.2f} {baseline / elapsed:<10.2f}')
    print()


def benchmark_smoothing():
    """Forward filter cost per window."""
    print('=' * 80)
    print('HMM FORWARD FILTER')
    print('=' * 80)
    print()

    params = HmmParams(p_detect=0.95, p_reject=0.9)
    rng = np.random.default_rng(2)
    print(f'{"Windows":<12} {"Target (s)":<12} {"Actual (s)":<12} {"us/window":<12} {"Status":<10}')
    print('-' * 80)
    for n, target in ((1_000, 0.05), (10_000, 0.2), (100_000, 2.0)):
        y = rng.integers(0, 2, n)
        elapsed = _timed(lambda: smooth_sequence(y, params))
        status = '✅ PASS' if elapsed < target else '❌ FAIL'
        print(f'{n:<12,} {target:<12.2f} {elapsed:<12.4f} {elapsed / n * 1e6:<12.2f} {status:<10}')
    print()


def main():
    """Run all benchmarks."""
    benchmark_feature_extraction()
    benchmark_training()
    benchmark_parallel_forest()
    benchmark_smoothing()

    print('=' * 80)
    print('✅ PIPELINE BENCHMARKING COMPLETE')
    print('=' * 80)


if __name__ == '__main__':
    main()
