#!/usr/bin/env python3
"""
Acceptance Validation Suite

Checks the detector against exact oracles and against qualitative targets
on the synthetic corpus.

Oracles:
- Forward filter vs brute-force path enumeration (1,000 cases, T ≤ 12)
- Hand-computed forward step (π = 1/3)
- Parseval, bin localization and single-segment Welch degeneracy
- CART root split vs exhaustive Gini search (200 datasets)
- Low/high threshold regimes after a single missed detection

Synthetic corpus:
- Selected configuration reaches ≥ 0.80 5-fold CV accuracy
- Precision at 5 l/min exceeds precision at 2 l/min for a flow-10 model
- Onset at 48 s detected within 10 windows, quiet before it
- Two identical pipeline runs write identical models and reports
"""

import sys
import os

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

import logging
import tempfile
import time
import warnings
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import signal as sp_signal

from acoustics.spectral import periodogram, welch_psd
from acoustics.synth import CorpusConfig
from classifiers.trees import Dataset, TreeParams, fit_cart
from detection.config import PipelineConfig
from detection.hmm import HmmParams, brute_force_filter, forward_update, smooth_sequence
from detection.pipeline import run_detect, run_features, run_report, run_select, run_synth, run_train

SEEDS = (0, 1, 2)


def _gini(labels: np.ndarray) -> float:
    if labels.size == 0:
        return 0.0
    p = labels.mean()
    return 1.0 - p ** 2 - (1.0 - p) ** 2


def exhaustive_root_split(X: np.ndarray, y: np.ndarray) -> Optional[Tuple[int, float, float]]:
    """Best (feature, midpoint, gain); ties go to the lowest feature, then threshold."""
    best = None
    n = y.size
    for f in range(X.shape[1]):
        values = np.unique(X[:, f])
        for a, b in zip(values[:-1], values[1:]):
            threshold = (a + b) / 2.0
            left = X[:, f] <= threshold
            gain = (_gini(y) - left.sum() / n * _gini(y[left])
                    - (~left).sum() / n * _gini(y[~left]))
            if best is None or gain > best[2] + 1e-12:
                best = (f, threshold, gain)
    return best


class AcceptanceValidator:
    """
    Runs every acceptance check and keeps a pass/fail ledger.
    """

    def __init__(self, workdir: Path):
        self.workdir = Path(workdir)
        self.results: List[Dict] = []

    def _record(self, name: str, passed: bool, detail: str, elapsed: float):
        self.results.append({'name': name, 'passed': bool(passed), 'detail': detail, 'seconds': elapsed})
        status = '✅ PASS' if passed else '❌ FAIL'
        print(f"{name:<34} {status:<10} {elapsed:>8.2f}s  {detail}")

    # Oracles

    def validate_hmm_oracle(self, n_cases: int = 1000):
        start = time.perf_counter()
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(n_cases):
            T = int(rng.integers(1, 13))
            params = HmmParams(epsilon=rng.uniform(), delta=rng.uniform(),
                               p_detect=rng.uniform(0.01, 0.99), p_reject=rng.uniform(0.01, 0.99))
            y = rng.integers(0, 2, T)
            worst = max(worst, float(np.max(np.abs(smooth_sequence(y, params) - brute_force_filter(y, params)))))
        elapsed = time.perf_counter() - start
        self._record('HMM vs path enumeration', worst <= 1e-10 and elapsed < 10,
                     f"max |Δπ| = {worst:.2e} over {n_cases} cases", elapsed)

    def validate_forward_step(self):
        start = time.perf_counter()
        params = HmmParams(epsilon=0.1, delta=1e-5, p_detect=0.9, p_reject=0.8)
        pi = forward_update([1.0, 0.0], 1, params)[1]
        self._record('Forward step = 1/3', abs(pi - 1.0 / 3.0) <= 1e-12, f"π = {pi:.15f}",
                     time.perf_counter() - start)

    def validate_spectral(self):
        start = time.perf_counter()
        rng = np.random.default_rng(1)
        fs = 48000
        worst = 0.0
        for _ in range(100):
            x = rng.standard_normal(int(rng.integers(256, 8192))) * rng.uniform(0.01, 2.0)
            worst = max(worst, abs(periodogram(x, fs).total_power() / np.mean(x ** 2) - 1.0))

        n, k = 4800, 300
        tone = periodogram(np.sin(2 * np.pi * k * np.arange(n) / n), fs)
        share = tone.values[k] / tone.values.sum()

        x = rng.standard_normal(4096)
        welch = welch_psd(x, fs, segment_len=4096, segment_overlap=0)
        _, reference = sp_signal.periodogram(x, fs=fs, window='hann', detrend=False, scaling='density')
        welch_error = float(np.max(np.abs(welch.values - reference) / np.maximum(reference, 1e-300)))

        passed = worst <= 1e-6 and share >= 0.999 and welch_error <= 1e-9
        self._record('Spectral estimators', passed,
                     f"Parseval {worst:.1e}, bin share {share:.5f}, Welch {welch_error:.1e}",
                     time.perf_counter() - start)

    def validate_cart_oracle(self, n_datasets: int = 200):
        start = time.perf_counter()
        rng = np.random.default_rng(2)
        mismatches = 0
        for _ in range(n_datasets):
            n = int(rng.integers(2, 13))
            d = int(rng.integers(1, 4))
            X = np.round(rng.uniform(0, 1, size=(n, d)), 1)
            y = rng.integers(0, 2, size=n)
            tree = fit_cart(Dataset(features=X, labels=y, groups=['g'] * n), TreeParams(max_depth=2))
            expected = exhaustive_root_split(X, y)
            if expected is None or expected[2] <= 1e-12:
                mismatches += not tree.is_leaf(0)
            else:
                mismatches += (tree.feature[0], tree.threshold[0]) != (expected[0], expected[1])
        elapsed = time.perf_counter() - start
        self._record('CART vs exhaustive search', mismatches == 0 and elapsed < 5,
                     f"{mismatches} mismatches over {n_datasets} datasets", elapsed)

    def validate_threshold_regimes(self):
        start = time.perf_counter()
        pattern = [1, 1, 1, 1, 1, 0]
        low = smooth_sequence(pattern, HmmParams(p_detect=0.9999, p_reject=0.6))[-1]
        high = smooth_sequence(pattern, HmmParams(p_detect=0.8, p_reject=0.99))[-1]
        self._record('Threshold regimes', low < 0.05 and high >= 0.5,
                     f"low-threshold π = {low:.4f}, high-threshold π = {high:.4f}",
                     time.perf_counter() - start)

    # Synthetic corpus

    def _corpus(self, seed: int) -> Path:
        root = self.workdir / f"seed{seed}"
        if not (root / 'corpus' / 'manifest.csv').exists():
            run_synth(CorpusConfig(seed=seed), root / 'corpus')
        return root

    def _train(self, seed: int, config: PipelineConfig) -> Path:
        root = self._corpus(seed)
        if not (root / 'model.txt').exists():
            run_features(root / 'corpus' / 'train_manifest.csv', config, root / 'train.csv')
            run_train(root / 'train.csv', config, root / 'model.txt')
        return root

    def validate_selection(self):
        start = time.perf_counter()
        root = self._corpus(SEEDS[0])
        config = PipelineConfig(durations=(4.0,), overlaps=(3.0,), grid_n_estimators=(50,),
                                grid_max_depth=(3, 6), grid_learning_rate=(0.3,))
        report = run_select(config, root / 'selection', manifest=root / 'corpus' / 'train_manifest.csv')
        best = report.loc[report['best']].iloc[0]
        passed = best['accuracy_cv'] >= 0.80 and set(report['algorithm']) == {'rf', 'gbt'}
        self._record('Selection CV accuracy', passed,
                     f"best {best['algorithm']}/{best['feature']} at {best['accuracy_cv']:.3f}",
                     time.perf_counter() - start)

    def validate_flow_ordering(self):
        start = time.perf_counter()
        config = PipelineConfig()
        details, passed = [], True
        for seed in SEEDS:
            root = self._train(seed, config)
            report = run_report(root / 'model.txt', root / 'corpus' / 'test_manifest.csv', config,
                                root / 'report').set_index('flow')
            p2, p5 = report.loc[2.0, 'precision'], report.loc[5.0, 'precision']
            enough = report['n_windows'].min() >= 200
            ok = enough and p2 is not None and p5 is not None and p5 > p2
            passed &= bool(ok)
            details.append(f"seed {seed}: {p2:.3f} < {p5:.3f}" if ok else f"seed {seed}: {p2} vs {p5}")
        self._record('Precision grows with flow', passed, '; '.join(details), time.perf_counter() - start)

    def validate_onset(self):
        start = time.perf_counter()
        config = PipelineConfig()
        details, passed = [], True
        for seed in SEEDS:
            root = self._train(seed, config)
            traces = run_detect(root / 'model.txt', [root / 'corpus' / 'detect_manifest.csv'],
                                root / 'train.csv', config, root / 'detect', plots=False)
            trace = traces[('detect-000', 0.5)]
            onset = 48.0
            before = trace.start_offset + config.duration <= onset
            hop = config.duration - config.overlap
            alarm = trace.first_alarm(0.9)
            quiet = trace.pi_leak[before].max() < 0.2
            ok = quiet and alarm is not None and alarm <= onset + 10 * hop
            passed &= bool(ok)
            details.append(f"seed {seed}: alarm at {alarm} s, pre-onset max π {trace.pi_leak[before].max():.3f}")
        self._record('Onset detection', passed, '; '.join(details), time.perf_counter() - start)

    def validate_determinism(self):
        start = time.perf_counter()
        config = PipelineConfig()
        outputs = []
        for name in ('run_a', 'run_b'):
            root = self.workdir / name
            run_synth(CorpusConfig(seed=SEEDS[0], detection_seconds=0.0), root / 'corpus')
            run_features(root / 'corpus' / 'train_manifest.csv', config, root / 'train.csv')
            run_train(root / 'train.csv', config, root / 'model.txt')
            run_report(root / 'model.txt', root / 'corpus' / 'test_manifest.csv', config, root / 'report')
            outputs.append(((root / 'model.txt').read_bytes(), (root / 'report' / 'flow_report.csv').read_bytes()))
        self._record('End-to-end determinism', outputs[0] == outputs[1],
                     'model and flow report byte-identical' if outputs[0] == outputs[1] else 'outputs differ',
                     time.perf_counter() - start)


def main():
    """Run full validation suite."""
    logging.basicConfig(level=logging.WARNING)
    warnings.simplefilter('ignore')

    print("=" * 80)
    print("ACCEPTANCE VALIDATION SUITE")
    print("=" * 80)
    print(f"\n{'Check':<34} {'Status':<10} {'Time':>9}  Detail")
    print("-" * 80)

    with tempfile.TemporaryDirectory() as tmp:
        validator = AcceptanceValidator(Path(tmp))
        validator.validate_hmm_oracle()
        validator.validate_forward_step()
        validator.validate_spectral()
        validator.validate_cart_oracle()
        validator.validate_threshold_regimes()
        validator.validate_selection()
        validator.validate_flow_ordering()
        validator.validate_onset()
        validator.validate_determinism()

    failed = [r for r in validator.results if not r['passed']]
    print("\n" + "=" * 80)
    print("VALIDATION SUMMARY")
    print("=" * 80)
    print(f"\nChecks run: {len(validator.results)}")
    print(f"Failed: {len(failed)}")
    if not failed:
        print("\n✅ All acceptance checks passed.")
    else:
        print(f"\n⚠️  {len(failed)} checks failed: {', '.join(r['name'] for r in failed)}")
    print("=" * 80)
    return 0 if not failed else 1


if __name__ == "__main__":
    sys.exit(main())
