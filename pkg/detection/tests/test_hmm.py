"""
Tests for the two-state forward filter.

Covers:
- Hand-computed forward steps and boundary parameters
- Equality with brute-force path enumeration
- Low- and high-threshold regimes after a single missed detection
- Emission estimates, recall clamping and traces
"""

import warnings

import numpy as np
import pandas as pd
import pytest

from detection.hmm import (
    DegenerateObservationError,
    DetectionTrace,
    HmmParams,
    brute_force_filter,
    build_trace,
    clamp_recall,
    emissions_from_cv,
    forward_update,
    smooth_sequence,
    sweep_thresholds,
    write_trace
)


class TestHmmParams:
    """Parameter validation and matrices."""

    def test_transition_rows_sum_to_one(self):
        """A is row-stochastic."""
        A = HmmParams(epsilon=0.3, delta=0.2).transition
        np.testing.assert_allclose(A.sum(axis=1), [1.0, 1.0])
        assert A[0, 1] == 0.3 and A[1, 0] == 0.2

    def test_emissions(self):
        """y = 1 and y = 0 columns."""
        params = HmmParams(p_detect=0.9, p_reject=0.8)
        np.testing.assert_allclose(params.emission(1), [0.2, 0.9])
        np.testing.assert_allclose(params.emission(0), [0.8, 0.1])

    def test_out_of_range(self):
        """Probabilities outside [0, 1] are rejected."""
        with pytest.raises(ValueError, match="epsilon"):
            HmmParams(epsilon=1.5)
        with pytest.raises(ValueError, match="p_reject"):
            HmmParams(p_reject=-0.1)

    def test_bad_observation(self):
        """Observations are 0 or 1."""
        with pytest.raises(ValueError, match="observation must be 0 or 1"):
            HmmParams().emission(2)

    def test_clamped_emissions_warn(self):
        """Perfect recalls are pulled inside (0, 1) with a warning."""
        with pytest.warns(UserWarning, match="clamped"):
            params = HmmParams().with_emissions(1.0, 0.0)
        assert params.p_detect == 1.0 - 1e-6
        assert params.p_reject == 1e-6

    def test_no_warning_inside_range(self):
        """Recalls already inside the range pass silently."""
        with warnings.catch_warnings():
            warnings.simplefilter('error')
            assert clamp_recall(0.7) == 0.7


class TestForwardUpdate:
    """Single forward step."""

    def test_one_third(self):
        """ε=0.1, p_detect=0.9, p_reject=0.8, prior (1,0), y=1 → 1/3."""
        params = HmmParams(epsilon=0.1, delta=1e-5, p_detect=0.9, p_reject=0.8)
        posterior = forward_update([1.0, 0.0], 1, params)
        assert posterior[1] == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert brute_force_filter([1], params)[0] == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_absorbing_noise_state(self):
        """ε = δ = 0 from X_0 = 0 never reaches the leak state."""
        params = HmmParams(epsilon=0.0, delta=0.0)
        y = np.random.default_rng(0).integers(0, 2, 50)
        assert np.all(smooth_sequence(y, params) == 0.0)

    def test_normalized(self):
        """Posteriors sum to one."""
        rng = np.random.default_rng(1)
        for _ in range(200):
            params = HmmParams(*rng.uniform(0.01, 0.99, 4))
            p = rng.uniform()
            posterior = forward_update([1 - p, p], int(rng.integers(0, 2)), params)
            assert posterior.sum() == pytest.approx(1.0, abs=1e-12)

    def test_uninformative_emissions(self):
        """With 0.5/0.5 emissions a single update only propagates the prior."""
        params = HmmParams(epsilon=0.1, p_detect=0.5, p_reject=0.5)
        assert smooth_sequence([1], params)[0] == pytest.approx(0.1)

    def test_delta_persistence(self):
        """From certainty of a leak, uninformative steps decay by δ."""
        params = HmmParams(epsilon=0.1, delta=1e-5, p_detect=0.5, p_reject=0.5)
        posterior = forward_update([0.0, 1.0], 0, params)
        assert posterior[1] == pytest.approx(1.0 - 1e-5, abs=1e-15)

    def test_positive_evidence_raises_belief(self):
        """With both recalls above 0.5, y = 1 raises π above its predicted value."""
        rng = np.random.default_rng(2)
        for _ in range(200):
            params = HmmParams(epsilon=rng.uniform(), delta=rng.uniform(),
                               p_detect=rng.uniform(0.51, 0.99), p_reject=rng.uniform(0.51, 0.99))
            p = rng.uniform()
            predicted = (np.array([1 - p, p]) @ params.transition)[1]
            assert forward_update([1 - p, p], 1, params)[1] >= predicted - 1e-12

    def test_degenerate_observation(self):
        """An observation impossible under both states raises."""
        params = HmmParams(epsilon=0.0, p_detect=1.0, p_reject=1.0)
        with pytest.raises(DegenerateObservationError, match="impossible"):
            forward_update([1.0, 0.0], 1, params)

    def test_invalid_prior(self):
        """The prior must be a distribution."""
        with pytest.raises(ValueError, match="prior"):
            forward_update([0.5, 0.6], 1, HmmParams())


class TestSmoothSequence:
    """Full traces."""

    def test_all_zeros_stay_low(self):
        """Steady rejections keep π below 0.01 for 100 windows."""
        params = HmmParams(p_detect=0.95, p_reject=0.95)
        assert smooth_sequence(np.zeros(100, dtype=int), params).max() < 0.01

    def test_all_ones_climb(self):
        """Steady detections push π above 0.99 from the third window on."""
        params = HmmParams(p_detect=0.95, p_reject=0.95)
        pi = smooth_sequence(np.ones(100, dtype=int), params)
        assert pi[1] > 0.97
        assert pi[2:].min() >= 0.99

    def test_matches_brute_force(self):
        """1000 random cases agree with path enumeration within 1e-10."""
        rng = np.random.default_rng(3)
        for _ in range(1000):
            T = int(rng.integers(1, 13))
            params = HmmParams(epsilon=rng.uniform(), delta=rng.uniform(),
                               p_detect=rng.uniform(0.01, 0.99), p_reject=rng.uniform(0.01, 0.99))
            y = rng.integers(0, 2, T)
            np.testing.assert_allclose(smooth_sequence(y, params), brute_force_filter(y, params), atol=1e-10)

    def test_brute_force_with_random_initial(self):
        """A mixed initial distribution also matches."""
        rng = np.random.default_rng(4)
        for _ in range(100):
            p0 = rng.uniform()
            params = HmmParams(*rng.uniform(0.05, 0.95, 4), initial=(1 - p0, p0))
            y = rng.integers(0, 2, 8)
            np.testing.assert_allclose(smooth_sequence(y, params), brute_force_filter(y, params), atol=1e-10)

    def test_low_threshold_regime_drops(self):
        """Near-perfect detection: one miss after five hits drops π below 0.05."""
        params = HmmParams(epsilon=0.1, delta=1e-5, p_detect=0.9999, p_reject=0.6)
        pi = smooth_sequence([1, 1, 1, 1, 1, 0], params)
        assert pi[4] > 0.9
        assert pi[5] < 0.05

    def test_high_threshold_regime_smooths(self):
        """Conservative detection: one miss after five hits keeps π ≥ 0.5."""
        params = HmmParams(epsilon=0.1, delta=1e-5, p_detect=0.8, p_reject=0.99)
        pi = smooth_sequence([1, 1, 1, 1, 1, 0], params)
        assert pi[5] >= 0.5

    def test_empty_sequence(self):
        """No observations, no trace."""
        with pytest.raises(ValueError, match="non-empty"):
            smooth_sequence([], HmmParams())

    def test_brute_force_length_limit(self):
        """Enumeration refuses long sequences."""
        with pytest.raises(ValueError, match="limited to 16"):
            brute_force_filter(np.zeros(17, dtype=int), HmmParams())


class TestEmissions:
    """Recalls from out-of-fold scores."""

    def test_detect_recall(self):
        """90 of 100 positives above threshold → p_detect 0.9."""
        scores = [0.9] * 90 + [0.1] * 10 + [0.2] * 20
        labels = [1] * 100 + [0] * 20
        recalls = emissions_from_cv(scores, labels, 0.5)
        assert recalls['p_detect'] == pytest.approx(0.9)
        assert recalls['p_reject'] == 1.0

    def test_zero_threshold_flags_everything(self):
        """Threshold 0 flags every window under the ≥ rule."""
        recalls = emissions_from_cv([0.0, 0.3, 0.0, 0.7], [1, 1, 0, 0], 0.0)
        assert recalls == {'p_detect': 1.0, 'p_reject': 0.0}

    def test_counting_example(self):
        """Scores 0.8×3 and 0.6 positive, 0.2×4 negative at 0.75."""
        recalls = emissions_from_cv([0.8, 0.8, 0.8, 0.6, 0.2, 0.2, 0.2, 0.2], [1, 1, 1, 1, 0, 0, 0, 0], 0.75)
        assert recalls == {'p_detect': 0.75, 'p_reject': 1.0}

    def test_missing_class(self):
        """Both classes are required."""
        with pytest.raises(ValueError, match="both leak and noise"):
            emissions_from_cv([0.9, 0.8], [1, 1], 0.5)


class TestTraces:
    """DetectionTrace construction and export."""

    def test_build_trace(self):
        """Scores are thresholded with ≥ and filtered."""
        params = HmmParams(p_detect=0.9, p_reject=0.9)
        trace = build_trace([0.2, 0.5, 0.7], [0.0, 1.0, 2.0], 0.5, params)
        np.testing.assert_array_equal(trace.y, [0, 1, 1])
        np.testing.assert_allclose(trace.pi_leak, smooth_sequence([0, 1, 1], params))
        assert len(trace) == 3

    def test_length_mismatch(self):
        """Series must have equal lengths."""
        with pytest.raises(ValueError, match="lengths differ"):
            DetectionTrace(start_offset=np.zeros(2), score=np.zeros(3), y=np.zeros(3), pi_leak=np.zeros(3),
                           threshold=0.5)

    def test_threshold_sweep_monotone(self):
        """Higher thresholds never flag more windows."""
        rng = np.random.default_rng(5)
        scores = rng.uniform(size=40)
        cv_scores = rng.uniform(size=100)
        cv_labels = (cv_scores + rng.normal(0, 0.2, 100) > 0.5).astype(int)
        traces = sweep_thresholds(scores, np.arange(40.0), cv_scores, cv_labels, [0.25, 0.5, 0.75])
        positives = [traces[t].y.sum() for t in (0.25, 0.5, 0.75)]
        assert positives == sorted(positives, reverse=True)
        assert traces[0.5].params.p_detect == pytest.approx(
            emissions_from_cv(cv_scores, cv_labels, 0.5)['p_detect'])

    def test_first_alarm(self):
        """First window at or above 0.9."""
        trace = DetectionTrace(start_offset=np.array([0.0, 1.0, 2.0]), score=np.zeros(3), y=np.zeros(3),
                               pi_leak=np.array([0.1, 0.95, 0.99]), threshold=0.5)
        assert trace.first_alarm() == 1.0
        assert trace.first_alarm(0.999) is None

    def test_write_trace(self, tmp_path):
        """Header comments, then start_offset,score,y,pi_leak rows."""
        trace = build_trace([0.2, 0.8], [0.0, 1.0], 0.5, HmmParams())
        path = write_trace(trace, tmp_path / 't.csv', {'session_id': 'detect-000'})
        lines = path.read_text().splitlines()
        assert lines[0] == '# threshold = 0.5'
        assert '# session_id = detect-000' in lines
        df = pd.read_csv(path, comment='#')
        assert list(df.columns) == ['start_offset', 'score', 'y', 'pi_leak']
        assert df['y'].tolist() == [0, 1]
