"""Tests for temporal smoothing and the pipeline."""
