"""Tests for tree ensembles and evaluation."""
