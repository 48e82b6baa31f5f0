"""Tests for audio ingestion, features and synthesis."""
