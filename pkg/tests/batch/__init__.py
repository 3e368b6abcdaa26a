"""Tests for batch processing module."""
