"""Tests for dual-hormone-ap."""
