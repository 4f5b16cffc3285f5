"""Test suite for the coaudit package."""
