"""Shared exception types, mapped to CLI exit codes."""

from __future__ import annotations


class DataError(Exception):
    """Input data is unreadable, malformed, or violates a data invariant (exit 3)."""


class ConfigError(Exception):
    """Configuration value or combination is invalid (exit 2)."""
