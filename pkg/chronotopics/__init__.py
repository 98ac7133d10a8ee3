"""Narrative topic modeling over categorical time for timestamped text corpora."""

__version__ = "1.0.0"
