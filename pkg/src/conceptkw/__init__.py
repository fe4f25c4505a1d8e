"""Concept knowledge-driven synonymous keyword retrieval."""

__version__ = "0.1.0"
