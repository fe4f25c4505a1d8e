"""Bundled fixtures."""

from importlib import resources
from pathlib import Path

FIG2_QUERY = "how much does liposuction cost in new york"


def fig2_dir() -> Path:
    """Directory of the two-pattern walkthrough fixture."""
    return Path(str(resources.files(__name__) / "fig2"))
