"""Python access to the preddev library."""

import json

from ._core import __version__, describe, models, observe
from ._core import run as _run


def run(config, stages=()):
    """Run a scenario (dict or JSON string) and return the report as a dict."""
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(_run(text, list(stages)))


__all__ = ["__version__", "describe", "models", "observe", "run"]
