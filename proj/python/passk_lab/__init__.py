"""Exact pass@k objectives, gradient estimators and exploration-collapse dynamics."""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import run_experiment_json as _run_experiment_json

__version__ = "0.1.0"


def run_experiment(config):
    """Run an experiment from a config dict; returns {"files": {name: text}, ...}."""
    return _run_experiment_json(_json.dumps(config))
