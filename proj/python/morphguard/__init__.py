"""MorphGuard: dual-head margin loss for morph-robust embeddings, plus morph metrics."""

import json

from ._core import *  # noqa: F401,F403
from ._core import default_config as _default_config_text


def default_config():
    """Default experiment configuration as a dict."""
    return json.loads(_default_config_text())
