"""Python access to the last-switch-dependent recommender study core."""

import json as _json

from ._pcar import (
    PcarError,
    advance,
    initial_state,
    oracle_check,
    pearson,
    pss_trend,
    run_study,
    sign_test_upper,
    student_t_quantile,
    version,
    welch_t,
)
from . import _pcar

__all__ = [
    "PcarError",
    "advance",
    "initial_state",
    "load_catalog",
    "load_config",
    "oracle_check",
    "pearson",
    "pss_trend",
    "run_study",
    "sign_test_upper",
    "student_t_quantile",
    "version",
    "welch_t",
]


def load_catalog(path):
    """Validated catalog as a dict with ``schema`` and ``entries``."""
    return _json.loads(_pcar.catalog_json(str(path)))


def load_config(path):
    """Validated study config with every default filled in."""
    return _json.loads(_pcar.config_json(str(path)))
