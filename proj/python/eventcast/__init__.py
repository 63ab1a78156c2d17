"""Python front end for the eventcast C++ core."""

import json as _json

from . import _eventcast
from ._eventcast import (
    auprc,
    auroc,
    coarse_demo,
    command_names,
    ks_fit,
    ks_two_sample,
    kruskal_wallis,
    make_folds,
    moving_average,
    purge_rows,
    reference_attack_counts,
    run_command,
    spearman,
    synth_generate,
)


def run_cv(X, y, window="dt*=14", model="rf", **kwargs):
    """Purged cross validation of one model and window; returns the report as a dict."""
    return _json.loads(_eventcast.run_cv(X, y, window=window, model=model, **kwargs))


__all__ = [
    "auprc",
    "auroc",
    "coarse_demo",
    "command_names",
    "ks_fit",
    "ks_two_sample",
    "kruskal_wallis",
    "make_folds",
    "moving_average",
    "purge_rows",
    "reference_attack_counts",
    "run_command",
    "run_cv",
    "spearman",
    "synth_generate",
]
