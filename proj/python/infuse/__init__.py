"""Stacked intrusion-detection ensemble over NSL-KDD style traffic records.

Thin wrapper over the C++ core. ``run("train", {"seed": "7"})`` drives the
same pipeline verbs as the command-line tool; settings are ``key = value``
strings using the tool's configuration keys.
"""

from ._infuse import (
    Bundle,
    ConfigError,
    Error,
    IoError,
    config_keys,
    effective_config,
    encode_file,
    ks_two_sample,
    load_bundle,
    mcnemar,
    metrics,
    roc_auc,
    run,
    write_synthetic_dataset,
)

__all__ = [
    "Bundle",
    "ConfigError",
    "Error",
    "IoError",
    "config_keys",
    "effective_config",
    "encode_file",
    "ks_two_sample",
    "load_bundle",
    "mcnemar",
    "metrics",
    "roc_auc",
    "run",
    "write_synthetic_dataset",
]
