"""Interpretability metrics for models trained with mixed-sample augmentation."""

from ._core import (
    ConfigError,
    MissingArtifact,
    OracleFailure,
    config_hash,
    config_keys,
    cut_box,
    ehr,
    energy_pg,
    generate_scenes,
    load_checkpoint,
    perturbation_curve,
    read_records,
    top_quantile_threshold,
    trapezoid_auc,
    wsol_iou,
)

__all__ = [
    "ConfigError",
    "MissingArtifact",
    "OracleFailure",
    "config_hash",
    "config_keys",
    "cut_box",
    "ehr",
    "energy_pg",
    "generate_scenes",
    "load_checkpoint",
    "perturbation_curve",
    "read_records",
    "top_quantile_threshold",
    "trapezoid_auc",
    "wsol_iou",
]
