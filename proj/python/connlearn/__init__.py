"""Adaptive brain connectivity learning with contrastive pretraining."""

from ._core import (
    ConfigError,
    Error,
    UsageError,
    auc,
    confusion_metrics,
    coupling_template,
    cross_entropy,
    finetune,
    fuse_normalize,
    fuse_raw,
    gradcheck,
    graph_loss,
    multihead_similarity,
    normalize_adjacency,
    nt_xent,
    pearson_matrix,
    pretrain,
    quantile_bins,
    stratified_kfold,
    synth,
    transfer_entropy_matrix,
    zscore_rows,
)

__all__ = [
    "ConfigError",
    "Error",
    "UsageError",
    "auc",
    "confusion_metrics",
    "coupling_template",
    "cross_entropy",
    "finetune",
    "fuse_normalize",
    "fuse_raw",
    "gradcheck",
    "graph_loss",
    "multihead_similarity",
    "normalize_adjacency",
    "nt_xent",
    "pearson_matrix",
    "pretrain",
    "quantile_bins",
    "stratified_kfold",
    "synth",
    "transfer_entropy_matrix",
    "zscore_rows",
]
