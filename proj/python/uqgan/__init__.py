"""UQGAN: one-vs-all classification with GAN-generated out-of-class examples.

The heavy lifting lives in the compiled extension ``_uqgan``; this package
re-exports its public surface.
"""

from _uqgan import (  # noqa: F401
    ArchSpec,
    ConfigError,
    Dataset,
    HistoryRecord,
    IoError,
    Model,
    TrainingConfig,
    TrainingDivergence,
    UndefinedMetric,
    UnsupportedModel,
    __version__,
    accuracy,
    aupr,
    auroc,
    cae_loss,
    class_posterior,
    ece,
    ece_from_confidence,
    fpr_at_95_tpr,
    load_image_container,
    load_toy_text,
    make_gaussian_grid,
    make_two_gaussians,
    make_two_moons,
    ood_metrics,
    ova_loss,
    run_experiment,
    save_image_container,
    save_toy_text,
    transform_in_class,
    transform_in_class_batch,
    uncertainty,
)

__all__ = [
    "ArchSpec",
    "ConfigError",
    "Dataset",
    "HistoryRecord",
    "IoError",
    "Model",
    "TrainingConfig",
    "TrainingDivergence",
    "UndefinedMetric",
    "UnsupportedModel",
    "__version__",
    "accuracy",
    "aupr",
    "auroc",
    "cae_loss",
    "class_posterior",
    "ece",
    "ece_from_confidence",
    "fpr_at_95_tpr",
    "load_image_container",
    "load_toy_text",
    "make_gaussian_grid",
    "make_two_gaussians",
    "make_two_moons",
    "ood_metrics",
    "ova_loss",
    "run_experiment",
    "save_image_container",
    "save_toy_text",
    "transform_in_class",
    "transform_in_class_batch",
    "uncertainty",
]
