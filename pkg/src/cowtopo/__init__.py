"""Topology-aware Circle-of-Willis segmentation toolkit.

Submodules cover preprocessing, the centerline-weighted loss, topological
refinement, RoI detection with graph derivation, and evaluation metrics.
"""

__version__ = "0.1.0"

from .volume import (  # noqa: E402
    BACKGROUND,
    DEFAULT_CLASS_MAP,
    ClassMap,
    CowClass,
    LabelVolume,
    ProbVolume,
    Spacing,
    ValidationError,
    Volume,
    VolumeIOError,
    load_label,
    load_prob,
    load_volume,
    one_hot,
    save_volume,
)

__all__ = [
    "BACKGROUND",
    "DEFAULT_CLASS_MAP",
    "ClassMap",
    "CowClass",
    "LabelVolume",
    "ProbVolume",
    "Spacing",
    "ValidationError",
    "Volume",
    "VolumeIOError",
    "load_label",
    "load_prob",
    "load_volume",
    "one_hot",
    "save_volume",
    "__version__",
]
