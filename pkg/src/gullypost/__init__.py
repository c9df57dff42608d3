"""Post-processing toolkit for SLAM-derived debris-flow channel maps."""

from gullypost.model import (
    GullyError,
    NnIndex,
    NumericalError,
    ParseError,
    PointCloud,
    ScalingFactors,
    Trajectory,
    build_index,
    knn_query,
)

__version__ = "0.1.0"

__all__ = [
    "GullyError",
    "NnIndex",
    "NumericalError",
    "ParseError",
    "PointCloud",
    "ScalingFactors",
    "Trajectory",
    "build_index",
    "knn_query",
    "__version__",
]
