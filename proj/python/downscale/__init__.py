from ._core import (
    Fit,
    Mesh,
    Model,
    assemble,
    build_mesh,
    fit,
    matern_correlation,
    predict,
    simulate,
)

__all__ = [
    "Fit",
    "Mesh",
    "Model",
    "assemble",
    "build_mesh",
    "fit",
    "matern_correlation",
    "predict",
    "simulate",
]
