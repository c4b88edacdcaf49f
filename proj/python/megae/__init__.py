"""Graph feature imputation with spectral wavelet autoencoders."""

from ._core import (
    ConfigError,
    DataError,
    NumericalError,
    certify,
    entropy_bound,
    frame_tightness,
    generate_mask,
    impute,
    knn_impute,
    mean_impute,
    normalized_laplacian,
    rmse,
    spectral_entropy,
    synthesize,
    wavelet_entropy,
    wavelet_transform,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "certify",
    "entropy_bound",
    "frame_tightness",
    "generate_mask",
    "impute",
    "knn_impute",
    "mean_impute",
    "normalized_laplacian",
    "rmse",
    "spectral_entropy",
    "synthesize",
    "wavelet_entropy",
    "wavelet_transform",
]
