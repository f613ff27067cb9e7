"""Per-image feature vectors combining the statistical, gradient and wavelet families."""
from __future__ import annotations

import numpy as np

from .config import Config
from .gradients import grad_features, laplacian, sobel_magnitude
from .image_core import fundus_mask, to_grayscale
from .stats import stat_features
from .vesselness import perivascular_features
from .wavelets import column_tag, get_family, wavelet_features

__all__ = [
    "FEATURE_SCHEMA_VERSION",
    "STAT_COLUMNS",
    "GRAD_COLUMNS",
    "PERIVASCULAR_COLUMNS",
    "feature_columns",
    "model_columns",
    "cluster_columns",
    "extract_features",
]

# bump whenever a feature definition or default changes meaning
FEATURE_SCHEMA_VERSION = 1

STAT_COLUMNS = ("mean_pixel_energy", "rms_channel_energy", "shannon_entropy", "efc", "nefc")
GRAD_COLUMNS = (
    "tenengrad",
    "tenengrad_thresholded",
    "mean_abs_laplacian",
    "energy_laplacian",
    "log_pech_pacheco",
)
PERIVASCULAR_COLUMNS = ("perivascular_tenengrad", "perivascular_abs_laplacian")
_WAVELET_SUFFIXES = ("var_horizontal", "var_vertical", "var_diagonal", "sum_sq")


def _wavelet_columns(families) -> tuple:
    return tuple(
        f"{column_tag(get_family(name).name)}_{suffix}" for name in families for suffix in _WAVELET_SUFFIXES
    )


def feature_columns(config: Config = Config()) -> tuple:
    """All exported feature columns, in CSV order."""
    return STAT_COLUMNS + GRAD_COLUMNS + PERIVASCULAR_COLUMNS + _wavelet_columns(config.wavelets)


def model_columns(config: Config = Config()) -> tuple:
    """Columns fed to classifiers by default (thresholded Tenengrad is export-only)."""
    return tuple(c for c in feature_columns(config) if c != "tenengrad_thresholded")


def cluster_columns(cluster: str, config: Config = Config()) -> tuple:
    """Feature columns of one PCA cluster: ``statistical``, ``gradient`` or ``wavelet``."""
    if cluster == "statistical":
        return ("efc", "nefc", "mean_pixel_energy", "shannon_entropy")
    if cluster == "gradient":
        return ("tenengrad", "mean_abs_laplacian", "perivascular_tenengrad", "perivascular_abs_laplacian")
    if cluster == "wavelet":
        return _wavelet_columns(config.wavelets)
    raise ValueError(f"unknown feature cluster {cluster!r}")


def extract_features(rgb: np.ndarray, config: Config = Config()) -> dict:
    """Compute every feature column for one ``(H, W, 3)`` image in [0, 1]."""
    gray = to_grayscale(rgb)
    fmask = fundus_mask(gray, config.mask_threshold)
    scope = fmask if config.mask_all_metrics else None

    g = sobel_magnitude(gray)
    lap = laplacian(gray)
    out = {}
    out.update(stat_features(rgb, gray, scope))
    out.update(grad_features(gray, config.tau_percentile, scope, magnitude=g, lap=lap))
    out.update(
        perivascular_features(
            gray,
            fmask,
            config.frangi,
            variant=config.perivascular_variant,
            normalise=config.perivascular_normalise,
            downscale=config.frangi_downscale,
            magnitude=g,
            lap=lap,
        )
    )
    out.update(wavelet_features(gray, fmask, config.wavelets, config.wavelet_mode))
    return {name: out[name] for name in feature_columns(config)}
