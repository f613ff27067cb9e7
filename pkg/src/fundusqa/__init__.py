"""Sharpness indicators and blur triage for retinal fundus photographs."""
from .config import Config, load_config
from .features import extract_features, feature_columns
from .image_core import fundus_mask, load_image, to_grayscale

__version__ = "0.1.0"

__all__ = [
    "Config",
    "load_config",
    "extract_features",
    "feature_columns",
    "fundus_mask",
    "load_image",
    "to_grayscale",
]
