"""Whole-image statistical indicators: energy, Shannon entropy, EFC and NEFC."""
from __future__ import annotations

import numpy as np

__all__ = [
    "energy",
    "mean_pixel_energy",
    "rms_channel_energy",
    "shannon_entropy",
    "efc",
    "nefc",
    "stat_features",
]


def energy(img: np.ndarray) -> float:
    """Sum of squared pixel intensities."""
    img = np.asarray(img, dtype=np.float64)
    return float(np.sum(img * img))


def mean_pixel_energy(img: np.ndarray) -> float:
    img = np.asarray(img, dtype=np.float64)
    return energy(img) / img.size


def rms_channel_energy(img: np.ndarray) -> float:
    """Root mean square over channels of the per-channel energies."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3:
        raise ValueError(f"expected an (H, W, C) image, got shape {img.shape}")
    per_channel = np.sum(img * img, axis=(0, 1))
    return float(np.sqrt(np.mean(per_channel**2)))


def shannon_entropy(img: np.ndarray) -> float:
    """Pixel-wise entropy ``-sum x log2 x`` over raw intensities (0 log 0 = 0).

    Raises ``ValueError`` for negative pixels, for which the elementwise
    entropy is undefined.
    """
    x = np.asarray(img, dtype=np.float64).ravel()
    if np.any(x < 0):
        raise ValueError("shannon_entropy is undefined for negative pixel values")
    pos = x[x > 0]
    return float(-np.sum(pos * np.log2(pos))) + 0.0  # + 0.0 turns -0.0 into 0.0


def efc(img: np.ndarray) -> float:
    """Entropy focus criterion, in nats.

    Pixels are normalised by the maximum-entropy reference
    ``S_max = sqrt(energy)``, i.e. the value a single pixel would take if it
    held all of the image energy.
    """
    x = np.asarray(img, dtype=np.float64).ravel()
    if np.any(x < 0):
        raise ValueError("efc is undefined for negative pixel values")
    s_max = np.sqrt(np.sum(x * x))
    if s_max == 0.0:
        raise ValueError("efc is undefined for an all-zero image")
    r = x[x > 0] / s_max
    return float(-np.sum(r * np.log(r))) + 0.0


def nefc(img: np.ndarray) -> float:
    """EFC scaled by ``sqrt(MN) / sqrt(ln(MN))``."""
    img = np.asarray(img, dtype=np.float64)
    mn = img.size
    if mn < 2:
        raise ValueError("nefc needs at least two pixels")
    return efc(img) * (mn / np.sqrt(mn)) * np.log(mn) ** -0.5


def stat_features(rgb: np.ndarray, gray: np.ndarray, mask=None) -> dict:
    """Statistical feature columns for one image.

    With ``mask`` given, grayscale metrics see only the in-mask pixels (as a
    flat vector) and the RGB energy only in-mask pixels of each channel.
    """
    if mask is not None:
        gray = np.asarray(gray)[mask]
        rgb = np.asarray(rgb)[mask][:, None, :]
    return {
        "mean_pixel_energy": mean_pixel_energy(gray),
        "rms_channel_energy": rms_channel_energy(rgb),
        "shannon_entropy": shannon_entropy(gray),
        "efc": efc(gray),
        "nefc": nefc(gray),
    }
