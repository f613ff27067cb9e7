"""Local-gradient sharpness measures: Tenengrad and Laplacian families."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .image_core import convolve2d

__all__ = [
    "SOBEL_X",
    "SOBEL_Y",
    "LAPLACIAN_KERNEL",
    "sobel_components",
    "sobel_magnitude",
    "tenengrad",
    "tenengrad_thresholded",
    "laplacian",
    "mean_abs_laplacian",
    "energy_laplacian",
    "log_pech_pacheco",
    "grad_features",
]

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = np.array([[1.0, 2.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -2.0, -1.0]])
LAPLACIAN_KERNEL = np.array([[0.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 0.0]]) / 6.0


def sobel_components(img: np.ndarray) -> tuple:
    """``(Gx, Gy)``: convolutions with ``SOBEL_X`` and ``SOBEL_Y``.

    Each kernel is applied as its separable factors, smoothing before
    differencing, so constant regions give exactly zero.
    """
    img = np.asarray(img, dtype=np.float64)
    smooth, diff = np.array([1.0, 2.0, 1.0]), np.array([-1.0, 0.0, 1.0])
    gx = ndimage.convolve1d(ndimage.convolve1d(img, smooth, axis=0, mode="nearest"), diff, axis=1, mode="nearest")
    gy = ndimage.convolve1d(ndimage.convolve1d(img, smooth, axis=1, mode="nearest"), -diff, axis=0, mode="nearest")
    return gx, gy


def sobel_magnitude(img: np.ndarray) -> np.ndarray:
    """Per-pixel gradient magnitude ``sqrt(Gx**2 + Gy**2)``."""
    return np.hypot(*sobel_components(img))


def tenengrad(img: np.ndarray, magnitude=None) -> float:
    g = sobel_magnitude(img) if magnitude is None else magnitude
    return float(np.sum(g * g))


def tenengrad_thresholded(img: np.ndarray, tau: float, magnitude=None) -> float:
    """Tenengrad restricted to pixels whose gradient magnitude is at least ``tau``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    g = sobel_magnitude(img) if magnitude is None else magnitude
    keep = g >= tau
    return float(np.sum(g[keep] ** 2))


def laplacian(img: np.ndarray) -> np.ndarray:
    """Convolution with ``LAPLACIAN_KERNEL``.

    The integer stencil is applied before dividing by 6, which keeps affine
    images with integer values exactly at zero.
    """
    return convolve2d(img, 6.0 * LAPLACIAN_KERNEL) / 6.0


def mean_abs_laplacian(img: np.ndarray, lap=None) -> float:
    lap = laplacian(img) if lap is None else lap
    return float(np.mean(np.abs(lap)))


def energy_laplacian(img: np.ndarray, lap=None) -> float:
    lap = laplacian(img) if lap is None else lap
    return float(np.sum(lap * lap))


def log_pech_pacheco(img: np.ndarray, lap=None) -> float:
    """Natural log of the summed squared deviation of |Laplacian| from its mean.

    The deviations are summed, not averaged. Raises ``ValueError`` when the
    sum is zero (e.g. a constant image).
    """
    lap = laplacian(img) if lap is None else lap
    a = np.abs(lap)
    ss = float(np.sum((a - a.mean()) ** 2))
    if ss <= 0.0:
        raise ValueError("log_pech_pacheco is undefined for zero Laplacian variance")
    return float(np.log(ss))


def grad_features(img: np.ndarray, tau_percentile: float = 75.0, mask=None, magnitude=None, lap=None) -> dict:
    """Gradient feature columns for one grayscale image.

    The Tenengrad threshold is the ``tau_percentile`` percentile of the
    gradient magnitude over the (masked) image. With ``mask`` given, all
    sums and means run over in-mask pixels only.
    """
    g = sobel_magnitude(img) if magnitude is None else magnitude
    lap = laplacian(img) if lap is None else lap
    if mask is not None:
        g = g[mask]
        lap = lap[mask]
    tau = float(np.percentile(g, tau_percentile))
    return {
        "tenengrad": tenengrad(None, g),
        "tenengrad_thresholded": tenengrad_thresholded(None, tau, g),
        "mean_abs_laplacian": mean_abs_laplacian(None, lap),
        "energy_laplacian": energy_laplacian(None, lap),
        "log_pech_pacheco": log_pech_pacheco(None, lap),
    }
