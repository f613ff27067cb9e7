"""Frangi vesselness, structure tensor and perivascular-weighted gradient metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .gradients import laplacian, sobel_components, sobel_magnitude

__all__ = [
    "FrangiParams",
    "frangi",
    "hessian_eigenvalues",
    "structure_tensor",
    "perivascular_mask",
    "perivascular_tenengrad",
    "perivascular_abs_laplacian",
    "perivascular_features",
]


@dataclass(frozen=True)
class FrangiParams:
    """Frangi filter settings.

    ``c`` is expressed in [0, 1] intensity units; 15/255 corresponds to the
    customary c = 15 on 8-bit data.
    """

    scales: tuple = (1.0, 2.0, 4.0, 8.0)
    beta: float = 0.5
    c: float = 15.0 / 255.0
    dark_vessels: bool = True

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        if not scales:
            raise ValueError("Frangi needs at least one scale")
        if any(s <= 0 for s in scales):
            raise ValueError("Frangi scales must be positive")
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValueError("Frangi scales must be strictly ascending")
        if self.beta <= 0 or self.c <= 0:
            raise ValueError("beta and c must be positive")
        object.__setattr__(self, "scales", scales)


def hessian_eigenvalues(img: np.ndarray, sigma: float) -> tuple:
    """Eigenvalues of the sigma**2-normalised Hessian, ordered ``|l1| <= |l2|``.

    Second derivatives are central differences of the Gaussian-smoothed
    image. Truncated Gaussian second-derivative kernels do not sum to zero,
    which would leak absolute brightness into the response.
    """
    img = np.asarray(img, dtype=np.float64)
    s2 = sigma * sigma
    smoothed = ndimage.gaussian_filter(img, sigma, mode="nearest")
    dr, dc = np.gradient(smoothed)
    hrr, hrc = np.gradient(dr)
    hcc = np.gradient(dc, axis=1)
    hrr, hcc, hrc = s2 * hrr, s2 * hcc, s2 * hrc
    half_trace = 0.5 * (hrr + hcc)
    disc = np.sqrt(0.25 * (hrr - hcc) ** 2 + hrc**2)
    a = half_trace + disc
    b = half_trace - disc
    swap = np.abs(a) < np.abs(b)
    l1 = np.where(swap, a, b)
    l2 = np.where(swap, b, a)
    return l1, l2


def _frangi_single(img: np.ndarray, sigma: float, params: FrangiParams) -> np.ndarray:
    l1, l2 = hessian_eigenvalues(img, sigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        rb = np.where(l2 != 0, l1 / l2, 0.0)
    s2 = l1**2 + l2**2
    v = np.exp(-(rb**2) / (2 * params.beta**2)) * (1.0 - np.exp(-s2 / (2 * params.c**2)))
    wrong_sign = l2 <= 0 if params.dark_vessels else l2 >= 0
    v[wrong_sign] = 0.0
    return v


def frangi(img: np.ndarray, params: FrangiParams = FrangiParams(), mask=None, downscale: int = 1) -> np.ndarray:
    """Multiscale Frangi vesselness map in [0, 1].

    The per-scale responses are combined by pixelwise maximum, zeroed outside
    ``mask`` and divided by their in-mask maximum. ``downscale > 1`` runs the
    filter on a block-averaged copy (scales shrink accordingly) and
    upsamples the result bilinearly.
    """
    img = np.asarray(img, dtype=np.float64)
    if mask is None:
        mask = np.ones(img.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != img.shape:
        raise ValueError("mask and image shapes differ")

    work = img
    if downscale > 1:
        work = ndimage.zoom(img, 1.0 / downscale, order=1, mode="nearest", grid_mode=True)
    response = np.zeros(work.shape)
    for sigma in params.scales:
        s = sigma / downscale if downscale > 1 else sigma
        np.maximum(response, _frangi_single(work, s, params), out=response)
    if downscale > 1:
        zoom = (img.shape[0] / work.shape[0], img.shape[1] / work.shape[1])
        response = ndimage.zoom(response, zoom, order=1, mode="nearest", grid_mode=True)
        response = np.clip(response[: img.shape[0], : img.shape[1]], 0.0, None)

    response[~mask] = 0.0
    peak = response.max()
    if peak > 0:
        response /= peak
    return response


def structure_tensor(field: np.ndarray, sigma: float = 1.0) -> tuple:
    """Gaussian-smoothed gradient outer products ``(A_xx, A_xy, A_yy)``.

    Derivatives are Sobel responses; x runs along columns, y along rows.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    field = np.asarray(field, dtype=np.float64)
    fx, fy = sobel_components(field)

    def smooth(a):
        # average both axis orders so transposing the input transposes the output exactly
        rows_first = ndimage.gaussian_filter1d(ndimage.gaussian_filter1d(a, sigma, 0, mode="nearest"), sigma, 1, mode="nearest")
        cols_first = ndimage.gaussian_filter1d(ndimage.gaussian_filter1d(a, sigma, 1, mode="nearest"), sigma, 0, mode="nearest")
        return 0.5 * (rows_first + cols_first)

    return smooth(fx * fx), smooth(fx * fy), smooth(fy * fy)


def perivascular_mask(vmap: np.ndarray, sigma: float = 1.0, variant: str = "literal") -> np.ndarray:
    """Perivascular weighting map from the structure tensor of a vesselness map.

    ``literal`` uses the off-diagonal term twice plus ``A_yy``:
    ``sqrt(2 A_xy**2 + A_yy**2)``. ``frobenius`` uses the full tensor norm
    ``sqrt(A_xx**2 + 2 A_xy**2 + A_yy**2)``.
    """
    axx, axy, ayy = structure_tensor(vmap, sigma)
    if variant == "literal":
        return np.sqrt(2.0 * axy**2 + ayy**2)
    if variant == "frobenius":
        return np.sqrt(axx**2 + 2.0 * axy**2 + ayy**2)
    raise ValueError(f"unknown perivascular mask variant {variant!r}")


def _weighted_mean(values: np.ndarray, weights: np.ndarray, normalise: str) -> float:
    if values.shape != weights.shape:
        raise ValueError(f"mask shape {weights.shape} does not match image shape {values.shape}")
    total = float(np.sum(weights * values))
    if normalise == "pixels":
        return total / values.size
    if normalise == "weights":
        w = float(np.sum(weights))
        return total / w if w > 0 else 0.0
    raise ValueError(f"unknown normalisation {normalise!r}")


def perivascular_tenengrad(img: np.ndarray, pmask: np.ndarray, normalise: str = "pixels", magnitude=None) -> float:
    """Mean of the mask-weighted squared Sobel magnitude."""
    g = sobel_magnitude(img) if magnitude is None else magnitude
    return _weighted_mean(g * g, np.asarray(pmask, dtype=np.float64), normalise)


def perivascular_abs_laplacian(img: np.ndarray, pmask: np.ndarray, normalise: str = "pixels", lap=None) -> float:
    """Mean of the mask-weighted absolute Laplacian."""
    lap = laplacian(img) if lap is None else lap
    return _weighted_mean(np.abs(lap), np.asarray(pmask, dtype=np.float64), normalise)


def perivascular_features(
    img: np.ndarray,
    fundus: np.ndarray,
    params: FrangiParams = FrangiParams(),
    variant: str = "literal",
    normalise: str = "pixels",
    downscale: int = 1,
    magnitude=None,
    lap=None,
) -> dict:
    vmap = frangi(img, params, fundus, downscale=downscale)
    pmask = perivascular_mask(vmap, 1.0, variant)
    return {
        "perivascular_tenengrad": perivascular_tenengrad(img, pmask, normalise, magnitude),
        "perivascular_abs_laplacian": perivascular_abs_laplacian(img, pmask, normalise, lap),
    }
