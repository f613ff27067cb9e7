"""Procedural fundus-like phantoms and texture crops for blur experiments."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

__all__ = [
    "gaussian_blur",
    "fundus_phantom",
    "texture_crop",
    "phantom_pairs",
    "blur_corpus",
]

_TEXTURES = ("camera", "brick", "grass", "gravel", "moon", "coins", "text", "page")


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur of a grayscale or RGB image (channels blurred independently)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return np.stack([ndimage.gaussian_filter(img[..., c], sigma, mode="nearest") for c in range(img.shape[2])], axis=2)
    return ndimage.gaussian_filter(img, sigma, mode="nearest")


def _walk(pos, heading, n_steps, shape, rng, wiggle):
    pts = [pos.copy()]
    curvature = 0.0
    for _ in range(n_steps):
        curvature = 0.9 * curvature + rng.normal(0, wiggle)
        heading += curvature
        pos = pos + np.array([np.sin(heading), np.cos(heading)])
        if not (0 <= pos[0] < shape[0] and 0 <= pos[1] < shape[1]):
            break
        pts.append(pos.copy())
    return np.array(pts)


def _vessel_tree(shape, start, rng, n_vessels: int) -> list:
    """Random smooth centrelines radiating from ``start``: list of (points, width)."""
    span = max(shape)
    trees = []
    for _ in range(n_vessels):
        width = rng.uniform(1.5, 5.0)
        pos = np.array(start, dtype=float) + rng.normal(0, 3, 2)
        trunk = _walk(pos, rng.uniform(0, 2 * np.pi), int(rng.uniform(0.5, 1.1) * span), shape, rng, 0.008)
        trees.append((trunk, width))
        for _ in range(int(rng.integers(0, 3))):
            if len(trunk) < 10:
                break
            i = int(rng.integers(len(trunk) // 4, len(trunk)))
            d = trunk[min(i + 1, len(trunk) - 1)] - trunk[i - 1]
            heading = np.arctan2(d[0], d[1]) + rng.choice([-1, 1]) * rng.uniform(0.4, 1.0)
            branch = _walk(trunk[i], heading, int(rng.uniform(0.15, 0.4) * span), shape, rng, 0.015)
            trees.append((branch, max(0.6 * width, 1.2)))
    return trees


def _draw_vessels(shape, trees) -> np.ndarray:
    """Anti-aliased vessel occupancy in [0, 1] (max over vessels)."""
    occ = np.zeros(shape)
    for pts, width in trees:
        if len(pts) < 2:
            continue
        line = np.zeros(shape, dtype=bool)
        # dense sampling so the rasterised centreline is connected
        seg = np.concatenate([np.linspace(a, b, 4, endpoint=False) for a, b in zip(pts[:-1], pts[1:])])
        idx = np.round(seg).astype(int)
        ok = (idx[:, 0] >= 0) & (idx[:, 0] < shape[0]) & (idx[:, 1] >= 0) & (idx[:, 1] < shape[1])
        line[idx[ok, 0], idx[ok, 1]] = True
        dist = ndimage.distance_transform_edt(~line)
        occ = np.maximum(occ, np.clip(width / 2 + 0.5 - dist, 0.0, 1.0))
    return occ


def fundus_phantom(size: int = 256, seed=None, n_vessels=None) -> np.ndarray:
    """Synthetic colour fundus image, shape ``(size, size, 3)``, values in [0, 1].

    A bright disc on a black field with vignetting, low-frequency mottling,
    fine choroidal texture, an optic disc, a macula and a randomly branching
    dark vessel tree.
    """
    rng = np.random.default_rng(seed)
    h = w = int(size)
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    cy, cx = (h - 1) / 2 + rng.normal(0, 0.01 * h), (w - 1) / 2 + rng.normal(0, 0.01 * w)
    radius = rng.uniform(0.43, 0.48) * min(h, w)
    r = np.hypot(yy - cy, xx - cx)
    disc = np.clip(radius - r + 0.5, 0.0, 1.0)

    base = np.array([rng.uniform(0.65, 0.85), rng.uniform(0.3, 0.45), rng.uniform(0.12, 0.22)])
    vignette = 1.0 - rng.uniform(0.2, 0.4) * (r / radius) ** 2
    mottle = ndimage.gaussian_filter(rng.normal(0, 1, (h, w)), h / 16, mode="wrap")
    mottle /= mottle.std() + 1e-12
    fine = ndimage.gaussian_filter(rng.normal(0, 1, (h, w)), 1.2, mode="wrap")
    fine /= fine.std() + 1e-12
    lum = vignette * (1.0 + 0.06 * mottle + rng.uniform(0.015, 0.04) * fine)

    angle = rng.uniform(0, 2 * np.pi)
    od = (cy + 0.5 * radius * np.sin(angle), cx + 0.5 * radius * np.cos(angle))
    od_r = rng.uniform(0.06, 0.09) * min(h, w)
    od_mask = np.clip(od_r - np.hypot(yy - od[0], xx - od[1]) + 1.0, 0.0, 1.0)
    od_mask = ndimage.gaussian_filter(od_mask, 1.0)
    mac = (cy - 0.5 * radius * np.sin(angle) * 0.8, cx - 0.5 * radius * np.cos(angle) * 0.8)
    macula = np.exp(-(np.hypot(yy - mac[0], xx - mac[1]) ** 2) / (2 * (0.06 * h) ** 2))

    if n_vessels is None:
        n_vessels = int(rng.integers(6, 11))
    occ = _draw_vessels((h, w), _vessel_tree((h, w), od, rng, n_vessels))
    depth = rng.uniform(0.35, 0.6)

    img = base[None, None, :] * lum[..., None]
    img = img * (1.0 - 0.35 * macula[..., None])
    img = img + od_mask[..., None] * (np.array([0.95, 0.85, 0.6]) - img) * 0.85
    img = img * (1.0 - depth * occ[..., None] * np.array([0.85, 1.0, 1.0]))
    img = img * disc[..., None]
    return np.clip(img, 0.0, 1.0)


def texture_crop(name: str, size: int = 256, seed=None) -> np.ndarray:
    """Random ``size`` x ``size`` RGB crop of a bundled scikit-image sample."""
    from skimage import data
    from skimage.color import rgb2gray

    rng = np.random.default_rng(seed)
    src = getattr(data, name)()
    src = src.astype(np.float64)
    src = src / (65535.0 if src.max() > 255 else 255.0)
    if src.ndim == 3:
        src = rgb2gray(src[..., :3])
    if min(src.shape) < size:
        src = ndimage.zoom(src, size / min(src.shape) + 1e-6, order=3)
    r0 = int(rng.integers(0, src.shape[0] - size + 1))
    c0 = int(rng.integers(0, src.shape[1] - size + 1))
    crop = np.clip(src[r0 : r0 + size, c0 : c0 + size], 0.0, 1.0)
    # keep the fundus mask non-degenerate on very dark crops
    crop = 0.08 + 0.92 * crop
    return np.repeat(crop[..., None], 3, axis=2)


def phantom_pairs(n: int, size: int = 256, sigma_range=(2.0, 4.0), seed: int = 0, noise: float = 0.0) -> list:
    """``n`` (sharp, blurred, sigma) phantom triples.

    ``noise`` adds the same-level Gaussian sensor noise to both members
    after blurring, independently drawn.
    """
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        sharp = fundus_phantom(size, seed=rng.integers(2**32))
        sigma = float(rng.uniform(*sigma_range))
        blurred = gaussian_blur(sharp, sigma)
        if noise > 0:
            sharp = np.clip(sharp + rng.normal(0, noise, sharp.shape), 0.0, 1.0)
            blurred = np.clip(blurred + rng.normal(0, noise, blurred.shape), 0.0, 1.0)
        pairs.append((sharp, blurred, sigma))
    return pairs


def blur_corpus(n: int = 50, size: int = 256, seed: int = 0, texture_fraction: float = 0.3) -> list:
    """Mixed corpus of phantoms and natural texture crops (RGB, [0, 1])."""
    rng = np.random.default_rng(seed)
    n_tex = int(round(n * texture_fraction))
    images = [fundus_phantom(size, seed=rng.integers(2**32)) for _ in range(n - n_tex)]
    for i in range(n_tex):
        images.append(texture_crop(_TEXTURES[i % len(_TEXTURES)], size, seed=rng.integers(2**32)))
    return images
