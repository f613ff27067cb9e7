"""Image loading, BT.709 grayscale conversion, fundus masking and convolution.

Images are plain numpy arrays of float64 in [0, 1]:

* RGB images have shape ``(height, width, 3)``
* grayscale images have shape ``(height, width)``
* fundus masks are boolean arrays with the grayscale shape
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

__all__ = [
    "BT709",
    "ImageError",
    "DegenerateMaskError",
    "load_image",
    "to_grayscale",
    "fundus_mask",
    "convolve2d",
    "save_debug_png",
]

# ITU-R BT.709 luma coefficients (R, G, B)
BT709 = np.array([0.2125, 0.7154, 0.0721])

_MODE_MAX = {
    "1": 1.0,
    "L": 255.0,
    "RGB": 255.0,
    "I;16": 65535.0,
    "I;16B": 65535.0,
    "I;16L": 65535.0,
    "I": 65535.0,
}


class ImageError(ValueError):
    """Raised for unreadable, unsupported or malformed images."""


class DegenerateMaskError(ImageError):
    """Raised when a fundus mask contains no foreground pixel."""


def load_image(path) -> np.ndarray:
    """Read a JPEG/PNG file into an ``(H, W, 3)`` float array in [0, 1].

    8-bit data is divided by 255 and 16-bit data by 65535. Single-channel
    images are replicated into three identical planes; alpha is dropped.
    """
    path = Path(path)
    if not path.is_file():
        raise ImageError(f"no such file: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("P", "RGBA", "CMYK", "YCbCr", "LAB", "HSV"):
                im = im.convert("RGB")
                mode = "RGB"
            elif mode == "LA":
                im = im.convert("L")
                mode = "L"
            if mode not in _MODE_MAX:
                raise ImageError(f"unsupported image mode {mode!r} in {path}")
            data = np.asarray(im).astype(np.float64)
    except ImageError:
        raise
    except Exception as exc:  # PIL raises a zoo of exception types
        raise ImageError(f"cannot decode {path}: {exc}") from exc

    if data.ndim < 2 or data.shape[0] == 0 or data.shape[1] == 0:
        raise ImageError(f"zero-dimension image: {path}")
    data = data / _MODE_MAX[mode]
    if data.ndim == 2:
        data = np.repeat(data[:, :, None], 3, axis=2)
    return np.clip(data, 0.0, 1.0)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.709 luminance of an ``(H, W, 3)`` image."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageError(f"expected an (H, W, 3) image, got shape {img.shape}")
    return img @ BT709


def fundus_mask(img: np.ndarray, threshold: float = 0.05) -> np.ndarray:
    """Boolean mask of the illuminated fundus disc.

    A pixel is inside when the 5x5 box mean of the image around it exceeds
    ``threshold``; the box mean keeps isolated bright JPEG noise in the dark
    surround from leaking into the mask.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    img = np.asarray(img, dtype=np.float64)
    blurred = ndimage.uniform_filter(img, size=5, mode="nearest")
    mask = blurred > threshold
    if not mask.any():
        raise DegenerateMaskError("fundus mask is empty (image too dark for threshold)")
    return mask


def convolve2d(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Same-size 2D convolution with edge-replicated borders.

    This is a true convolution (the kernel is flipped), so a Sobel x-kernel
    ``[[-1, 0, 1], ...]`` responds negatively to a rising left-to-right edge.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
        raise ValueError(f"kernel must be 2D with odd dimensions, got {kernel.shape}")
    img = np.asarray(img, dtype=np.float64)
    return ndimage.convolve(img, kernel, mode="nearest")


def save_debug_png(matrix: np.ndarray, path) -> None:
    """Write a real matrix as a 16-bit grayscale PNG, min-max stretched."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.dtype == bool:
        m = m.astype(np.float64)
    lo, hi = float(np.min(m)), float(np.max(m))
    scaled = np.zeros_like(m) if hi <= lo else (m - lo) / (hi - lo)
    out = np.round(scaled * 65535.0).astype(np.uint16)
    Image.fromarray(out).save(str(path))
