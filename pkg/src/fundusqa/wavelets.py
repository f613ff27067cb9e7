"""One-level 2D discrete wavelet transforms and wavelet sharpness features.

Four filter banks are provided: Daubechies 7 and 8 (7 and 8 vanishing
moments, 14 and 16 taps), biorthogonal 1.5 and Haar. Tap conventions follow
the usual ``dec_lo/dec_hi/rec_lo/rec_hi`` layout, so transforms agree with
PyWavelets in its ``symmetric`` and ``periodization`` modes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

__all__ = [
    "FAMILIES",
    "WaveletFamily",
    "WaveletDecomposition",
    "daubechies_lowpass",
    "get_family",
    "dwt2",
    "idwt2",
    "subband_mask",
    "wavelet_variances",
    "wavelet_sum_sq",
    "wavelet_features",
]

FAMILIES = ("daubechies7", "daubechies8", "biorthogonal1.5", "haar")

_ALIASES = {"db7": "daubechies7", "db8": "daubechies8", "bior1.5": "biorthogonal1.5"}

MODES = ("symmetric", "periodization")


@dataclass(frozen=True)
class WaveletFamily:
    name: str
    dec_lo: np.ndarray
    dec_hi: np.ndarray
    rec_lo: np.ndarray
    rec_hi: np.ndarray
    orthogonal: bool

    @property
    def length(self) -> int:
        return len(self.dec_lo)


@dataclass(frozen=True)
class WaveletDecomposition:
    approximation: np.ndarray
    horizontal: np.ndarray
    vertical: np.ndarray
    diagonal: np.ndarray
    family: str
    mode: str
    shape: tuple

    @property
    def details(self) -> tuple:
        return (self.horizontal, self.vertical, self.diagonal)


def daubechies_lowpass(n_moments: int) -> np.ndarray:
    """Extremal-phase Daubechies scaling filter with ``n_moments`` vanishing moments.

    Built by spectral factorisation: the halfband polynomial
    ``sum_k C(N-1+k, k) y**k`` with ``y = (2 - z - 1/z) / 4`` is factored and
    its roots inside the unit circle kept, then multiplied by ``(1 + z)**N``.
    Returned in reconstruction order (``h[0]`` largest-magnitude lead tap),
    normalised to sum to sqrt(2).
    """
    n = int(n_moments)
    if n < 1:
        raise ValueError("need at least one vanishing moment")
    if n == 1:
        return np.array([1.0, 1.0]) / np.sqrt(2.0)
    # P(y) as a Laurent polynomial in z; y = -(z - 2 + 1/z)/4.
    # Multiply through by z**(n-1) to get an ordinary polynomial of degree 2(n-1).
    y_poly = np.array([-0.25, 0.5, -0.25])  # z*y as coefficients of z^2, z^1, z^0
    p = np.zeros(1)
    for k in range(n):
        term = np.array([float(comb(n - 1 + k, k))])
        for _ in range(k):
            term = np.convolve(term, y_poly)
        # pad term (degree 2k) to degree 2(n-1), centred
        pad = (n - 1) - k
        term = np.concatenate([np.zeros(pad), term, np.zeros(pad)])
        p = term if p.size == 1 else p + term
    roots = np.roots(p)
    inside = roots[np.abs(roots) < 1.0]
    q = np.real(np.poly(inside))
    h = q
    for _ in range(n):
        h = np.convolve(h, [1.0, 1.0])
    h = h / h.sum() * np.sqrt(2.0)
    # np.poly gives highest power first; orient so the causal filter matches
    # the minimum-phase (front-loaded) convention
    if abs(h[0]) < abs(h[-1]):
        h = h[::-1]
    return h


def _bior15_dec_lo() -> np.ndarray:
    taps = np.array([3, -3, -22, 22, 128, 128, 22, -22, -3, 3], dtype=np.float64)
    return taps / 256.0 * np.sqrt(2.0)


def _bank(name: str, dec_lo: np.ndarray, rec_lo: np.ndarray, orthogonal: bool) -> WaveletFamily:
    k = np.arange(len(dec_lo))
    rec_hi = (-1.0) ** k * dec_lo
    dec_hi = (-1.0) ** (k + 1) * rec_lo
    for arr in (dec_lo, dec_hi, rec_lo, rec_hi):
        arr.setflags(write=False)
    return WaveletFamily(name, dec_lo, dec_hi, rec_lo, rec_hi, orthogonal)


@lru_cache(maxsize=None)
def get_family(name: str) -> WaveletFamily:
    """Look up a filter bank by name (``daubechies7``, ``db7``, ``haar``, ...)."""
    key = _ALIASES.get(name, name)
    if key == "haar":
        h = daubechies_lowpass(1)
        return _bank(key, h[::-1].copy(), h.copy(), True)
    if key in ("daubechies7", "daubechies8"):
        h = daubechies_lowpass(int(key[-1]))
        return _bank(key, h[::-1].copy(), h.copy(), True)
    if key == "biorthogonal1.5":
        rec_lo = np.zeros(10)
        rec_lo[4:6] = 1.0 / np.sqrt(2.0)
        return _bank(key, _bior15_dec_lo(), rec_lo, False)
    raise ValueError(f"unknown wavelet family {name!r}; expected one of {FAMILIES}")


def _reflect(idx: np.ndarray, n: int) -> np.ndarray:
    """Half-sample symmetric reflection of integer indices into [0, n)."""
    period = 2 * n
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - 1 - idx, idx)


def _analysis_index(n: int, L: int, mode: str) -> np.ndarray:
    """(n_out, L) source indices: ``out[k] = sum_j f[j] * x[index[k, j]]``."""
    j = np.arange(L)
    if mode == "symmetric":
        k = np.arange((n + L - 1) // 2)
        return _reflect(2 * k[:, None] + 1 - j[None, :], n)
    n_even = n + (n % 2)
    k = np.arange(n_even // 2)
    idx = np.mod(2 * k[:, None] + L // 2 + L % 2 - j[None, :], n_even)
    # odd lengths are padded by repeating the last sample
    return np.minimum(idx, n - 1)


def _filter_down(x: np.ndarray, f: np.ndarray, axis: int, mode: str) -> np.ndarray:
    """Filter ``x`` with ``f`` along ``axis`` and decimate by two."""
    index = _analysis_index(x.shape[axis], len(f), mode)
    out = None
    for j, tap in enumerate(f):
        if tap == 0.0:
            continue
        term = tap * np.take(x, index[:, j], axis=axis)
        out = term if out is None else out + term
    if out is None:
        shape = list(x.shape)
        shape[axis] = index.shape[0]
        out = np.zeros(shape)
    return out


def _upsample_filter(c: np.ndarray, f: np.ndarray, axis: int, mode: str, n_out: int) -> np.ndarray:
    """Upsample ``c`` by two along ``axis`` and filter with the synthesis taps ``f``."""
    L = len(f)
    m = c.shape[axis]
    shape = list(c.shape)
    shape[axis] = n_out
    out = np.zeros(shape)
    i = np.arange(n_out)
    for j, tap in enumerate(f):
        if tap == 0.0:
            continue
        if mode == "symmetric":
            num = i + L - 2 - j
            valid = (num % 2 == 0) & (num >= 0) & (num < 2 * m)
            k = num[valid] // 2
        else:
            # transpose of the analysis map (2k + shift - j) mod n
            shift = L // 2 + L % 2
            num = np.mod(i + (L - 1 - shift) - j, 2 * m)
            valid = num % 2 == 0
            k = num[valid] // 2
        if not valid.any():
            continue
        sl = [slice(None)] * out.ndim
        sl[axis] = valid
        out[tuple(sl)] += tap * np.take(c, k, axis=axis)
    return out


def dwt2(img: np.ndarray, family="haar", mode: str = "symmetric") -> WaveletDecomposition:
    """Separable one-level 2D DWT.

    Rows are filtered first, then columns. Sub-bands are named after the
    detail orientation they capture: ``horizontal`` is lowpass along rows and
    highpass along columns (PyWavelets ``cH``), ``vertical`` the reverse
    (``cV``), ``diagonal`` highpass in both (``cD``). The default
    ``symmetric`` mode mirrors the signal at its borders (half-sample
    symmetry) and produces ``floor((N + L - 1) / 2)`` coefficients per axis;
    ``periodization`` wraps the signal and is orthonormal for orthogonal
    families.
    """
    fam = family if isinstance(family, WaveletFamily) else get_family(family)
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("dwt2 expects a 2D array")
    if mode == "symmetric" and min(img.shape) < fam.length:
        raise ValueError(
            f"image {img.shape} smaller than the {fam.name} filter ({fam.length} taps)"
        )
    lo = _filter_down(img, fam.dec_lo, 1, mode)
    hi = _filter_down(img, fam.dec_hi, 1, mode)
    ll = _filter_down(lo, fam.dec_lo, 0, mode)
    lh = _filter_down(lo, fam.dec_hi, 0, mode)
    hl = _filter_down(hi, fam.dec_lo, 0, mode)
    hh = _filter_down(hi, fam.dec_hi, 0, mode)
    return WaveletDecomposition(ll, lh, hl, hh, fam.name, mode, img.shape)


def idwt2(dec: WaveletDecomposition) -> np.ndarray:
    """Reconstruct the image a :func:`dwt2` call was made on."""
    fam = get_family(dec.family)
    rows, cols = dec.shape
    lo = _upsample_filter(dec.approximation, fam.rec_lo, 0, dec.mode, rows) + _upsample_filter(
        dec.horizontal, fam.rec_hi, 0, dec.mode, rows
    )
    hi = _upsample_filter(dec.vertical, fam.rec_lo, 0, dec.mode, rows) + _upsample_filter(
        dec.diagonal, fam.rec_hi, 0, dec.mode, rows
    )
    return _upsample_filter(lo, fam.rec_lo, 1, dec.mode, cols) + _upsample_filter(
        hi, fam.rec_hi, 1, dec.mode, cols
    )


def _footprint(n: int, L: int, mode: str) -> np.ndarray:
    """Boolean (n_out, n) matrix: input j feeds output k along one axis."""
    index = _analysis_index(n, L, mode)
    fp = np.zeros((index.shape[0], n), dtype=bool)
    fp[np.arange(index.shape[0])[:, None], index] = True
    return fp


def subband_mask(mask: np.ndarray, family="haar", mode: str = "symmetric") -> np.ndarray:
    """Project a pixel mask onto sub-band geometry.

    A coefficient is inside when any input pixel in its filter footprint
    (including mirrored border samples) is inside.
    """
    fam = family if isinstance(family, WaveletFamily) else get_family(family)
    mask = np.asarray(mask, dtype=bool)
    fr = _footprint(mask.shape[0], fam.length, mode).astype(np.float64)
    fc = _footprint(mask.shape[1], fam.length, mode).astype(np.float64)
    return (fr @ mask.astype(np.float64) @ fc.T) > 0


def _inside(dec: WaveletDecomposition, mask) -> np.ndarray:
    if mask is None:
        return np.ones(dec.horizontal.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape == dec.horizontal.shape:
        sub = mask
    elif mask.shape == tuple(dec.shape):
        sub = subband_mask(mask, dec.family, dec.mode)
    else:
        raise ValueError(f"mask shape {mask.shape} matches neither image nor sub-band")
    if not sub.any():
        raise ValueError("mask selects no wavelet coefficients")
    return sub


def wavelet_variances(dec: WaveletDecomposition, mask=None) -> tuple:
    """Population variance of the horizontal, vertical and diagonal details.

    ``mask`` may be given at image resolution (it is projected with
    :func:`subband_mask`) or already at sub-band resolution.
    """
    inside = _inside(dec, mask)
    return tuple(float(np.var(band[inside])) for band in dec.details)


def wavelet_sum_sq(dec: WaveletDecomposition, mask=None) -> float:
    """Sum over orientations of the root of the in-mask squared coefficients."""
    inside = _inside(dec, mask)
    return float(sum(np.sqrt(np.sum(band[inside] ** 2)) for band in dec.details))


def wavelet_features(img: np.ndarray, mask=None, families=FAMILIES, mode: str = "symmetric") -> dict:
    """All wavelet feature columns for one grayscale image."""
    out = {}
    for name in families:
        fam = get_family(name)
        dec = dwt2(img, fam, mode)
        inside = _inside(dec, mask)
        vh, vv, vd = wavelet_variances(dec, inside)
        tag = column_tag(fam.name)
        out[f"{tag}_var_horizontal"] = vh
        out[f"{tag}_var_vertical"] = vv
        out[f"{tag}_var_diagonal"] = vd
        out[f"{tag}_sum_sq"] = wavelet_sum_sq(dec, inside)
    return out


def column_tag(name: str) -> str:
    return {"daubechies7": "db7", "daubechies8": "db8", "biorthogonal1.5": "bior15", "haar": "haar"}[name]
