"""
One-level wavelet features
==========================

Four filter banks, variances of the three detail sub-bands and the summed
root energy, all restricted to the fundus disc.
"""

# %%
import numpy as np

from fundusqa import fundus_mask, to_grayscale
from fundusqa.synthetic import fundus_phantom, gaussian_blur
from fundusqa.wavelets import FAMILIES, dwt2, get_family, idwt2, wavelet_features

# %% the filter banks
for name in FAMILIES:
    fam = get_family(name)
    print(f"{name:16s} taps={fam.length:2d} sum(dec_lo)={fam.dec_lo.sum():.12f} orthogonal={fam.orthogonal}")

# %% perfect reconstruction
x = np.random.default_rng(0).random((40, 40))
for name in FAMILIES:
    print(name, "round-trip error", np.abs(idwt2(dwt2(x, name)) - x).max())

# %% sub-bands of a stripe pattern: vertical stripes only show in the vertical band
stripes = np.tile(np.arange(8) % 2, (8, 1)).astype(float)
dec = dwt2(stripes, "haar")
print("haar H/V/D energies:", [float((b**2).sum()) for b in dec.details])

# %% blur removes detail energy in every band
gray = to_grayscale(fundus_phantom(192, seed=2))
disc = fundus_mask(gray)
sharp, blurred = wavelet_features(gray, disc), wavelet_features(gaussian_blur(gray, 3.0), disc)
for k in sharp:
    print(f"{k:24s} {sharp[k]:12.6g} -> {blurred[k]:12.6g}")
