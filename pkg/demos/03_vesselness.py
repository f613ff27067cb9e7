"""
Frangi vesselness and the perivascular mask
===========================================

Vessel walls are guaranteed sharp edges in a focused fundus image, so the
gradient measures are re-weighted by a mask concentrated around vessels.
"""

# %%
import numpy as np

from fundusqa import fundus_mask, to_grayscale
from fundusqa.vesselness import FrangiParams, frangi, perivascular_features, perivascular_mask
from fundusqa.synthetic import fundus_phantom, gaussian_blur

gray = to_grayscale(fundus_phantom(192, seed=9))
disc = fundus_mask(gray)

# %% vesselness map: dark tubular structures light up
v = frangi(gray, FrangiParams(), disc)
print("vesselness range", v.min(), v.max(), " mean inside disc", v[disc].mean().round(4))
print("pixels above 0.2:", int((v > 0.2).sum()))

# %% the perivascular mask sits on the flanks of the vessel response
pm = perivascular_mask(v)
print("mask weight on strong-vessel pixels vs elsewhere:", pm[v > 0.2].mean().round(5), pm[v <= 0.2].mean().round(5))

# %% literal vs full-norm variants of the mask
full = perivascular_mask(v, variant="frobenius")
print("literal / frobenius total weight:", (pm.sum() / full.sum()).round(3))

# %% weighted sharpness: sharp vs blurred
for name, img in [("sharp", gray), ("blurred", gaussian_blur(gray, 3.0))]:
    print(name.ljust(8), perivascular_features(img, disc))

# %% downscaled vesselness is a speed option for full-resolution photographs
coarse = frangi(gray, FrangiParams(), disc, downscale=4)
print("correlation with full-resolution map:", np.corrcoef(v.ravel(), coarse.ravel())[0, 1].round(3))
