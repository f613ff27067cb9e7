"""
Tenengrad and Laplacian focus measures
======================================

Every gradient measure falls as the blur grows. The thresholded Tenengrad
keeps only the strongest edges (top quartile of the Sobel magnitude).
"""

# %%
import numpy as np

from fundusqa import to_grayscale
from fundusqa.gradients import grad_features, laplacian, sobel_magnitude
from fundusqa.synthetic import fundus_phantom, gaussian_blur

gray = to_grayscale(fundus_phantom(192, seed=5))

# %% a blur sweep
sigmas = [0, 1, 2, 3, 4]
rows = [grad_features(gaussian_blur(gray, s) if s else gray) for s in sigmas]
print("sigma " + " ".join(f"{k:>22}" for k in rows[0]))
for s, r in zip(sigmas, rows):
    print(f"{s:5d} " + " ".join(f"{v:22.6g}" for v in r.values()))

# %% the Sobel response of a vertical edge is 4 on the two columns that straddle it
step = np.zeros((6, 8))
step[:, 4:] = 1.0
print(sobel_magnitude(step)[2])

# %% a unit impulse reproduces the Laplacian kernel
impulse = np.zeros((5, 5))
impulse[2, 2] = 1.0
print(np.round(laplacian(impulse) * 6, 12))
