"""
Statistical indicators on a synthetic fundus image
==================================================

Energy, entropy and the entropy focus criterion respond to blur in
opposite directions: energy drops a little, entropy-type measures rise as
the intensity spreads across more pixels.
"""

# %% a phantom and its blurred twin
import numpy as np

from fundusqa import fundus_mask, to_grayscale
from fundusqa.stats import efc, mean_pixel_energy, nefc, stat_features
from fundusqa.synthetic import fundus_phantom, gaussian_blur

rgb = fundus_phantom(192, seed=3)
blurred = gaussian_blur(rgb, 3.0)

# %% whole-image metrics
for name, img in [("sharp", rgb), ("blurred", blurred)]:
    f = stat_features(img, to_grayscale(img))
    print(name.ljust(8), "  ".join(f"{k}={v:.5g}" for k, v in f.items()))

# %% EFC only sees relative intensities, so scaling the image changes nothing
gray = to_grayscale(rgb)
print("efc(gray)      ", efc(gray))
print("efc(0.5 * gray)", efc(0.5 * gray))

# %% a single bright pixel holds all the energy: EFC is zero
spike = np.zeros((32, 32))
spike[10, 20] = 1.0
print("efc(spike) =", efc(spike), " nefc(spike) =", nefc(spike))

# %% restricting to the illuminated disc
mask = fundus_mask(gray)
print("disc covers", f"{mask.mean():.1%}", "of the frame")
# the dark surround dilutes per-pixel averages
print("mean pixel energy, whole frame:", mean_pixel_energy(gray), " inside disc:", mean_pixel_energy(gray[mask]))
