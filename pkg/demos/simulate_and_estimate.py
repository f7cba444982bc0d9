"""
Simulating a mixed-pixel scene and guessing how many materials it holds
=======================================================================

The bundled label map paints four synthetic materials on a 90x90 grid.
Blurring and 3x3 block averaging produce mixed pixels, then Gaussian noise
is added at 30 dB.
"""

import json
import os

import numpy as np

from graphunmix.cli import BUNDLED_CONFIG, BUNDLED_LIBRARY
from graphunmix.scene import SceneConfig, simulate
from graphunmix.spectral_data import load_label_map, load_spectral_library
from graphunmix.subspace import estimate_endmember_count, pca_spectrum

lib = load_spectral_library(BUNDLED_LIBRARY)
labels = load_label_map(os.path.join(os.path.dirname(BUNDLED_CONFIG), "labels.csv"))
with open(BUNDLED_CONFIG) as fh:
    cfg = json.load(fh)
print("materials:", cfg["material_names"])
print("label map", labels.shape, "class counts", np.bincount(labels.ravel()))

scene = simulate(SceneConfig(3, 0.5, 30.0, seed=0, material_names=tuple(cfg["material_names"])), lib, labels)
print("observed (bands, pixels):", scene.observed.shape)
print(f"realized SNR {scene.noise_stats.realized_snr_db:.3f} dB, "
      f"clamped fraction {scene.noise_stats.clamped_fraction:.1e}")

# how mixed are the pixels?  share of pixels whose largest abundance is below 0.9
dominant = scene.true_abundances.max(axis=1)
print(f"mixed pixels: {np.mean(dominant < 0.9):.1%}")

# the leading eigenvalues fall off sharply after P - 1 centered components,
# but at 30 dB the flat noise floor still holds close to 1% of the variance
spec = pca_spectrum(scene.observed, centered=True)
print("explained variance, first 6:", np.round(spec.explained[:6], 5))
for thr in (0.99, 0.995, 0.999):
    print(f"threshold {thr}: P estimate {estimate_endmember_count(scene.observed, thr)}")

# without noise the estimate is exact
clean = simulate(SceneConfig(3, 0.5, float("inf"), 0, tuple(cfg["material_names"])), lib, labels)
print("noiseless estimate:", estimate_endmember_count(clean.observed))
