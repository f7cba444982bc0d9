"""Regenerate the bundled spectral library, label map and scene config.

The four signatures are synthetic analogues of common reflectance shapes
(clay, sulfate, carbonate, green vegetation) built from a smooth continuum
plus Gaussian absorption bands on a 224-band 0.4-2.5 um grid. The label map
is the argmax of four smoothed random fields, giving blob-shaped regions.

    python tools/make_bundled_data.py
"""

import json
import os

import numpy as np
from scipy import ndimage

from graphunmix.spectral_data import SpectralLibrary, save_label_map, save_spectral_library

DATA = os.path.join(os.path.dirname(__file__), os.pardir, "src", "graphunmix", "data")


def absorb(wl, center, width, depth):
    return 1.0 - depth * np.exp(-0.5 * ((wl - center) / width) ** 2)


def make_library():
    wl = np.linspace(0.4, 2.5, 224)
    clay = (0.55 + 0.25 * np.tanh((wl - 0.6) / 0.25)) * absorb(wl, 1.41, 0.03, 0.35) \
        * absorb(wl, 1.91, 0.04, 0.3) * absorb(wl, 2.17, 0.03, 0.45)
    sulfate = (0.35 + 0.2 * wl) * absorb(wl, 0.9, 0.12, 0.25) * absorb(wl, 1.76, 0.04, 0.4) \
        * absorb(wl, 2.32, 0.05, 0.3)
    carbonate = (0.7 - 0.05 * wl) * absorb(wl, 2.34, 0.04, 0.55) * absorb(wl, 1.99, 0.05, 0.2) \
        * absorb(wl, 1.1, 0.3, 0.15)
    veg = 0.05 + 0.04 * np.exp(-0.5 * ((wl - 0.55) / 0.03) ** 2) \
        + 0.45 / (1 + np.exp(-(wl - 0.72) / 0.015)) * np.exp(-0.6 * (wl - 0.8).clip(0))
    veg = veg * absorb(wl, 1.45, 0.08, 0.55) * absorb(wl, 1.94, 0.1, 0.7)
    names = ("clay_like", "sulfate_like", "carbonate_like", "vegetation_like")
    refl = np.clip(np.stack([clay, sulfate, carbonate, veg]), 0.0, 1.0)
    return SpectralLibrary(np.round(wl, 6), names, np.round(refl, 6))


def make_labels(size=90, classes=4, seed=7, smooth=6.0):
    rng = np.random.default_rng(seed)
    fields = [ndimage.gaussian_filter(rng.standard_normal((size, size)), smooth, mode="reflect")
              for _ in range(classes)]
    return np.argmax(np.stack(fields), axis=0)


def main():
    os.makedirs(DATA, exist_ok=True)
    lib = make_library()
    labels = make_labels()
    save_spectral_library(os.path.join(DATA, "library.csv"), lib)
    save_label_map(os.path.join(DATA, "labels.csv"), labels)
    config = {
        "scale_factor": 3,
        "filter_sigma": 0.5,
        "snr_db": 30.0,
        "seed": 1,
        "material_names": list(lib.names),
        "label_map_path": "labels.csv",
    }
    with open(os.path.join(DATA, "scene.json"), "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2)
        fh.write("\n")
    print("class counts:", np.bincount(labels.ravel()))


if __name__ == "__main__":
    main()
