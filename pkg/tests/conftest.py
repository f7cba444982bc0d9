import os

import numpy as np
import pytest

from graphunmix.spectral_data import SpectralLibrary, save_label_map, save_spectral_library

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_library(rng, n_materials=4, n_bands=50, names=None):
    wl = np.linspace(0.4, 2.5, n_bands)
    refl = rng.uniform(0.05, 0.95, size=(n_materials, n_bands))
    names = names or tuple(f"m{i}" for i in range(n_materials))
    return SpectralLibrary(wl, names, refl)


def random_label_map(rng, rows, cols, n_classes):
    """Random labels guaranteed to use every class."""
    while True:
        labels = rng.integers(0, n_classes, size=(rows, cols))
        if np.unique(labels).size == n_classes:
            return labels


@pytest.fixture
def scene_files(tmp_path, rng):
    """Small library + label map + config on disk; returns the config path."""
    lib = random_library(rng, 3, 30)
    labels = np.zeros((12, 12), dtype=int)
    labels[:, 4:8] = 1
    labels[:, 8:] = 2
    labels[5:7, :] = 1
    save_spectral_library(tmp_path / "lib.csv", lib)
    save_label_map(tmp_path / "labels.csv", labels)
    cfg = {
        "scale_factor": 3,
        "filter_sigma": 0.5,
        "snr_db": 30.0,
        "seed": 3,
        "material_names": list(lib.names),
        "label_map_path": "labels.csv",
    }
    import json

    with open(tmp_path / "scene.json", "w") as fh:
        json.dump(cfg, fh)
    return os.fspath(tmp_path / "scene.json"), os.fspath(tmp_path / "lib.csv")
