"""Synthetic mixed-pixel scenes with known ground truth.

A high-resolution label map is painted with library signatures, blurred with
a small Gaussian kernel, block-averaged by a factor ``k`` and finally
corrupted by white Gaussian noise at a prescribed SNR. Ground-truth
abundances are obtained by pushing the one-hot class indicators through the
same blur and block average, so the clean low-resolution data satisfy
``X = U @ V.T`` exactly.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .spectral_data import (
    SpectralLibrary,
    check_label_map,
    flatten,
    load_matrix,
    save_matrix,
)

CONFIG_KEYS = ("scale_factor", "filter_sigma", "snr_db", "seed", "material_names", "label_map_path")


class ConfigError(ValueError):
    """Invalid scene configuration; ``key`` names the offending field."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class SceneConfig:
    scale_factor: int = 3
    filter_sigma: float = 0.5
    snr_db: float = 30.0
    seed: int = 0
    material_names: tuple = ()
    label_map_path: str = ""

    def __post_init__(self):
        object.__setattr__(self, "material_names", tuple(self.material_names))
        if not isinstance(self.scale_factor, (int, np.integer)) or self.scale_factor < 1:
            raise ConfigError("scale_factor", "must be a positive integer")
        if not self.filter_sigma > 0:
            raise ConfigError("filter_sigma", "must be positive")
        if math.isnan(self.snr_db):
            raise ConfigError("snr_db", "must be a number (use null for no noise)")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError("seed", "must be a nonnegative integer")
        if len(self.material_names) < 2:
            raise ConfigError("material_names", "at least two materials are required")
        if len(set(self.material_names)) != len(self.material_names):
            raise ConfigError("material_names", "names must be unique")

    def to_json(self) -> dict:
        d = asdict(self)
        d["material_names"] = list(self.material_names)
        if math.isinf(self.snr_db):
            d["snr_db"] = None
        return d

    @classmethod
    def from_json(cls, doc: dict, base_dir=None) -> "SceneConfig":
        """Build a config from a parsed JSON document.

        ``snr_db`` may be ``null`` or ``"inf"`` to disable noise. A relative
        ``label_map_path`` is resolved against ``base_dir``.
        """
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        for key in CONFIG_KEYS:
            if key not in doc:
                raise ConfigError(key, "missing key")
        extra = sorted(set(doc) - set(CONFIG_KEYS))
        if extra:
            raise ConfigError(extra[0], "unknown key")
        snr = doc["snr_db"]
        if snr is None or (isinstance(snr, str) and snr.lower() in ("inf", "+inf", "infinity")):
            snr = math.inf
        elif not isinstance(snr, (int, float)) or isinstance(snr, bool):
            raise ConfigError("snr_db", "must be a number or null")
        names = doc["material_names"]
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise ConfigError("material_names", "must be a list of strings")
        path = doc["label_map_path"]
        if not isinstance(path, str) or not path:
            raise ConfigError("label_map_path", "must be a non-empty string")
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        sigma = doc["filter_sigma"]
        if not isinstance(sigma, (int, float)) or isinstance(sigma, bool):
            raise ConfigError("filter_sigma", "must be a number")
        for key in ("scale_factor", "seed"):
            if not isinstance(doc[key], int) or isinstance(doc[key], bool):
                raise ConfigError(key, "must be an integer")
        return cls(doc["scale_factor"], float(sigma), float(snr), doc["seed"], tuple(names), path)


@dataclass(frozen=True)
class NoiseStats:
    target_snr_db: float
    realized_snr_db: float
    clamped_fraction: float

    def to_json(self) -> dict:
        return {k: (None if math.isinf(v) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_json(cls, doc):
        return cls(*(math.inf if doc[k] is None else float(doc[k])
                     for k in ("target_snr_db", "realized_snr_db", "clamped_fraction")))


@dataclass(frozen=True)
class SimulatedScene:
    """Low-resolution observation plus the factors that generated it.

    ``observed`` is ``(bands, pixels)``, ``true_endmembers`` ``(bands, P)``,
    ``true_abundances`` ``(pixels, P)``; ``shape`` is the low-resolution
    ``(rows, cols)`` grid the pixel columns are laid out on.
    """

    observed: np.ndarray
    true_endmembers: np.ndarray
    true_abundances: np.ndarray
    config: SceneConfig
    noise_stats: NoiseStats
    shape: tuple

    @property
    def clean(self) -> np.ndarray:
        return self.true_endmembers @ self.true_abundances.T


def assign_signatures(labels, lib: SpectralLibrary, names) -> np.ndarray:
    """Paint every pixel with the signature of its class; returns a cube."""
    names = tuple(names)
    labels = check_label_map(labels)
    n_classes = int(labels.max()) + 1
    if n_classes != len(names):
        raise ValueError(f"label map has {n_classes} classes but {len(names)} material names were given")
    sigs = np.stack([lib.signature(n) for n in names])
    return sigs[labels]


def gaussian_kernel(k: int, sigma: float) -> np.ndarray:
    """Normalized ``k x k`` Gaussian weights centered on the middle tap."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be a positive odd integer, got {k}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    h = (k - 1) // 2
    off = np.arange(-h, h + 1, dtype=float)
    w = np.exp(-(off[:, None] ** 2 + off[None, :] ** 2) / (2.0 * sigma**2))
    return w / w.sum()


def filter_cube(cube, kernel) -> np.ndarray:
    """Correlate every band with ``kernel``; borders are mirrored (edge sample not repeated)."""
    cube = np.asarray(cube, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    if kernel.shape[0] > min(cube.shape[:2]) or kernel.shape[1] > min(cube.shape[:2]):
        raise ValueError(f"kernel {kernel.shape} larger than image {cube.shape[:2]}")
    if kernel.shape == (1, 1):
        return cube * kernel[0, 0]
    # scipy "mirror" is numpy "reflect": d c b | a b c d | c b a
    return ndimage.correlate(cube, kernel[:, :, None], mode="mirror")


def downsample(cube, k: int) -> np.ndarray:
    """Non-overlapping ``k x k`` block means; incomplete trailing blocks are dropped."""
    cube = np.asarray(cube, dtype=float)
    if k < 1:
        raise ValueError("downsampling factor must be >= 1")
    rows, cols, bands = cube.shape
    r, c = rows // k, cols // k
    if r == 0 or c == 0:
        raise ValueError(f"{rows}x{cols} image is smaller than one {k}x{k} block")
    blocks = cube[: r * k, : c * k].reshape(r, k, c, k, bands)
    return blocks.mean(axis=(1, 3))


def reference_abundances(labels, kernel, k: int, n_classes: int | None = None) -> np.ndarray:
    """Ground-truth abundances ``(pixels, classes)`` of the degraded image."""
    labels = check_label_map(labels, n_classes)
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    indicators = (labels[:, :, None] == np.arange(n_classes)).astype(float)
    low = downsample(filter_cube(indicators, kernel), k)
    return flatten(low).T.copy()


def add_noise_snr(X, snr_db: float, seed: int):
    """Add white Gaussian noise at a global SNR, then clamp negatives to zero.

    Returns the noisy matrix and a :class:`NoiseStats`. ``snr_db=inf``
    returns an unchanged copy.
    """
    X = np.asarray(X, dtype=float)
    power = float(np.sum(X**2))
    if power == 0:
        raise ValueError("cannot calibrate noise on an all-zero signal")
    if math.isinf(snr_db) and snr_db > 0:
        return X.copy(), NoiseStats(snr_db, math.inf, 0.0)
    sigma = math.sqrt(power / (X.size * 10.0 ** (snr_db / 10.0)))
    noise = np.random.default_rng(seed).standard_normal(X.shape) * sigma
    realized = 10.0 * math.log10(power / float(np.sum(noise**2)))
    Y = X + noise
    negative = Y < 0
    Y[negative] = 0.0
    return Y, NoiseStats(float(snr_db), realized, float(negative.mean()))


def simulate(config: SceneConfig, lib: SpectralLibrary, labels) -> SimulatedScene:
    names = config.material_names
    labels = check_label_map(labels)
    k = config.scale_factor
    kernel = gaussian_kernel(k if k % 2 else k + 1, config.filter_sigma)
    cube = assign_signatures(labels, lib, names)
    low = downsample(filter_cube(cube, kernel), k)
    X = flatten(low)
    observed, stats = add_noise_snr(X, config.snr_db, config.seed)
    return SimulatedScene(
        observed=observed,
        true_endmembers=lib.endmember_matrix(names),
        true_abundances=reference_abundances(labels, kernel, k, len(names)),
        config=config,
        noise_stats=stats,
        shape=low.shape[:2],
    )


def save_scene(out_dir, scene: SimulatedScene, extra: dict | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    save_matrix(os.path.join(out_dir, "observed.f64m"), scene.observed)
    save_matrix(os.path.join(out_dir, "endmembers.f64m"), scene.true_endmembers)
    save_matrix(os.path.join(out_dir, "abundances.f64m"), scene.true_abundances)
    meta = {
        "config": scene.config.to_json(),
        "noise_stats": scene.noise_stats.to_json(),
        "shape": list(scene.shape),
    }
    if extra:
        meta.update(extra)
    with open(os.path.join(out_dir, "scene.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scene(scene_dir) -> SimulatedScene:
    with open(os.path.join(scene_dir, "scene.json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    return SimulatedScene(
        observed=load_matrix(os.path.join(scene_dir, "observed.f64m")),
        true_endmembers=load_matrix(os.path.join(scene_dir, "endmembers.f64m")),
        true_abundances=load_matrix(os.path.join(scene_dir, "abundances.f64m")),
        config=SceneConfig.from_json(meta["config"]),
        noise_stats=NoiseStats.from_json(meta["noise_stats"]),
        shape=tuple(meta["shape"]),
    )
