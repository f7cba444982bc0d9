"""Spectral data containers and file formats.

Conventions used throughout the package:

* a hyperspectral cube is a float array of shape ``(rows, cols, bands)``;
* a data matrix ``X`` is ``(bands, pixels)`` with one column per pixel,
  pixels taken in row-major order (``index = row * cols + col``);
* endmembers ``U`` are ``(bands, P)`` and abundances ``V`` are ``(pixels, P)``
  so that ``X ~ U @ V.T``.

Binary matrix and cube files use a tiny little-endian layout (``F64M`` /
``F64C``) so that round trips are bit exact.
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass, field

import numpy as np

MATRIX_MAGIC = b"F64M"
CUBE_MAGIC = b"F64C"
_U32_MAX = 2**32 - 1


class FormatError(ValueError):
    """Raised when a file does not follow the expected layout."""


@dataclass(frozen=True)
class SpectralLibrary:
    """Reflectance signatures sampled on a shared wavelength grid.

    Attributes:
        wavelengths: strictly increasing wavelengths (micrometers).
        names: material names, unique.
        reflectance: array ``(n_materials, n_bands)`` with values in [0, 1].
    """

    wavelengths: np.ndarray
    names: tuple
    reflectance: np.ndarray = field(repr=False)

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float)
        refl = np.atleast_2d(np.asarray(self.reflectance, dtype=float))
        names = tuple(self.names)
        if wl.ndim != 1 or wl.size == 0:
            raise ValueError("wavelengths must be a non-empty 1-D sequence")
        if np.any(np.diff(wl) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if refl.shape != (len(names), wl.size):
            raise ValueError(
                f"reflectance shape {refl.shape} does not match "
                f"{len(names)} materials x {wl.size} bands"
            )
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate material names: {dup}")
        if not np.all(np.isfinite(refl)) or refl.min() < 0 or refl.max() > 1:
            raise ValueError("reflectance values must lie in [0, 1]")
        wl.setflags(write=False)
        refl.setflags(write=False)
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "reflectance", refl)
        object.__setattr__(self, "names", names)

    @property
    def n_bands(self) -> int:
        return self.wavelengths.size

    def signature(self, name: str) -> np.ndarray:
        try:
            return self.reflectance[self.names.index(name)]
        except ValueError:
            raise KeyError(f"material {name!r} not in library") from None

    def endmember_matrix(self, names) -> np.ndarray:
        """Stack the named signatures as columns of a ``(bands, P)`` matrix."""
        return np.column_stack([self.signature(n) for n in names])


def load_spectral_library(path) -> SpectralLibrary:
    """Read a comma-separated library table.

    The header is ``wavelength,<name 1>,<name 2>,...`` and every following
    row holds one wavelength and the reflectance of each material there.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError(f"{path}: empty library file")
    header = [c.strip() for c in rows[0]]
    if header[0].lower() != "wavelength" or len(header) < 2:
        raise FormatError(f"{path}: header must start with 'wavelength' and name materials")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            values.append([float(c) for c in row])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric field") from None
    if not values:
        raise FormatError(f"{path}: no data rows")
    table = np.array(values)
    return SpectralLibrary(table[:, 0], tuple(header[1:]), table[:, 1:].T)


def save_spectral_library(path, lib: SpectralLibrary) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["wavelength", *lib.names])
        for i, wl in enumerate(lib.wavelengths):
            w.writerow([repr(float(wl))] + [repr(float(v)) for v in lib.reflectance[:, i]])


def flatten(cube) -> np.ndarray:
    """Turn a ``(rows, cols, bands)`` cube into a ``(bands, rows*cols)`` matrix."""
    cube = np.asarray(cube, dtype=float)
    if cube.ndim != 3:
        raise ValueError(f"cube must be 3-D, got shape {cube.shape}")
    rows, cols, bands = cube.shape
    return np.ascontiguousarray(cube.reshape(rows * cols, bands).T)


def unflatten(X, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`flatten`."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"data matrix must be 2-D, got shape {X.shape}")
    if rows * cols != X.shape[1]:
        raise ValueError(f"{rows}x{cols} image cannot hold {X.shape[1]} pixels")
    return np.ascontiguousarray(X.T.reshape(rows, cols, X.shape[0]))


def check_data_matrix(X) -> np.ndarray:
    """Validate a solver input: 2-D, finite, nonnegative."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.size == 0:
        raise ValueError(f"data matrix must be a non-empty 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data matrix contains non-finite values")
    if X.min() < 0:
        raise ValueError("data matrix contains negative values")
    return X


def check_label_map(labels, n_classes: int | None = None) -> np.ndarray:
    """Validate an integer label image; every class in ``[0, n_classes)`` must occur."""
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.size == 0:
        raise ValueError(f"label map must be a non-empty 2-D array, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == np.round(labels)):
            raise ValueError("label map must hold integers")
        labels = labels.astype(np.int64)
    if labels.min() < 0:
        raise ValueError("labels must be nonnegative")
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    if labels.max() >= n_classes:
        raise ValueError(f"label {labels.max()} out of range for {n_classes} classes")
    missing = np.setdiff1d(np.arange(n_classes), labels)
    if missing.size:
        raise ValueError(f"classes never used in label map: {missing.tolist()}")
    return labels.astype(np.int64, copy=False)


def load_label_map(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        labels = np.array([[int(c) for c in r] for r in rows], dtype=np.int64)
    except ValueError:
        raise FormatError(f"{path}: label map must be comma-separated integers with equal-length rows") from None
    return check_label_map(labels)


def save_label_map(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w", encoding="utf-8") as fh:
        for row in labels:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def _read_exact(path, magic, n_dims):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != magic:
        raise FormatError(f"{path}: bad magic, expected {magic.decode()}")
    head = 4 + 4 * n_dims
    if len(blob) < head:
        raise FormatError(f"{path}: truncated header")
    dims = struct.unpack(f"<{n_dims}I", blob[4:head])
    count = int(np.prod(dims, dtype=object))
    expected = head + 8 * count
    if len(blob) < expected:
        raise FormatError(f"{path}: truncated payload ({len(blob) - head} of {8 * count} bytes)")
    if len(blob) > expected:
        raise FormatError(f"{path}: {len(blob) - expected} trailing bytes")
    data = np.frombuffer(blob, dtype="<f8", offset=head, count=count)
    return data.astype(np.float64).reshape(dims)


def _write(path, magic, arr):
    if any(d > _U32_MAX for d in arr.shape):
        raise OverflowError(f"dimension exceeds 32-bit range: {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def save_matrix(path, M) -> None:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {M.shape}")
    _write(path, MATRIX_MAGIC, M)


def load_matrix(path) -> np.ndarray:
    return _read_exact(path, MATRIX_MAGIC, 2)


def save_cube(path, cube) -> None:
    cube = np.asarray(cube, dtype=np.float64)
    if cube.ndim != 3:
        raise ValueError(f"cube must be 3-D, got shape {cube.shape}")
    _write(path, CUBE_MAGIC, cube)


def load_cube(path) -> np.ndarray:
    return _read_exact(path, CUBE_MAGIC, 3)


def is_readable_file(path) -> bool:
    return os.path.isfile(path) and os.access(path, os.R_OK)
