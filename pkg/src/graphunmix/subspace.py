"""Endmember-count estimation from the PCA eigenvalue spectrum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PcaSpectrum:
    eigenvalues: np.ndarray
    explained: np.ndarray
    centered: bool


def pca_spectrum(X, centered: bool = True) -> PcaSpectrum:
    """Eigenvalues of the band covariance (or second-moment) matrix.

    ``X`` is ``(bands, pixels)``. Eigenvalues are returned in descending
    order. Eigenvalues below ``1e-12`` times the mean pixel power are
    round-off (centering constant data never gives exact zeros) and are
    clamped to zero. ``explained[i]`` is the
    fraction of total variance captured by the first ``i + 1`` components.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("need at least two pixels for PCA")
    n = X.shape[1]
    Y = X - X.mean(axis=1, keepdims=True) if centered else X
    C = (Y @ Y.T) / n
    ev = np.linalg.eigvalsh(C)[::-1]
    floor = 1e-12 * np.sum(X * X) / n
    ev = np.where(ev > floor, ev, 0.0)
    total = ev.sum()
    if total > 0:
        explained = np.cumsum(ev) / total
        explained[-1] = 1.0
    else:
        explained = np.ones_like(ev)
    return PcaSpectrum(ev, explained, centered)


def components_for(spec: PcaSpectrum, threshold: float) -> int:
    """Smallest number of components reaching ``threshold`` explained variance."""
    if spec.eigenvalues.sum() == 0:
        return 0
    hits = np.nonzero(spec.explained >= threshold)[0]
    return int(hits[0]) + 1 if hits.size else spec.eigenvalues.size


def estimate_endmember_count(X, threshold: float = 0.995, centered: bool = True) -> int:
    """Number of endmembers suggested by PCA.

    Sum-to-one mixtures of ``P`` signatures span a ``P - 1`` dimensional
    affine set, so in centered mode one is added to the component count.
    The result never exceeds the number of bands.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    X = np.asarray(X, dtype=float)
    m = components_for(pca_spectrum(X, centered), threshold)
    if centered:
        m += 1
    return min(m, X.shape[0])
