"""Pixel affinity graphs and their Laplacians.

Two constructions are offered: spatial 4/8-neighbourhoods on the image grid
and a symmetric k-nearest-neighbour graph in spectral space. Node ``j`` is
always the pixel in column ``j`` of the data matrix (row-major order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

WEIGHTINGS = ("binary", "heat", "dot")


@dataclass(frozen=True)
class WeightGraph:
    """Sparse symmetric nonnegative weights with an empty diagonal."""

    weights: sp.csr_matrix
    weighting: str = "binary"
    construction: str = "knn"
    params: tuple = ()

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def n_edges(self) -> int:
        return sp.triu(self.weights, k=1).nnz


@dataclass(frozen=True)
class Laplacian:
    degree: np.ndarray
    matrix: sp.csr_matrix
    weights: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.degree.size


def _from_edges(n, i, j, w) -> sp.csr_matrix:
    W = sp.coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(n, n)).tocsr()
    W.sum_duplicates()
    W.sort_indices()
    return W


def build_spatial_graph(rows: int, cols: int, system: int = 4) -> WeightGraph:
    """Unit-weight grid graph under the 4- or 8-neighbourhood system."""
    if system not in (4, 8):
        raise ValueError(f"neighbourhood system must be 4 or 8, got {system}")
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError("a spatial graph needs at least two pixels")
    idx = np.arange(rows * cols).reshape(rows, cols)
    pairs = [(idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :])]
    if system == 8:
        pairs += [(idx[:-1, :-1], idx[1:, 1:]), (idx[:-1, 1:], idx[1:, :-1])]
    i = np.concatenate([a.ravel() for a, _ in pairs])
    j = np.concatenate([b.ravel() for _, b in pairs])
    W = _from_edges(rows * cols, i, j, np.ones(i.size))
    return WeightGraph(W, "binary", f"spatial{system}", (rows, cols))


def knn_indices(X, p: int, chunk: int | None = None) -> np.ndarray:
    """Indices ``(N, p)`` of the ``p`` nearest columns of ``X`` for every column.

    Distances are Euclidean; ties go to the lower index, the point itself is
    never its own neighbour.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    if not 1 <= p < n:
        raise ValueError(f"need 1 <= p < N, got p={p}, N={n}")
    pts = X.T
    sq = np.einsum("ij,ij->i", pts, pts)
    if chunk is None:
        chunk = max(1, 2**22 // n)
    out = np.empty((n, p), dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * pts[start:stop] @ pts.T
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # stable sort keeps lower indices first among equal distances
        out[start:stop] = np.argsort(d2, axis=1, kind="stable")[:, :p]
    return out


def build_knn_graph(X, p: int = 5, weighting: str = "binary", sigma_h: float | None = None) -> WeightGraph:
    """Symmetric k-nearest-neighbour graph over the columns of ``X``.

    An edge joins ``j`` and ``l`` when either is among the other's ``p``
    nearest neighbours. Weights:

    * ``binary``: 1 on every edge;
    * ``heat``: ``exp(-||x_j - x_l||^2 / sigma_h)``; ``sigma_h`` defaults to
      the mean squared edge length;
    * ``dot``: cosine similarity, clipped at zero.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}; expected one of {WEIGHTINGS}")
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    nbr = knn_indices(X, p)
    rows = np.repeat(np.arange(n), p)
    cols = nbr.ravel()
    i, j = np.minimum(rows, cols), np.maximum(rows, cols)
    edges = np.unique(np.stack([i, j], axis=1), axis=0)
    i, j = edges[:, 0], edges[:, 1]

    if weighting == "binary":
        w = np.ones(i.size)
    elif weighting == "heat":
        d2 = np.sum((X[:, i] - X[:, j]) ** 2, axis=0)
        if sigma_h is None:
            sigma_h = float(d2.mean()) if d2.size and d2.mean() > 0 else 1.0
        if not sigma_h > 0:
            raise ValueError("sigma_h must be positive")
        w = np.exp(-d2 / sigma_h)
    else:
        norms = np.linalg.norm(X, axis=0)
        if np.any(norms[np.union1d(i, j)] == 0):
            raise ValueError("dot-product weighting is undefined for zero-norm pixels")
        w = np.sum(X[:, i] * X[:, j], axis=0) / (norms[i] * norms[j])
        w = np.clip(w, 0.0, None)
    params = (p,) if weighting != "heat" else (p, sigma_h)
    return WeightGraph(_from_edges(n, i, j, w), weighting, "knn", params)


def laplacian(g: WeightGraph) -> Laplacian:
    """Degree vector and ``L = D - W``."""
    W = g.weights.tocsr()
    degree = np.asarray(W.sum(axis=1)).ravel()
    L = (sp.diags(degree) - W).tocsr()
    return Laplacian(degree, L, W)


def regularizer_value(V, lap: Laplacian) -> float:
    """Graph smoothness ``Tr(V^T L V)`` of the abundance rows of ``V``."""
    V = np.asarray(V, dtype=float)
    if V.shape[0] != lap.n:
        raise ValueError(f"V has {V.shape[0]} rows but the graph has {lap.n} nodes")
    return float(np.sum(V * (lap.matrix @ V)))


def pairwise_regularizer(V, g: WeightGraph) -> float:
    """Same quantity as :func:`regularizer_value`, summed edge by edge:
    ``1/2 * sum_{j,l} W_jl ||v_j - v_l||^2``."""
    V = np.asarray(V, dtype=float)
    if V.shape[0] != g.n:
        raise ValueError(f"V has {V.shape[0]} rows but the graph has {g.n} nodes")
    W = g.weights.tocoo()
    diff = V[W.row] - V[W.col]
    return 0.5 * float(np.sum(W.data * np.sum(diff**2, axis=1)))


def export_edges(path, g: WeightGraph) -> None:
    """Write ``j,l,weight`` lines for ``j < l``."""
    U = sp.triu(g.weights, k=1).tocoo()
    order = np.lexsort((U.col, U.row))
    with open(path, "w", encoding="utf-8") as fh:
        for r, c, w in zip(U.row[order], U.col[order], U.data[order]):
            fh.write(f"{r},{c},{float(w)!r}\n")
