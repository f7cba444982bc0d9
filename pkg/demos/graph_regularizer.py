"""
Pixel graphs and the smoothness penalty
=======================================

A small tour of the graph side: spatial and spectral neighbourhoods, the
three weightings, and the two equivalent forms of the penalty.
"""

import numpy as np

from graphunmix.graph import (
    build_knn_graph,
    build_spatial_graph,
    laplacian,
    pairwise_regularizer,
    regularizer_value,
)

g4 = build_spatial_graph(3, 3, system=4)
g8 = build_spatial_graph(3, 3, system=8)
print("3x3 grid edges: 4-neighbourhood", g4.n_edges, "8-neighbourhood", g8.n_edges)
print(laplacian(g4).matrix.toarray().astype(int))

rng = np.random.default_rng(0)
# two well separated spectral clusters of 10 pixels each
X = np.hstack([rng.normal(0.2, 0.01, (8, 10)), rng.normal(0.8, 0.01, (8, 10))]).clip(0)
for weighting in ("binary", "heat", "dot"):
    g = build_knn_graph(X, p=3, weighting=weighting)
    W = g.weights.toarray()
    cross = W[:10, 10:].sum()
    print(f"{weighting:>6}: {g.n_edges} edges, weight range "
          f"[{W[W > 0].min():.3f}, {W.max():.3f}], cross-cluster weight {cross:.1f}")

g = build_knn_graph(X, p=3, weighting="heat")
lap = laplacian(g)
print("row sums of L:", np.abs(np.asarray(lap.matrix.sum(axis=1))).max())

# abundances constant within a cluster cost nothing, mixing them does
V_smooth = np.repeat([[1.0, 0.0], [0.0, 1.0]], 10, axis=0)
V_rough = rng.dirichlet([1, 1], size=20)
for name, V in [("cluster-constant", V_smooth), ("random", V_rough)]:
    print(f"{name:>16}: Tr(V'LV) = {regularizer_value(V, lap):.3e}, "
          f"pairwise sum = {pairwise_regularizer(V, g):.3e}")
