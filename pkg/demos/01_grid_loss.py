"""
Neighbor-difference loss on a pixel grid
========================================

Builds a small grid graph, looks at its incidence matrix and Laplacian,
and checks that the three ways of evaluating the loss agree.
"""

import numpy as np

from srkit.graph import build_grid_graph, incidence_matrix, laplacian
from srkit.loss import glrdn_edge_sum, glrdn_matrix_free, glrdn_quadratic, sse_loss

# A 3x4 grid with 4-connectivity: 3*3 horizontal + 2*4 vertical edges.
g = build_grid_graph(3, 4)
print("edges:", len(g.edges))
print("first few (i, j):", g.edges[:5].tolist())

B = incidence_matrix(g)
L = laplacian(g)
print("B is", B.shape, "and B^T B equals L:", np.array_equal((B.T @ B).toarray(), L.toarray()))
print("degree of each pixel:\n", L.diagonal().reshape(3, 4).astype(int))

# Every row of L sums to zero, so constant images live in its null space.
print("L @ 1 =", L @ np.ones(12))

# The loss only sees differences between neighbors.  Shifting the whole
# prediction by a constant leaves it unchanged while SSE grows.
rng = np.random.default_rng(0)
t = rng.random((1, 3, 4))
y = t + 0.2
print("SSE of a +0.2 shift:      ", sse_loss(t, y))
print("neighbor loss of the shift:", glrdn_edge_sum(t, y, g))

# Three evaluations of the same quantity on random data.
y = rng.random((1, 3, 4))
print("edge sum:   ", glrdn_edge_sum(t, y, g))
print("r^T L r:    ", glrdn_quadratic(t, y, L))
print("matrix-free:", glrdn_matrix_free(t, y, g))

# 8-connectivity adds both diagonals.
g8 = build_grid_graph(3, 4, connectivity=8)
print("8-connected edges:", len(g8.edges))
