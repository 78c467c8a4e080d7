"""Pixel-grid graphs, their incidence matrix and Laplacian.

The edge list follows one canonical order: horizontal edges row-major,
vertical edges row-major, and for 8-connectivity the down-right diagonals
followed by the down-left diagonals.  Every edge ``(i, j)`` has ``i < j``.
Pixel ``(r, c)`` has index ``r * width + c``.

``laplacian_apply`` is the matrix-free path used during training; the
sparse matrices are kept for verification and for small images.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "GridGraph",
    "build_grid_graph",
    "edge_count",
    "incidence_matrix",
    "laplacian",
    "laplacian_apply",
    "write_edges_csv",
]


def edge_count(height: int, width: int, connectivity: int = 4) -> int:
    """Closed-form |E| for a ``height`` x ``width`` grid."""
    n = height * (width - 1) + width * (height - 1)
    if connectivity == 8:
        n += 2 * (height - 1) * (width - 1)
    return n


@dataclass(frozen=True, eq=False)
class GridGraph:
    height: int
    width: int
    connectivity: int = 4
    edges: np.ndarray = field(repr=False, default=None)

    @property
    def num_nodes(self) -> int:
        return self.height * self.width

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        return incidence_matrix(self)

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        return laplacian(self)


def _family_slices(connectivity: int):
    """(source slice, target slice) pairs per edge family, in canonical order.

    Each pair selects, on an (H, W) plane, the endpoint ``i`` and endpoint
    ``j`` of every edge of that family in row-major order.
    """
    s, e, a = slice(None, -1), slice(1, None), slice(None)
    families = [
        ((a, s), (a, e)),  # horizontal: (r, c) - (r, c+1)
        ((s, a), (e, a)),  # vertical: (r, c) - (r+1, c)
    ]
    if connectivity == 8:
        families += [
            ((s, s), (e, e)),  # down-right: (r, c) - (r+1, c+1)
            ((s, e), (e, s)),  # down-left: (r, c+1) - (r+1, c)
        ]
    return families


def build_grid_graph(height: int, width: int, connectivity: int = 4) -> GridGraph:
    if height < 1 or width < 1:
        raise ValueError(f"grid dimensions must be positive, got {height}x{width}")
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    idx = np.arange(height * width, dtype=np.int64).reshape(height, width)
    parts = [
        np.stack([idx[src].ravel(), idx[dst].ravel()], axis=1)
        for src, dst in _family_slices(connectivity)
    ]
    edges = np.concatenate(parts, axis=0) if parts else np.empty((0, 2), np.int64)
    edges.setflags(write=False)
    return GridGraph(height, width, connectivity, edges)


def incidence_matrix(g: GridGraph) -> sp.csr_matrix:
    """|E| x N matrix with +1 at column i and -1 at column j for edge (i, j)."""
    m = g.num_edges
    rows = np.repeat(np.arange(m), 2)
    cols = g.edges.ravel()
    vals = np.tile([1.0, -1.0], m)
    B = sp.csr_matrix((vals, (rows, cols)), shape=(m, g.num_nodes))
    B.sort_indices()
    return B


def laplacian(g: GridGraph) -> sp.csr_matrix:
    """L = B^T B, an N x N symmetric matrix (degree minus adjacency)."""
    B = incidence_matrix(g)
    L = (B.T @ B).tocsr()
    L.eliminate_zeros()
    L.sort_indices()
    return L


def laplacian_apply(g: GridGraph, v: np.ndarray) -> np.ndarray:
    """Matrix-free ``L @ v``.

    ``v`` is either a flat vector of length N or an array whose last two
    axes are ``(height, width)``; leading axes (batch, channel) are mapped
    independently.  Contributions are accumulated per pixel in canonical
    edge order, so the result is bit-identical to a sequential loop over
    ``g.edges`` doing ``out[i] += v[i] - v[j]; out[j] += v[j] - v[i]``.
    """
    v = np.asarray(v)
    flat = v.ndim == 1
    if flat:
        if v.shape[0] != g.num_nodes:
            raise ValueError(f"vector length {v.shape[0]} != {g.num_nodes} nodes")
        v = v.reshape(g.height, g.width)
    elif v.shape[-2:] != g.shape:
        raise ValueError(f"plane shape {v.shape[-2:]} != graph shape {g.shape}")
    out = np.zeros_like(v, dtype=np.result_type(v.dtype, np.float32))
    for src, dst in _family_slices(g.connectivity):
        src = (Ellipsis, *src)
        dst = (Ellipsis, *dst)
        d = v[src] - v[dst]
        # within a family a pixel is first reached as the j-end of the
        # preceding edge, then as the i-end of the following one
        out[dst] -= d
        out[src] += d
    return out.ravel() if flat else out


def write_edges_csv(g: GridGraph, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j"])
        w.writerows(g.edges.tolist())
