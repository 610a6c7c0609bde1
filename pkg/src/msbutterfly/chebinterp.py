"""Chebyshev grids on boxes and tensor-product Lagrange interpolation.

One-dimensional interpolation uses the q extremum nodes

    z_i = cos(i pi / (q - 1)) / 2,    i = 0 .. q-1,

scaled to [-1/2, 1/2] and listed in decreasing order.  A grid adapted to
a box of center c and width w is {c + w z_i}; in d dimensions the grid
is the tensor product, flattened in lexicographic order of
(i_1, ..., i_d) with i_1 slowest.

Evaluation is barycentric throughout: with weights w_i the basis value
is (w_i / (x - z_i)) / sum_k (w_k / (x - z_k)), and an exact node hit
returns the cardinal vector.  Transfers between a parent grid and the
grids of its children (the only grid-to-grid moves the transform makes)
reduce to one q x q matrix per dimension, which keeps every
grid-to-grid contraction at O(q^(d+1)) instead of O(q^(2d)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import DyadicBox

__all__ = [
    "cheb_nodes_1d",
    "barycentric_weights",
    "lagrange_basis_1d",
    "adapt_to_box",
    "ChebGrid",
    "InterpWeights",
    "cheb_grid",
    "interp_weights",
    "lagrange_eval",
    "transfer_matrix_1d",
    "tensor_apply",
]

# Overshoot beyond the box that is treated as roundoff and clamped.
_EDGE_SLACK = 1e-9


def cheb_nodes_1d(q: int) -> np.ndarray:
    """Chebyshev extremum nodes on [-1/2, 1/2], decreasing, z_0 = 1/2."""
    if q < 2:
        raise ValueError(f"need at least 2 nodes, got q={q}")
    i = np.arange(q)
    return 0.5 * np.cos(i * np.pi / (q - 1))


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Barycentric weights 1 / prod_{j != i} (z_i - z_j), max-normalized."""
    nodes = np.asarray(nodes, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    return w / np.max(np.abs(w))


def lagrange_basis_1d(nodes: np.ndarray, weights: np.ndarray, pts) -> np.ndarray:
    """All q basis polynomials at pts; shape pts.shape + (q,).

    Exact node hits short-circuit to the cardinal vector instead of
    dividing by zero.
    """
    pts = np.asarray(pts, dtype=float)
    d = pts[..., None] - nodes
    hit = d == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        k = weights / d
        m = k / np.sum(k, axis=-1, keepdims=True)
    anyhit = np.any(hit, axis=-1)
    if np.any(anyhit):
        m[anyhit] = hit[anyhit].astype(float)
    return m


def adapt_to_box(nodes_1d: np.ndarray, box: DyadicBox) -> np.ndarray:
    """Tensor grid {c + w (z_{i1}, ..., z_{id})}, shape (q^d, d)."""
    axes = [box.center[k] + box.width * nodes_1d for k in range(box.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


@dataclass(frozen=True, eq=False)
class ChebGrid:
    """Order-q Chebyshev grid adapted to one box."""

    q: int
    dim: int
    box: DyadicBox
    nodes_1d: np.ndarray  # local nodes on [-1/2, 1/2]
    tensor_nodes: np.ndarray  # (q^d, dim), global coordinates

    @property
    def size(self) -> int:
        return self.q**self.dim


def cheb_grid(q: int, box: DyadicBox) -> ChebGrid:
    z = cheb_nodes_1d(q)
    return ChebGrid(
        q=q, dim=box.dim, box=box, nodes_1d=z, tensor_nodes=adapt_to_box(z, box)
    )


@dataclass(frozen=True, eq=False)
class InterpWeights:
    """Everything needed to evaluate the tensor Lagrange basis in a box."""

    box: DyadicBox
    nodes_1d: np.ndarray
    weights_1d: np.ndarray = field(default=None)  # type: ignore[assignment]

    def localize(self, points: np.ndarray) -> np.ndarray:
        """Map global points into box coordinates on [-1/2, 1/2]^d.

        Points off the box by no more than width * 1e-9 are clamped onto
        the boundary; anything farther out is left alone.
        """
        pts = np.asarray(points, dtype=float)
        loc = (pts - self.box.center_array()) / self.box.width
        over = np.abs(loc) - 0.5
        snap = (over > 0.0) & (over <= _EDGE_SLACK)
        if np.any(snap):
            loc = np.where(snap, np.copysign(0.5, loc), loc)
        return loc

    def basis_1d(self, coords) -> np.ndarray:
        """1D basis at local coordinates; shape coords.shape + (q,)."""
        return lagrange_basis_1d(self.nodes_1d, self.weights_1d, coords)

    def tensor_basis(self, points: np.ndarray) -> np.ndarray:
        """M_t at global points, shape (npts, q^d); t in lexicographic order."""
        loc = self.localize(np.atleast_2d(points))
        per_dim = [self.basis_1d(loc[:, k]) for k in range(self.box.dim)]
        out = per_dim[0]
        for k in range(1, self.box.dim):
            out = out[:, :, None] * per_dim[k][:, None, :]
            out = out.reshape(out.shape[0], -1)
        return out


def interp_weights(grid: ChebGrid) -> InterpWeights:
    return InterpWeights(
        box=grid.box,
        nodes_1d=grid.nodes_1d,
        weights_1d=barycentric_weights(grid.nodes_1d),
    )


def lagrange_eval(weights: InterpWeights, t: int, x) -> np.ndarray:
    """Single tensor basis function M_t at global points x."""
    basis = weights.tensor_basis(x)
    return basis[..., t]


def transfer_matrix_1d(source_nodes: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """T[t, s] = (basis t of the source grid)(targets[s]), shape (q, m)."""
    w = barycentric_weights(source_nodes)
    return lagrange_basis_1d(source_nodes, w, np.asarray(targets, float)).T


def tensor_apply(mats: list[np.ndarray], arr: np.ndarray, nbatch: int = 0) -> np.ndarray:
    """Contract arr (..., n_1, .., n_d) with per-dimension matrices (q_k, n_k).

    Applies one matrix per trailing axis, keeping the first nbatch axes
    untouched.  This is the O(q^(d+1)) path used for every grid-to-grid
    move.
    """
    d = len(mats)
    if arr.ndim != nbatch + d:
        raise ValueError(f"array rank {arr.ndim} does not match {nbatch}+{d}")
    for k in range(d):
        ax = nbatch + k
        arr = np.moveaxis(np.tensordot(mats[k], arr, axes=([1], [ax])), 0, ax)
    return arr
