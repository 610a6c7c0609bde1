"""Grids, dyadic box trees, and the corona decomposition of frequency space.

The operator acts between two discrete domains: spatial samples
``x = n/N`` with ``n in {0, ..., N-1}^d`` and integer frequencies
``xi in {-N/2, ..., N/2 - 1}^d``.  The fast transform never treats the
frequency grid as a whole.  It is split into dyadic coronas

    Omega_j = { xi : N / 2^(j+1) < max_i |xi_i| <= N / 2^j },   j = 1 .. log2(N) - s,

plus a small center block Omega_d containing everything that is left.
Each corona is covered by its own pair of quadtrees/octrees: one over
the unit spatial cube and one over the corona's bounding box of side
N_j = N / 2^(j-1), traversed in lockstep so that the product of the box
widths is always one.

Conventions that the rest of the package relies on:

* Corona membership uses a strict lower bound and an inclusive upper
  bound, so ``max|xi| == N/2^j`` lands in corona j.
* Boxes are half-open in index space, except that the boxes touching the
  upper face of a corona's bounding square also own the lattice points
  sitting exactly on that face (those points exist for j >= 2 and would
  otherwise belong to no box).
* Box emptiness means "contains no lattice point of the corona"; the
  test is exact interval arithmetic on the per-dimension index ranges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpatialGrid",
    "FrequencyGrid",
    "DyadicBox",
    "DyadicTree",
    "CoronaShell",
    "CoronaDecomposition",
    "CoronaTree",
    "TreeLevelSchedule",
    "build_corona_decomposition",
    "corona_bounding_tree",
    "level_schedule",
]


def _is_pow2(n: int) -> bool:
    return isinstance(n, int) and n >= 1 and (n & (n - 1)) == 0


def _check_dim(dim: int) -> None:
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")


@dataclass(frozen=True)
class SpatialGrid:
    """The regular grid x = n/N over the unit cube [0, 1)^d."""

    n: int
    dim: int

    def __post_init__(self) -> None:
        if not _is_pow2(self.n):
            raise ValueError(f"n must be a power of two, got {self.n}")
        _check_dim(self.dim)

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    def axis(self) -> np.ndarray:
        """Grid coordinates along one dimension."""
        return np.arange(self.n) / self.n


@dataclass(frozen=True)
class FrequencyGrid:
    """The integer lattice -N/2 <= xi_i < N/2, stored in centered order.

    Array layout everywhere in this package: axis index k corresponds to
    frequency xi = k - N/2, so index N/2 is the origin.
    """

    n: int
    dim: int

    def __post_init__(self) -> None:
        if not _is_pow2(self.n):
            raise ValueError(f"n must be a power of two, got {self.n}")
        _check_dim(self.dim)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    def axis(self) -> np.ndarray:
        """Frequency coordinates along one dimension."""
        return np.arange(self.n) - self.n // 2

    def maxnorm(self) -> np.ndarray:
        """max_i |xi_i| on the full lattice, shape (n,)*dim."""
        ax = np.abs(self.axis())
        out = ax
        for _ in range(self.dim - 1):
            out = np.maximum(out[..., None], ax)
        return out


@dataclass(frozen=True)
class DyadicBox:
    """One box of a dyadic tree: level, per-dimension index, center, width.

    Centers and widths are exact binary floats (all widths are powers of
    two times the root width), so equality of boxes is exact.
    """

    level: int
    index: tuple[int, ...]
    center: tuple[float, ...]
    width: float

    @property
    def dim(self) -> int:
        return len(self.index)

    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def low(self) -> np.ndarray:
        return self.center_array() - 0.5 * self.width

    def high(self) -> np.ndarray:
        return self.center_array() + 0.5 * self.width


@dataclass(frozen=True)
class DyadicTree:
    """Dyadic subdivision of an axis-aligned cube."""

    dim: int
    root_corner: tuple[float, ...]
    root_width: float

    def n_boxes(self, level: int) -> int:
        return (2**level) ** self.dim

    def box(self, level: int, index: tuple[int, ...]) -> DyadicBox:
        if level < 0:
            raise ValueError(f"negative tree level {level}")
        if len(index) != self.dim:
            raise ValueError(f"index {index} has wrong dimension")
        m = 2**level
        if any(not (0 <= i < m) for i in index):
            raise ValueError(f"index {index} out of range at level {level}")
        w = self.root_width / m
        c = tuple(self.root_corner[k] + (index[k] + 0.5) * w for k in range(self.dim))
        return DyadicBox(level=level, index=tuple(index), center=c, width=w)

    def children(self, box: DyadicBox) -> list[DyadicBox]:
        out = []
        for off in range(2**self.dim):
            bits = tuple((off >> k) & 1 for k in range(self.dim))
            idx = tuple(2 * box.index[k] + bits[k] for k in range(self.dim))
            out.append(self.box(box.level + 1, idx))
        return out

    def parent(self, box: DyadicBox) -> DyadicBox:
        if box.level == 0:
            raise ValueError("root box has no parent")
        return self.box(box.level - 1, tuple(i // 2 for i in box.index))


@dataclass(frozen=True)
class CoronaShell:
    """One corona: lattice points with inner < max|xi_i| <= outer."""

    j: int
    inner: int
    outer: int
    n_j: int


@dataclass(frozen=True)
class CoronaDecomposition:
    """Partition of the frequency lattice into coronas plus a center block.

    ``shells[0]`` is the outermost corona (j = 1).  The center block is
    the literal complement: every lattice point with max|xi_i| <=
    ``center_bound``.
    """

    n: int
    dim: int
    s: int
    shells: tuple[CoronaShell, ...]

    @property
    def center_bound(self) -> int:
        return self.shells[-1].inner

    @property
    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.n, self.dim)

    def corona_mask(self, j: int) -> np.ndarray:
        """Boolean mask of corona j on the centered lattice array."""
        sh = self.shells[j - 1]
        m = self.grid.maxnorm()
        return (m > sh.inner) & (m <= sh.outer)

    def center_mask(self) -> np.ndarray:
        return self.grid.maxnorm() <= self.center_bound

    def corona_points(self, j: int) -> np.ndarray:
        """Integer frequency coordinates of corona j, shape (K, dim)."""
        idx = np.argwhere(self.corona_mask(j))
        return idx - self.n // 2

    def center_points(self) -> np.ndarray:
        return np.argwhere(self.center_mask()) - self.n // 2


def build_corona_decomposition(n: int, dim: int, s: int) -> CoronaDecomposition:
    """Split the frequency lattice of side n into dyadic coronas.

    Produces log2(n) - s coronas; s controls the size of the center
    block that is summed directly (its points satisfy
    max|xi| <= 2^(s-1)).
    """
    if not _is_pow2(n):
        raise ValueError(f"n must be a power of two, got {n}")
    _check_dim(dim)
    log_n = n.bit_length() - 1
    if not (1 <= s <= log_n - 1):
        raise ValueError(f"need 1 <= s <= log2(n) - 1, got s={s} for n={n}")
    shells = []
    for j in range(1, log_n - s + 1):
        shells.append(
            CoronaShell(j=j, inner=n >> (j + 1), outer=n >> j, n_j=n >> (j - 1))
        )
    return CoronaDecomposition(n=n, dim=dim, s=s, shells=tuple(shells))


@dataclass(frozen=True)
class CoronaTree:
    """Dyadic tree over one corona's bounding box with emptiness flags.

    The root spans [-N_j/2, N_j/2]^d.  Lattice ownership is half-open
    per box, except that boxes on the upper face also own points with
    coordinate exactly +N_j/2 (present for j >= 2).  The flags are exact:
    a box is empty iff it owns no lattice point of the corona.
    """

    n: int
    dim: int
    shell: CoronaShell
    tree: DyadicTree

    @property
    def root(self) -> DyadicBox:
        return self.tree.box(0, (0,) * self.dim)

    def box(self, level: int, index: tuple[int, ...]) -> DyadicBox:
        return self.tree.box(level, index)

    def lattice_ranges(self, level: int, index: tuple[int, ...]) -> list[tuple[int, int]]:
        """Inclusive integer coordinate range [lo, hi] owned per dimension.

        Applies the upper-face clamp and the clip to the global lattice
        bounds [-n/2, n/2 - 1].  A dimension may come back with lo > hi,
        meaning the box owns no lattice points at all.
        """
        nj = self.shell.n_j
        w = nj >> level
        last = (1 << level) - 1
        out = []
        for k in range(self.dim):
            lo = -(nj // 2) + index[k] * w
            hi = lo + w - 1
            if index[k] == last:
                hi += 1  # own the +N_j/2 face
            lo = max(lo, -(self.n // 2))
            hi = min(hi, self.n // 2 - 1)
            out.append((lo, hi))
        return out

    def is_empty(self, level: int, index: tuple[int, ...]) -> bool:
        rng = self.lattice_ranges(level, index)
        if any(lo > hi for lo, hi in rng):
            return True
        minabs = []
        maxabs = []
        for lo, hi in rng:
            maxabs.append(max(abs(lo), abs(hi)))
            minabs.append(0 if lo <= 0 <= hi else min(abs(lo), abs(hi)))
        # Achievable max-norms over the owned product range form the
        # contiguous integer interval [max(minabs), max(maxabs)].
        lo_norm = max(minabs)
        hi_norm = max(maxabs)
        return not (hi_norm > self.shell.inner and lo_norm <= self.shell.outer)

    def nonempty_indices(self, level: int) -> np.ndarray:
        """Per-dimension indices of all non-empty boxes, shape (nB, dim).

        Vectorized version of is_empty over the whole level, in C order
        of the flattened index (the order stage loops rely on).
        """
        m = 1 << level
        nj = self.shell.n_j
        w = nj >> level
        i = np.arange(m)
        lo = -(nj // 2) + i * w
        hi = lo + w - 1
        hi[-1] += 1
        lo = np.maximum(lo, -(self.n // 2))
        hi = np.minimum(hi, self.n // 2 - 1)
        valid = lo <= hi
        maxabs = np.maximum(np.abs(lo), np.abs(hi))
        minabs = np.where((lo <= 0) & (0 <= hi), 0, np.minimum(np.abs(lo), np.abs(hi)))
        axes_min = [minabs] * self.dim
        axes_max = [maxabs] * self.dim
        grids_min = np.meshgrid(*axes_min, indexing="ij")
        grids_max = np.meshgrid(*axes_max, indexing="ij")
        lo_norm = np.maximum.reduce(grids_min)
        hi_norm = np.maximum.reduce(grids_max)
        ok = (hi_norm > self.shell.inner) & (lo_norm <= self.shell.outer)
        grids_valid = np.meshgrid(*([valid] * self.dim), indexing="ij")
        ok &= np.logical_and.reduce(grids_valid)
        return np.argwhere(ok)


def corona_bounding_tree(decomp: CoronaDecomposition, j: int) -> CoronaTree:
    """Tree of side N_j centered at the frequency origin for corona j."""
    if not (1 <= j <= len(decomp.shells)):
        raise ValueError(f"corona index {j} out of range")
    sh = decomp.shells[j - 1]
    corner = (-(sh.n_j / 2.0),) * decomp.dim
    return CoronaTree(
        n=decomp.n,
        dim=decomp.dim,
        shell=sh,
        tree=DyadicTree(dim=decomp.dim, root_corner=corner, root_width=float(sh.n_j)),
    )


@dataclass(frozen=True)
class TreeLevelSchedule:
    """Frequency-tree levels visited by one corona pass.

    Levels refer to the frequency tree; the paired spatial level is
    always ``l_total - level_b``, which keeps the product of box widths
    equal to one.  The pass starts at ``start_level_b`` (frequency boxes
    of width b), walks up to ``switch_level_b`` where the expansion
    changes sides, continues up to ``stop_level_b`` (width N_j / b), and
    terminates there.
    """

    l_total: int
    start_level_b: int
    switch_level_b: int
    stop_level_b: int

    def xi_step_targets(self) -> list[int]:
        return list(range(self.start_level_b - 1, self.switch_level_b - 1, -1))

    def x_step_targets(self) -> list[int]:
        return list(range(self.switch_level_b - 1, self.stop_level_b - 1, -1))


def level_schedule(n_j: int, b: int) -> TreeLevelSchedule:
    """Level plan for a corona of side n_j with leaf width b.

    The switch happens at the largest scheduled box width <= sqrt(n_j),
    i.e. frequency level ceil(log2(n_j) / 2).  Requires n_j >= b^2 so the
    start level is not above the stop level.
    """
    if not _is_pow2(n_j):
        raise ValueError(f"n_j must be a power of two, got {n_j}")
    if not _is_pow2(b) or b < 4:
        raise ValueError(f"b must be a power of two >= 4, got {b}")
    if n_j < b * b:
        raise ValueError(f"corona side {n_j} smaller than b^2 = {b * b}")
    log_nj = n_j.bit_length() - 1
    log_b = b.bit_length() - 1
    return TreeLevelSchedule(
        l_total=log_nj,
        start_level_b=log_nj - log_b,
        switch_level_b=math.ceil(log_nj / 2),
        stop_level_b=log_b,
    )
