"""Butterfly transform of one frequency corona.

For a corona of side N_j the pass walks two trees in lockstep: spatial
boxes A over [0,1)^d refine while frequency boxes B over the corona's
bounding square coarsen, keeping w_A * w_B = 1.  Every (A, B) pair
carries q^d expansion coefficients delta^{AB}.  The five stages:

1. initialize: at w_B = b, sum the spectrum inside each B onto its
   Chebyshev grid, demodulated around the box pair,

       delta_t = e^(-2 pi i Phi(cA, gB_t)) sum_xi M_t(xi) e^(2 pi i Phi(cA, xi)) fhat(xi).

2. xi_step (repeat): move B to its parent, A to its children.  The new
   coefficients resample each child C's grid onto B's grid with the
   phase ride-along,

       delta_t = e^(-2 pi i Phi(cA, gB_t)) sum_C sum_s M_t(gC_s) e^(2 pi i Phi(cA, gC_s)) delta_s^{PC}.

3. switch: once w_B reaches sqrt(N_j), reinterpret the coefficients as
   samples of the box potential at the spatial grid: a dense q^d x q^d
   kernel application per pair, delta~_t = sum_s e^(2 pi i Phi(gA_t, gB_s)) delta_s.

4. x_step (repeat): same tree moves, now interpolating in x,

       delta_t = sum_C e^(2 pi i Phi(gA_t, cC)) sum_s M_s(gA_t) e^(-2 pi i Phi(gP_s, cC)) delta_s^{PC}.

5. terminate: at w_B = N_j / b, evaluate on the spatial samples in each A,

       u(x) += sum_B e^(2 pi i Phi(x, cB)) sum_t M_t(x) e^(-2 pi i Phi(gA_t, cB)) delta_t^{AB}.

All grid-to-grid moves factor through one q x q matrix per dimension
(children sit at fixed offsets inside their parent in local
coordinates), so a pair transfer costs O(q^(d+1)); only the switch is a
dense q^d x q^d product.  Empty boxes -- those owning no corona lattice
point, including the whole center of the frequency tree -- are skipped
everywhere.  Exactly one layer of coefficients is alive per stage plus
its predecessor, which bounds working memory at two layers; a
LayerStats instance can audit that.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chebinterp import barycentric_weights, cheb_nodes_1d, lagrange_basis_1d, tensor_apply
from .geometry import (
    CoronaDecomposition,
    CoronaTree,
    TreeLevelSchedule,
    corona_bounding_tree,
    level_schedule,
)
from .kernels import cis2pi

__all__ = [
    "LayerStats",
    "CoeffLayer",
    "CoronaContext",
    "corona_context",
    "initialize",
    "xi_step",
    "switch",
    "x_step",
    "terminate",
    "apply_corona",
]

# Cap on the temporary kernel block built per frequency box in the
# switch stage (complex128 entries).
_SWITCH_BLOCK = 8_000_000


class LayerStats:
    """Counts live coefficient layers; peak should never exceed two."""

    def __init__(self) -> None:
        self.alive = 0
        self.peak = 0
        self.created = 0

    def _register(self) -> None:
        self.alive += 1
        self.created += 1
        self.peak = max(self.peak, self.alive)

    def _release(self) -> None:
        self.alive -= 1


@dataclass(eq=False)
class CoeffLayer:
    """Expansion coefficients for every scheduled (A, B) pair at one stage.

    coeffs[slot_b, flat_a, t] holds delta^{AB}_t; b_indices lists the
    non-empty frequency boxes in C order and slot_of maps a box index
    tuple back to its slot.
    """

    side: str  # "xi" before the switch, "x" after
    level_b: int
    level_a: int
    b_indices: np.ndarray
    coeffs: np.ndarray
    stats: LayerStats | None = None
    slot_of: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.slot_of:
            self.slot_of = {tuple(ix): k for k, ix in enumerate(self.b_indices)}
        if self.stats is not None:
            self.stats._register()

    @property
    def n_pairs(self) -> int:
        return self.coeffs.shape[0] * self.coeffs.shape[1]

    def a_flat(self, a_index: tuple[int, ...]) -> int:
        m = 2**self.level_a
        return int(np.ravel_multi_index(a_index, (m,) * len(a_index)))

    def pair_coefficients(self, a_index: tuple[int, ...], b_index: tuple[int, ...]) -> np.ndarray:
        """The r-vector for one pair (testing accessor)."""
        return self.coeffs[self.slot_of[tuple(b_index)], self.a_flat(a_index)]

    def release(self) -> None:
        if self.coeffs is not None:
            self.coeffs = None
            if self.stats is not None:
                self.stats._release()


class CoronaContext:
    """Per-corona precomputation shared by all stages (and all passes)."""

    def __init__(
        self,
        decomp: CoronaDecomposition,
        j: int,
        phase,
        q: int,
        b: int,
        threads: int = 1,
        stats: LayerStats | None = None,
    ) -> None:
        self.decomp = decomp
        self.j = j
        self.phase = phase
        self.q = q
        self.b = b
        self.threads = max(1, int(threads))
        self.stats = stats
        self.dim = decomp.dim
        self.n = decomp.n
        self.tree: CoronaTree = corona_bounding_tree(decomp, j)
        self.nj = self.tree.shell.n_j
        self.schedule: TreeLevelSchedule = level_schedule(self.nj, b)
        self.r = q**self.dim

        z = cheb_nodes_1d(q)
        self.nodes_local = z
        self.bary = barycentric_weights(z)
        mesh = np.meshgrid(*([z] * self.dim), indexing="ij")
        self.nodes_tensor = np.stack([g.reshape(-1) for g in mesh], axis=-1)  # (r, d)
        # child grids sit at z/2 -+ 1/4 in parent-local coordinates
        self.t_child = [
            lagrange_basis_1d(z, self.bary, 0.5 * z - 0.25).T,
            lagrange_basis_1d(z, self.bary, 0.5 * z + 0.25).T,
        ]
        sched = self.schedule
        self.b_nonempty = {
            lvl: self.tree.nonempty_indices(lvl)
            for lvl in range(sched.stop_level_b, sched.start_level_b + 1)
        }
        self._a_centers: dict[int, np.ndarray] = {}
        self._a_nodes: dict[int, np.ndarray] = {}

    def level_a_of(self, level_b: int) -> int:
        return self.schedule.l_total - level_b

    def a_centers(self, level_a: int) -> np.ndarray:
        """Centers of all spatial boxes at a level, C order, shape (nA, d)."""
        if level_a not in self._a_centers:
            m = 2**level_a
            multi = np.indices((m,) * self.dim).reshape(self.dim, -1).T
            self._a_centers[level_a] = (multi + 0.5) / m
        return self._a_centers[level_a]

    def a_nodes(self, level_a: int) -> np.ndarray:
        """Chebyshev grids of all spatial boxes, shape (nA, r, d)."""
        if level_a not in self._a_nodes:
            c = self.a_centers(level_a)
            w = 0.5**level_a
            self._a_nodes[level_a] = c[:, None, :] + w * self.nodes_tensor[None, :, :]
        return self._a_nodes[level_a]

    def b_centers(self, level_b: int, b_indices: np.ndarray) -> np.ndarray:
        w = self.nj / 2**level_b
        return -0.5 * self.nj + (b_indices + 0.5) * w

    def b_nodes(self, level_b: int, b_indices: np.ndarray) -> np.ndarray:
        w = self.nj / 2**level_b
        c = self.b_centers(level_b, b_indices)
        return c[:, None, :] + w * self.nodes_tensor[None, :, :]

    def new_layer(self, side: str, level_b: int, b_indices: np.ndarray) -> CoeffLayer:
        level_a = self.level_a_of(level_b)
        n_a = (2**level_a) ** self.dim
        coeffs = np.zeros((len(b_indices), n_a, self.r), dtype=np.complex128)
        return CoeffLayer(
            side=side,
            level_b=level_b,
            level_a=level_a,
            b_indices=b_indices,
            coeffs=coeffs,
            stats=self.stats,
        )

    def map_slots(self, fn, count: int) -> None:
        """Run fn(slot) for each slot, optionally on a thread pool.

        Every slot writes disjoint output, so the order of completion
        does not matter and the result is identical to the serial path.
        """
        if self.threads == 1 or count <= 1:
            for k in range(count):
                fn(k)
            return
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            list(pool.map(fn, range(count)))


def corona_context(
    decomp: CoronaDecomposition,
    j: int,
    phase,
    q: int,
    b: int,
    threads: int = 1,
    stats: LayerStats | None = None,
) -> CoronaContext:
    return CoronaContext(decomp, j, phase, q, b, threads=threads, stats=stats)


def _child_bits(dim: int) -> list[tuple[int, ...]]:
    return [tuple(int(v) for v in bits) for bits in np.ndindex(*((2,) * dim))]


def initialize(ctx: CoronaContext, spectrum: np.ndarray) -> CoeffLayer:
    """Leaf-level coefficients from the corona-masked spectrum.

    spectrum is the full centered lattice array; entries outside the
    corona must already be zero.
    """
    lvl = ctx.schedule.start_level_b
    b_idx = ctx.b_nonempty[lvl]
    layer = ctx.new_layer("xi", lvl, b_idx)
    level_a = layer.level_a
    ca = ctx.a_centers(level_a)[:, None, :]  # (nA, 1, d)
    q, dim, half = ctx.q, ctx.dim, ctx.n // 2
    all_b_nodes = ctx.b_nodes(lvl, b_idx)
    w_b = ctx.nj / 2**lvl

    def work(slot: int) -> None:
        idx = b_idx[slot]
        ranges = ctx.tree.lattice_ranges(lvl, tuple(idx))
        coords = [np.arange(lo, hi + 1) for lo, hi in ranges]
        vals = spectrum[tuple(slice(lo + half, hi + 1 + half) for lo, hi in ranges)]
        if not np.any(vals):
            return
        center = ctx.b_centers(lvl, idx[None, :])[0]
        mats = [
            lagrange_basis_1d(ctx.nodes_local, ctx.bary, (coords[k] - center[k]) / w_b).T
            for k in range(dim)
        ]
        pts = np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1)  # (m1.., d)
        theta = ctx.phase(ca.reshape((-1,) + (1,) * dim + (dim,)), pts[None])
        w = cis2pi(theta) * vals[None]
        moments = tensor_apply(mats, w, nbatch=1).reshape(len(ca), ctx.r)
        demod = ctx.phase(ca, all_b_nodes[slot][None, :, :])
        layer.coeffs[slot] = cis2pi(-demod) * moments

    ctx.map_slots(work, len(b_idx))
    return layer


def xi_step(ctx: CoronaContext, prev: CoeffLayer) -> CoeffLayer:
    """Move B up one level, A down one level, staying on the frequency side."""
    lvl = prev.level_b - 1
    b_idx = ctx.b_nonempty[lvl]
    layer = ctx.new_layer("xi", lvl, b_idx)
    level_a = layer.level_a
    ca = ctx.a_centers(level_a)
    n_a = len(ca)
    m = 2**level_a
    multi = np.indices((m,) * ctx.dim).reshape(ctx.dim, -1).T
    parent_flat = np.ravel_multi_index(tuple((multi // 2).T), ((m // 2),) * ctx.dim)
    bits_list = _child_bits(ctx.dim)
    q = ctx.q
    all_b_nodes = ctx.b_nodes(lvl, b_idx)

    def work(slot: int) -> None:
        idx = b_idx[slot]
        acc = np.zeros((n_a, ctx.r), dtype=np.complex128)
        for bits in bits_list:
            cidx = tuple(2 * idx[k] + bits[k] for k in range(ctx.dim))
            cslot = prev.slot_of.get(cidx)
            if cslot is None:
                continue
            c_nodes = ctx.b_nodes(lvl + 1, np.array([cidx]))[0]
            theta = ctx.phase(ca[:, None, :], c_nodes[None, :, :])
            g = cis2pi(theta) * prev.coeffs[cslot][parent_flat]
            g = g.reshape((n_a,) + (q,) * ctx.dim)
            mats = [ctx.t_child[bits[k]] for k in range(ctx.dim)]
            acc += tensor_apply(mats, g, nbatch=1).reshape(n_a, ctx.r)
        demod = ctx.phase(ca[:, None, :], all_b_nodes[slot][None, :, :])
        layer.coeffs[slot] = cis2pi(-demod) * acc

    ctx.map_slots(work, len(b_idx))
    return layer


def switch(ctx: CoronaContext, prev: CoeffLayer) -> CoeffLayer:
    """Turn frequency-side coefficients into spatial-side ones in place.

    Dense per pair: delta~_t = sum_s e^(2 pi i Phi(gA_t, gB_s)) delta_s.
    """
    if prev.level_b != ctx.schedule.switch_level_b:
        raise ValueError("switch called away from the scheduled level")
    layer = ctx.new_layer("x", prev.level_b, prev.b_indices)
    nodes_a = ctx.a_nodes(layer.level_a)
    n_a = nodes_a.shape[0]
    all_b_nodes = ctx.b_nodes(prev.level_b, prev.b_indices)
    chunk = max(1, _SWITCH_BLOCK // (ctx.r * ctx.r))

    def work(slot: int) -> None:
        g_b = all_b_nodes[slot]
        for lo in range(0, n_a, chunk):
            hi = min(lo + chunk, n_a)
            theta = ctx.phase(nodes_a[lo:hi, :, None, :], g_b[None, None, :, :])
            layer.coeffs[slot, lo:hi] = np.einsum(
                "ats,as->at", cis2pi(theta), prev.coeffs[slot, lo:hi]
            )

    ctx.map_slots(work, len(prev.b_indices))
    return layer


def x_step(ctx: CoronaContext, prev: CoeffLayer) -> CoeffLayer:
    """Move B up one level, A down one level, on the spatial side."""
    lvl = prev.level_b - 1
    b_idx = ctx.b_nonempty[lvl]
    layer = ctx.new_layer("x", lvl, b_idx)
    level_a = layer.level_a
    nodes_a = ctx.a_nodes(level_a)
    nodes_p = ctx.a_nodes(level_a - 1)
    n_a = nodes_a.shape[0]
    m = 2**level_a
    multi = np.indices((m,) * ctx.dim).reshape(ctx.dim, -1).T
    parent_flat = np.ravel_multi_index(tuple((multi // 2).T), ((m // 2),) * ctx.dim)
    bits_list = _child_bits(ctx.dim)
    # flat A indices grouped by child-offset pattern, each group ordered
    # like its parents
    groups = []
    bits_arr = multi & 1
    for bits in bits_list:
        groups.append(np.nonzero((bits_arr == np.array(bits)).all(axis=1))[0])
    q = ctx.q

    def work(slot: int) -> None:
        idx = b_idx[slot]
        acc = np.zeros((n_a, ctx.r), dtype=np.complex128)
        for bits in bits_list:
            cidx = tuple(2 * idx[k] + bits[k] for k in range(ctx.dim))
            cslot = prev.slot_of.get(cidx)
            if cslot is None:
                continue
            c_center = ctx.b_centers(lvl + 1, np.array([cidx]))[0]
            theta_d = ctx.phase(nodes_p, c_center)
            d = cis2pi(-theta_d) * prev.coeffs[cslot]
            d = d.reshape((len(nodes_p),) + (q,) * ctx.dim)
            w_all = np.empty((n_a, ctx.r), dtype=np.complex128)
            for a_bits, grp in zip(bits_list, groups):
                mats = [ctx.t_child[a_bits[k]].T for k in range(ctx.dim)]
                w_all[grp] = tensor_apply(mats, d, nbatch=1).reshape(len(grp), ctx.r)
            theta_m = ctx.phase(nodes_a, c_center)
            acc += cis2pi(theta_m) * w_all
        layer.coeffs[slot] = acc

    ctx.map_slots(work, len(b_idx))
    return layer


def terminate(ctx: CoronaContext, prev: CoeffLayer, out: np.ndarray | None = None) -> np.ndarray:
    """Evaluate the corona potential on the spatial grid.

    Writes into out (allocating it if needed) and returns it; every grid
    point belongs to exactly one spatial box, so the accumulation per
    box is disjoint.
    """
    if prev.level_b != ctx.schedule.stop_level_b:
        raise ValueError("terminate called away from the scheduled level")
    if out is None:
        out = np.zeros((ctx.n,) * ctx.dim, dtype=np.complex128)
    level_a = prev.level_a
    nodes_a = ctx.a_nodes(level_a)
    m_boxes = 2**level_a
    mpts = ctx.n // m_boxes  # grid points per box per dimension
    # x = k/n has local coordinate k_loc/mpts - 1/2 inside its box
    local = np.arange(mpts) / mpts - 0.5
    e_mat = lagrange_basis_1d(ctx.nodes_local, ctx.bary, local)  # (mpts, q)
    c_b = ctx.b_centers(prev.level_b, prev.b_indices)  # (nB, d)
    multi = np.indices((m_boxes,) * ctx.dim).reshape(ctx.dim, -1).T
    q = ctx.q

    def work(a_flat: int) -> None:
        a_idx = multi[a_flat]
        theta_v = ctx.phase(nodes_a[a_flat][None, :, :], c_b[:, None, :])
        v = cis2pi(-theta_v) * prev.coeffs[:, a_flat, :]  # (nB, r)
        v = v.reshape((len(c_b),) + (q,) * ctx.dim)
        w = tensor_apply([e_mat] * ctx.dim, v, nbatch=1)  # (nB, mpts.., mpts)
        axes = [(a_idx[k] * mpts + np.arange(mpts)) / ctx.n for k in range(ctx.dim)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        theta_u = ctx.phase(pts[..., None, :], c_b[(None,) * ctx.dim])
        block = np.einsum("...b,b...->...", cis2pi(theta_u), w)
        sel = tuple(slice(a_idx[k] * mpts, (a_idx[k] + 1) * mpts) for k in range(ctx.dim))
        out[sel] += block
    ctx.map_slots(work, len(multi))
    return out


def apply_corona(
    decomp: CoronaDecomposition,
    j: int,
    phase,
    spectrum: np.ndarray,
    q: int,
    b: int,
    threads: int = 1,
    stats: LayerStats | None = None,
    out: np.ndarray | None = None,
    ctx: CoronaContext | None = None,
) -> np.ndarray:
    """Full staged pass over corona j; accumulates the potential into out."""
    if ctx is None:
        ctx = corona_context(decomp, j, phase, q, b, threads=threads, stats=stats)
    layer = initialize(ctx, spectrum)
    for _ in ctx.schedule.xi_step_targets():
        nxt = xi_step(ctx, layer)
        layer.release()
        layer = nxt
    nxt = switch(ctx, layer)
    layer.release()
    layer = nxt
    for _ in ctx.schedule.x_step_targets():
        nxt = x_step(ctx, layer)
        layer.release()
        layer = nxt
    out = terminate(ctx, layer, out=out)
    layer.release()
    return out
