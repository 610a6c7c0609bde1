"""Staged corona pass: per-stage accuracy, exactness identities, plumbing.

Per-stage accuracy is checked against a restricted oracle: the exact sum
over the lattice points owned by a single frequency box.  Stage tests on
the frequency side use b=8 grids; with b=4 the owned lattice points all
coincide with Chebyshev nodes and reconstruction is exact by cardinality,
which would make the test vacuous.
"""

import numpy as np
import pytest

from msbutterfly.butterfly import (
    CoeffLayer,
    LayerStats,
    apply_corona,
    corona_context,
    initialize,
    switch,
    terminate,
    x_step,
    xi_step,
)
from msbutterfly.chebinterp import cheb_grid, interp_weights
from msbutterfly.geometry import DyadicBox, build_corona_decomposition
from msbutterfly.kernels import cis2pi, phase_ex1
from msbutterfly.multiscale import FioPlan
from msbutterfly.oracle import (
    direct_apply_sampled,
    sample_spatial_points,
    sampled_relative_error,
)


def corona_spectrum(n, j=1, s=5, seed=0):
    d = build_corona_decomposition(n, 2, s)
    rng = np.random.default_rng(seed)
    full = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return d, np.where(d.corona_mask(j), full, 0)


def restricted_oracle(ctx, spectrum, level_b, b_index, x):
    """Exact potential of the lattice points owned by one frequency box."""
    ranges = ctx.tree.lattice_ranges(level_b, tuple(b_index))
    coords = [np.arange(lo, hi + 1) for lo, hi in ranges]
    half = ctx.n // 2
    vals = spectrum[tuple(slice(lo + half, hi + 1 + half) for lo, hi in ranges)]
    xi = np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1).reshape(-1, ctx.dim)
    w = vals.reshape(-1)
    return cis2pi(ctx.phase(x[:, None, :], xi[None, :, :])) @ w


def sample_in_a_box(ctx, level_a, a_index, count=10, seed=99):
    rng = np.random.default_rng(seed)
    w = 0.5**level_a
    low = np.asarray(a_index) * w
    return low + rng.random((count, ctx.dim)) * w


def recon_xi_side(ctx, layer, a_index, b_index, x):
    g_b = ctx.b_nodes(layer.level_b, np.asarray(b_index)[None, :])[0]
    alpha = cis2pi(ctx.phase(x[:, None, :], g_b[None, :, :]))
    return alpha @ layer.pair_coefficients(a_index, b_index)


def recon_x_side(ctx, layer, a_index, b_index, x):
    c_b = ctx.b_centers(layer.level_b, np.asarray(b_index)[None, :])[0]
    w = 0.5**layer.level_a
    center = (np.asarray(a_index) + 0.5) * w
    box = DyadicBox(
        level=layer.level_a, index=tuple(a_index), center=tuple(center), width=w
    )
    grid = cheb_grid(ctx.q, box)
    basis = interp_weights(grid).tensor_basis(x)
    demod = cis2pi(-ctx.phase(grid.tensor_nodes, c_b))
    coeff = layer.pair_coefficients(a_index, b_index)
    return cis2pi(ctx.phase(x, c_b)) * (basis @ (demod * coeff))


def rel(err_vec, ref_vec):
    return np.linalg.norm(err_vec - ref_vec) / np.linalg.norm(ref_vec)


def test_initialize_zero_spectrum():
    d, _ = corona_spectrum(64)
    ctx = corona_context(d, 1, phase_ex1, 5, 8)
    layer = initialize(ctx, np.zeros((64, 64), dtype=np.complex128))
    assert layer.side == "xi"
    assert layer.level_b == ctx.schedule.start_level_b
    assert np.all(layer.coeffs == 0)
    got = {tuple(ix) for ix in layer.b_indices}
    want = {tuple(ix) for ix in ctx.tree.nonempty_indices(layer.level_b)}
    assert got == want


def test_initialize_against_restricted_oracle():
    d, spec = corona_spectrum(64)
    ctx = corona_context(d, 1, phase_ex1, 7, 8)
    layer = initialize(ctx, spec)
    # an interior pair and the worst-case corner pair (measured
    # 5.2e-5 and 2.9e-3 at q=7)
    for a_idx, b_idx, tol in [
        ((1, 2), (0, 4), 5e-4),
        ((3, 3), (0, 0), 1e-2),
    ]:
        x = sample_in_a_box(ctx, layer.level_a, a_idx)
        want = restricted_oracle(ctx, spec, layer.level_b, b_idx, x)
        got = recon_xi_side(ctx, layer, a_idx, b_idx, x)
        assert rel(got, want) < tol


def test_switch_against_restricted_oracle():
    d, spec = corona_spectrum(64)
    ctx = corona_context(d, 1, phase_ex1, 7, 8)
    layer = switch(ctx, initialize(ctx, spec))
    assert layer.side == "x"
    a_idx, b_idx = (1, 2), (0, 4)  # measured 8.5e-4 at q=7
    x = sample_in_a_box(ctx, layer.level_a, a_idx)
    want = restricted_oracle(ctx, spec, layer.level_b, b_idx, x)
    got = recon_x_side(ctx, layer, a_idx, b_idx, x)
    assert rel(got, want) < 5e-3


def test_xi_step_against_restricted_oracle():
    # b=4 opens up a real xi step on a 64 grid (schedule 4 -> 3 -> 2)
    d, spec = corona_spectrum(64)
    ctx = corona_context(d, 1, phase_ex1, 7, 4)
    layer = xi_step(ctx, initialize(ctx, spec))
    assert layer.level_b == ctx.schedule.start_level_b - 1
    a_idx, b_idx = (1, 2), (0, 4)  # measured 3.8e-6 at q=7
    x = sample_in_a_box(ctx, layer.level_a, a_idx)
    want = restricted_oracle(ctx, spec, layer.level_b, b_idx, x)
    got = recon_xi_side(ctx, layer, a_idx, b_idx, x)
    assert rel(got, want) < 1e-4


def test_x_step_against_restricted_oracle():
    d, spec = corona_spectrum(64)
    ctx = corona_context(d, 1, phase_ex1, 7, 4)
    layer = x_step(ctx, switch(ctx, xi_step(ctx, initialize(ctx, spec))))
    assert layer.side == "x"
    assert layer.level_b == ctx.schedule.stop_level_b
    a_idx, b_idx = (14, 9), (3, 2)  # measured 2.8e-3 at q=7
    x = sample_in_a_box(ctx, layer.level_a, a_idx)
    want = restricted_oracle(ctx, spec, layer.level_b, b_idx, x)
    got = recon_x_side(ctx, layer, a_idx, b_idx, x)
    assert rel(got, want) < 1e-2


def zero_phase(x, xi):
    x = np.asarray(x, float)
    xi = np.asarray(xi, float)
    return np.zeros(np.broadcast_shapes(x.shape[:-1], xi.shape[:-1]))


def test_xi_step_zero_phase_equals_coarser_initialize():
    # With Phi = 0 the coefficients are plain interpolation moments, and
    # moving one level up reproduces the coarser moments exactly because
    # the transfer is degree-exact.
    d, spec = corona_spectrum(64, seed=2)
    ctx_fine = corona_context(d, 1, zero_phase, 6, 4)  # start level 4
    ctx_coarse = corona_context(d, 1, zero_phase, 6, 8)  # start level 3
    stepped = xi_step(ctx_fine, initialize(ctx_fine, spec))
    direct = initialize(ctx_coarse, spec)
    assert stepped.level_b == direct.level_b
    np.testing.assert_array_equal(stepped.b_indices, direct.b_indices)
    # A-resolution differs but Phi = 0 makes coefficients A-independent
    np.testing.assert_allclose(
        stepped.coeffs[:, 0, :], direct.coeffs[:, 0, :], atol=1e-12
    )
    np.testing.assert_allclose(
        stepped.coeffs, np.broadcast_to(stepped.coeffs[:, :1, :], stepped.coeffs.shape),
        atol=1e-12,
    )


def test_x_step_zero_phase_interpolates_polynomial():
    # Feed one child box coefficients that sample a polynomial on the
    # parent A grid; the step must reproduce its values on the child
    # A grids exactly.
    d, _ = corona_spectrum(64)
    ctx = corona_context(d, 1, zero_phase, 5, 4)
    lvl = ctx.schedule.switch_level_b  # 3: x_step target is 2
    child_idx = (2 * 3 + 1, 2 * 2 + 0)  # child of parent (3, 2)
    level_a_prev = ctx.level_a_of(lvl)
    nodes_p = ctx.a_nodes(level_a_prev)  # (nA, r, d)

    rng = np.random.default_rng(31)
    cx = rng.standard_normal((ctx.q, ctx.q))

    def poly(pts):
        return np.polynomial.polynomial.polyval2d(pts[..., 0], pts[..., 1], cx)

    prev = CoeffLayer(
        side="x",
        level_b=lvl,
        level_a=level_a_prev,
        b_indices=np.asarray([child_idx]),
        coeffs=poly(nodes_p)[None, :, :].astype(np.complex128),
    )
    layer = x_step(ctx, prev)
    nodes_c = ctx.a_nodes(layer.level_a)
    want = poly(nodes_c)
    parent_slot = layer.slot_of[(3, 2)]
    np.testing.assert_allclose(layer.coeffs[parent_slot], want, atol=1e-11)
    # parents whose children carried nothing stay identically zero
    other = layer.slot_of[(0, 2)]
    assert np.all(layer.coeffs[other] == 0)


def test_terminate_zero_phase_evaluates_interpolant():
    d, _ = corona_spectrum(64)
    ctx = corona_context(d, 1, zero_phase, 5, 8)
    lvl = ctx.schedule.stop_level_b
    level_a = ctx.level_a_of(lvl)
    nodes_a = ctx.a_nodes(level_a)
    rng = np.random.default_rng(32)
    cx = rng.standard_normal((ctx.q, ctx.q))

    def poly(pts):
        return np.polynomial.polynomial.polyval2d(pts[..., 0], pts[..., 1], cx)

    b_pick = ctx.tree.nonempty_indices(lvl)[:1]
    prev = CoeffLayer(
        side="x",
        level_b=lvl,
        level_a=level_a,
        b_indices=b_pick,
        coeffs=poly(nodes_a)[None, :, :].astype(np.complex128),
    )
    out = terminate(ctx, prev)
    ax = np.arange(ctx.n) / ctx.n
    x1, x2 = np.meshgrid(ax, ax, indexing="ij")
    want = np.polynomial.polynomial.polyval2d(x1, x2, cx)
    np.testing.assert_allclose(out, want, atol=1e-11)


def test_stage_level_guards():
    d, spec = corona_spectrum(64)
    ctx = corona_context(d, 1, phase_ex1, 5, 4)
    layer = initialize(ctx, spec)
    with pytest.raises(ValueError, match="switch"):
        switch(ctx, layer)  # still one xi step away
    moved = switch(ctx, xi_step(ctx, layer))
    with pytest.raises(ValueError, match="terminate"):
        terminate(ctx, moved)  # still one x step away


def test_apply_corona_against_oracle():
    n = 64
    d, spec = corona_spectrum(n, seed=22)
    multi, pts = sample_spatial_points(n, 2, count=64)
    plan = FioPlan(dim=2, n=n, q=5)
    exact = direct_apply_sampled(plan, spec, pts)
    errs = []
    for q in (5, 7, 9):
        u = apply_corona(d, 1, phase_ex1, spec, q, 8)
        errs.append(sampled_relative_error(u[tuple(multi.T)], exact))
    # measured 2.0e-1, 4.0e-2, 5.3e-3: monotone, better than 3x per step
    assert errs[0] < 5e-1 and errs[1] < 1e-1 and errs[2] < 2e-2
    assert all(a / b > 3 for a, b in zip(errs, errs[1:]))


def test_apply_corona_zero_spectrum():
    d, _ = corona_spectrum(64)
    out = apply_corona(d, 1, phase_ex1, np.zeros((64, 64), dtype=np.complex128), 5, 8)
    assert np.all(out == 0)


def test_apply_corona_single_box_support():
    # spectrum supported on the lattice of one leaf box, checked fully
    n = 64
    d, spec = corona_spectrum(n)
    ctx = corona_context(d, 1, phase_ex1, 7, 8)
    lvl = ctx.schedule.start_level_b
    keep = np.zeros_like(spec)
    ranges = ctx.tree.lattice_ranges(lvl, (0, 4))
    sel = tuple(slice(lo + n // 2, hi + 1 + n // 2) for lo, hi in ranges)
    keep[sel] = spec[sel]
    u = apply_corona(d, 1, phase_ex1, keep, 7, 8)
    multi, pts = sample_spatial_points(n, 2, count=48)
    want = restricted_oracle(ctx, keep, lvl, (0, 4), pts)
    assert sampled_relative_error(u[tuple(multi.T)], want) < 2e-2  # measured 1.2e-2


def test_apply_corona_is_linear():
    n = 64
    d, f = corona_spectrum(n, seed=5)
    _, g = corona_spectrum(n, seed=6)
    a, b = 1.5 - 0.5j, -2.0 + 1.0j
    ctx = corona_context(d, 1, phase_ex1, 5, 8)
    u_f = apply_corona(d, 1, phase_ex1, f, 5, 8, ctx=ctx)
    u_g = apply_corona(d, 1, phase_ex1, g, 5, 8, ctx=ctx)
    u_ab = apply_corona(d, 1, phase_ex1, a * f + b * g, 5, 8, ctx=ctx)
    scale = np.abs(u_ab).max()
    np.testing.assert_allclose(u_ab, a * u_f + b * u_g, atol=1e-10 * scale)


def test_layer_accounting_peak_two():
    n = 64
    d, spec = corona_spectrum(n)
    stats = LayerStats()
    apply_corona(d, 1, phase_ex1, spec, 5, 4, stats=stats)
    # schedule 4 -> 3 (xi) -> switch -> 2 (x) -> terminate: 4 layers total
    assert stats.created == 4
    assert stats.peak == 2
    assert stats.alive == 0


def test_threads_match_serial_exactly():
    n = 64
    d, spec = corona_spectrum(n, seed=9)
    u1 = apply_corona(d, 1, phase_ex1, spec, 5, 8, threads=1)
    u2 = apply_corona(d, 1, phase_ex1, spec, 5, 8, threads=2)
    np.testing.assert_array_equal(u1, u2)


def test_apply_corona_accumulates_into_out():
    n = 64
    d, spec = corona_spectrum(n, seed=11)
    base = np.full((n, n), 1.0 + 2.0j)
    out = base.copy()
    apply_corona(d, 1, phase_ex1, spec, 5, 8, out=out)
    alone = apply_corona(d, 1, phase_ex1, spec, 5, 8)
    np.testing.assert_allclose(out, base + alone, atol=1e-12)


def test_pair_coefficient_accessor():
    d, spec = corona_spectrum(64)
    ctx = corona_context(d, 1, phase_ex1, 5, 8)
    layer = initialize(ctx, spec)
    b_idx = tuple(layer.b_indices[3])
    vec = layer.pair_coefficients((2, 5), b_idx)
    assert vec.shape == (25,)
    flat = layer.a_flat((2, 5))
    np.testing.assert_array_equal(vec, layer.coeffs[3, flat])


def test_release_frees_layer():
    d, spec = corona_spectrum(64)
    stats = LayerStats()
    ctx = corona_context(d, 1, phase_ex1, 5, 8, stats=stats)
    layer = initialize(ctx, spec)
    assert stats.alive == 1
    layer.release()
    assert stats.alive == 0 and layer.coeffs is None
    layer.release()  # idempotent
    assert stats.alive == 0
