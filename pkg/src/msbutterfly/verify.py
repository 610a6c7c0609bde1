"""Self-check suites behind the `verify` subcommand.

Each suite runs a fixed list of named checks at small sizes and returns
one (label, ok, detail) triple per check.  They double as a quick smoke
screen after installs: everything here finishes in seconds except the
rank sweep and the oracle comparison, which take tens of seconds.
"""

from __future__ import annotations

import numpy as np

from .chebinterp import barycentric_weights, cheb_grid, cheb_nodes_1d, lagrange_basis_1d
from .geometry import DyadicBox, build_corona_decomposition, corona_bounding_tree, level_schedule
from .kernels import (
    amplitude_sample_sets,
    amp_ex2,
    bessel_j0,
    bessel_y0,
    cis2pi,
    expansion_alpha_xi,
    expansion_beta_xi,
    factorize_amplitude,
    get_scenario,
    residual_phase,
)
from .multiscale import FioOperator, FioPlan
from .oracle import (
    direct_apply_sampled,
    full_direct_apply,
    sample_spatial_points,
    sampled_relative_error,
)

Check = tuple[str, bool, str]

# J0/Y0 at digits beyond what the implementation targets (1e-7 absolute)
_BESSEL_TABLE = (
    (0.5, 0.9384698072408129, -0.44451873350670656),
    (1.0, 0.76519768655796655, 0.088256964215676958),
    (2.0, 0.22389077914123567, 0.51037567264974512),
    (6.283185307179586, 0.22027690853993441, -0.22910851002471912),
    (10.0, -0.24593576445134834, 0.055671167283599391),
    (50.0, 0.055812327669251815, -0.098064995470077079),
    (1000.0, 0.024786686152420175, 0.0047159179776228134),
    (9999.0, -0.0007645874860391963, 0.0079425279330800068),
)


def geometry_suite() -> list[Check]:
    out: list[Check] = []
    for n, dim, s in ((16, 2, 3), (64, 2, 5), (16, 3, 3), (64, 3, 5)):
        d = build_corona_decomposition(n, dim, s)
        cover = d.center_mask().astype(int)
        for sh in d.shells:
            cover = cover + d.corona_mask(sh.j).astype(int)
        ok = bool(np.all(cover == 1))
        out.append((f"partition n={n} dim={dim} s={s}", ok, f"coverage in [{cover.min()},{cover.max()}]"))

    # boundary convention: strict lower, inclusive upper
    d = build_corona_decomposition(64, 2, 4)
    m1 = d.corona_mask(1)
    m2 = d.corona_mask(2)
    at = lambda xi1, xi2: (xi1 + 32, xi2 + 32)
    ok = (not m1[at(16, 0)]) and m2[at(16, 0)] and m1[at(17, 0)] and m1[at(-32, 5)]
    out.append(("corona boundary max|xi|=n/4 in shell 2", bool(ok), ""))

    for nj, b, want in ((256, 8, (5, 4, 3)), (64, 8, (3, 3, 3)), (512, 8, (6, 5, 3))):
        sch = level_schedule(nj, b)
        got = (sch.start_level_b, sch.switch_level_b, sch.stop_level_b)
        out.append((f"schedule nj={nj} b={b}", got == want, f"got {got}, want {want}"))

    # box widths pair to w_A * w_B = 1 at every scheduled stage
    sch = level_schedule(256, 8)
    ok = all(
        (256 / 2**lb) * (1.0 / 2 ** (sch.l_total - lb)) == 1.0
        for lb in range(sch.stop_level_b, sch.start_level_b + 1)
    )
    out.append(("width product w_A*w_B = 1", ok, ""))

    # bounding tree marks exactly the boxes that meet the corona
    d = build_corona_decomposition(64, 2, 5)
    tree = corona_bounding_tree(d, 1)
    lvl = 3
    idx = tree.nonempty_indices(lvl)
    m = d.corona_mask(1)
    want_nonempty = set()
    for ij in np.ndindex(*(2**lvl,) * 2):
        ranges = tree.lattice_ranges(lvl, ij)
        sl = tuple(slice(lo + 32, hi + 1 + 32) for lo, hi in ranges)
        if np.any(m[sl]):
            want_nonempty.add(ij)
    got_nonempty = {tuple(v) for v in idx}
    out.append(
        ("bounding-tree emptiness flags n=64 corona 1", got_nonempty == want_nonempty,
         f"{len(got_nonempty)} nonempty boxes")
    )
    return out


def chebyshev_suite() -> list[Check]:
    out: list[Check] = []
    rng = np.random.default_rng(11)
    for q in (5, 7, 9, 11):
        z = cheb_nodes_1d(q)
        w = barycentric_weights(z)
        ok = abs(z[0] - 0.5) < 1e-15 and abs(z[-1] + 0.5) < 1e-15 and np.allclose(z, -z[::-1])
        out.append((f"nodes q={q} span and symmetry", bool(ok), ""))

        basis = lagrange_basis_1d(z, w, z)
        err_card = np.max(np.abs(basis - np.eye(q)))
        out.append((f"cardinality q={q}", err_card <= 1e-12, f"max dev {err_card:.2e}"))

        pts = rng.uniform(-0.5, 0.5, 200)
        pou = np.max(np.abs(lagrange_basis_1d(z, w, pts).sum(axis=1) - 1.0))
        out.append((f"partition of unity q={q}", pou <= 1e-12, f"max dev {pou:.2e}"))

        coeff = rng.normal(size=q)
        vals = np.polyval(coeff, pts)
        interp = lagrange_basis_1d(z, w, pts) @ np.polyval(coeff, z)
        err_ex = np.max(np.abs(interp - vals))
        out.append((f"degree<{q} exactness", err_ex <= 1e-10, f"max err {err_ex:.2e}"))

    # child-to-parent transfer equals direct evaluation on the child grid
    q = 7
    z = cheb_nodes_1d(q)
    w = barycentric_weights(z)
    coeff = rng.normal(size=q)
    for shift, half in ((-0.25, "low"), (0.25, "high")):
        child = 0.5 * z + shift
        direct = np.polyval(coeff, child)
        via = lagrange_basis_1d(z, w, child) @ np.polyval(coeff, z)
        err = np.max(np.abs(via - direct))
        out.append((f"transfer to {half} child", err <= 1e-12, f"max err {err:.2e}"))

    box = DyadicBox(level=1, index=(0, 1), center=(0.25, 0.75), width=0.5)
    grid = cheb_grid(q, box)
    pts2 = grid.tensor_nodes
    ok = pts2.shape == (q * q, 2) and np.all(pts2 >= box.low()) and np.all(pts2 <= box.high())
    out.append(("tensor grid inside its box", bool(ok), ""))
    return out


def kernels_suite() -> list[Check]:
    out: list[Check] = []
    rng = np.random.default_rng(5)
    for name, mode in (("ex1", "sphere"), ("ex3", "sphere"), ("ex3", "literal")):
        sc = get_scenario(name, mode)
        x = rng.random((40, sc.dim))
        xi = rng.uniform(-40, 40, (40, sc.dim))
        base = sc.phase(x, xi)
        worst = 0.0
        for t in (2.0, 4.0, 7.5):
            scaled = sc.phase(x, t * xi)
            worst = max(worst, np.max(np.abs(scaled - t * base) / np.maximum(1.0, np.abs(t * base))))
        label = name if name != "ex3" else f"{name}/{mode}"
        out.append((f"phase homogeneity {label}", worst <= 1e-12, f"rel dev {worst:.2e}"))

    sc = get_scenario("ex1")
    box_a = DyadicBox(level=3, index=(2, 4), center=(0.3125, 0.5625), width=0.125)
    box_b = DyadicBox(level=2, index=(5, 1), center=(24.0, -8.0), width=8.0)
    xs = rng.uniform(box_a.low(), box_a.high(), (30, 2))
    xis = rng.uniform(box_b.low(), box_b.high(), (30, 2))
    ca = np.broadcast_to(box_a.center_array(), (30, 2))
    cb = np.broadcast_to(box_b.center_array(), (30, 2))
    r1 = residual_phase(sc.phase, box_a, box_b, ca, xis)
    r2 = residual_phase(sc.phase, box_a, box_b, xs, cb)
    zero = max(np.max(np.abs(r1)), np.max(np.abs(r2)))
    out.append(("residual phase zero lines", zero <= 1e-12, f"max |R| {zero:.2e}"))

    ej = max(abs(bessel_j0(x) - j) for x, j, _ in _BESSEL_TABLE)
    ey = max(abs(bessel_y0(x) - y) for x, _, y in _BESSEL_TABLE)
    ez = abs(bessel_j0(2.404825557695773))
    ok = ej <= 1e-7 and ey <= 1e-7 and ez <= 1e-8 and bessel_j0(0.0) == 1.0
    out.append(("bessel J0/Y0 reference table", bool(ok), f"J0 {ej:.1e}, Y0 {ey:.1e}, zero {ez:.1e}"))

    xs_s, xis_s, xv, xiv = amplitude_sample_sets(256, 2, 5)
    fact = factorize_amplitude(amp_ex2, xs_s, xis_s, 1e-4, x_validate=xv, xi_validate=xiv)
    ok = fact.rank <= 64 and fact.sample_residual <= 1e-4
    out.append(
        ("amplitude factorization rank cap", bool(ok),
         f"rank {fact.rank}, sample res {fact.sample_residual:.1e}, fresh res {fact.residual_bound:.1e}")
    )
    return out


def rank_suite() -> list[Check]:
    """Numerical low-rank evidence on every scheduled pair of corona 1."""
    out: list[Check] = []
    decomp = build_corona_decomposition(64, 2, 5)
    sc = get_scenario("ex1")
    tree = corona_bounding_tree(decomp, 1)
    sch = level_schedule(tree.shell.n_j, 8)
    lvl = sch.start_level_b
    la = sch.l_total - lvl
    b_idx = tree.nonempty_indices(lvl)
    loc = (np.arange(12) + 0.5) / 12.0

    wa = 1.0 / 2**la
    wb = tree.shell.n_j / 2**lvl
    worst = 0.0
    count = 0
    for ia in np.ndindex(*(2**la,) * 2):
        alow = np.array(ia) * wa
        box_a = DyadicBox(level=la, index=tuple(ia), center=tuple(alow + 0.5 * wa), width=wa)
        ax = alow[:, None] + wa * loc
        xpts = np.stack(np.meshgrid(ax[0], ax[1], indexing="ij"), -1).reshape(-1, 2)
        for ib in b_idx:
            box_b = tree.box(lvl, tuple(ib))
            blow = box_b.low()
            bx = blow[:, None] + wb * loc
            xipts = np.stack(np.meshgrid(bx[0], bx[1], indexing="ij"), -1).reshape(-1, 2)
            r = residual_phase(sc.phase, box_a, box_b, xpts[:, None, :], xipts[None, :, :])
            sv = np.linalg.svd(cis2pi(r), compute_uv=False)
            worst = max(worst, sv[49] / sv[0])
            count += 1
    out.append(
        (f"sigma_50/sigma_1 over {count} pairs", worst <= 1e-5, f"worst {worst:.2e}")
    )

    # expansion error falls monotonically in q on a stressed pair
    box_a = DyadicBox(level=3, index=(7, 7), center=(0.9375, 0.9375), width=0.125)
    box_b = DyadicBox(level=2, index=(7, 7), center=(28.0, 28.0), width=8.0)
    rng = np.random.default_rng(2)
    xs = rng.uniform(box_a.low(), box_a.high(), (64, 2))
    xis = rng.uniform(box_b.low(), box_b.high(), (64, 2))
    kern = cis2pi(sc.phase(xs[:, None, :], xis[None, :, :]))
    errs = []
    for q in (5, 7, 9, 11):
        grid_b = cheb_grid(q, box_b)
        alpha = expansion_alpha_xi(sc.phase, grid_b, xs)
        beta = expansion_beta_xi(sc.phase, box_a, grid_b, xis)
        errs.append(np.max(np.abs(kern - alpha @ beta.T)))
    mono = all(a > b for a, b in zip(errs, errs[1:]))
    out.append(
        ("expansion error monotone in q", mono, "errs " + ", ".join(f"{e:.2e}" for e in errs))
    )
    return out


def oracle_equivalence_suite() -> list[Check]:
    from .cli import generate_input

    out: list[Check] = []
    plan = FioPlan(dim=2, n=64, q=9)
    f_hat = generate_input(64, 2, seed=0)
    u = FioOperator(plan).apply(f_hat)
    idx, pts = sample_spatial_points(64, 2, count=64)
    exact = direct_apply_sampled(plan, f_hat, pts)
    eps = sampled_relative_error(u[tuple(idx.T)], exact)
    out.append(("n=64 q=9 sampled oracle", eps <= 1e-3, f"eps {eps:.3e} vs 1e-3"))

    plan32 = FioPlan(dim=2, n=32, q=9, b=4, s=4)
    f_hat = generate_input(32, 2, seed=0)
    u = FioOperator(plan32).apply(f_hat)
    eps = sampled_relative_error(u, full_direct_apply(plan32, f_hat))
    out.append(("n=32 q=9 full-grid oracle", eps <= 1e-3, f"eps {eps:.3e} vs 1e-3"))
    return out


SUITES = {
    "geometry": geometry_suite,
    "chebyshev": chebyshev_suite,
    "kernels": kernels_suite,
    "rank": rank_suite,
    "oracle-equivalence": oracle_equivalence_suite,
}


def run_suite(name: str) -> tuple[bool, list[str]]:
    """Run one suite (or "all"); returns overall pass and printable lines."""
    names = list(SUITES) if name == "all" else [name]
    lines: list[str] = []
    ok_all = True
    for nm in names:
        for label, ok, detail in SUITES[nm]():
            ok_all &= ok
            tail = f"  ({detail})" if detail else ""
            lines.append(f"[{'PASS' if ok else 'FAIL'}] {nm}: {label}{tail}")
    return ok_all, lines
