"""Ground truth by brute force, and the sampled relative error metric.

Everything here is deliberately dumb: full kernel evaluation against
every lattice point, no trees, no interpolation, no shared code with
the fast path beyond the kernel functions themselves.  The sample set
is drawn from its own fixed stream so it never correlates with any
input seed.
"""

from __future__ import annotations

import numpy as np

from .geometry import FrequencyGrid, SpatialGrid
from .kernels import cis2pi, get_scenario
from .multiscale import _DIRECT_BLOCK, FioPlan

# dedicated stream for picking sample points; input spectra use
# counter-based generation elsewhere, so the two can never collide
_SAMPLE_SEED = 0x5EED5A11


def sample_spatial_points(n: int, dim: int, count: int = 256):
    """Deterministic grid-point sample, without replacement.

    Returns (multi_index, points): integer indices into the (n,)*dim
    array, shape (count, dim), and the matching coordinates x = k/n.
    If count covers the whole grid the sample is the full grid in row
    order.
    """
    total = n**dim
    if count >= total:
        flat = np.arange(total)
    else:
        rng = np.random.default_rng(_SAMPLE_SEED)
        seen: dict[int, None] = {}
        while len(seen) < count:
            for v in rng.integers(0, total, size=2 * count):
                seen.setdefault(int(v), None)
                if len(seen) == count:
                    break
        flat = np.fromiter(seen.keys(), dtype=np.int64, count=count)
    multi = np.stack(np.unravel_index(flat, (n,) * dim), axis=-1)
    return multi, multi / float(n)


def direct_apply_sampled(plan: FioPlan, f_hat: np.ndarray, x_points: np.ndarray) -> np.ndarray:
    """Exact potential at the given x points, summing the whole lattice."""
    sc = get_scenario(plan.scenario, plan.ex3_mode)
    spec = np.asarray(f_hat, dtype=np.complex128).reshape(-1)
    if spec.size != plan.n**plan.dim:
        raise ValueError(f"expected {plan.n ** plan.dim} spectrum values, got {spec.size}")
    fax = FrequencyGrid(plan.n, plan.dim).axis().astype(float)
    mesh = np.meshgrid(*([fax] * plan.dim), indexing="ij")
    xi = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    pts = np.atleast_2d(np.asarray(x_points, dtype=float))
    out = np.zeros(pts.shape[0], dtype=np.complex128)
    step = max(1, _DIRECT_BLOCK // pts.shape[0])
    for lo in range(0, xi.shape[0], step):
        xb = xi[lo : lo + step]
        block = cis2pi(sc.phase(pts[:, None, :], xb[None, :, :]))
        if not sc.amplitude.is_unit:
            block *= sc.amplitude(pts[:, None, :], xb[None, :, :])
        out += block @ spec[lo : lo + step]
    return out


def full_direct_apply(plan: FioPlan, f_hat: np.ndarray) -> np.ndarray:
    """Exact potential on the whole grid; only sane for small n."""
    grid = SpatialGrid(plan.n, plan.dim)
    ax = grid.axis()
    mesh = np.meshgrid(*([ax] * plan.dim), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    return direct_apply_sampled(plan, f_hat, pts).reshape(grid.shape)


def sampled_relative_error(u_approx: np.ndarray, u_exact: np.ndarray) -> float:
    """Relative l2 error over the sample set: ||d - a|| / ||d||."""
    a = np.asarray(u_approx).reshape(-1)
    d = np.asarray(u_exact).reshape(-1)
    if a.shape != d.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {d.shape}")
    denom = np.sum(np.abs(d) ** 2)
    if denom == 0:
        raise ValueError("exact potential is identically zero on the sample")
    return float(np.sqrt(np.sum(np.abs(d - a) ** 2) / denom))
