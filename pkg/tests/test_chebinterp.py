"""Chebyshev tensor interpolation on dyadic boxes."""

import numpy as np
import pytest

from msbutterfly.chebinterp import (
    barycentric_weights,
    cheb_grid,
    cheb_nodes_1d,
    interp_weights,
    lagrange_basis_1d,
    lagrange_eval,
    tensor_apply,
    transfer_matrix_1d,
)
from msbutterfly.geometry import DyadicBox


def test_nodes_span_and_symmetry():
    for q in (2, 5, 7, 9, 11):
        z = cheb_nodes_1d(q)
        assert z[0] == 0.5
        assert z[-1] == -0.5
        np.testing.assert_allclose(z, -z[::-1], atol=1e-16)
        assert np.all(np.diff(z) < 0)
    # frozen: z_1 for q = 5 is cos(pi/4)/2
    np.testing.assert_allclose(cheb_nodes_1d(5)[1], np.sqrt(2) / 4, rtol=1e-15)
    with pytest.raises(ValueError):
        cheb_nodes_1d(1)


def test_cardinality():
    z = cheb_nodes_1d(7)
    w = barycentric_weights(z)
    m = lagrange_basis_1d(z, w, z)
    np.testing.assert_allclose(m, np.eye(7), atol=1e-12)


def test_partition_of_unity():
    z = cheb_nodes_1d(9)
    w = barycentric_weights(z)
    pts = np.linspace(-0.5, 0.5, 313)
    m = lagrange_basis_1d(z, w, pts)
    np.testing.assert_allclose(m.sum(axis=-1), 1.0, atol=1e-12)


@pytest.mark.parametrize("q", [5, 7, 9, 11])
def test_polynomial_exactness_1d(q):
    # interpolation reproduces any polynomial of degree < q
    rng = np.random.default_rng(3)
    z = cheb_nodes_1d(q)
    w = barycentric_weights(z)
    coeffs = rng.standard_normal(q)
    p = np.polynomial.Polynomial(coeffs)
    pts = rng.uniform(-0.5, 0.5, size=200)
    m = lagrange_basis_1d(z, w, pts)
    np.testing.assert_allclose(m @ p(z), p(pts), atol=1e-10)


def test_tensor_grid_inside_box():
    box = DyadicBox(level=3, index=(2, 4), center=(0.3125, 0.5625), width=0.125)
    g = cheb_grid(7, box)
    assert g.size == 49
    assert g.tensor_nodes.shape == (49, 2)
    assert np.all(g.tensor_nodes >= box.low() - 1e-15)
    assert np.all(g.tensor_nodes <= box.high() + 1e-15)
    # first node is the (+w/2, +w/2) corner since z_0 = 1/2
    np.testing.assert_allclose(g.tensor_nodes[0], box.high(), rtol=1e-15)


def test_tensor_basis_2d_polynomial_exactness():
    box = DyadicBox(level=1, index=(0, 1), center=(0.25, 0.75), width=0.5)
    g = cheb_grid(6, box)
    iw = interp_weights(g)
    rng = np.random.default_rng(8)
    c = rng.standard_normal((6, 6))

    def p(pts):
        return np.polynomial.polynomial.polyval2d(pts[:, 0], pts[:, 1], c)

    pts = np.column_stack(
        [rng.uniform(0.0, 0.5, 400), rng.uniform(0.5, 1.0, 400)]
    )
    basis = iw.tensor_basis(pts)
    np.testing.assert_allclose(basis @ p(g.tensor_nodes), p(pts), atol=1e-9)


def test_lagrange_eval_is_cardinal_on_grid():
    box = DyadicBox(level=2, index=(1, 2), center=(0.375, 0.625), width=0.25)
    g = cheb_grid(5, box)
    iw = interp_weights(g)
    for t in (0, 7, 24):
        vals = lagrange_eval(iw, t, g.tensor_nodes)
        expect = np.zeros(g.size)
        expect[t] = 1.0
        np.testing.assert_allclose(vals, expect, atol=1e-12)


def test_edge_clamp():
    box = DyadicBox(level=1, index=(1, 1), center=(0.75, 0.75), width=0.5)
    iw = interp_weights(cheb_grid(4, box))
    eps = 1e-12  # within slack: snaps onto the face
    loc = iw.localize(np.array([[1.0 + eps, 0.6], [0.5 - eps, 0.6]]))
    assert loc[0, 0] == 0.5
    assert loc[1, 0] == -0.5
    far = iw.localize(np.array([[1.2, 0.6]]))
    assert far[0, 0] > 0.5  # beyond slack: left alone


def test_transfer_matrix_composition():
    # Transferring a polynomial to a child grid and back to points is
    # identical to evaluating directly (both are degree-exact).
    parent = cheb_nodes_1d(8)
    child = 0.25 + 0.5 * cheb_nodes_1d(8)  # upper half, rescaled
    rng = np.random.default_rng(12)
    p = np.polynomial.Polynomial(rng.standard_normal(8))
    t = transfer_matrix_1d(parent, child)
    assert t.shape == (8, 8)
    np.testing.assert_allclose(t.T @ p(parent), p(child), atol=1e-12)
    pts = rng.uniform(0.0, 0.5, 50)
    via_child = transfer_matrix_1d(child, pts).T @ (t.T @ p(parent))
    np.testing.assert_allclose(via_child, p(pts), atol=1e-11)


def test_tensor_apply_matches_kron():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((5, 6))
    x = rng.standard_normal((4, 6))
    got = tensor_apply([a, b], x)
    want = (np.kron(a, b) @ x.reshape(-1)).reshape(3, 5)
    np.testing.assert_allclose(got, want, atol=1e-13)


def test_tensor_apply_batched():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((2, 3))
    b = rng.standard_normal((2, 3))
    x = rng.standard_normal((7, 3, 3))
    got = tensor_apply([a, b], x, nbatch=1)
    assert got.shape == (7, 2, 2)
    for i in range(7):
        np.testing.assert_allclose(got[i], tensor_apply([a, b], x[i]), atol=1e-13)
    with pytest.raises(ValueError):
        tensor_apply([a, b], x)  # rank mismatch without nbatch
