from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgweno.element import (
    ReferenceElement,
    build_space,
    cell_average,
    evaluate,
    gauss_legendre,
    interpolate,
)
from cgweno.mesh import BOUNDED, build_mesh


def test_dof_counts():
    assert build_space(build_mesh(1, 16, (0, 1)), 1).n_dofs == 16
    assert build_space(build_mesh(1, 50, (0, 1)), 4).n_dofs == 200
    assert build_space(build_mesh(2, 128, ((0, 1), (0, 1)), BOUNDED), 1).n_dofs == 129**2
    assert build_space(build_mesh(2, 5, ((0, 1), (0, 1))), 3).n_dofs == 15**2
    assert build_space(build_mesh(2, (4, 6), ((0, 1), (0, 1)), BOUNDED), 2).n_dofs == 9 * 13


@pytest.mark.parametrize("p", [1, 2, 3, 4])
@pytest.mark.parametrize("nodes", ["equispaced", "gauss-lobatto"])
def test_reference_basis(p, nodes):
    for dim in (1, 2):
        ref = ReferenceElement(p, dim, nodes)
        assert np.allclose(ref.tabulate(ref.quad_points).sum(axis=1), 1.0, atol=1e-13)
        assert np.allclose(ref.tabulate(ref.nodes), np.eye(ref.n_local), atol=1e-12)
        assert ref.quad_weights.sum() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_gauss_exactness(n):
    x, w = gauss_legendre(n)
    for deg in range(2 * n):
        assert w @ x**deg == pytest.approx(1.0 / (deg + 1), rel=1e-13)


def test_evaluate_examples():
    space = build_space(build_mesh(1, 4, (0, 1)), 1)
    out = evaluate(space, np.full(space.n_dofs, 2.5), 1, [[0.1], [0.7]])
    assert np.allclose(out[(0,)], 2.5) and np.allclose(out[(1,)], 0.0)

    u = np.zeros(space.n_dofs)
    u[space.cell_dofs[1]] = [0.0, 1.0]
    out = evaluate(space, u, 1, np.linspace(0, 1, 5))
    assert np.allclose(out[(1,)], 4.0)  # 1 / h

    mesh = build_mesh(1, 3, (0, 1))
    space = build_space(mesh, 2)
    u = interpolate(space, lambda x: x**2).values
    # cell 0 does not touch the periodic seam, so u_h = x^2 there
    out = evaluate(space, u, 0, np.linspace(0, 1, 7))
    assert np.allclose(out[(2,)], 2.0)
    assert np.allclose(out[(1,)], 2 * np.linspace(0, 1, 7) / 3)


def test_interpolate_examples():
    space = build_space(build_mesh(1, 8, (0, 1)), 1)
    assert np.all(interpolate(space, lambda x: np.ones_like(x)).values == 1.0)
    u = interpolate(space, lambda x: np.cos(2 * np.pi * (x - 0.5))).values
    node = np.flatnonzero(np.isclose(space.dof_coords[:, 0], 0.5))[0]
    assert u[node] == pytest.approx(1.0)

    for p in (1, 2, 3, 4):
        space = build_space(build_mesh(1, 5, (0, 1), BOUNDED), p)
        u = interpolate(space, lambda x: x).values
        assert np.allclose(space.values_at_quad(u), space.quad_points[..., 0], atol=1e-14)


def test_cell_average_examples():
    space = build_space(build_mesh(1, 4, (0, 1)), 1)
    assert cell_average(space, np.full(space.n_dofs, 3.0), 2) == pytest.approx(3.0)
    u = np.zeros(space.n_dofs)
    u[space.cell_dofs[1]] = [0.0, 1.0]
    assert cell_average(space, u, 1) == pytest.approx(0.5)

    space = build_space(build_mesh(1, 1, (0, 1), BOUNDED), 2)
    u = interpolate(space, lambda x: x**2)
    assert u.cell_average(0) == pytest.approx(1.0 / 3.0)


def test_continuity_of_shared_dofs():
    space = build_space(build_mesh(2, 3, ((0, 1), (0, 1)), BOUNDED), 2)
    ref = space.ref
    # right face of cell 0 equals the left face of cell 1
    right = space.cell_dofs[0][ref.node_index[:, 0] == 2]
    left = space.cell_dofs[1][ref.node_index[:, 0] == 0]
    assert np.array_equal(right, left)
    coords = space.dof_coords[space.cell_dofs]
    expected = space.mesh.origins[:, None, :] + ref.nodes[None] * space.mesh.spacing
    assert np.allclose(coords, expected)


@given(st.integers(1, 4), st.integers(1, 2), st.integers(0, 2**31 - 1))
def test_interpolate_evaluate_roundtrip(p, dim, seed):
    space = build_space(build_mesh(dim, 3, ((0, 1),) * dim), p)
    u = np.random.default_rng(seed).standard_normal(space.n_dofs)
    for e in range(space.n_cells):
        vals = evaluate(space, u, e, space.ref.nodes)[(0,) * dim]
        assert np.allclose(vals, u[space.cell_dofs[e]], atol=1e-12)


@given(st.integers(1, 4), st.floats(0.2, 5.0))
def test_derivative_scaling(p, width):
    """Doubling the cell width halves first derivatives of a fixed nodal pattern."""
    values = np.random.default_rng(p).standard_normal(p * 3)
    derivs = []
    for w in (width, 2 * width):
        space = build_space(build_mesh(1, 3, (0, w)), p)
        derivs.append(evaluate(space, values, 1, np.linspace(0, 1, 4))[(1,)])
    assert np.allclose(derivs[0], 2 * derivs[1], rtol=1e-10, atol=1e-12)
