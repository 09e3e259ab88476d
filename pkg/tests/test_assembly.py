from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgweno.assembly import (
    ConvectiveOperator,
    MassSolveError,
    assemble_mass,
    convective_residual,
    inflow_boundary_residual,
    mass_solve,
)
from cgweno.element import build_space, interpolate
from cgweno.mesh import BOUNDED, build_mesh
from cgweno.problems import Burgers, KPPFlux, LinearAdvection, solid_body_rotation


def unit_velocity(x):
    return np.ones(np.shape(x)[:-1] + (1,))


def test_single_cell_mass_block():
    h = 0.3
    space = build_space(build_mesh(1, 1, (0, h), BOUNDED), 1)
    mass = assemble_mass(space)
    assert np.allclose(mass.matrix.toarray(), h / 6 * np.array([[2, 1], [1, 2]]), atol=1e-15)
    assert np.allclose(assemble_mass(space, lumped=True).lumped, [h / 2, h / 2])


@pytest.mark.parametrize("dim,mode", [(1, "periodic"), (2, "periodic"), (2, BOUNDED)])
@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_mass_sums_to_domain_measure(dim, mode, p):
    space = build_space(build_mesh(dim, 3, ((0, 2),) * dim, mode), p)
    mass = assemble_mass(space)
    assert mass.matrix.sum() == pytest.approx(2.0**dim, rel=1e-12)
    assert abs(mass.matrix - mass.matrix.T).max() < 1e-15
    assert np.all(mass.lumped > 0)


def test_mass_solve_examples():
    space = build_space(build_mesh(1, 2, (0, 1)), 1)
    mass = assemble_mass(space, method="cg")
    rows = np.asarray(mass.matrix.sum(axis=1)).ravel()
    assert np.allclose(mass_solve(mass, rows), 1.0, atol=1e-12)
    assert np.allclose(mass.solve(rows), 1.0, atol=1e-12)

    lumped = assemble_mass(space, lumped=True)
    assert np.array_equal(mass_solve(lumped, lumped.lumped), np.ones(space.n_dofs))

    space = build_space(build_mesh(2, 4, ((0, 1), (0, 1)), BOUNDED), 3)
    x = np.random.default_rng(3).standard_normal(space.n_dofs)
    for method in ("direct", "cg"):
        mass = assemble_mass(space, method=method)
        assert np.allclose(mass.solve(mass.apply(x)), x, atol=1e-9)
        stacked = mass.solve(np.stack([mass.apply(x), 2 * mass.apply(x)]))
        assert np.allclose(stacked[1], 2 * x, atol=1e-9)


@pytest.mark.parametrize("mode,cells,p,nodes", [
    (BOUNDED, (3, 5), 2, "equispaced"),
    ("periodic", (4, 3), 3, "gauss-lobatto"),
    (BOUNDED, (2, 2), 1, "equispaced"),
])
def test_factored_mass_solve_matches_dense(mode, cells, p, nodes):
    space = build_space(build_mesh(2, cells, ((0, 1), (-1, 2)), mode), p, nodes=nodes)
    mass = assemble_mass(space)
    assert mass.factors is not None
    rhs = np.random.default_rng(5).standard_normal((3, space.n_dofs))
    dense = np.linalg.solve(mass.matrix.toarray(), rhs.T).T
    assert np.allclose(mass.solve(rhs), dense, rtol=0, atol=1e-9 * np.abs(dense).max())
    assert np.allclose(mass.solve(rhs[1]), dense[1], rtol=0, atol=1e-9 * np.abs(dense).max())


def test_mass_solve_failure_is_reported():
    space = build_space(build_mesh(1, 20, (0, 1)), 4)
    mass = assemble_mass(space, method="cg")
    rhs = np.random.default_rng(0).standard_normal(space.n_dofs)
    with pytest.raises(MassSolveError):
        mass_solve(mass, rhs, tolerance=1e-14, maxiter=1)


def test_convective_residual_of_constants():
    flux = solid_body_rotation().flux
    space = build_space(build_mesh(2, 6, ((0, 1), (0, 1)), BOUNDED), 2)
    const = np.full(space.n_dofs, 0.7)
    assert np.abs(convective_residual(space, const, flux)).max() < 1e-12
    assert np.abs(ConvectiveOperator(space, flux)(const)).max() < 1e-12
    space1 = build_space(build_mesh(1, 5, (0, 1)), 3)
    assert np.abs(convective_residual(space1, np.full(space1.n_dofs, -0.4), Burgers())).max() < 1e-14


@pytest.mark.parametrize("p", [2, 3, 4])
def test_periodic_conservation(p):
    space = build_space(build_mesh(1, 40, (0, 1)), p)
    u = interpolate(space, lambda x: np.sin(2 * np.pi * x)).values
    r = convective_residual(space, u, LinearAdvection(unit_velocity))
    assert abs(r.sum()) < 1e-12
    assert abs(convective_residual(space, u, Burgers()).sum()) < 1e-12


def test_single_cell_quadratic_advection():
    # u = x^2 on [0, 1], v = 1: r_i = -int phi_i 2x dx
    space = build_space(build_mesh(1, 1, (0, 1), BOUNDED), 2)
    u = interpolate(space, lambda x: x**2).values
    r = convective_residual(space, u, LinearAdvection(unit_velocity))
    # quadratic Lagrange basis on nodes 0, 1/2, 1 against 2x
    assert np.allclose(r, -np.array([0.0, 2.0 / 3.0, 1.0 / 3.0]), atol=1e-14)


def test_linear_operator_matches_quadrature():
    flux = solid_body_rotation().flux
    space = build_space(build_mesh(2, 5, ((0, 1), (0, 1)), BOUNDED), 2)
    u = np.random.default_rng(1).standard_normal(space.n_dofs)
    assert np.allclose(ConvectiveOperator(space, flux)(u), convective_residual(space, u, flux),
                       atol=1e-13)


def test_inflow_examples():
    periodic = build_space(build_mesh(1, 4, (0, 1)), 2)
    u = np.random.default_rng(0).standard_normal(periodic.n_dofs)
    assert np.all(inflow_boundary_residual(periodic, u, LinearAdvection(unit_velocity)) == 0)

    prob = solid_body_rotation()
    space = build_space(build_mesh(2, 8, prob.bounds, BOUNDED), 2)
    zero = np.zeros(space.n_dofs)
    assert np.all(inflow_boundary_residual(space, zero, prob.flux, 0.0) == 0)
    held = np.full(space.n_dofs, np.pi / 4)
    assert np.abs(inflow_boundary_residual(space, held, KPPFlux(), np.pi / 4)).max() < 1e-15


def test_inflow_acts_only_on_inflow_side():
    space = build_space(build_mesh(1, 4, (0, 1), BOUNDED), 1)
    r = inflow_boundary_residual(space, np.ones(space.n_dofs), LinearAdvection(unit_velocity), 0.0)
    # v = 1 enters at x = 0: the term pulls u back towards u_in there
    assert r[0] == pytest.approx(-1.0)
    assert np.all(r[1:] == 0)


@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_residual_conserves_periodic_mass(p, seed):
    # fluxes whose chain-rule integrand the quadrature rule integrates exactly
    rng = np.random.default_rng(seed)
    space = build_space(build_mesh(1, 5, (0, 1)), p)
    u = rng.uniform(-2, 2, space.n_dofs)
    assert abs(convective_residual(space, u, Burgers()).sum()) < 1e-11

    space = build_space(build_mesh(2, 3, ((0, 1), (0, 1))), p)
    u = rng.uniform(-2, 2, space.n_dofs)
    assert abs(convective_residual(space, u, solid_body_rotation().flux).sum()) < 1e-11
