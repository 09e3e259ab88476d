from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgweno.element import build_space, interpolate
from cgweno.mesh import BOUNDED, build_mesh
from cgweno.problems import (
    PROBLEMS,
    Burgers,
    KPPFlux,
    antisymmetry_defect,
    burgers_exact,
    eoc,
    extrema,
    get_problem,
    kpp_initial,
    l1_error,
    sbr_initial,
)


def test_registry_and_unknown_name():
    assert set(PROBLEMS) == {"adv1d-smooth", "adv1d-disc", "burgers", "sbr", "kpp"}
    with pytest.raises(ValueError, match="valid problems"):
        get_problem("nope")


def test_smooth_advection_exact_is_translation():
    prob = get_problem("adv1d-smooth")
    x = np.linspace(0, 1, 11)
    assert np.allclose(prob.exact(0.3, x), np.cos(2 * np.pi * (x - 0.3 - 0.5)))
    assert np.allclose(prob.exact(1.0, x), prob.initial(x))
    assert prob.overrides.get("q") == 3


def test_hat_and_bump_values():
    u0 = get_problem("adv1d-disc").initial
    assert np.allclose(u0(np.array([0.1, 0.2, 0.3, 0.4, 0.45, 0.5, 0.9, 0.95])), [0, 1, 1, 0, 0, 0, 0, 0])
    # the bump peaks at 1 in the middle of (0.5, 0.9)
    assert u0(np.array([0.7]))[0] == pytest.approx(1.0, rel=1e-14)


def test_burgers_exact_solves_implicit_equation():
    x = np.linspace(0, 1, 201)
    for t in (0.0, 0.05, 0.1, 0.15):
        u = burgers_exact(t, x)
        assert np.abs(u - np.sin(2 * np.pi * (x - u * t))).max() < 1e-12


def test_burgers_exact_rejects_post_shock_time():
    with pytest.raises(ValueError):
        burgers_exact(0.2, np.zeros(3))


def test_sbr_exact_after_full_turn():
    prob = get_problem("sbr")
    # random points avoid the discontinuity edges, where roundoff could flip a value
    x, y = np.random.default_rng(0).uniform(0, 1, (2, 2000))
    assert np.allclose(prob.exact(1.0, x, y), sbr_initial(x, y), atol=1e-12)
    # a quarter turn carries the hump centre (0.25, 0.5) to (0.5, 0.25)
    assert prob.exact(0.25, 0.5, 0.25) == pytest.approx(sbr_initial(0.25, 0.5))


def test_sbr_initial_shapes():
    assert sbr_initial(0.25, 0.5) == pytest.approx(0.5)
    assert sbr_initial(0.5, 0.25) == pytest.approx(1.0)
    assert sbr_initial(0.5, 0.75) == 0.0  # inside the slot
    assert sbr_initial(0.45, 0.75) == 1.0
    assert sbr_initial(0.9, 0.9) == 0.0


def test_kpp_setup():
    prob = get_problem("kpp")
    assert kpp_initial(0.0, 0.0) == pytest.approx(3.5 * np.pi)
    assert kpp_initial(1.5, 0.0) == pytest.approx(0.25 * np.pi)
    assert prob.inflow_value == pytest.approx(np.pi / 4)
    assert prob.overrides["lambda_override_ho"] == 1.0 and prob.overrides["lambda_override_lo"] == 2.0
    assert prob.lumped_schemes == ("CG",) and prob.exact is None


@given(st.floats(-10, 10), st.floats(-1, 1), st.floats(-1, 1))
def test_flux_derivatives_match_finite_differences(u, x, y):
    pt = np.array([x, y])
    eps = 1e-6
    for flux in (Burgers(), KPPFlux(), get_problem("sbr").flux):
        fd = (flux.value(pt, u + eps) - flux.value(pt, u - eps)) / (2 * eps)
        assert np.allclose(flux.derivative(pt, u), fd, atol=1e-6 * (1 + abs(u)))


# {{{ error measures


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_l1_error_of_exact_interpolant(p):
    space = build_space(build_mesh(1, 5, (0, 1), BOUNDED), p)
    exact = lambda t, x: 2 * x - 1 + t
    u = interpolate(space, lambda x: 2 * x - 1 + 0.5).values
    assert l1_error(space, u, exact, 0.5) <= 1e-13


def test_l1_error_examples():
    space = build_space(build_mesh(1, 8, (0, 1)), 2)
    zero = np.zeros(space.n_dofs)
    assert l1_error(space, zero, lambda t, x: np.ones_like(x), 0.0) == pytest.approx(1.0)
    cosine = lambda t, x: np.cos(2 * np.pi * (x - 0.5))
    # cells align with the zeros of the cosine, so the rule stays accurate
    assert l1_error(space, zero, cosine, 0.0) == pytest.approx(2 / np.pi, rel=1e-4)


def test_eoc_examples():
    assert eoc([8.20e-3, 2.05e-3], [16, 32]) == [None, pytest.approx(2.00, abs=5e-3)]
    assert eoc([2.72e-4, 3.26e-5], [32, 64])[1] == pytest.approx(3.06, abs=5e-3)
    assert eoc([1.0, 0.5, 0.25], [10, 20, 40]) == [None, pytest.approx(1.0), pytest.approx(1.0)]
    # per-axis resolution in 2D
    assert eoc([1.0, 0.25], [16**2, 32**2], 2)[1] == pytest.approx(2.0)


@pytest.mark.parametrize("errors,rates", [
    # reference p = 1 errors for CG, VMS and WENO with their reported rates
    ([8.20e-3, 2.05e-3, 5.11e-4, 1.28e-4, 3.20e-5, 7.99e-6, 2.02e-6],
     [2.00, 2.00, 2.00, 2.00, 2.00, 1.99]),
    ([9.22e-3, 2.17e-3, 5.27e-4, 1.30e-4, 3.22e-5, 8.03e-6, 2.02e-6],
     [2.09, 2.04, 2.02, 2.01, 2.00, 1.99]),
    ([9.26e-2, 2.68e-2, 3.24e-3, 2.38e-4, 3.51e-5, 8.31e-6, 2.06e-6],
     [1.79, 3.05, 3.77, 2.76, 2.08, 2.01]),
])
def test_eoc_reproduces_reference_p1_rows(errors, rates):
    dofs = [16 * 2**k for k in range(len(errors))]
    # three-digit errors carry about 0.005 of rounding into each rate
    assert np.allclose(eoc(errors, dofs)[1:], rates, atol=0.011)


def test_extrema():
    assert extrema(np.ones(7)) == (1.0, 1.0)
    assert extrema(np.array([0.5, -0.2, 3.0])) == (-0.2, 3.0)


def test_antisymmetry_defect():
    space = build_space(build_mesh(1, 10, (0, 1)), 2)
    u = interpolate(space, lambda x: np.sin(2 * np.pi * x)).values
    assert antisymmetry_defect(space, u) < 1e-13
    u[3] += 0.1
    assert antisymmetry_defect(space, u) == pytest.approx(0.1)


# }}}
