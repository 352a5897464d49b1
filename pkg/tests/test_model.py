import math

import numpy as np
import pytest
import sympy as sp

from cwmdp.errors import DomainError, UnsupportedOrderError
from cwmdp.model import (ModelParams, PathGrid, eval_g, find_fixed_points, flatness_order,
                         g_derivative, meanfield_flow)


def tanh_fixed_point(beta):
    m = 1.0
    for _ in range(10_000):
        m = math.tanh(beta * m)
    return m


def sympy_g(beta, field=0.0):
    x = sp.Symbol("x")
    u = beta * x + field
    return x, sp.cosh(u) - x * sp.sinh(u), sp.sinh(u) - x * sp.cosh(u)


def test_g_values_match_definitions():
    p = ModelParams.curie_weiss(1.3, field=0.2)
    x = np.linspace(-1, 1, 11)
    u = 1.3 * x + 0.2
    assert np.allclose(eval_g(p, 1, x), np.cosh(u) - x * np.sinh(u), rtol=1e-15)
    assert np.allclose(eval_g(p, 2, x), np.sinh(u) - x * np.cosh(u), rtol=1e-15)


@pytest.mark.parametrize("beta,field", [(0.5, 0.0), (1.0, 0.0), (1.7, 0.3)])
def test_closed_form_derivatives_against_sympy(beta, field):
    x, g1, g2 = sympy_g(beta, field)
    p = ModelParams.curie_weiss(beta, field)
    for order in range(1, 7):
        for which, g in ((1, g1), (2, g2)):
            d = sp.lambdify(x, sp.diff(g, x, order))
            for xv in (-0.9, -0.2, 0.0, 0.35, 1.0):
                assert g_derivative(p, which, order, xv) == pytest.approx(d(xv), rel=1e-12, abs=1e-12)


def test_polynomial_potential_finite_differences():
    # U = x^2/2 + 0.3 x^4 / 4 gives U' = x + 0.3 x^3
    p = ModelParams.polynomial([0.0, 0.0, 0.5, 0.0, 0.075])
    x = sp.Symbol("x")
    u = x + sp.Rational(3, 10) * x**3
    g2 = sp.sinh(u) - x * sp.cosh(u)
    tol = {1: 1e-11, 2: 1e-8, 3: 1e-8, 4: 1e-6, 5: 1e-5}
    for order, t in tol.items():
        d = sp.lambdify(x, sp.diff(g2, x, order))
        for xv in (-0.5, 0.1, 0.7):
            assert abs(g_derivative(p, 2, order, xv) - d(xv)) <= t * (1 + abs(d(xv)))
    with pytest.raises(UnsupportedOrderError):
        g_derivative(p, 2, 6, 0.0)


def test_domain_checks():
    p = ModelParams.curie_weiss(1.0)
    with pytest.raises(DomainError):
        eval_g(p, 1, 2.0)
    with pytest.raises(DomainError):
        ModelParams.curie_weiss(-1.0)


@pytest.mark.parametrize("beta", [0.5, 0.9])
def test_subcritical_single_stable_root(beta):
    rep = find_fixed_points(ModelParams.curie_weiss(beta))
    assert rep.roots.tolist() == [0.0]
    assert rep.stable == [True]


def test_critical_root_is_flat_and_stable():
    p = ModelParams.curie_weiss(1.0)
    rep = find_fixed_points(p)
    assert rep.roots.tolist() == [0.0]
    assert rep.flatness_order == [2]
    assert rep.stable == [True]
    assert g_derivative(p, 2, 3, 0.0) == pytest.approx(-2.0, rel=1e-14)


@pytest.mark.parametrize("beta", [1.1, 1.5, 3.0])
def test_supercritical_roots(beta):
    rep = find_fixed_points(ModelParams.curie_weiss(beta))
    m = tanh_fixed_point(beta)
    assert len(rep.roots) == 3
    assert rep.positive_root() == pytest.approx(m, abs=1e-13)
    assert rep.roots.min() == pytest.approx(-m, abs=1e-13)
    stable = dict(zip(np.round(rep.roots, 8), rep.stable))
    assert stable[0.0] is False
    assert stable[round(m, 8)] is True


def test_flatness_order_values():
    assert flatness_order(ModelParams.curie_weiss(0.5), 0.0)[0] == 0
    assert flatness_order(ModelParams.curie_weiss(1.0), 0.0)[0] == 2


def test_meanfield_flow_relaxes_to_fixed_point():
    p = ModelParams.curie_weiss(1.5)
    path = meanfield_flow(p, 0.2, 20.0)
    assert path.values[-1] == pytest.approx(tanh_fixed_point(1.5), abs=1e-8)
    assert np.all(np.diff(path.values) >= -1e-15)


def test_meanfield_flow_subcritical_decay_rate():
    # linearisation: m' = 2 G2'(0) m = -2(1 - beta) m
    p = ModelParams.curie_weiss(0.5)
    path = meanfield_flow(p, 1e-4, 2.0)
    assert path.values[-1] == pytest.approx(1e-4 * math.exp(-2.0), rel=1e-6)


def test_pathgrid_validation_and_velocity():
    t = np.linspace(0, 1, 101)
    g = PathGrid(t, t**2)
    assert np.allclose(g.velocity, 2 * t, atol=1e-12)
    assert g.T == 1.0
    r = g.reversed()
    assert r.values[0] == 1.0
    with pytest.raises(DomainError):
        PathGrid(np.array([0.0, 0.5, 2.0]), np.zeros(3))


def test_params_roundtrip():
    for p in (ModelParams.curie_weiss(1.2, 0.1), ModelParams.temp_rescaled(1.0, 5.0),
              ModelParams.polynomial([0, 0, 0.5])):
        assert ModelParams.from_dict(p.to_dict()) == p
    assert ModelParams.temp_rescaled(1.0, 5.0).effective_beta == pytest.approx(1.04)
