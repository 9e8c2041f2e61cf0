import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multicut.quadrature import (
    QuadratureError,
    cauchy_derivative_matrix,
    cauchy_integrate,
    cheb_coeffs,
    integrate_gap,
    integrate_ray,
    integrate_singular,
    log_integrate,
    make_gap_mesh,
    make_mesh,
    make_ray_mesh,
    pv_integrate,
)

# Reference values for f(t) = exp(t) on (0.5, 2.5) with weight 1/sqrt((t-0.5)(2.5-t)),
# computed once with mpmath at 30 digits (singularity subtraction for the
# principal value, numerical differentiation of it for the finite part).
LO, HI = 0.5, 2.5
REF = {
    "plain": 17.8257536222828372145478682759,
    "pv_1.3": 13.9213741303584423203234337076,
    "hadamard_1.3": 6.44599740833137653493101405316,
    "cauchy_3": -21.9123380045015739745874481875,
    "cauchy_deriv_3": 32.1391619888644088641487184079,
    "cauchy_-1": 6.40041390674224678561514162151,
    "log_1.3": -7.54481663418294405130731750811,
    "log_-1": 18.8136497616338941670903914528,
    "gap_sqrt": 7.95723755153086224795148763839,
    "ray_exp": 0.239875543936122892822361688651,
}


@pytest.fixture(scope="module")
def mesh():
    return make_mesh((LO, HI), 64)


def test_plain_weighted_integral(mesh):
    assert integrate_singular(np.exp, mesh) == pytest.approx(REF["plain"], rel=1e-14)


def test_semicircle_mass_is_exact():
    m = make_mesh((-2.0, 2.0), 16)
    # sqrt(4 - x^2) / (2 pi) = (4 - x^2) / (2 pi) * weight
    assert integrate_singular(lambda x: (4 - x * x) / (2 * np.pi), m) == pytest.approx(1.0, abs=1e-15)


def test_principal_value(mesh):
    assert pv_integrate(np.exp, mesh, 1.3) == pytest.approx(REF["pv_1.3"], rel=1e-13)


def test_principal_value_of_weight_vanishes_inside(mesh):
    x0 = np.linspace(0.6, 2.4, 7)
    assert np.max(np.abs(cauchy_integrate(np.ones_like, mesh, x0))) < 1e-13


def test_cauchy_outside(mesh):
    assert cauchy_integrate(np.exp, mesh, 3.0) == pytest.approx(REF["cauchy_3"], rel=1e-13)
    assert cauchy_integrate(np.exp, mesh, -1.0) == pytest.approx(REF["cauchy_-1"], rel=1e-13)


def test_cauchy_of_weight_outside_closed_form(mesh):
    # int dt / ((t - x0) sqrt((t-lo)(hi-t))) = -pi / sqrt((x0-lo)(x0-hi)) for x0 > hi
    x0 = 4.0
    exact = -np.pi / math.sqrt((x0 - LO) * (x0 - HI))
    assert cauchy_integrate(np.ones_like, mesh, x0) == pytest.approx(exact, rel=1e-14)


def test_derivative_outside_and_finite_part(mesh):
    vals = np.exp(mesh.nodes)
    d = cauchy_derivative_matrix(mesh, np.array([3.0, 1.3])) @ vals
    assert d[0] == pytest.approx(REF["cauchy_deriv_3"], rel=1e-12)
    assert d[1] == pytest.approx(REF["hadamard_1.3"], rel=1e-11)


def test_log_potential(mesh):
    assert log_integrate(np.exp, mesh, 1.3) == pytest.approx(REF["log_1.3"], rel=1e-13)
    assert log_integrate(np.exp, mesh, -1.0) == pytest.approx(REF["log_-1"], rel=1e-13)


def test_log_of_weight_is_constant_inside():
    # int log|x0 - t| / sqrt(1 - t^2) dt = -pi log 2 on [-1, 1]
    m = make_mesh((-1.0, 1.0), 32)
    x0 = np.array([-0.9, 0.0, 0.35, 0.99])
    assert np.allclose(log_integrate(np.ones_like, m, x0), -np.pi * math.log(2.0), atol=1e-14)


def test_gap_rule_handles_square_roots():
    g = make_gap_mesh((LO, HI), 48)
    sq = np.sqrt((g.nodes - LO) * (HI - g.nodes))
    assert integrate_gap(np.exp(g.nodes) * sq, g) == pytest.approx(REF["gap_sqrt"], rel=1e-13)
    assert integrate_gap(np.exp(g.nodes) / sq, g) == pytest.approx(REF["plain"], rel=1e-13)


def test_ray_rule():
    r = make_ray_mesh(1.0, 128)
    assert integrate_ray(lambda t: 1 / (t * t * np.sqrt(t - 1)), r) == pytest.approx(np.pi / 2, rel=1e-10)
    r2 = make_ray_mesh(2.0, 160)
    assert integrate_ray(lambda t: np.exp(-t) / np.sqrt(t - 2), r2) == pytest.approx(REF["ray_exp"], rel=1e-10)


def test_ray_rejects_slow_decay():
    with pytest.raises(QuadratureError, match="decays too slowly"):
        integrate_ray(lambda t: 1 / t, make_ray_mesh(1.0))


def test_pv_requires_interior_point(mesh):
    with pytest.raises(QuadratureError):
        pv_integrate(np.exp, mesh, 3.0)


@pytest.mark.parametrize("interval", [(1.0, 1.0), (2.0, 1.0), (0.0, np.inf)])
def test_degenerate_intervals_rejected(interval):
    with pytest.raises(QuadratureError):
        make_mesh(interval)


def test_chebyshev_coefficients_recover_polynomial():
    m = make_mesh((-3.0, 1.0), 12)
    c = np.array([0.5, -1.0, 0.25, 2.0])
    vals = np.polynomial.Chebyshev(c)(m.to_unit(m.nodes))
    out = cheb_coeffs(vals, m)
    assert np.allclose(out[:4], c, atol=1e-14)
    assert np.max(np.abs(out[4:])) < 1e-14


@settings(max_examples=40, deadline=None)
@given(lo=st.floats(-5, 4), width=st.floats(0.05, 6), k=st.integers(0, 20))
def test_exactness_for_polynomials(lo, width, k):
    # int T_k(u(x)) / sqrt((x-lo)(hi-x)) dx = pi for k = 0 and 0 otherwise
    m = make_mesh((lo, lo + width), 32)
    vals = np.polynomial.Chebyshev.basis(k)(m.to_unit(m.nodes))
    expected = np.pi if k == 0 else 0.0
    assert integrate_singular(vals, m) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(u0=st.floats(-0.98, 0.98), k=st.integers(1, 15))
def test_pv_of_chebyshev_is_second_kind(u0, k):
    # P int T_k(t) / ((t - u0) sqrt(1 - t^2)) dt = pi U_{k-1}(u0)
    m = make_mesh((-1.0, 1.0), 32)
    vals = np.polynomial.Chebyshev.basis(k)(m.nodes)
    U = math.sin(k * math.acos(u0)) / math.sqrt(1 - u0 * u0)
    assert pv_integrate(vals, m, u0) == pytest.approx(np.pi * U, abs=1e-11)
