import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multicut.surface import (
    Support,
    SurfaceCache,
    SurfaceError,
    classify,
    eval_dy,
    eval_y,
    gamma_coeffs,
    squaring_defect,
)

# U_g numerator coefficients (ascending, leading 1 dropped) from the gap
# conditions, computed independently with scipy's algebraic-weight quadrature.
UG_REFERENCE = {
    (-2.1, -0.43, 0.31, 1.77): [0.05801056029546665],
    (-3.0, -2.0, -1.0, 0.5, 1.0, 2.5): [-1.1508818759038741, 0.772639460588992],
}


def supports(max_genus=3):
    @st.composite
    def build(draw):
        g = draw(st.integers(0, max_genus))
        pts = draw(st.lists(st.floats(-3, 3), min_size=2 * g + 2, max_size=2 * g + 2, unique=True))
        pts = np.sort(pts)
        if np.min(np.diff(pts)) < 0.05:
            pts = np.linspace(pts[0], pts[0] + 0.3 * (2 * g + 1), 2 * g + 2)
        return Support(tuple(pts))

    return build()


def test_support_validation():
    with pytest.raises(SurfaceError):
        Support((1.0, 0.0))
    with pytest.raises(SurfaceError):
        Support((0.0, 1.0, 2.0))
    s = Support.from_intervals([(-2, -1), (0.5, 3)])
    assert s.genus == 1
    assert s.gaps == [(-1.0, 0.5)]


def test_branch_signs():
    s = Support((-2.0, -1.0, 1.0, 2.0))
    # real and positive to the right, imaginary on cuts, real on the gap
    assert eval_y(3.0, s).real > 0 and abs(eval_y(3.0, s).imag) == 0
    assert abs(eval_y(1.5, s).real) < 1e-15 and eval_y(1.5, s).imag != 0
    assert abs(eval_y(0.0, s).imag) < 1e-15
    # y ~ z^(g+1) at -infinity: z^2 > 0
    assert eval_y(-5.0, s).real > 0


@settings(max_examples=40, deadline=None)
@given(s=supports())
def test_y_squares_to_the_polynomial(s):
    x = np.linspace(s.array[0] - 1, s.array[-1] + 1, 37)
    y = eval_y(x, s)
    P = np.prod(x[:, None] - s.array[None, :], axis=1)
    assert np.allclose(y * y, P, atol=1e-11 * max(1.0, np.max(np.abs(P))))


def test_dy_matches_difference_quotient():
    s = Support((-2.0, -0.7, 0.4, 1.9))
    x = np.array([-1.3, 0.0, 1.2, 2.5])
    h = 1e-6
    fd = (eval_y(x + h, s) - eval_y(x - h, s)) / (2 * h)
    assert np.allclose(eval_dy(x, s), fd, rtol=1e-7, atol=1e-8)


def test_classify_regions():
    s = Support((-2.0, -1.0, 1.0, 2.0))
    assert classify(-1.5, s) == ("cut", 1)
    assert classify(0.0, s) == ("gap", 1)
    assert classify(1.5, s) == ("cut", 2)
    assert classify(5.0, s).kind == "exterior-right"
    assert classify(-5.0, s).kind == "exterior-left"
    assert classify(1.0, s) == ("endpoint", 3)


@settings(max_examples=30, deadline=None)
@given(s=supports(max_genus=3))
def test_gamma_squares_to_the_polynomial(s):
    G = gamma_coeffs(s, 2 * s.genus + 6)
    scale = max(1.0, float(np.max(np.abs(np.poly(s.array)))))
    assert G[0] == 1.0
    assert squaring_defect(s, G) < 1e-13 * scale


def test_gamma_one_cut_closed_form():
    # y/z = sqrt(1 - 4/z^2) on (-2, 2): Gamma = 1, 0, -2, 0, -2, 0, -4, ...
    G = gamma_coeffs(Support((-2.0, 2.0)), 6)
    assert np.allclose(G, [1, 0, -2, 0, -2, 0, -4], atol=1e-14)


@pytest.mark.parametrize("ends", list(UG_REFERENCE))
def test_ug_gap_conditions_against_reference(ends):
    cache = SurfaceCache(Support(ends))
    assert np.allclose(cache.ug.kappas, UG_REFERENCE[ends], rtol=1e-12, atol=1e-14)


@settings(max_examples=15, deadline=None)
@given(s=supports(max_genus=2))
def test_ug_unit_mass_emerges(s):
    cache = SurfaceCache(s)
    assert abs(cache.integrate_over_J(cache.ug) - 1.0) < 1e-10


@pytest.mark.parametrize("cycles", ["gap", "cut", "nested"])
def test_phi_normalization(cycles):
    cache = SurfaceCache(Support((-3.0, -2.0, -1.0, 0.5, 1.0, 2.5)), cycles=cycles)
    periods = np.array([cache.alpha_periods(lambda x, k=k: cache.phi(x)[k]) for k in range(2)])
    assert np.allclose(periods, np.eye(2), atol=1e-12)


@pytest.mark.parametrize("cycles", ["gap", "cut"])
def test_pi_differentials(cycles):
    cache = SurfaceCache(Support((-3.0, -2.0, -1.0, 0.5, 1.0, 2.5)), cycles=cycles)
    G = cache.gamma
    for pj in cache.pis:
        assert np.allclose(pj.coeffs[: pj.j + 1].real, G[: pj.j + 1], atol=1e-14)
        assert np.allclose(cache.alpha_periods(pj), 0.0, atol=1e-11)


def test_unknown_cycle_convention():
    with pytest.raises(ValueError, match="cycle convention"):
        SurfaceCache(Support((-2.0, -1.0, 1.0, 2.0)), cycles="diagonal").phi
