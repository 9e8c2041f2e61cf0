import math

import numpy as np
import pytest

from multicut.equilibrium import (
    GenusTooHighError,
    GenusTooLowError,
    SolveOptions,
    SolverError,
    density,
    density_constructive,
    direct_A,
    energy,
    residuals,
    solve,
    v_of_J,
)
from multicut.potential import PotentialSpec
from multicut.surface import Support

GAUSSIAN = PotentialSpec.polynomial([0, 0, 0.5])
DOUBLE_WELL = PotentialSpec.polynomial([0, 0, -1.5, 0, 0.25])  # cuts (-sqrt5, -1), (1, sqrt5)
ASYMMETRIC = PotentialSpec.polynomial([0, 0.3, -1.5, 0, 0.25])
SEXTIC = PotentialSpec.polynomial(0.5 * np.array([0, 0.5, 16, 0, -8, 0, 1]))


@pytest.fixture(scope="module")
def semicircle():
    return solve(GAUSSIAN, Support((-2.1, 2.1)))


@pytest.fixture(scope="module")
def double_well():
    return solve(DOUBLE_WELL, Support((-2.4, -0.8, 0.8, 2.4)))


def test_semicircle_endpoints_and_density(semicircle):
    assert np.allclose(semicircle.support.array, [-2, 2], atol=1e-10)
    x = semicircle.sigma.nodes[0]
    assert np.allclose(semicircle.sigma.values[0], np.sqrt(4 - x * x) / (2 * np.pi), atol=1e-10)
    assert semicircle.residual_norm < 1e-10


def test_semicircle_constants(semicircle):
    # A = 1, V[J] = -log(capacity) = 0, energy 3/4
    assert semicircle.A == pytest.approx(1.0, abs=1e-10)
    assert semicircle.V_J == pytest.approx(0.0, abs=1e-10)
    assert energy(semicircle.sigma, GAUSSIAN) == pytest.approx(0.75, abs=1e-10)


def test_v_of_J_is_minus_log_capacity():
    assert v_of_J(Support((-1.0, 1.0))) == pytest.approx(math.log(2.0), abs=1e-10)
    assert v_of_J(Support((0.5, 4.5))) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("coeffs, init, support", [
    ([4.5, -3.0, 0.5], (0.5, 6.0), (1.0, 5.0)),
    ([4.5, 3.0, 0.5], (-6.0, -0.5), (-5.0, -1.0)),  # b <= 0: translated before V[J]
])
def test_A_is_translation_invariant(coeffs, init, support):
    sol = solve(PotentialSpec.polynomial(coeffs), Support(init))
    assert np.allclose(sol.support.array, support, atol=1e-10)
    assert sol.A == pytest.approx(1.0, abs=1e-10)


def test_double_well_closed_form(double_well):
    s5 = math.sqrt(5.0)
    assert np.allclose(double_well.support.array, [-s5, -1, 1, s5], atol=1e-10)
    x = np.concatenate(double_well.sigma.nodes)
    exact = np.abs(x) * np.sqrt((x * x - 1) * (5 - x * x)) / (2 * np.pi)
    assert np.allclose(np.concatenate(double_well.sigma.values), exact, atol=1e-10)
    # A checked independently with scipy quad of the log potential at x = 1.5
    assert double_well.A == pytest.approx(-1.75, abs=1e-10)
    assert np.allclose(double_well.sigma.cut_masses(), [0.5, 0.5], atol=1e-12)


@pytest.mark.parametrize("p, init", [
    (ASYMMETRIC, (-2.3, -1.1, 0.9, 2.2)),
    (SEXTIC, (-2.4, -1.6, -0.4, 0.4, 1.6, 2.4)),
])
def test_multi_cut_invariants(p, init):
    sol = solve(p, Support(init))
    assert sol.residual_norm < 1e-10
    assert sol.sigma.mass() == pytest.approx(1.0, abs=1e-12)
    assert min(float(np.min(v)) for v in sol.sigma.values) >= 0.0
    probes = np.concatenate([np.linspace(a, b, 7)[1:-1] for a, b in sol.support.cuts])
    dA = direct_A(sol.sigma, p, probes)
    assert np.ptp(dA) < 1e-8
    assert np.max(np.abs(dA - sol.A)) < 1e-7
    # outside J the effective potential exceeds A
    gaps = [0.5 * (a + b) for a, b in sol.support.gaps]
    outside = [sol.support.array[0] - 0.3, sol.support.array[-1] + 0.3]
    assert np.all(direct_A(sol.sigma, p, np.array(gaps + outside)) > sol.A)


def test_bounded_and_constructive_forms_agree(double_well):
    a = density(double_well.cache, DOUBLE_WELL)
    b, _ = density_constructive(double_well.cache, DOUBLE_WELL)
    for u, v in zip(a.values, b.values):
        assert np.max(np.abs(u - v)) < 1e-9


def test_residuals_vanish_only_at_the_solution(double_well):
    assert np.linalg.norm(residuals(double_well.support, DOUBLE_WELL)) < 1e-10
    assert np.linalg.norm(residuals(Support((-2.3, -0.9, 1.0, 2.2)), DOUBLE_WELL)) > 1e-3


def test_mesh_refinement_is_stable(double_well):
    fine = solve(DOUBLE_WELL, Support((-2.4, -0.8, 0.8, 2.4)), SolveOptions(n=256))
    assert np.allclose(fine.support.array, double_well.support.array, atol=1e-11)


def test_genus_too_high():
    with pytest.raises(GenusTooHighError, match="genus too high"):
        solve(GAUSSIAN, Support((-2.1, -0.2, 0.2, 2.1)))


def test_genus_too_low():
    with pytest.raises(GenusTooLowError, match="genus too low"):
        solve(DOUBLE_WELL, Support((-2.3, 2.3)))


def test_critical_double_well_has_no_genus_one_solution():
    # x^4/4 - x^2 sits exactly where the gap closes
    p = PotentialSpec.polynomial([0, 0, -1, 0, 0.25])
    with pytest.raises(SolverError):
        solve(p, Support((-2.2, -0.5, 0.5, 2.2)))
    one = solve(p, Support((-2.1, 2.1)))
    assert np.allclose(one.support.array, [-2, 2], atol=1e-10)
    x = one.sigma.nodes[0]
    assert np.allclose(one.sigma.values[0], x * x * np.sqrt(4 - x * x) / (2 * np.pi), atol=1e-10)


def test_solver_error_names_condition():
    with pytest.raises(SolverError) as info:
        solve(DOUBLE_WELL, Support((-2.3, 2.3)))
    assert info.value.condition
