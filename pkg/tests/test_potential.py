import numpy as np
import pytest

from multicut.potential import Perturbation, PotentialError, PotentialSpec


@pytest.mark.parametrize("coeffs", [[0, 1], [0, 0, 0, 1], [0, 0, -1], [0, 0, 0, 0, -0.25], [1]])
def test_non_confining_polynomials_rejected(coeffs):
    with pytest.raises(PotentialError):
        PotentialSpec.polynomial(coeffs)


def test_polynomial_value_and_derivative():
    p = PotentialSpec.polynomial([1.0, 0.3, -1.5, 0.0, 0.25])
    x = np.array([-1.2, 0.0, 2.0])
    assert np.allclose(p(x), 1 + 0.3 * x - 1.5 * x**2 + 0.25 * x**4)
    assert np.allclose(p.d(x), 0.3 - 3 * x + x**3)


def test_trailing_zeros_are_trimmed():
    assert PotentialSpec.polynomial([0, 0, 0.5, 0, 0]).description["coeffs"] == [0.0, 0.0, 0.5]


@pytest.mark.parametrize("pert", [
    Perturbation.gaussian(0.4, 0.3, 2.0),
    Perturbation.chebyshev(3, (-2.0, 1.0)),
    Perturbation.polynomial([0.1, -1.0, 0.5]),
    Perturbation.constant(2.5),
])
def test_perturbation_derivatives(pert):
    x = np.linspace(-1.5, 1.5, 11)
    h = 1e-6
    assert np.allclose(pert.d(x), (pert(x + h) - pert(x - h)) / (2 * h), atol=1e-7)


@pytest.mark.parametrize("pert", [
    Perturbation.gaussian(0.4, 0.3, 2.0),
    Perturbation.chebyshev(3, (-2.0, 1.0)),
    Perturbation.constant(-1.0).scaled(3.0),
])
def test_description_round_trip(pert):
    again = Perturbation.from_description(pert.description)
    x = np.linspace(-2, 2, 9)
    assert np.array_equal(again(x), pert(x))
    assert np.array_equal(again.d(x), pert.d(x))


def test_perturbed_potential_round_trip():
    p = PotentialSpec.polynomial([0, 0, 0.5]).plus(Perturbation.gaussian(0.5, 0.2), 1e-3)
    assert isinstance(p, PotentialSpec)
    again = PotentialSpec.from_description(p.description)
    x = np.linspace(-2, 2, 9)
    assert np.array_equal(again(x), p(x))


def test_gaussian_needs_positive_width():
    with pytest.raises(PotentialError):
        Perturbation.gaussian(0.0, 0.0)
