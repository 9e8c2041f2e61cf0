import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from multicut.equilibrium import solve
from multicut.kernel import respond
from multicut.oracle import (
    OracleError,
    _ToeplitzLog,
    discrete_energy,
    discrete_equilibrium,
    fd_response,
    log_matrix,
    project_simplex,
)
from multicut.potential import Perturbation, PotentialSpec
from multicut.surface import Support

GAUSSIAN = PotentialSpec.polynomial([0, 0, 0.5])
DOUBLE_WELL = PotentialSpec.polynomial([0, 0, -1.5, 0, 0.25])


@pytest.fixture(scope="module")
def semicircle_oracle():
    return discrete_equilibrium(GAUSSIAN, box=(-3, 3), n=2000)


@settings(max_examples=60, deadline=None)
@given(z=arrays(float, st.integers(1, 40), elements=st.floats(-10, 10)))
def test_projection_lands_on_simplex(z):
    w = project_simplex(z)
    assert np.all(w >= 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    # idempotent, and no simplex point is closer
    assert np.allclose(project_simplex(w), w, atol=1e-12)
    e = np.zeros_like(z)
    e[np.argmax(z)] = 1.0
    assert np.linalg.norm(z - w) <= np.linalg.norm(z - e) + 1e-12


@pytest.mark.parametrize("self_energy", [True, False])
def test_fft_product_matches_dense(self_energy):
    grid = np.linspace(-1.0, 2.0, 57)
    w = np.random.default_rng(0).random(57)
    assert np.allclose(_ToeplitzLog(grid, self_energy) @ w, log_matrix(grid, self_energy) @ w, atol=1e-12)


def test_semicircle_recovered(semicircle_oracle):
    m = semicircle_oracle
    assert m.converged
    ends = m.endpoints()
    assert len(ends) == 2
    assert np.allclose(ends, [-2, 2], atol=2 * m.spacing + 1e-2)
    mid = np.abs(m.grid) < 1.0
    exact = np.sqrt(4 - m.grid[mid] ** 2) / (2 * np.pi)
    assert np.max(np.abs(m.density[mid] - exact)) < 2e-3
    assert np.max(np.abs(m.weights - m.weights[::-1])) < 1e-6


def test_energy_history_never_increases(semicircle_oracle):
    assert np.all(np.diff(semicircle_oracle.history) <= 0)


def test_discrete_energy_near_continuum(semicircle_oracle):
    m = semicircle_oracle
    assert discrete_energy(m.grid, GAUSSIAN(m.grid), m.weights) == pytest.approx(m.energy, abs=1e-12)
    # the cell self-energy lets the discrete value dip slightly below 3/4
    assert abs(m.energy - 0.75) < 2e-3


def test_double_well_two_intervals():
    m = discrete_equilibrium(DOUBLE_WELL, box=(-3, 3), n=3000)
    iv = m.intervals()
    assert len(iv) == 2
    assert np.allclose(np.ravel(iv), [-np.sqrt(5), -1, 1, np.sqrt(5)], atol=2e-2)


def test_zero_diagonal_collapses_to_an_atom():
    # without self-energy a single cell costs nothing, which beats spreading
    m = discrete_equilibrium(GAUSSIAN, n=1000, self_energy=False, iters=3000)
    assert np.count_nonzero(m.weights > 1e-8) <= 2


def test_bad_box_rejected():
    with pytest.raises(OracleError):
        discrete_equilibrium(GAUSSIAN, box=(1.0, -1.0))


def test_budget_exhaustion_warns():
    with pytest.warns(RuntimeWarning, match="budget"):
        m = discrete_equilibrium(GAUSSIAN, n=500, iters=5)
    assert not m.converged


@pytest.fixture(scope="module")
def double_well_solution():
    return solve(DOUBLE_WELL, Support((-2.4, -0.8, 0.8, 2.4)))


def interior(sol, margin=0.05):
    # the response diverges like 1/sqrt at moving endpoints, where a finite
    # step is no longer small compared with the distance to the edge
    return np.array([(x > a + margin) & (x < b - margin)
                     for x, (a, b) in zip(sol.sigma.nodes, sol.support.cuts)])


def test_fd_response_of_constant_vanishes(double_well_solution):
    r = fd_response(DOUBLE_WELL, double_well_solution, Perturbation.constant(1.0))
    assert np.max(np.abs(r)) < 1e-6


def test_fd_response_agrees_with_linear_response(double_well_solution):
    dv = Perturbation.gaussian(1.6, 0.25)
    fd = fd_response(DOUBLE_WELL, double_well_solution, dv)
    lin = np.array(respond(double_well_solution, dv).values)
    keep = interior(double_well_solution)
    assert np.max(np.abs(fd - lin)[keep]) < 1e-6 * np.max(np.abs(lin[keep]))


def test_fd_response_is_linear(double_well_solution):
    dv = Perturbation.gaussian(-1.4, 0.3)
    one = fd_response(DOUBLE_WELL, double_well_solution, dv)
    two = fd_response(DOUBLE_WELL, double_well_solution, dv.scaled(2.0))
    keep = interior(double_well_solution)
    assert np.allclose(two[keep], 2 * one[keep], rtol=1e-6, atol=1e-8)
