"""Brute-force ground truth for the equilibrium and its response.

:func:`discrete_equilibrium` minimizes the discretized energy directly over
the probability simplex, knowing nothing about supports, cuts or curves.
:func:`fd_response` differentiates the full nonlinear pipeline numerically.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import EquilibriumSolution, SolveOptions, solve
from .potential import Field

__all__ = [
    "OracleError",
    "DiscreteMeasure",
    "project_simplex",
    "log_matrix",
    "discrete_energy",
    "discrete_equilibrium",
    "fd_response",
]


class OracleError(RuntimeError):
    pass


@dataclass(eq=False)
class DiscreteMeasure:
    """Weights on an equispaced grid; nonnegative with unit sum."""

    grid: np.ndarray
    weights: np.ndarray
    energy: float
    iterations: int
    converged: bool
    history: np.ndarray = field(repr=False)

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def density(self) -> np.ndarray:
        """Weights divided by the cell width."""
        return self.weights / self.spacing

    def support_mask(self, threshold: float = 1e-8) -> np.ndarray:
        return self.weights > threshold

    def intervals(self, threshold: float = 1e-8) -> list[tuple[float, float]]:
        """Runs of grid points carrying weight above ``threshold``."""
        mask = self.support_mask(threshold)
        edges = np.flatnonzero(np.diff(np.concatenate([[0], mask.astype(int), [0]])))
        return [(float(self.grid[i]), float(self.grid[j - 1])) for i, j in zip(edges[::2], edges[1::2])]

    def endpoints(self, threshold: float = 1e-8) -> np.ndarray:
        return np.array([e for iv in self.intervals(threshold) for e in iv])


def project_simplex(z: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum w = 1}`` by sorting."""
    u = np.sort(z)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, z.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    return np.maximum(z - css[rho] / (rho + 1), 0.0)


def _log_column(grid: np.ndarray, self_energy: bool) -> np.ndarray:
    h = grid[1] - grid[0]
    col = np.empty(grid.size)
    col[1:] = -np.log(h * np.arange(1, grid.size))
    col[0] = 1.5 - np.log(h) if self_energy else 0.0
    return col


def log_matrix(grid: np.ndarray, self_energy: bool = True) -> np.ndarray:
    """Dense ``K_ij = -ln|x_i - x_j|`` on an equispaced grid.

    With ``self_energy`` the diagonal holds the mean of ``-ln|x - t|`` over a
    cell squared, ``3/2 - ln h``; otherwise it is zero.
    """
    col = _log_column(grid, self_energy)
    idx = np.abs(np.arange(grid.size)[:, None] - np.arange(grid.size)[None, :])
    return col[idx]


class _ToeplitzLog:
    """``w -> K w`` by circulant embedding, ``O(n log n)`` per product."""

    def __init__(self, grid: np.ndarray, self_energy: bool):
        col = _log_column(grid, self_energy)
        self.n = grid.size
        self.size = 2 * self.n
        circ = np.concatenate([col, [0.0], col[:0:-1]])
        self.symbol = np.fft.rfft(circ, self.size)

    def __matmul__(self, w: np.ndarray) -> np.ndarray:
        return np.fft.irfft(self.symbol * np.fft.rfft(w, self.size), self.size)[: self.n]


def discrete_energy(grid: np.ndarray, vx: np.ndarray, w: np.ndarray, self_energy: bool = True) -> float:
    """``w^T K w + sum_i v(x_i) w_i`` with ``K`` from :func:`log_matrix`."""
    return float(w @ (_ToeplitzLog(grid, self_energy) @ w) + vx @ w)


def discrete_equilibrium(p: Field, box=(-3.0, 3.0), n: int = 4000, iters: int = 20000,
                         tol: float = 1e-13, self_energy: bool = True, window: int = 100) -> DiscreteMeasure:
    """Minimize the discrete log-gas energy over the simplex.

    ``K`` is Toeplitz on the equispaced grid, so products go through the FFT.
    Accelerated projected gradient with monotone acceptance: a trial point is
    kept only if it does not raise the energy, otherwise the iterate stays put
    and the momentum restarts, so the recorded energies never increase.
    The step is ``1 / L`` with ``L`` a power-iteration estimate of the
    Lipschitz constant. Stops once the energy drops by less than ``tol``
    (relative) over ``window`` iterations; if the budget runs out first, warns
    and returns the last iterate.
    """
    lo, hi = map(float, box)
    if not hi > lo:
        raise OracleError("box must satisfy lo < hi")
    if n < 2:
        raise OracleError("need at least two grid points")
    grid = np.linspace(lo, hi, n)
    vx = np.asarray(p(grid), dtype=float)
    K = _ToeplitzLog(grid, self_energy)
    # Lipschitz constant of grad = 2 K w + v
    q = np.ones(n) / np.sqrt(n)
    for _ in range(50):
        q = K @ q
        q /= np.linalg.norm(q)
    step = 1.0 / (2.0 * 1.01 * np.linalg.norm(K @ q))

    w = np.full(n, 1.0 / n)
    Kw = K @ w
    E = float(w @ Kw + vx @ w)
    z, tk = w.copy(), 1.0
    history = [E]
    converged = False
    stall = np.inf
    it = 0
    for it in range(1, iters + 1):
        trial = project_simplex(z - step * (2.0 * (K @ z) + vx))
        Kt = K @ trial
        Et = float(trial @ Kt + vx @ trial)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        if Et <= E:
            w_new, Kw_new, E_new = trial, Kt, Et
            z = w_new + ((tk - 1.0) / t_next) * (w_new - w)
        else:
            # rejected: restart the momentum from the current iterate
            w_new, Kw_new, E_new = w, Kw, E
            z, t_next = w.copy(), 1.0
        w, Kw, E, tk = w_new, Kw_new, E_new, t_next
        history.append(E)
        if it >= window:
            stall = (history[-window - 1] - E) / max(1.0, abs(E))
            if stall < tol:
                converged = True
                break
    if not converged:
        warnings.warn(f"discrete_equilibrium: budget of {iters} iterations exhausted "
                      f"(energy still moving by {stall:.2e} > {tol:.1e} per {window} steps)", RuntimeWarning, stacklevel=2)
    return DiscreteMeasure(grid, w, E, it, converged, np.asarray(history))


def fd_response(p: Field, base: EquilibriumSolution, dv: Field, eps: float = 1e-5,
                opts: SolveOptions | None = None) -> np.ndarray:
    """``(sigma[v + eps dv] - sigma[v - eps dv]) / (2 eps)`` at the base nodes.

    Both neighbours are solved from scratch (endpoints included), starting
    from the base support; their densities are evaluated at the base nodes
    from the bounded representation, which is valid up to each support's own
    endpoints. Raises if the genus changes.
    """
    opts = opts or SolveOptions(n=base.cache.n, n_gap=base.cache.n_gap)
    sols = []
    for sgn in (1.0, -1.0):
        sol = solve(p.plus(dv, sgn * eps), base.support, opts, cycles=base.cache.cycles,
                    check_A=False)
        if sol.support.genus != base.support.genus:
            raise OracleError("genus changed under the perturbation")
        sols.append(sol)
    x = base.sigma.nodes
    plus, minus = (s.sigma.at(x) for s in sols)
    return (plus - minus) / (2.0 * eps)
