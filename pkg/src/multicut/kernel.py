"""Density-density correlation kernel and linear response of the equilibrium.

Three routes to the same object:

* :func:`respond` solves the linearized singular equation for a given field
  variation (no kernel is formed, so the diagonal singularity never appears);
* :func:`kernel_direct` differentiates the constructive solution in ``t``
  analytically, with the alpha-cycle integrals evaluated spectrally;
* :func:`kernel_pi` uses the second-kind differentials ``pi_j`` and the
  ``Gamma`` coefficients only, with no cycle integrals at evaluation time.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import (
    TWO_PI2,
    ConsistencyError,
    CutFunction,
    EquilibriumSolution,
    constructive_solve,
    gap_fields,
)
from .potential import Field
from .quadrature import cauchy_derivative_matrix, cauchy_matrix
from .surface import SurfaceCache, eval_dy, eval_y, y_reduced

__all__ = [
    "KernelError",
    "ResponseSample",
    "KernelGrid",
    "respond",
    "delta_A",
    "alpha_integrals",
    "kernel_direct",
    "kernel_pi",
    "kernel_grid",
    "variance",
    "short_distance_coefficient",
    "thread_count",
]

THREADS_ENV = "MULTICUT_THREADS"


class KernelError(ValueError):
    pass


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "")))
    except ValueError:
        return min(8, os.cpu_count() or 1)


@dataclass(eq=False)
class ResponseSample:
    """First-order change of the density for one field variation."""

    support: object
    dsigma: CutFunction = field(repr=False)
    dA: float
    coeffs: np.ndarray
    total_mass: float
    gap_residuals: np.ndarray

    @property
    def nodes(self):
        return self.dsigma.nodes

    @property
    def values(self):
        return self.dsigma.values


def delta_A(sol: EquilibriumSolution, dv: Field) -> float:
    """``int_J U_g(x) dv(x) / y(x) dx``."""
    cache = sol.cache
    val = cache.integrate_over_J(lambda x: cache.ug(x) * dv(x))
    return float(np.real(val))


def respond(sol: EquilibriumSolution, dv: Field, mass_tol: float = 1e-9) -> ResponseSample:
    """Solve ``2 P int dsigma(t)/(x - t) dt = dv'(x)`` with zero gap fields.

    The total mass of the response is not imposed; it comes out zero and is
    checked against ``mass_tol``.
    """
    cache = sol.cache
    dsigma, coeffs = constructive_solve(cache, dv.d, with_ug=False)
    mass = dsigma.mass()
    scale = max(1.0, max(float(np.max(np.abs(f))) for f in dsigma.numerators))
    if abs(mass) > mass_tol * scale:
        raise ConsistencyError(f"response carries net mass {mass:.3e}")
    gaps = gap_fields(cache, dsigma, dv.d)
    return ResponseSample(sol.support, dsigma, delta_A(sol, dv), coeffs, mass, gaps)


def alpha_integrals(cache: SurfaceCache, t: np.ndarray):
    """``I_k(t) = oint_{alpha_k} ds / ((s - t) y(s))`` and its ``t``-derivative.

    Each cycle collapses to twice a real integral over the intervals it
    encloses; when ``t`` sits on such an interval the principal value (finite
    part for the derivative) is taken. A residue ``2 pi i / y(t)`` picked up
    by moving the contour across ``t`` drops out of ``d/dt (y(t) I_k(t))``,
    so the kernel does not depend on that choice.
    Returns two complex arrays of shape ``(g,) + t.shape``.
    """
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    g = cache.genus
    sup = cache.support
    I = np.zeros((g, flat.size), dtype=complex)
    dI = np.zeros((g, flat.size), dtype=complex)
    for k in range(g):
        weight = 2.0
        if cache.cycles == "gap":
            parts, weight = [(cache.gap_meshes[k], 2 * k + 1)], 2j
        elif cache.cycles == "nested":
            parts = [(cache.cut_meshes[m], 2 * m) for m in range(k + 1)]
        else:
            parts = [(cache.cut_meshes[k], 2 * k)]
        for mesh, lo_index in parts:
            inv_y = weight / y_reduced(mesh.nodes, sup, lo_index)
            I[k] += cauchy_matrix(mesh, flat) @ inv_y
            dI[k] += cauchy_derivative_matrix(mesh, flat) @ inv_y
    return I.reshape((g,) + t.shape), dI.reshape((g,) + t.shape)


def _prepare(x, t, exclusion: float):
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(x - t) <= exclusion):
        raise KernelError(f"kernel requested inside the diagonal band |x - t| <= {exclusion}")
    return x, t


def _real_part(z, what: str, tol: float = 1e-10):
    z = np.asarray(z)
    scale = max(1.0, float(np.max(np.abs(z)))) if z.size else 1.0
    if np.max(np.abs(z.imag), initial=0.0) > tol * scale:
        raise ConsistencyError(f"{what} has imaginary part {np.max(np.abs(z.imag)):.2e}")
    return z.real


def _leading_terms(x, t, sup):
    yx = eval_y(x, sup)
    yt = eval_y(t, sup)
    dyt = eval_dy(t, sup)
    d = x - t
    return yx, yt, dyt, dyt / (yx * d) + yt / (yx * d * d)


def kernel_direct(x, t, cache: SurfaceCache, exclusion: float = 0.0):
    """Kernel from the analytic ``t``-derivative of the constructive response."""
    x, t = _prepare(x, t, exclusion)
    x, t = np.broadcast_arrays(x, t)
    yx, yt, dyt, lead = _leading_terms(x, t, cache.support)
    total = lead
    if cache.genus:
        I, dI = alpha_integrals(cache, t)
        phi = cache.phi(x)
        total = total - np.sum(phi * (dyt * I + yt * dI), axis=0) / yx
    out = _real_part(total / TWO_PI2, "direct kernel")
    return out if out.ndim else float(out)


def _pi_sum(x, t, cache: SurfaceCache):
    """``sum_k x^(g-k) sum_{j<=k} j Gamma_{k-j} pi_j(t)``."""
    g = cache.genus
    G = cache.gamma
    pis = [p(t) for p in cache.pis]
    out = np.zeros(np.broadcast(x, t).shape, dtype=complex)
    for k in range(1, g + 1):
        inner = sum(j * G[k - j] * pis[j - 1] for j in range(1, k + 1))
        out = out + x ** (g - k) * inner
    return out


def kernel_pi(x, t, cache: SurfaceCache, exclusion: float = 0.0):
    """Kernel from the second-kind differentials; the formula used for grids."""
    x, t = _prepare(x, t, exclusion)
    x, t = np.broadcast_arrays(x, t)
    yx, yt, _, lead = _leading_terms(x, t, cache.support)
    total = lead
    if cache.genus:
        total = total + _pi_sum(x, t, cache) / (yx * yt)
    out = _real_part(total / TWO_PI2, "pi-form kernel")
    return out if out.ndim else float(out)


@dataclass(eq=False)
class KernelGrid:
    x: np.ndarray
    t: np.ndarray
    values: np.ndarray  # NaN inside the excluded band
    method: str
    exclusion: float

    @property
    def mask(self) -> np.ndarray:
        return np.isfinite(self.values)


def grid_nodes(sol: EquilibriumSolution, n: int) -> np.ndarray:
    """``n`` Chebyshev points on every cut."""
    from .quadrature import make_mesh

    return np.concatenate([make_mesh(iv, n).nodes for iv in sol.support.cuts])


def kernel_grid(sol: EquilibriumSolution, nx: int = 20, nt: int | None = None,
                exclusion: float | None = None, method: str = "pi") -> KernelGrid:
    """Kernel on a product of per-cut Chebyshev points, rows in parallel.

    ``exclusion`` defaults to ``1e-3`` times the narrowest cut width.
    """
    nt = nx if nt is None else nt
    if exclusion is None:
        exclusion = 1e-3 * min(b - a for a, b in sol.support.cuts)
    xs = grid_nodes(sol, nx)
    ts = grid_nodes(sol, nt)
    func = {"pi": kernel_pi, "direct": kernel_direct}[method]
    cache = sol.cache

    def row(x):
        vals = np.full(ts.shape, np.nan)
        keep = np.abs(ts - x) > exclusion
        vals[keep] = func(np.full(keep.sum(), x), ts[keep], cache)
        return vals

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        values = np.array(list(pool.map(row, xs)))
    return KernelGrid(xs, ts, values, method, exclusion)


def variance(sol: EquilibriumSolution, f: Field) -> float:
    """``-int_J f(x) respond(f)(x) dx``, the quadratic form of the kernel."""
    resp = respond(sol, f)
    return -resp.dsigma.integrate(f)


def short_distance_coefficient(sol: EquilibriumSolution, x: float,
                               radii=(1e-3, 1e-2), npts: int = 12) -> float:
    """Fit ``C(x, t) (x - t)^2 = c0 + c1 d + c2 d^2`` over ``d`` on both sides of
    ``x`` and return ``c0``."""
    d = np.geomspace(radii[0], radii[1], npts)
    d = np.concatenate([-d[::-1], d])
    C = kernel_pi(np.full(d.shape, x), x - d, sol.cache)
    V = np.vander(d, 3, increasing=True)
    coef, *_ = np.linalg.lstsq(V, C * d * d, rcond=None)
    return float(coef[0])
