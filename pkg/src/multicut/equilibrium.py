"""Equilibrium measure of a confining field on a union of intervals.

Endpoints are fixed by ``g + 1`` moment conditions, ``g`` gap conditions
(the Lagrange multiplier is the same on every cut) and unit mass. The density
is available in two forms that agree once those conditions hold:

* the bounded inversion ``sigma = y(x)/(2 pi^2) P int v'(t) / (y(t)(t - x)) dt``,
  used for the endpoint residuals and for reported samples;
* the constructive form ``P int y v' / (t - x)`` over ``2 pi^2 y(x)`` plus first-kind
  terms ``(U_g + sum c_k phi_k) / y``, the same machinery the linear response
  uses.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .potential import Field, PotentialSpec
from .quadrature import (
    QuadratureError,
    cauchy_matrix,
    integrate_gap,
    integrate_ray,
    integrate_singular,
    log_matrix,
    make_ray_mesh,
)
from .surface import Support, SurfaceCache, SurfaceError, eval_y

__all__ = [
    "SolverError",
    "GenusTooHighError",
    "GenusTooLowError",
    "ConsistencyError",
    "CutFunction",
    "EquilibriumSolution",
    "SolveOptions",
    "moments",
    "residuals",
    "density",
    "density_constructive",
    "constructive_solve",
    "gap_fields",
    "solve_endpoints",
    "solve",
    "v_of_J",
    "lagrange_A",
    "direct_A",
    "energy",
]

log = logging.getLogger(__name__)

TWO_PI2 = 2.0 * np.pi**2


class SolverError(RuntimeError):
    """Endpoint iteration failed; ``support`` holds the last iterate."""

    def __init__(self, message: str, support: Support | None = None, condition: str = ""):
        super().__init__(message)
        self.support = support
        self.condition = condition


class GenusTooHighError(SolverError):
    pass


class GenusTooLowError(SolverError):
    pass


class ConsistencyError(RuntimeError):
    pass


class CutFunction:
    """A function on ``J`` stored as numerators at the cut nodes.

    On cut ``j`` the function equals ``numerators[j] / sqrt((x-a_j)(b_j-x))``;
    both ``sqrt``-vanishing densities and inverse-``sqrt`` responses fit.
    """

    def __init__(self, cache: SurfaceCache, numerators):
        self.cache = cache
        self.numerators = tuple(np.asarray(f, dtype=float) for f in numerators)

    @property
    def nodes(self) -> tuple[np.ndarray, ...]:
        return tuple(m.nodes for m in self.cache.cut_meshes)

    @property
    def values(self) -> tuple[np.ndarray, ...]:
        return tuple(f / sq for f, sq in zip(self.numerators, self.cache.cut_sqrt))

    def cut_masses(self) -> np.ndarray:
        return np.array([integrate_singular(f, m) for f, m in zip(self.numerators, self.cache.cut_meshes)])

    def mass(self) -> float:
        return float(self.cut_masses().sum())

    def integrate(self, g) -> float:
        """``int_J g(x) rho(x) dx`` for a smooth callable ``g``."""
        return float(sum(integrate_singular(g(m.nodes) * f, m)
                         for f, m in zip(self.numerators, self.cache.cut_meshes)))

    def cauchy(self, x) -> np.ndarray:
        """``int_J rho(t) / (t - x) dt`` (principal value on ``J``)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return sum(cauchy_matrix(m, x) @ f for f, m in zip(self.numerators, self.cache.cut_meshes))

    def log_potential(self, x) -> np.ndarray:
        """``int_J log|x - t| rho(t) dt``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return sum(log_matrix(m, x) @ f for f, m in zip(self.numerators, self.cache.cut_meshes))

    def __add__(self, other: "CutFunction") -> "CutFunction":
        return CutFunction(self.cache, [a + b for a, b in zip(self.numerators, other.numerators)])

    def __mul__(self, c: float) -> "CutFunction":
        return CutFunction(self.cache, [c * a for a in self.numerators])

    __rmul__ = __mul__

    def __sub__(self, other: "CutFunction") -> "CutFunction":
        return self + (-1.0) * other

    def at(self, x) -> np.ndarray:
        """Evaluate at arbitrary points of ``J`` by Chebyshev interpolation of the
        numerators; zero outside ``J``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for f, m, sq in zip(self.numerators, self.cache.cut_meshes, self.cache.cut_sqrt):
            inside = (x > m.lo) & (x < m.hi)
            if not np.any(inside):
                continue
            cheb = np.polynomial.Chebyshev(_coeffs(f, m))
            xi = x[inside]
            out[inside] = cheb(m.to_unit(xi)) / m.sqrt_weight(xi)
        return out


def _coeffs(values, mesh):
    from .quadrature import cheb_coeffs

    return cheb_coeffs(values, mesh)


def _real(z: np.ndarray, what: str, tol: float = 1e-8) -> np.ndarray:
    z = np.asarray(z)
    scale = max(1.0, float(np.max(np.abs(z)))) if z.size else 1.0
    if np.iscomplexobj(z) and np.max(np.abs(z.imag), initial=0.0) > tol * scale:
        raise ConsistencyError(f"{what} should be real; imaginary part {np.max(np.abs(z.imag)):.2e}")
    return np.real(z)


def moments(cache: SurfaceCache, p: Field) -> np.ndarray:
    """``M_k = i * int_J x^k v'(x) / y(x) dx`` for ``k = 0..g`` (real)."""
    out = []
    for k in range(cache.genus + 1):
        out.append(1j * cache.integrate_over_J(lambda x, k=k: x**k * p.d(x)))
    return _real(np.array(out), "moment integral")


def density(cache: SurfaceCache, p: Field) -> CutFunction:
    """Bounded-inversion density at the cut nodes of ``cache``."""
    ncut = cache.genus + 1
    src = [p.d(m.nodes) / yr for m, yr in zip(cache.cut_meshes, cache.cut_yred)]
    numers = []
    for j in range(ncut):
        H = sum(cache.cauchy_on_nodes(i, j) @ src[i] for i in range(ncut))
        f = cache.cut_yred[j] * H * cache.cut_sqrt[j] ** 2 / TWO_PI2
        numers.append(_real(f, "density"))
    return CutFunction(cache, numers)


def gap_fields(cache: SurfaceCache, rho: CutFunction, dprime) -> np.ndarray:
    """``(1/2pi) int_gap (u'(x) - 2 int_J rho(t)/(x - t) dt) dx`` for each gap.

    For the equilibrium (``u = v``) this is the jump of the Lagrange
    multiplier across the gap over ``2 pi``; it also equals ``i`` times the
    mass of the analytically continued density in the gap.
    """
    out = np.empty(cache.genus)
    for j, gm in enumerate(cache.gap_theta_meshes):
        integrand = dprime(gm.nodes) + 2.0 * rho.cauchy(gm.nodes)
        out[j] = integrate_gap(integrand, gm) / (2.0 * np.pi)
    return out


def residuals(s: Support | SurfaceCache, p: Field, n: int = 128, n_gap: int = 64) -> np.ndarray:
    """``[M_0..M_g, G_1..G_g, N]``, all zero at the equilibrium support."""
    cache = s if isinstance(s, SurfaceCache) else SurfaceCache(s, n, n_gap)
    sigma = density(cache, p)
    M = moments(cache, p)
    G = gap_fields(cache, sigma, p.d)
    N = sigma.mass() - 1.0
    return np.concatenate([M, G, [N]])


def constructive_solve(cache: SurfaceCache, dprime, with_ug: bool) -> tuple[CutFunction, np.ndarray]:
    """Solve ``2 P int rho(t)/(x - t) dt = u'(x)`` on ``J`` in constructive form.

    ``rho = P int y u'/(t - x) dt / (2 pi^2 y) + (w U_g + sum_k c_k phi_k) / y``
    with ``w = 1`` if ``with_ug`` else 0 and ``c`` fixed by zero gap fields.
    Returns the function and ``c``.
    """
    g = cache.genus
    ncut = g + 1
    meshes = cache.cut_meshes
    src = [yr * sq**2 * dprime(m.nodes) for m, yr, sq in zip(meshes, cache.cut_yred, cache.cut_sqrt)]
    part = []
    for j in range(ncut):
        pv = sum(cache.cauchy_on_nodes(i, j) @ src[i] for i in range(ncut))
        part.append(_real(pv / (TWO_PI2 * cache.cut_yred[j]), "particular response"))
    rho = CutFunction(cache, part)
    if with_ug:
        rho = rho + CutFunction(cache, [_real(cache.ug(m.nodes) / yr, "U_g/y")
                                        for m, yr in zip(meshes, cache.cut_yred)])
    if g == 0:
        return rho, np.zeros(0)
    basis = []
    for k in range(g):
        basis.append(CutFunction(cache, [_real(cache.phi(m.nodes)[k] / yr, "phi/y")
                                         for m, yr in zip(meshes, cache.cut_yred)]))
    rhs = -gap_fields(cache, rho, dprime)
    zero = lambda x: np.zeros_like(x)  # noqa: E731
    A = np.column_stack([gap_fields(cache, b, zero) for b in basis])
    if np.linalg.cond(A) > 1e13:
        raise SurfaceError("singular gap system for the first-kind coefficients")
    c = np.linalg.solve(A, rhs)
    for ck, b in zip(c, basis):
        rho = rho + ck * b
    return rho, c


def density_constructive(cache: SurfaceCache, p: Field) -> tuple[CutFunction, np.ndarray]:
    return constructive_solve(cache, p.d, with_ug=True)


def v_of_J(s: Support | SurfaceCache, n_ray: int = 160) -> float:
    """``int_b^inf ((pi/i) U_g(t)/y(t) - 1/t) dt - log b`` with ``b = b_{g+1} > 0``."""
    cache = s if isinstance(s, SurfaceCache) else SurfaceCache(s)
    sup = cache.support
    b = sup.endpoints[-1]
    if b <= 0:
        raise ValueError("V[J] needs b_{g+1} > 0; translate the support first")
    poly = cache.ug.poly

    def integrand(t):
        return np.polyval(poly, t) / eval_y(t, sup).real - 1.0 / t

    mesh = make_ray_mesh(b, n_ray, scale=sup.endpoints[-1] - sup.endpoints[0])
    return integrate_ray(integrand, mesh) - np.log(b)


def direct_A(sigma: CutFunction, p: Field, x0) -> np.ndarray:
    """``v(x0) - 2 int_J log|x0 - t| sigma(t) dt``."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    return p(x0) - 2.0 * sigma.log_potential(x0)


def energy(sigma: CutFunction, p: Field) -> float:
    """``-int int log|x-t| sigma sigma + int v sigma``."""
    total = 0.0
    for f, m in zip(sigma.numerators, sigma.cache.cut_meshes):
        logpot = sigma.log_potential(m.nodes)
        total += integrate_singular(f * (p(m.nodes) - logpot), m)
    return float(total)


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-12
    max_iter: int = 50
    n: int = 128
    n_gap: int = 64
    fd_step: float = 1e-7
    max_halvings: int = 30
    collapse_tol: float = 1e-8
    positivity_tol: float = 1e-8


@dataclass(eq=False)
class EquilibriumSolution:
    support: Support
    potential: Field
    cache: SurfaceCache = field(repr=False)
    sigma: CutFunction = field(repr=False)
    coeffs: np.ndarray
    residual: np.ndarray
    A: float
    V_J: float
    A_shift: float = 0.0
    probes: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    probe_A: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def genus(self) -> int:
        return self.support.genus

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residual))


def _check_ordering(e: np.ndarray, collapse_tol: float) -> str | None:
    d = np.diff(e)
    scale = max(1.0, float(np.max(np.abs(e))))
    if np.any(d[1::2] <= 0):
        return "collision"
    if np.any(d[0::2] < collapse_tol * scale):
        return "collapse"
    if np.any(d[1::2] < collapse_tol * scale):
        return "collision"
    return None


def _closing(e0: np.ndarray, e: np.ndarray, ratio: float = 1e-2) -> str | None:
    """Detect a gap or cut that shrank by ``ratio`` relative to the start."""
    d0, d = np.diff(e0), np.diff(e)
    if np.any(d[1::2] < ratio * d0[1::2]):
        return "collision"
    if np.any(d[0::2] < ratio * d0[0::2]):
        return "collapse"
    return None


def _ordering_error(kind: str, e: np.ndarray) -> SolverError:
    if kind == "collision":
        return GenusTooHighError(
            "cut collision (b_j >= a_{j+1}) during endpoint iteration: "
            "genus too high for this potential (gap conditions cannot hold)",
            Support(tuple(np.sort(e))) if np.all(np.diff(np.sort(e)) > 0) else None,
            "gap condition",
        )
    return GenusTooLowError(
        "cut collapse (b_j - a_j below tolerance): genus too low / cut vanishes",
        None, "cut collapse",
    )


def solve_endpoints(p: Field, init: Support, opts: SolveOptions = SolveOptions()) -> Support:
    """Damped Newton iteration on :func:`residuals` with a forward-difference
    Jacobian."""
    e = init.array.copy()
    F = residuals(Support(tuple(e)), p, opts.n, opts.n_gap)
    norm = np.linalg.norm(F)
    for it in range(opts.max_iter):
        log.debug("newton %d: |F| = %.3e, endpoints %s", it, norm, e)
        if norm < opts.tol:
            return Support(tuple(e))
        J = np.empty((F.size, e.size))
        for k in range(e.size):
            h = opts.fd_step * (1.0 + abs(e[k]))
            ek = e.copy()
            ek[k] += h
            bad = _check_ordering(ek, opts.collapse_tol)
            if bad:
                ek[k] -= 2 * h
                h = -h
            try:
                J[:, k] = (residuals(Support(tuple(ek)), p, opts.n, opts.n_gap) - F) / h
            except QuadratureError as exc:
                raise _ordering_error(_closing(init.array, e) or "collision", e) from exc
        try:
            step = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            if init.genus:
                raise GenusTooHighError(
                    "singular Jacobian in endpoint iteration: the gap conditions are degenerate "
                    "here; genus too high for this potential?", Support(tuple(e)),
                    "gap condition") from None
            raise SolverError("singular Jacobian in endpoint iteration", Support(tuple(e)),
                              "moment residual") from None
        lam = 1.0
        last_bad = None
        for _ in range(opts.max_halvings):
            trial = e + lam * step
            last_bad = _check_ordering(trial, opts.collapse_tol)
            if last_bad is None:
                try:
                    Ft = residuals(Support(tuple(trial)), p, opts.n, opts.n_gap)
                except (QuadratureError, SurfaceError):
                    Ft = None
                if Ft is not None and np.linalg.norm(Ft) < norm:
                    break
            lam *= 0.5
        else:
            if last_bad is not None:
                raise _ordering_error(last_bad, trial)
            closing = _closing(init.array, e)
            if closing:
                raise _ordering_error(closing, e)
            if norm < 1e3 * opts.tol:
                # roundoff floor reached just above the requested tolerance
                log.warning("endpoint iteration stalled at |F| = %.3e", norm)
                return Support(tuple(e))
            raise SolverError(f"line search failed at |F| = {norm:.3e}", Support(tuple(e)),
                              "moment residual")
        e, F, norm = trial, Ft, np.linalg.norm(Ft)
        bad = _check_ordering(e, 1e3 * opts.collapse_tol)
        if bad:
            raise _ordering_error(bad, e)
    if norm < opts.tol:
        return Support(tuple(e))
    closing = _closing(init.array, e)
    if closing:
        raise _ordering_error(closing, e)
    names = _residual_names(init.genus)
    worst = names[int(np.argmax(np.abs(F)))]
    raise SolverError(
        f"endpoint iteration did not converge in {opts.max_iter} steps: |F| = {norm:.3e} "
        f"(largest: {worst})", Support(tuple(e)), worst)


def _residual_names(g: int) -> list[str]:
    return ([f"moment condition M_{k}" for k in range(g + 1)]
            + [f"gap condition G_{j}" for j in range(1, g + 1)]
            + ["normalization N"])


def lagrange_A(sol: EquilibriumSolution, n_probe: int = 3, spread_tol: float = 1e-8,
               agree_tol: float = 1e-7) -> tuple[float, float, np.ndarray, np.ndarray]:
    """``A = 2 V[J] + int_J v U_g / y`` cross-checked against the direct
    potential at probe points on every cut.

    Returns ``(A, V_J, probes, direct values)``; ``V_J`` refers to the support
    translated so that ``b_{g+1} = 1`` when ``b_{g+1} <= 0``.
    """
    cache = sol.cache
    shift = 0.0
    b = sol.support.endpoints[-1]
    if b <= 0:
        shift = 1.0 - b
        V = v_of_J(SurfaceCache(sol.support.translated(shift), cache.n, cache.n_gap))
    else:
        V = v_of_J(cache)
    field_term = _real(cache.integrate_over_J(lambda x: sol.potential(x) * cache.ug(x)), "int v U_g/y")
    A = 2.0 * V + float(field_term)
    probes = []
    for a_j, b_j in sol.support.cuts:
        probes.extend(a_j + (b_j - a_j) * (np.arange(1, n_probe + 1) / (n_probe + 1)))
    probes = np.array(probes)
    dA = direct_A(sol.sigma, sol.potential, probes)
    spread = float(np.ptp(dA))
    if spread > spread_tol:
        raise ConsistencyError(f"direct A varies across J by {spread:.3e} > {spread_tol:.1e}")
    gap = float(np.max(np.abs(dA - A)))
    if gap > agree_tol:
        raise ConsistencyError(f"|A - direct A| = {gap:.3e} > {agree_tol:.1e}")
    return A, V, probes, dA


def solve(p: Field, init: Support, opts: SolveOptions = SolveOptions(), cycles: str = "gap",
          check_A: bool = True) -> EquilibriumSolution:
    """Full pipeline: endpoints, density, first-kind coefficients, ``A`` and ``V[J]``."""
    sup = solve_endpoints(p, init, opts)
    cache = SurfaceCache(sup, opts.n, opts.n_gap, cycles=cycles)
    sigma = density(cache, p)
    smax = max(float(np.max(v)) for v in sigma.values)
    smin = min(float(np.min(v)) for v in sigma.values)
    if smin < -opts.positivity_tol * max(1.0, smax):
        raise GenusTooLowError(
            f"density negative (min {smin:.3e}) at the converged support: "
            "genus too low / cut vanishes", sup, "positivity")
    _, coeffs = density_constructive(cache, p)
    res = residuals(cache, p)
    sol = EquilibriumSolution(sup, p, cache, sigma, coeffs, res, np.nan, np.nan)
    if check_A:
        A, V, probes, dA = lagrange_A(sol)
        sol.A, sol.V_J, sol.probes, sol.probe_A = A, V, probes, dA
        sol.A_shift = 0.0 if sup.endpoints[-1] > 0 else 1.0 - sup.endpoints[-1]
    return sol


def solution_from_support(p: PotentialSpec, sup: Support, n: int = 128,
                          cycles: str = "gap", n_gap: int = 64) -> EquilibriumSolution:
    """Assemble a solution at a given (already solved) support without iterating."""
    cache = SurfaceCache(sup, n, n_gap, cycles=cycles)
    sigma = density(cache, p)
    _, coeffs = density_constructive(cache, p)
    res = residuals(cache, p)
    sol = EquilibriumSolution(sup, p, cache, sigma, coeffs, res, np.nan, np.nan)
    A, V, probes, dA = lagrange_A(sol)
    sol.A, sol.V_J, sol.probes, sol.probe_A = A, V, probes, dA
    return sol
