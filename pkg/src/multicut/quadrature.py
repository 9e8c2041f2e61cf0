"""Quadrature on cuts, gaps and rays.

Every integral on a cut is written as ``f(t) / sqrt((t - lo)(hi - t))`` with
``f`` smooth, and handled by the Gauss rule for the Chebyshev weight. Principal
values, Cauchy transforms at exterior points and logarithmic potentials are
evaluated spectrally: ``f`` is expanded in first-kind Chebyshev polynomials of
the interval and each basis element is mapped through its closed-form image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

__all__ = [
    "QuadratureError",
    "IntervalMesh",
    "GapMesh",
    "RayMesh",
    "make_mesh",
    "make_gap_mesh",
    "make_ray_mesh",
    "integrate_singular",
    "cheb_coeffs",
    "cauchy_matrix",
    "cauchy_derivative_matrix",
    "log_matrix",
    "pv_integrate",
    "cauchy_integrate",
    "log_integrate",
    "integrate_gap",
    "integrate_ray",
]

#: Relative distance below which a point counts as sitting on an endpoint.
ENDPOINT_TOL = 1e-12

FuncOrValues = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


class QuadratureError(ValueError):
    """Raised for degenerate meshes or integrands the rules cannot handle."""


@dataclass(frozen=True)
class IntervalMesh:
    """Gauss-Chebyshev rule for ``int_lo^hi f(x) / sqrt((x-lo)(hi-x)) dx``.

    Exact for polynomial ``f`` of degree ``<= 2n - 1``.
    """

    lo: float
    hi: float
    n: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    @property
    def interval(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.half_width

    def sqrt_weight(self, x):
        """``sqrt((x-lo)(hi-x))``, the factor absorbed by the rule."""
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.clip((x - self.lo) * (self.hi - x), 0.0, None))


@dataclass(frozen=True)
class GapMesh:
    """Gauss-Legendre rule in the angle ``x = c + h cos(theta)``.

    Integrands behaving like ``(x - lo)^{k/2}`` at either end, ``k >= -1``,
    become smooth in ``theta`` once multiplied by the Jacobian, so the rule
    converges geometrically for them.
    """

    lo: float
    hi: float
    n: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class RayMesh:
    """Rule for ``int_start^inf f(t) dt`` with ``f = O(t^-2)``.

    Uses ``t = start + scale * tan(theta)^2`` followed by Gauss-Legendre in
    ``theta``, which also absorbs an inverse square root at ``start``.
    """

    start: float
    scale: float
    n: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


def _check_interval(lo: float, hi: float) -> None:
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise QuadratureError(f"non-finite interval ({lo}, {hi})")
    if hi - lo <= ENDPOINT_TOL * max(1.0, abs(lo), abs(hi)):
        raise QuadratureError(
            f"collapsed cut/gap: interval ({lo!r}, {hi!r}) has width {hi - lo:.3e}"
        )


def make_mesh(interval: tuple[float, float], n: int = 128) -> IntervalMesh:
    """Gauss-Chebyshev (first kind) nodes and weights mapped to ``interval``.

    The weights are ``pi / n`` on every interval because the weight
    ``1/sqrt((x-lo)(hi-x))`` is invariant under the affine map up to the
    Jacobian, which cancels.
    """
    lo, hi = float(interval[0]), float(interval[1])
    _check_interval(lo, hi)
    if n < 2:
        raise QuadratureError(f"mesh order must be >= 2, got {n}")
    k = np.arange(n, 0, -1)
    u = np.cos((2 * k - 1) * np.pi / (2 * n))
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * u
    weights = np.full(n, np.pi / n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return IntervalMesh(lo, hi, n, nodes, weights)


def make_gap_mesh(interval: tuple[float, float], n: int = 64) -> GapMesh:
    lo, hi = float(interval[0]), float(interval[1])
    _check_interval(lo, hi)
    z, w = np.polynomial.legendre.leggauss(n)
    theta = 0.5 * np.pi * (z + 1.0)
    h = 0.5 * (hi - lo)
    # theta runs from 0 (x = hi) to pi (x = lo)
    nodes = (0.5 * (lo + hi) + h * np.cos(theta))[::-1]
    weights = (0.5 * np.pi * w * h * np.sin(theta))[::-1]
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return GapMesh(lo, hi, n, nodes, weights)


def make_ray_mesh(start: float, n: int = 128, scale: float = 1.0) -> RayMesh:
    if scale <= 0:
        raise QuadratureError("ray scale must be positive")
    z, w = np.polynomial.legendre.leggauss(n)
    theta = 0.25 * np.pi * (z + 1.0)
    tan = np.tan(theta)
    nodes = start + scale * tan**2
    weights = 0.25 * np.pi * w * 2.0 * scale * tan / np.cos(theta) ** 2
    return RayMesh(float(start), float(scale), n, nodes, weights)


def _values(f: FuncOrValues, nodes: np.ndarray) -> np.ndarray:
    vals = f(nodes) if callable(f) else np.asarray(f)
    vals = np.broadcast_to(vals, nodes.shape) if np.ndim(vals) == 0 else vals
    if vals.shape[0] != nodes.shape[0]:
        raise QuadratureError("value array does not match mesh size")
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("integrand is not finite at a quadrature node")
    return vals


def integrate_singular(f: FuncOrValues, mesh: IntervalMesh):
    """``int f(x) / sqrt((x-lo)(hi-x)) dx`` over the mesh interval.

    ``f`` is a vectorized callable or an array of values at ``mesh.nodes``
    (extra trailing axes are integrated independently).
    """
    vals = _values(f, mesh.nodes)
    return np.tensordot(mesh.weights, vals, axes=(0, 0))


def integrate_gap(f: FuncOrValues, mesh: GapMesh):
    vals = _values(f, mesh.nodes)
    return np.tensordot(mesh.weights, vals, axes=(0, 0))


def _transform_matrix(n: int) -> np.ndarray:
    """Map node values (increasing order) to Chebyshev coefficients."""
    k = np.arange(n, 0, -1)
    theta = (2 * k - 1) * np.pi / (2 * n)
    m = np.arange(n)[:, None]
    C = (2.0 / n) * np.cos(m * theta[None, :])
    C[0] *= 0.5
    return C


_TRANSFORMS: dict[int, np.ndarray] = {}


def _transform(n: int) -> np.ndarray:
    C = _TRANSFORMS.get(n)
    if C is None:
        C = _transform_matrix(n)
        C.setflags(write=False)
        _TRANSFORMS[n] = C
    return C


def cheb_coeffs(f: FuncOrValues, mesh: IntervalMesh) -> np.ndarray:
    """Chebyshev coefficients of ``f`` on the mesh interval (interpolant at nodes)."""
    return _transform(mesh.n) @ _values(f, mesh.nodes)


def _classify_targets(mesh: IntervalMesh, x0) -> tuple[np.ndarray, np.ndarray]:
    u0 = mesh.to_unit(np.atleast_1d(np.asarray(x0, dtype=float)))
    if np.any(np.abs(np.abs(u0) - 1.0) < ENDPOINT_TOL):
        raise QuadratureError(
            "evaluation point within tolerance of an interval endpoint; "
            "use the endpoint-aware path"
        )
    return u0, np.abs(u0) < 1.0


def _exterior_w(u0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``S = sqrt(z^2-1)`` with ``S ~ z`` and ``w = z - S`` (``|w| < 1``)."""
    S = np.sign(u0) * np.sqrt(u0 * u0 - 1.0)
    w = u0 - S
    return S, w


def _basis_cauchy(n: int, u0: np.ndarray, inside: np.ndarray) -> np.ndarray:
    """``J[i, k] = (P)int T_k(u) / ((u - u0_i) sqrt(1-u^2)) du``."""
    J = np.zeros((u0.size, n))
    ui = u0[inside]
    if ui.size:
        # pi * U_{k-1}(u0); U_{-1} = 0
        U_prev = np.zeros_like(ui)
        U_cur = np.ones_like(ui)
        for k in range(1, n):
            J[inside, k] = np.pi * U_cur
            U_prev, U_cur = U_cur, 2 * ui * U_cur - U_prev
    out = ~inside
    if np.any(out):
        S, w = _exterior_w(u0[out])
        powers = w[:, None] ** np.arange(n)[None, :]
        J[out] = -np.pi * powers / S[:, None]
    return J


def _basis_cauchy_derivative(n: int, u0: np.ndarray, inside: np.ndarray) -> np.ndarray:
    """Derivative in ``u0`` of :func:`_basis_cauchy` (finite part on the cut)."""
    D = np.zeros((u0.size, n))
    ui = u0[inside]
    if ui.size:
        U_prev, U_cur = np.zeros_like(ui), np.ones_like(ui)
        dU_prev, dU_cur = np.zeros_like(ui), np.zeros_like(ui)
        for k in range(1, n):
            D[inside, k] = np.pi * dU_cur
            U_next = 2 * ui * U_cur - U_prev
            dU_next = 2 * U_cur + 2 * ui * dU_cur - dU_prev
            U_prev, U_cur = U_cur, U_next
            dU_prev, dU_cur = dU_cur, dU_next
    out = ~inside
    if np.any(out):
        S, w = _exterior_w(u0[out])
        m = np.arange(n)[None, :]
        powers = w[:, None] ** m
        D[out] = np.pi * powers * (m / S[:, None] ** 2 + (u0[out] / S**3)[:, None])
    return D


def _basis_log(n: int, u0: np.ndarray, inside: np.ndarray) -> np.ndarray:
    """``L[i, k] = int T_k(u) log|u - u0_i| / sqrt(1-u^2) du``."""
    L = np.zeros((u0.size, n))
    k = np.arange(1, n)
    ui = u0[inside]
    if ui.size:
        L[inside, 0] = -np.pi * np.log(2.0)
        L[np.ix_(inside, k)] = -np.pi * np.cos(np.outer(np.arccos(ui), k)) / k
    out = ~inside
    if np.any(out):
        _, w = _exterior_w(u0[out])
        L[out, 0] = -np.pi * np.log(2.0 * np.abs(w))
        L[np.ix_(out, k)] = -np.pi * w[:, None] ** k[None, :] / k
    return L


def cauchy_matrix(mesh: IntervalMesh, x0) -> np.ndarray:
    """Matrix ``M`` with ``M @ f(nodes) = (P)int f(t)/((t-x0) sqrt(..)) dt``.

    Points inside the interval get the principal value; points outside get
    the ordinary Cauchy integral. Rows follow the order of ``x0``.
    """
    u0, inside = _classify_targets(mesh, x0)
    J = _basis_cauchy(mesh.n, u0, inside)
    return (J @ _transform(mesh.n)) / mesh.half_width


def cauchy_derivative_matrix(mesh: IntervalMesh, x0) -> np.ndarray:
    """``d/dx0`` of :func:`cauchy_matrix`; the Hadamard finite part inside."""
    u0, inside = _classify_targets(mesh, x0)
    D = _basis_cauchy_derivative(mesh.n, u0, inside)
    return (D @ _transform(mesh.n)) / mesh.half_width**2


def log_matrix(mesh: IntervalMesh, x0) -> np.ndarray:
    """Matrix ``M`` with ``M @ f(nodes) = int f(t) log|x0 - t| / sqrt(..) dt``."""
    u0, inside = _classify_targets(mesh, x0)
    L = _basis_log(mesh.n, u0, inside)
    L[:, 0] += np.pi * np.log(mesh.half_width)
    return L @ _transform(mesh.n)


def pv_integrate(f: FuncOrValues, mesh: IntervalMesh, x0: float) -> float:
    """Principal value of ``int f(t) / ((t - x0) sqrt((t-lo)(hi-t))) dt``.

    ``x0`` must lie strictly inside the interval.
    """
    u0 = float(mesh.to_unit(x0))
    if not abs(u0) < 1.0:
        raise QuadratureError(f"x0={x0} is not interior to {mesh.interval}")
    return float(cauchy_matrix(mesh, x0)[0] @ _values(f, mesh.nodes))


def cauchy_integrate(f: FuncOrValues, mesh: IntervalMesh, x0):
    vals = _values(f, mesh.nodes)
    out = cauchy_matrix(mesh, x0) @ vals
    return out if np.ndim(x0) else out[0]


def log_integrate(f: FuncOrValues, mesh: IntervalMesh, x0):
    vals = _values(f, mesh.nodes)
    out = log_matrix(mesh, x0) @ vals
    return out if np.ndim(x0) else out[0]


def integrate_ray(f: Callable[[np.ndarray], np.ndarray], mesh: RayMesh,
                  decay_tol: float = 1e-6) -> float:
    """``int_start^inf f(t) dt`` for integrands decaying at least like ``t^-2``.

    Raises :class:`QuadratureError` when ``t * f(t)`` has not died out far
    along the ray, which signals ``1/t`` (non-integrable) decay.
    """
    far = mesh.start + mesh.scale * 1e8
    tail = abs(far * float(f(np.array([far]))[0]))
    if not np.isfinite(tail) or tail > decay_tol:
        raise QuadratureError(
            f"integrand decays too slowly on the ray: |t f(t)| = {tail:.3e} at t = {far:.3e}"
        )
    vals = _values(f, mesh.nodes)
    return float(mesh.weights @ vals)
