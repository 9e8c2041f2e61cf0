"""The hyperelliptic curve ``y^2 = prod_j (z - a_j)(z - b_j)`` over a real support.

Branch convention: the upper sheet is fixed by ``y ~ +z^(g+1)`` at ``+inf``.
On the real line ``y(x + i0) = r(x) * i^m(x)`` where ``r`` is the product of
``sqrt|x - e|`` over all endpoints and ``m`` counts the endpoints to the
right of ``x``. So ``y`` is purely imaginary on cuts and real on gaps.

The alpha-cycle ``alpha_k`` encircles cut ``k`` and collapses to twice the
real integral against ``y(x + i0)``. The ``"nested"`` convention makes
``alpha_k`` encircle cuts ``1..k`` instead; the normalized bases differ but
every kernel built from them does not.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .quadrature import (
    IntervalMesh,
    cauchy_matrix,
    integrate_singular,
    make_gap_mesh,
    make_mesh,
)

__all__ = [
    "SurfaceError",
    "Support",
    "Region",
    "classify",
    "eval_y",
    "eval_dy",
    "y_reduced",
    "gamma_coeffs",
    "squaring_defect",
    "UgCoeffs",
    "PhiBasis",
    "PiDiff",
    "SurfaceCache",
    "surface_cache",
    "ug_coeffs",
    "phi_basis",
    "pi_diff",
]

CYCLE_CONVENTIONS = ("gap", "cut", "nested")


class SurfaceError(ValueError):
    """Degenerate support or singular period system."""


@dataclass(frozen=True)
class Support:
    """Endpoints ``a_1 < b_1 < ... < a_{g+1} < b_{g+1}`` of the cuts."""

    endpoints: tuple[float, ...]

    def __post_init__(self):
        e = tuple(float(v) for v in self.endpoints)
        object.__setattr__(self, "endpoints", e)
        if len(e) < 2 or len(e) % 2:
            raise SurfaceError(f"need an even number (>=2) of endpoints, got {len(e)}")
        if not all(np.isfinite(e)):
            raise SurfaceError("endpoints must be finite")
        if any(hi <= lo for lo, hi in zip(e[:-1], e[1:])):
            raise SurfaceError(f"endpoints must be strictly increasing: {e}")

    @classmethod
    def from_intervals(cls, intervals: Sequence[tuple[float, float]]) -> "Support":
        return cls(tuple(v for iv in intervals for v in iv))

    @property
    def genus(self) -> int:
        return len(self.endpoints) // 2 - 1

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.endpoints)

    @property
    def cuts(self) -> list[tuple[float, float]]:
        e = self.endpoints
        return [(e[2 * j], e[2 * j + 1]) for j in range(self.genus + 1)]

    @property
    def gaps(self) -> list[tuple[float, float]]:
        e = self.endpoints
        return [(e[2 * j + 1], e[2 * j + 2]) for j in range(self.genus)]

    def translated(self, shift: float) -> "Support":
        return Support(tuple(v + shift for v in self.endpoints))

    def __str__(self):
        return " U ".join(f"({a:.12g}, {b:.12g})" for a, b in self.cuts)


class Region(NamedTuple):
    kind: str  # "cut", "gap", "exterior-left", "exterior-right", "endpoint"
    index: int | None  # 1-based cut/gap/endpoint index


def classify(x: float, s: Support, tol: float = 1e-12) -> Region:
    e = s.array
    scale = max(1.0, float(np.max(np.abs(e))))
    hit = np.nonzero(np.abs(x - e) < tol * scale)[0]
    if hit.size:
        return Region("endpoint", int(hit[0]) + 1)
    if x < e[0]:
        return Region("exterior-left", None)
    if x > e[-1]:
        return Region("exterior-right", None)
    i = int(np.searchsorted(e, x))  # e[i-1] < x < e[i]
    if i % 2:
        return Region("cut", (i + 1) // 2)
    return Region("gap", i // 2)


def _phase(m: np.ndarray) -> np.ndarray:
    return np.array([1, 1j, -1, -1j])[np.asarray(m) % 4]


def eval_y(x, s: Support) -> np.ndarray | complex:
    """Boundary value ``y(x + i0)`` on the upper sheet."""
    xa = np.asarray(x, dtype=float)
    e = s.array
    diff = xa[..., None] - e
    if np.any(diff == 0.0):
        raise SurfaceError("y vanishes at an endpoint; evaluate the vanishing explicitly")
    r = np.prod(np.sqrt(np.abs(diff)), axis=-1)
    m = np.sum(diff < 0, axis=-1)
    out = r * _phase(m)
    return out if xa.ndim else complex(out)


def eval_dy(x, s: Support) -> np.ndarray | complex:
    """``y'(x + i0) = y(x) / 2 * sum 1/(x - e)``."""
    xa = np.asarray(x, dtype=float)
    y = eval_y(xa, s)
    return y * 0.5 * np.sum(1.0 / (xa[..., None] - s.array), axis=-1)


def y_reduced(x, s: Support, lo_index: int) -> np.ndarray:
    """``y(x + i0) / sqrt|(x - e_lo)(e_lo+1 - x)|`` on the interval between
    endpoints ``lo_index`` and ``lo_index + 1`` (0-based).

    Smooth (and nonvanishing) on that closed interval.
    """
    xa = np.asarray(x, dtype=float)
    e = s.array
    others = np.delete(e, [lo_index, lo_index + 1])
    r = np.prod(np.sqrt(np.abs(xa[..., None] - others)), axis=-1) if others.size else np.ones_like(xa)
    m = len(e) - lo_index - 1
    return r * _phase(np.full(xa.shape, m))


def gamma_coeffs(s: Support, K: int) -> np.ndarray:
    """Coefficients ``Gamma_0..Gamma_K`` of ``y(z)/z^(g+1)`` in powers of ``1/z``.

    Series square root of ``P(u) = prod (1 - e u)``, whose coefficients are the
    signed elementary symmetric functions of the endpoints.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    P = np.poly(s.array)  # (-1)^k e_k, P[0] = 1
    P = np.concatenate([P, np.zeros(max(0, K + 1 - P.size))])
    G = np.zeros(K + 1)
    G[0] = 1.0
    for k in range(1, K + 1):
        G[k] = 0.5 * (P[k] - np.dot(G[1:k], G[k - 1:0:-1]))
    return G


def squaring_defect(s: Support, G: np.ndarray) -> float:
    """Max abs difference between the coefficients of ``(sum G_k u^k)^2`` and
    ``prod (1 - e u)`` through the order of ``G``."""
    K = G.size - 1
    P = np.poly(s.array)
    P = np.concatenate([P, np.zeros(max(0, K + 1 - P.size))])[: K + 1]
    sq = np.convolve(G, G)[: K + 1]
    return float(np.max(np.abs(sq - P)))


@dataclass(frozen=True)
class UgCoeffs:
    """``U_g(x) = (i/pi) (x^g + sum_l kappa_l x^l)``."""

    kappas: np.ndarray
    total: complex  # int_J U_g / y, equal to 1 when the gap conditions hold

    @property
    def poly(self) -> np.ndarray:
        """Descending coefficients of ``(pi/i) U_g``."""
        return np.concatenate([[1.0], self.kappas[::-1]])

    def __call__(self, x):
        return (1j / np.pi) * np.polyval(self.poly, x)


@dataclass(frozen=True)
class PhiBasis:
    """Normalized first-kind numerators ``phi_k(x) = sum_l gamma_kl x^(g-l)``."""

    gammas: np.ndarray  # (g, g) complex
    periods: np.ndarray  # alpha-period matrix of the monomials x^(g-l)
    cycles: str

    def __call__(self, x) -> np.ndarray:
        """Values with shape ``(g,) + shape(x)``."""
        g = self.gammas.shape[0]
        xa = np.asarray(x, dtype=float)
        powers = np.stack([xa ** (g - l) for l in range(1, g + 1)])
        return np.tensordot(self.gammas, powers, axes=(1, 0))


@dataclass(frozen=True)
class PiDiff:
    """Second-kind numerator ``pi_j`` with vanishing alpha-periods."""

    j: int
    coeffs: np.ndarray  # descending, degree g + j; complex-typed but real

    def __call__(self, t):
        return np.polyval(self.coeffs, t)


class SurfaceCache:
    """Meshes and curve data attached to one support.

    Meshes are built eagerly; the U_g, phi and pi tables on first use. Nothing
    is mutated after it has been computed.
    """

    def __init__(self, support: Support, n: int = 128, n_gap: int = 64, cycles: str = "gap"):
        if cycles not in CYCLE_CONVENTIONS:
            raise ValueError(f"unknown cycle convention {cycles!r}")
        self.support = support
        self.n = n
        self.n_gap = n_gap
        self.cycles = cycles
        self.cut_meshes = tuple(make_mesh(iv, n) for iv in support.cuts)
        self.gap_meshes = tuple(make_mesh(iv, n) for iv in support.gaps)
        self.gap_theta_meshes = tuple(make_gap_mesh(iv, n_gap) for iv in support.gaps)
        self.cut_yred = tuple(y_reduced(m.nodes, support, 2 * j) for j, m in enumerate(self.cut_meshes))
        self.cut_sqrt = tuple(m.sqrt_weight(m.nodes) for m in self.cut_meshes)
        self._lock = threading.Lock()
        self._matrices: dict = {}

    def __repr__(self):
        return f"SurfaceCache({self.support}, n={self.n}, cycles={self.cycles!r})"

    @property
    def genus(self) -> int:
        return self.support.genus

    @cached_property
    def gamma(self) -> np.ndarray:
        return gamma_coeffs(self.support, 2 * self.genus + 6)

    @cached_property
    def ug(self) -> UgCoeffs:
        return ug_coeffs(self.support, self.gap_meshes, self.cut_meshes)

    @cached_property
    def phi(self) -> PhiBasis | None:
        if not self.genus:
            return None
        return phi_basis(self.support, self.cut_meshes, cycles=self.cycles, gap_meshes=self.gap_meshes)

    @cached_property
    def pis(self) -> tuple[PiDiff, ...]:
        return tuple(pi_diff(self.support, j, self.cut_meshes, gamma=self.gamma, cycles=self.cycles,
                             gap_meshes=self.gap_meshes)
                     for j in range(1, self.genus + 1))

    def cauchy_on_nodes(self, src: int, dst: int) -> np.ndarray:
        """Cauchy/PV matrix from cut ``src`` values to cut ``dst`` nodes."""
        key = ("cauchy", src, dst)
        with self._lock:
            M = self._matrices.get(key)
            if M is None:
                M = cauchy_matrix(self.cut_meshes[src], self.cut_meshes[dst].nodes)
                M.setflags(write=False)
                self._matrices[key] = M
        return M

    def integrate_over_cut(self, j: int, numer) -> complex:
        """``int_{cut j} numer(x) / y(x + i0) dx`` (0-based ``j``)."""
        mesh = self.cut_meshes[j]
        vals = numer(mesh.nodes) if callable(numer) else numer
        return integrate_singular(np.asarray(vals) / self.cut_yred[j], mesh)

    def integrate_over_J(self, numer) -> complex:
        return sum(self.integrate_over_cut(j, numer) for j in range(self.genus + 1))

    def alpha_periods(self, numer) -> np.ndarray:
        """``oint_{alpha_k} numer / y`` for ``k = 1..g``."""
        meshes = _mesh_table(self.support, self.cut_meshes, self.gap_meshes)
        return np.array([_cycle_integral(self.support, k, numer, self.cycles, self.n, meshes)
                         for k in range(self.genus)])


def _gap_integral(s: Support, mesh: IntervalMesh, gap: int, numer) -> complex:
    yred = y_reduced(mesh.nodes, s, 2 * gap + 1)
    return integrate_singular(numer(mesh.nodes) / yred, mesh)


def ug_coeffs(s: Support, gap_meshes: Sequence[IntervalMesh] | None = None,
              cut_meshes: Sequence[IntervalMesh] | None = None, n: int = 128,
              check_tol: float = 1e-9) -> UgCoeffs:
    """Solve the gap conditions for ``kappa``; unit total mass then follows.

    The total ``int_J U_g/y`` is computed afterwards (not imposed) and checked.
    """
    g = s.genus
    gap_meshes = gap_meshes or [make_mesh(iv, n) for iv in s.gaps]
    cut_meshes = cut_meshes or [make_mesh(iv, n) for iv in s.cuts]
    kappas = np.zeros(0)
    if g:
        M = np.empty((g, g))
        rhs = np.empty(g)
        for j, mesh in enumerate(gap_meshes):
            for l in range(g):
                M[j, l] = _gap_integral(s, mesh, j, lambda x, l=l: x**l).real
            rhs[j] = -_gap_integral(s, mesh, j, lambda x: x**g).real
        if np.linalg.cond(M) > 1e14:
            raise SurfaceError("singular gap system for U_g: degenerate support")
        kappas = np.linalg.solve(M, rhs)
    poly = np.concatenate([[1.0], kappas[::-1]])
    total = 0j
    for j, mesh in enumerate(cut_meshes):
        total += integrate_singular(
            (1j / np.pi) * np.polyval(poly, mesh.nodes) / y_reduced(mesh.nodes, s, 2 * j), mesh
        )
    if abs(total - 1.0) > check_tol:
        raise SurfaceError(f"int_J U_g/y = {total} deviates from 1; quadrature too coarse?")
    return UgCoeffs(kappas, complex(total))


def _cycle_integral(s: Support, k: int, numer, cycles: str, n: int = 128,
                    meshes: dict | None = None) -> complex:
    """``oint_{alpha_{k+1}} numer / y`` collapsed to real integrals."""
    if cycles == "gap":
        # y is real on gaps; the factor i keeps phi / y real on the cuts
        parts, weight = [(s.gaps[k], 2 * k + 1)], 2j
    elif cycles == "cut":
        parts, weight = [(s.cuts[k], 2 * k)], 2.0
    elif cycles == "nested":
        parts, weight = [(s.cuts[m], 2 * m) for m in range(k + 1)], 2.0
    else:
        raise ValueError(f"unknown cycle convention {cycles!r}; use one of {CYCLE_CONVENTIONS}")
    total = 0j
    for iv, lo_index in parts:
        mesh = (meshes or {}).get(iv) or make_mesh(iv, n)
        total += weight * integrate_singular(numer(mesh.nodes) / y_reduced(mesh.nodes, s, lo_index), mesh)
    return total


def _mesh_table(s: Support, cut_meshes, gap_meshes=None) -> dict:
    table = {m.interval: m for m in (cut_meshes or ())}
    table.update({m.interval: m for m in (gap_meshes or ())})
    return table


def _monomial_periods(s: Support, meshes: dict, cycles: str, n: int = 128) -> np.ndarray:
    g = s.genus
    A = np.empty((g, g), dtype=complex)
    for k in range(g):
        for l in range(1, g + 1):
            A[k, l - 1] = _cycle_integral(s, k, lambda x, p=g - l: x**p, cycles, n, meshes)
    return A


def phi_basis(s: Support, cut_meshes: Sequence[IntervalMesh] | None = None,
              n: int = 128, cycles: str = "gap",
              gap_meshes: Sequence[IntervalMesh] | None = None) -> PhiBasis:
    g = s.genus
    if g < 1:
        raise SurfaceError("first-kind differentials need genus >= 1")
    A = _monomial_periods(s, _mesh_table(s, cut_meshes, gap_meshes), cycles, n)
    if np.linalg.cond(A) > 1e14:
        raise SurfaceError("near-singular alpha-period matrix")
    # rows of gammas are phi_k: sum_l gamma_kl A_jl = delta_kj
    gammas = np.linalg.inv(A).T
    return PhiBasis(gammas, A, cycles)


def pi_diff(s: Support, j: int, cut_meshes: Sequence[IntervalMesh] | None = None,
            n: int = 128, gamma: np.ndarray | None = None, cycles: str = "gap",
            gap_meshes: Sequence[IntervalMesh] | None = None) -> PiDiff:
    """Second-kind numerator ``pi_j`` of degree ``g + j``.

    Leading coefficients are ``Gamma_0..Gamma_j``; the trailing ``g`` are fixed
    by the vanishing alpha-periods.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    g = s.genus
    G = gamma if gamma is not None and gamma.size > j else gamma_coeffs(s, j)
    top = np.concatenate([G[: j + 1], np.zeros(g)])
    if g == 0:
        return PiDiff(j, top.astype(complex))
    meshes = _mesh_table(s, cut_meshes, gap_meshes)
    A = _monomial_periods(s, meshes, cycles, n)
    rhs = np.array([-_cycle_integral(s, k, lambda x: np.polyval(top, x), cycles, n, meshes)
                    for k in range(g)])
    if np.linalg.cond(A) > 1e14:
        raise SurfaceError("singular alpha-period system for pi_j")
    a = np.linalg.solve(A, rhs)
    coeffs = top.astype(complex)
    coeffs[j + 1:] = a
    return PiDiff(j, coeffs)


def surface_cache(s: Support, n: int = 128, n_gap: int = 64, cycles: str = "gap") -> SurfaceCache:
    return SurfaceCache(s, n, n_gap, cycles)
