"""Self-verification suite: one check per acceptance criterion.

Each check measures, compares against a pinned tolerance and reports
``PASS``/``FAIL`` with the measured values and its runtime. Tolerances can
be overridden by name (see :data:`DEFAULT_TOLERANCES`); the test suite and
the ``verify`` command run the same code.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, TextIO

import numpy as np

from .equilibrium import (
    EquilibriumSolution,
    SolverError,
    direct_A,
    lagrange_A,
    solve,
)
from .kernel import (
    delta_A,
    grid_nodes,
    kernel_direct,
    kernel_pi,
    respond,
    short_distance_coefficient,
    variance,
)
from .oracle import discrete_equilibrium, fd_response
from .potential import Perturbation, PotentialSpec
from .surface import Support, SurfaceCache, gamma_coeffs, squaring_defect

__all__ = ["CheckResult", "Corpus", "DEFAULT_TOLERANCES", "CHECKS", "run_checks", "format_result"]

SHORT_DISTANCE_TARGET = -1.0 / (2.0 * math.pi**2)

DEFAULT_TOLERANCES: dict[str, float] = {
    "1.endpoint": 1e-8,
    "1.density": 1e-8,
    "1.residual": 1e-10,
    "2.residual": 1e-10,
    "2.endpoint": 2e-3,
    "3.ug": 1e-10,
    "4.gamma": 1e-13,
    "5.response": 1e-10,
    "5.dA": 1e-12,
    "6.bilinear": 1e-6,
    "6.pointwise": 1e-8,
    "7.equivalence": 1e-8,
    "7.g0": 0.0,
    "8.fd": 1e-3,
    "8.reduction": 10.0,
    "9.ratio_low": 5.0,
    "9.ratio_high": 20.0,
    "10.spread": 1e-8,
    "10.agree": 1e-7,
    "11.relative": 1e-2,
    "12.const": 1e-10,
    "12.nonneg": 1e-10,
    "12.tk": 1e-6,
}


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    measured: str
    seconds: float = 0.0


def format_result(r: CheckResult) -> str:
    flag = "PASS" if r.passed else "FAIL"
    return f"{flag} [{r.key}] {r.title}: {r.measured} ({r.seconds:.2f} s)"


def _cmp(name: str, value: float, tol: float, op: str = "<") -> tuple[bool, str]:
    ok = {"<": value < tol, "<=": value <= tol, ">=": value >= tol, ">": value > tol}[op]
    return bool(ok), f"{name} {value:.3e} {op} {tol:.1e}"


class Corpus:
    """Test potentials for genus 0, 1, 2, solved on first use."""

    POTENTIALS = {
        0: ([0.0, 0.0, 0.5], (-2.1, 2.1)),
        1: ([0.0, 0.3, -1.5, 0.0, 0.25], (-2.3, -1.1, 0.9, 2.2)),
        2: (list(0.5 * np.array([0.0, 0.5, 16.0, 0.0, -8.0, 0.0, 1.0])),
            (-2.4, -1.6, -0.4, 0.4, 1.6, 2.4)),
    }
    SUPPORTS = {
        0: (-1.0, 1.0),
        1: (-2.0, -0.5, 0.3, 1.7),
        2: (-3.0, -2.0, -1.0, 0.5, 1.0, 2.5),
    }

    def __init__(self):
        self._solutions: dict[int, EquilibriumSolution] = {}

    def potential(self, g: int) -> PotentialSpec:
        return PotentialSpec.polynomial(self.POTENTIALS[g][0])

    def solution(self, g: int) -> EquilibriumSolution:
        if g not in self._solutions:
            coeffs, init = self.POTENTIALS[g]
            self._solutions[g] = solve(PotentialSpec.polynomial(coeffs), Support(init))
        return self._solutions[g]

    def bump(self, g: int) -> Perturbation:
        """Gaussian on the last cut, width 6 % of that cut (about 5 mesh spacings)."""
        a, b = self.solution(g).support.cuts[-1]
        return Perturbation.gaussian(a + 0.6 * (b - a), 0.06 * (b - a))

    @cached_property
    def test_functions(self) -> list[Perturbation]:
        """Ten smooth fields of varied shape on ``[-3, 3]``."""
        fs = [Perturbation.chebyshev(k, (-3.0, 3.0)) for k in (1, 2, 3, 5)]
        fs += [Perturbation.gaussian(c, w) for c, w in ((-1.7, 0.4), (0.2, 0.7), (1.9, 0.3))]
        fs += [Perturbation.polynomial(c) for c in ([0.0, 0.5, -0.2, 0.1], [1.0, 0.0, 0.0, 0.0, -0.05],
                                                    [0.0, -1.0, 0.0, 0.3])]
        return fs


def _weighted_norm(sol: EquilibriumSolution, values) -> float:
    """L2 norm over ``J`` evaluated with the cut quadrature."""
    tot = 0.0
    for f, m, sq in zip(values, sol.cache.cut_meshes, sol.cache.cut_sqrt):
        tot += float(np.sum(m.weights * sq * np.asarray(f) ** 2))
    return math.sqrt(tot)


# -- checks ---------------------------------------------------------------

def check_semicircle(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    sol = corpus.solution(0)
    e_err = float(np.max(np.abs(sol.support.array - [-2.0, 2.0])))
    x = sol.sigma.nodes[0]
    d_err = float(np.max(np.abs(sol.sigma.values[0] - np.sqrt(4.0 - x * x) / (2.0 * math.pi))))
    parts = [_cmp("endpoint err", e_err, tol["1.endpoint"]),
             _cmp("density err", d_err, tol["1.density"]),
             _cmp("residual", sol.residual_norm, tol["1.residual"])]
    return all(p for p, _ in parts), "; ".join(m for _, m in parts)


def _two_cut(coeffs, init, tol: dict) -> tuple[bool, str]:
    p = PotentialSpec.polynomial(coeffs)
    oracle = discrete_equilibrium(p, (-3.0, 3.0), 4000)
    oe = oracle.endpoints()
    try:
        sol = solve(p, Support(init))
    except SolverError as exc:
        return False, (f"genus-1 solve failed: {exc}; oracle intervals "
                       f"{np.array2string(oe, precision=5)}")
    if oe.size != sol.support.array.size:
        return False, (f"oracle finds {oe.size // 2} intervals {np.array2string(oe, precision=5)}, "
                       f"solver {sol.support}")
    err = float(np.max(np.abs(oe - sol.support.array)))
    parts = [_cmp("residual", sol.residual_norm, tol["2.residual"]),
             _cmp("oracle endpoint gap", err, tol["2.endpoint"])]
    return all(p for p, _ in parts), "; ".join(m for _, m in parts)


def check_two_cut(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    return _two_cut([0.0, 0.0, -1.0, 0.0, 0.25], (-2.2, -0.5, 0.5, 2.2), tol)


def check_two_cut_supplementary(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    return _two_cut([0.0, 0.0, -1.5, 0.0, 0.25], (-2.4, -0.8, 0.8, 2.4), tol)


def check_ug(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    worst = 0.0
    for g, ends in Corpus.SUPPORTS.items():
        cache = SurfaceCache(Support(ends))
        total = cache.integrate_over_J(cache.ug)
        worst = max(worst, abs(total - 1.0))
    return _cmp("max |int_J U_g/y - 1| over g=0,1,2", worst, tol["3.ug"])


def check_gamma(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for g in (0, 1, 2, 3):
        for _ in range(10):
            ends = np.sort(rng.uniform(-1.0, 1.0, 2 * g + 2))
            s = Support(tuple(ends))
            worst = max(worst, squaring_defect(s, gamma_coeffs(s, 2 * g + 6)))
    return _cmp("max squaring defect (g=0..3, 10 supports each)", worst, tol["4.gamma"])


def check_sum_rule(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    r_worst, a_worst = 0.0, 0.0
    for g in (0, 1, 2):
        sol = corpus.solution(g)
        for c in (1.0, -2.5):
            resp = respond(sol, Perturbation.constant(c))
            r_worst = max(r_worst, max(float(np.max(np.abs(v))) for v in resp.values))
            a_worst = max(a_worst, abs(delta_A(sol, Perturbation.constant(c)) - c))
    parts = [_cmp("max |dsigma|", r_worst, tol["5.response"]),
             _cmp("max |dA(c) - c|", a_worst, tol["5.dA"])]
    return all(p for p, _ in parts), "; ".join(m for _, m in parts)


def check_symmetry(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    b_worst, p_worst = 0.0, 0.0
    for g in (0, 1, 2):
        sol = corpus.solution(g)
        fs = corpus.test_functions
        resp = [respond(sol, f).dsigma for f in fs]
        B = np.array([[r.integrate(f) for r in resp] for f in fs])  # B[i, j] = <f_i, R f_j>
        scale = np.sqrt(np.abs(np.outer(np.diag(B), np.diag(B))))
        off = ~np.eye(len(fs), dtype=bool)
        b_worst = max(b_worst, float(np.max(np.abs(B - B.T)[off] / scale[off])))
        x = grid_nodes(sol, 20)
        X, T = np.meshgrid(x, x, indexing="ij")
        keep = ~np.eye(x.size, dtype=bool)
        K = np.full(X.shape, np.nan)
        K[keep] = kernel_pi(X[keep], T[keep], sol.cache)
        p_worst = max(p_worst, float(np.nanmax(np.abs(K - K.T))))
    parts = [_cmp("bilinear asymmetry (relative)", b_worst, tol["6.bilinear"]),
             _cmp("max |C(x,t) - C(t,x)|", p_worst, tol["6.pointwise"])]
    return all(p for p, _ in parts), "; ".join(m for _, m in parts)


def check_equivalence(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    worst = {}
    for g in (0, 1, 2):
        sol = corpus.solution(g)
        x = grid_nodes(sol, 20)
        # interior second-kind Chebyshev points never meet first-kind nodes
        u = np.cos(np.pi * np.arange(1, 21) / 21)[::-1]
        t = np.concatenate([0.5 * (a + b) + 0.5 * (b - a) * u for a, b in sol.support.cuts])
        X, T = np.meshgrid(x, t, indexing="ij")
        worst[g] = float(np.max(np.abs(kernel_pi(X, T, sol.cache) - kernel_direct(X, T, sol.cache))))
    parts = [_cmp("g=0 |pi - direct|", worst[0], tol["7.g0"], "<="),
             _cmp("g=1,2 max |pi - direct|", max(worst[1], worst[2]), tol["7.equivalence"])]
    return all(p for p, _ in parts), "; ".join(m for _, m in parts)


def check_fd_oracle(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    ok, msgs = True, []
    for g in (0, 1):
        sol = corpus.solution(g)
        dv = corpus.bump(g)
        r = respond(sol, dv).values
        ref = _weighted_norm(sol, r)
        errs = {}
        for eps in (1e-3, 1e-4, 1e-5):
            fd = fd_response(sol.potential, sol, dv, eps)
            errs[eps] = _weighted_norm(sol, [a - b for a, b in zip(fd, r)]) / ref
        p1, m1 = _cmp(f"g={g} rel err at 1e-5", errs[1e-5], tol["8.fd"])
        p2, m2 = _cmp(f"g={g} reduction 1e-3 -> 1e-4", errs[1e-3] / errs[1e-4], tol["8.reduction"], ">=")
        ok &= p1 and p2
        msgs += [m1, m2]
    return ok, "; ".join(msgs)


def check_delta_A(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    ok, msgs = True, []
    for g in (0, 1):
        sol = corpus.solution(g)
        dv = corpus.bump(g)
        dA = delta_A(sol, dv)
        err = {}
        for eps in (1e-3, 1e-4):
            pert = solve(sol.potential.plus(dv, eps), sol.support)
            err[eps] = abs((pert.A - sol.A) / eps - dA)
        ratio = err[1e-3] / err[1e-4]
        good = tol["9.ratio_low"] <= ratio <= tol["9.ratio_high"]
        ok &= good
        msgs.append(f"g={g} errors {err[1e-3]:.3e}, {err[1e-4]:.3e}, ratio {ratio:.2f} in "
                    f"[{tol['9.ratio_low']:g}, {tol['9.ratio_high']:g}]")
    return ok, "; ".join(msgs)


def check_lagrange(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    spread, agree = 0.0, 0.0
    for g in (0, 1):
        sol = corpus.solution(g)
        A, _, probes, dA = lagrange_A(sol, spread_tol=np.inf, agree_tol=np.inf)
        spread = max(spread, float(np.ptp(dA)))
        agree = max(agree, float(np.max(np.abs(dA - A))))
        # independent probes, away from those used by the solver
        extra = np.array([a + 0.77 * (b - a) for a, b in sol.support.cuts])
        agree = max(agree, float(np.max(np.abs(direct_A(sol.sigma, sol.potential, extra) - A))))
    parts = [_cmp("probe spread of direct A", spread, tol["10.spread"]),
             _cmp("|lagrange A - direct A|", agree, tol["10.agree"])]
    return all(p for p, _ in parts), "; ".join(m for _, m in parts)


def check_short_distance(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    worst, vals = 0.0, []
    for g in (0, 1):
        sol = corpus.solution(g)
        for a, b in sol.support.cuts:
            c = short_distance_coefficient(sol, a + 0.45 * (b - a))
            vals.append(c)
            worst = max(worst, abs(c / SHORT_DISTANCE_TARGET - 1.0))
    ok, msg = _cmp(f"max rel deviation from {SHORT_DISTANCE_TARGET:.6f}", worst, tol["11.relative"])
    return ok, f"fitted {', '.join(f'{v:+.6f}' for v in vals)}; {msg}"


def check_variance(corpus: Corpus, tol: dict) -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    c_worst, neg = 0.0, np.inf
    for g in (0, 1, 2):
        sol = corpus.solution(g)
        c_worst = max(c_worst, abs(variance(sol, Perturbation.constant(1.3))))
        for _ in range(20):
            coeffs = rng.normal(size=rng.integers(2, 8))
            neg = min(neg, variance(sol, Perturbation.polynomial(coeffs)))
    sol = corpus.solution(0)
    ratios = np.array([variance(sol, Perturbation.chebyshev(k, tuple(sol.support.array))) / k
                       for k in range(1, 6)])
    spread = float(np.ptp(ratios) / np.mean(np.abs(ratios)))
    parts = [_cmp("|var(const)|", c_worst, tol["12.const"]),
             _cmp("min var over 60 polynomials", neg, -tol["12.nonneg"], ">="),
             _cmp(f"spread of var(T_k)/k (mean {np.mean(ratios):.6e})", spread, tol["12.tk"])]
    return all(p for p, _ in parts), "; ".join(m for _, m in parts)


CHECKS: list[tuple[str, str, Callable[[Corpus, dict], tuple[bool, str]]]] = [
    ("1", "semicircle pipeline", check_semicircle),
    ("2", "two-cut pipeline, v = x^4/4 - x^2", check_two_cut),
    ("2s", "supplementary two-cut, v = x^4/4 - 1.5 x^2", check_two_cut_supplementary),
    ("3", "U_g normalization emerges", check_ug),
    ("4", "Gamma squaring identity", check_gamma),
    ("5", "sum rule", check_sum_rule),
    ("6", "symmetry", check_symmetry),
    ("7", "formula equivalence", check_equivalence),
    ("8", "finite-difference oracle", check_fd_oracle),
    ("9", "dA first-order check", check_delta_A),
    ("10", "Lagrange multiplier consistency", check_lagrange),
    ("11", "short-distance law", check_short_distance),
    ("12", "variance properties", check_variance),
]


def run_check(key: str, corpus: Corpus | None = None, tolerances: dict | None = None) -> CheckResult:
    table = {k: (title, fn) for k, title, fn in CHECKS}
    if key not in table:
        raise KeyError(f"unknown check {key!r}")
    title, fn = table[key]
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    corpus = corpus or Corpus()
    t0 = time.perf_counter()
    try:
        passed, measured = fn(corpus, tol)
    except Exception as exc:  # a crash is a failed check, reported with its cause
        passed, measured = False, f"error: {type(exc).__name__}: {exc}"
    return CheckResult(key, title, passed, measured, time.perf_counter() - t0)


def run_checks(tolerances: dict | None = None, only=None, stream: TextIO | None = sys.stdout) -> list[CheckResult]:
    unknown = set(tolerances or {}) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise KeyError(f"unknown tolerance names: {sorted(unknown)}")
    corpus = Corpus()
    results = []
    for key, _, _ in CHECKS:
        if only and key not in only:
            continue
        r = run_check(key, corpus, tolerances)
        results.append(r)
        if stream is not None:
            print(format_result(r), file=stream, flush=True)
    return results
