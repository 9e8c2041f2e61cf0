"""Multi-cut equilibrium measures of the logarithmic gas and their linear response.

Submodules
----------
quadrature
    Spectral rules for inverse-square-root weights, Cauchy and log images.
surface
    Hyperelliptic curve data: branches of ``y``, ``Gamma``, ``U_g``, ``phi``, ``pi``.
potential
    External fields and perturbations.
equilibrium
    Endpoint solver, density, Lagrange multiplier.
kernel
    Linear response and the density-density correlation kernel.
oracle
    Direct discrete minimization and finite-difference response.
"""

from .equilibrium import EquilibriumSolution, SolveOptions, SolverError, solve
from .kernel import kernel_direct, kernel_pi, respond, variance
from .potential import Perturbation, PotentialSpec
from .surface import Support

__all__ = [
    "EquilibriumSolution",
    "SolveOptions",
    "SolverError",
    "solve",
    "respond",
    "variance",
    "kernel_pi",
    "kernel_direct",
    "PotentialSpec",
    "Perturbation",
    "Support",
]

__version__ = "0.1.0"
