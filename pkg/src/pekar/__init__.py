"""Fermionic Pekar-Tomasevich ground-state toolkit.

Numerical building blocks for the strong-coupling polaron variational
problem: periodic 3-D grids with a truncated free-space Coulomb kernel,
Slater-determinant states and their energies, orthonormality-constrained
minimization, permanent-based localization weights and ball merging,
phonon block-mode discretization, a truncated-Fock exact-diagonalization
oracle, and the strong-coupling error-budget / binding-gap arithmetic.
"""

from . import blocks, bounds, fock, functional, grid, localization, minimize, radial, slater

__all__ = [
    "blocks",
    "bounds",
    "fock",
    "functional",
    "grid",
    "localization",
    "minimize",
    "radial",
    "slater",
]

__version__ = "0.1.0"
