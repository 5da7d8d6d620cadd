"""Slater-determinant states built from 2-spinor orbitals.

An N-electron antisymmetric state is represented by N orthonormal spin
orbitals, each a pair (up, down) of complex fields on one grid.  The
one-body density, Loewdin orthonormalization, and an explicit small-N
determinant evaluator (used by brute-force oracles) live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid3, GridMismatchError, ScalarField, inner, read_field, require_same_grid, write_field


class GramViolationError(ValueError):
    """State is not orthonormal to the required tolerance."""


class DependentOrbitalsError(ValueError):
    """Orbitals are (numerically) linearly dependent."""


GRAM_TOL = 1e-8


@dataclass
class SpinOrbital:
    """Two spinor components on a shared grid; holds <up|up> + <down|down> = 1."""

    up: ScalarField
    down: ScalarField

    def __post_init__(self):
        require_same_grid(self.up, self.down)

    @property
    def grid(self) -> Grid3:
        return self.up.grid

    def norm_sq(self) -> float:
        return float((inner(self.up, self.up) + inner(self.down, self.down)).real)

    def scaled(self, c) -> "SpinOrbital":
        return SpinOrbital(ScalarField(self.grid, c * self.up.values),
                           ScalarField(self.grid, c * self.down.values))


def spinor_inner(a: SpinOrbital, b: SpinOrbital) -> complex:
    return inner(a.up, b.up) + inner(a.down, b.down)


def gram_matrix(orbitals) -> np.ndarray:
    n = len(orbitals)
    g = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            g[i, j] = spinor_inner(orbitals[i], orbitals[j])
            g[j, i] = np.conj(g[i, j])
    return g


@dataclass
class SlaterState:
    """Ordered list of N orthonormal spin orbitals on one grid."""

    orbitals: list

    def __init__(self, orbitals, validate: bool = True):
        orbitals = list(orbitals)
        if not orbitals:
            raise ValueError("need at least one orbital")
        grid = orbitals[0].grid
        for phi in orbitals:
            if phi.grid != grid:
                raise GridMismatchError("orbitals on different grids")
        self.orbitals = orbitals
        if validate:
            g = gram_matrix(orbitals)
            dev = np.max(np.abs(g - np.eye(len(orbitals))))
            if dev > GRAM_TOL:
                raise GramViolationError(
                    f"gram violation: max |G - I| = {dev:.3e} > {GRAM_TOL:g}")

    @property
    def n(self) -> int:
        return len(self.orbitals)

    @property
    def grid(self) -> Grid3:
        return self.orbitals[0].grid


def density(state: SlaterState) -> ScalarField:
    """One-body electron density: sum of |up|^2 + |down|^2 over occupied orbitals.

    For a determinant of orthonormal orbitals the N-body density reduces to
    this orbital sum; the N = 2 brute-force expansion in the tests anchors
    the reduction.
    """
    rho = np.zeros(state.grid.dims)
    for phi in state.orbitals:
        rho += np.abs(phi.up.values) ** 2 + np.abs(phi.down.values) ** 2
    return ScalarField(state.grid, rho)


def mix_orbitals(orbitals, coeffs: np.ndarray):
    """New orbitals phi'_j = sum_i phi_i c_ij for an N x N coefficient matrix."""
    n = len(orbitals)
    grid = orbitals[0].grid
    out = []
    ups = np.stack([phi.up.values for phi in orbitals])
    downs = np.stack([phi.down.values for phi in orbitals])
    for j in range(n):
        u = np.tensordot(coeffs[:, j], ups, axes=(0, 0))
        d = np.tensordot(coeffs[:, j], downs, axes=(0, 0))
        out.append(SpinOrbital(ScalarField(grid, u), ScalarField(grid, d)))
    return out


def orthonormalize(orbitals, cond_limit: float = 1e12) -> SlaterState:
    """Loewdin (symmetric) orthonormalization; preserves the span.

    Already-orthonormal input is reproduced to roundoff since G^{-1/2} = I.
    """
    g = gram_matrix(orbitals)
    evals, evecs = np.linalg.eigh(g)
    if evals[0] <= 0 or evals[-1] / evals[0] > cond_limit:
        raise DependentOrbitalsError(
            f"dependent orbitals: gram condition number "
            f"{evals[-1] / max(evals[0], 0.0):.3e} exceeds {cond_limit:g}")
    inv_sqrt = (evecs * (1.0 / np.sqrt(evals))) @ evecs.conj().T
    return SlaterState(mix_orbitals(orbitals, inv_sqrt), validate=False)


def evaluate_determinant(state: SlaterState, positions) -> np.ndarray:
    """Explicit determinant amplitudes det(phi_j(x_i)) / sqrt(N!) per spin configuration.

    ``positions`` are N real-space points, sampled at the nearest grid point.
    Returns a vector of 2^N complex amplitudes; entry index has bit i set
    when electron i is spin-down (bit 0 = electron 0, least significant).
    N <= 6 only: this is the brute-force oracle path.
    """
    n = state.n
    if n > 6:
        raise ValueError("oracle size limit: evaluate_determinant supports N <= 6")
    if len(positions) != n:
        raise ValueError(f"need {n} positions, got {len(positions)}")
    idx = [state.grid.nearest_index(p) for p in positions]
    # values[s][i, j] = component s of orbital j at position i
    vals = np.empty((2, n, n), dtype=complex)
    for j, phi in enumerate(state.orbitals):
        for i, ix in enumerate(idx):
            vals[0, i, j] = phi.up.values[ix]
            vals[1, i, j] = phi.down.values[ix]
    norm = 1.0 / math.sqrt(math.factorial(n))
    amps = np.empty(2**n, dtype=complex)
    rows = np.arange(n)
    for conf in range(2**n):
        spins = (conf >> rows) & 1
        m = vals[spins, rows, :]
        amps[conf] = np.linalg.det(m) * norm
    return amps


def pair_density(state: SlaterState) -> np.ndarray:
    """Spin-summed two-body density P2(x, y) for N = 2, by determinant expansion.

    Returns a (n_points, n_points) array over flattened grid indices with
    P2(x, y) = sum_{s1 s2} |Psi^{s1 s2}(x, y)|^2, so that
    rho(x) = 2 * sum_y P2(x, y) * cell_volume.  Oracle path only.
    """
    if state.n != 2:
        raise ValueError("pair_density is the N = 2 oracle only")
    a, b = state.orbitals
    comps = [(a.up.values.ravel(), b.up.values.ravel()),
             (a.down.values.ravel(), b.down.values.ravel())]
    p2 = np.zeros((state.grid.n_points, state.grid.n_points))
    for a1, b1 in comps:          # spin of electron 1
        for a2, b2 in comps:      # spin of electron 2
            psi = np.outer(a1, b2) - np.outer(b1, a2)
            p2 += np.abs(psi) ** 2
    return 0.5 * p2


def permutation_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


STATE_MAGIC = b"PTSLT1"


def write_state(fh, state: SlaterState):
    """Dump a state in PTSLT1 format: magic, u32 N, then 2N complex PTFLD1 fields."""
    fh.write(STATE_MAGIC)
    fh.write(np.asarray([state.n], dtype="<u4").tobytes())
    for phi in state.orbitals:
        write_field(fh, phi.up)
        write_field(fh, phi.down)


def read_state(fh) -> SlaterState:
    magic = fh.read(6)
    if magic != STATE_MAGIC:
        raise ValueError(f"bad state magic {magic!r}")
    n = int(np.frombuffer(fh.read(4), dtype="<u4")[0])
    orbitals = []
    for _ in range(n):
        up = read_field(fh, complex_payload=True)
        down = read_field(fh, complex_payload=True)
        orbitals.append(SpinOrbital(up, down))
    return SlaterState(orbitals)
