"""Pekar-Tomasevich energy, its orbital gradient, and the coupling rescaling.

Conventions follow the variational functional verbatim: kinetic term
sum_j <D_A phi_j, D_A phi_j> with D_A = -i grad + A acting on each spinor
component, external term sum_j <phi_j, V phi_j>, electron repulsion
U * sum_{i<j} [direct(i,j) - exchange(i,j)], and the phonon-induced
self-attraction -alpha * D(rho) with D(rho) the Coulomb self-interaction
(no factor 1/2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (Grid3, ScalarField, VectorPotentialField, coulomb_convolve,
                   gradient, inner, require_same_grid)
from .slater import SlaterState, SpinOrbital, density, gram_matrix, mix_orbitals


@dataclass
class PTParams:
    """Coupling constants and external fields.

    alpha > 0 multiplies the self-attraction; U = alpha * nu >= 0 is the
    electron repulsion strength.  A and V may be None for free space.
    """

    alpha: float
    U: float = 0.0
    A: VectorPotentialField | None = None
    V: ScalarField | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.U < 0:
            raise ValueError(f"U must be nonnegative, got {self.U}")


@dataclass
class EnergyBreakdown:
    """Itemized PT energy; total = kinetic + external + direct - exchange + self."""

    kinetic: float
    external: float
    coulomb_direct: float
    coulomb_exchange: float
    self_interaction: float
    total: float

    def to_dict(self):
        return {
            "kinetic": self.kinetic,
            "external": self.external,
            "coulomb_direct": self.coulomb_direct,
            "coulomb_exchange": self.coulomb_exchange,
            "self_interaction": self.self_interaction,
            "total": self.total,
        }


def zero_potential(grid: Grid3) -> ScalarField:
    return ScalarField(grid, np.zeros(grid.dims))


def zero_vector_potential(grid: Grid3) -> VectorPotentialField:
    return VectorPotentialField(tuple(zero_potential(grid) for _ in range(3)))


def linear_vector_potential(grid: Grid3, b_field) -> VectorPotentialField:
    """A(x) = B x x / 2 for a constant magnetic field B (linear gauge, box-centered).

    Not periodic; intended for states supported away from the box boundary.
    """
    bx, by, bz = b_field
    x, y, z = grid.coords()
    ax = 0.5 * (by * z - bz * y)
    ay = 0.5 * (bz * x - bx * z)
    az = 0.5 * (bx * y - by * x)
    comps = tuple(ScalarField(grid, np.broadcast_to(c, grid.dims).copy())
                  for c in (ax, ay, az))
    return VectorPotentialField(comps)


def periodic_potential(grid: Grid3, amplitude: float, periods=(1, 1, 1)) -> ScalarField:
    """V(x) = amplitude * sum_j cos(2 pi p_j x_j / L_j), commensurate with the box."""
    vals = np.zeros(grid.dims)
    lengths = grid.box_lengths
    for j, (c, p) in enumerate(zip(grid.coords(), periods)):
        vals = vals + amplitude * np.cos(2.0 * np.pi * p * c / lengths[j])
    return ScalarField(grid, vals)


def _covariant_derivative(phi: ScalarField, a: VectorPotentialField | None):
    """The three components of (-i grad + A) phi."""
    grads = gradient(phi)
    out = []
    for j in range(3):
        g = -1j * grads[j].values
        if a is not None:
            g = g + a.components[j].values * phi.values
        out.append(ScalarField(phi.grid, g))
    return out


def _kinetic_action(phi: ScalarField, a: VectorPotentialField | None) -> ScalarField:
    """D_A^dagger D_A phi via spectral derivatives."""
    da = _covariant_derivative(phi, a)
    grid = phi.grid
    out = np.zeros(grid.dims, dtype=complex)
    for j in range(3):
        dc = gradient(da[j])[j].values
        out += -1j * dc
        if a is not None:
            out += a.components[j].values * da[j].values
    return ScalarField(grid, out)


def _orbital_density(phi: SpinOrbital) -> ScalarField:
    return ScalarField(phi.grid,
                       np.abs(phi.up.values) ** 2 + np.abs(phi.down.values) ** 2)


def _spinor_contraction(a: SpinOrbital, b: SpinOrbital) -> ScalarField:
    """Pointwise pair density <a(x), b(x)>_spinor (conjugate on the first)."""
    vals = (np.conj(a.up.values) * b.up.values
            + np.conj(a.down.values) * b.down.values)
    return ScalarField(a.grid, vals)


def _check_fields(state: SlaterState, p: PTParams):
    fields = [state.orbitals[0].up]
    if p.A is not None:
        fields.append(p.A.components[0])
    if p.V is not None:
        fields.append(p.V)
    require_same_grid(*fields)


def pt_energy(state: SlaterState, p: PTParams) -> EnergyBreakdown:
    """Evaluate the PT functional on a Slater state."""
    _check_fields(state, p)
    n = state.n

    kinetic = 0.0
    external = 0.0
    for phi in state.orbitals:
        for comp in (phi.up, phi.down):
            for d in _covariant_derivative(comp, p.A):
                kinetic += inner(d, d).real
            if p.V is not None:
                external += (inner(comp, ScalarField(comp.grid,
                                                     p.V.values * comp.values))).real

    direct = 0.0
    exchange = 0.0
    if p.U > 0 and n > 1:
        rhos = [_orbital_density(phi) for phi in state.orbitals]
        pots = [coulomb_convolve(r) for r in rhos]
        for i in range(n):
            for j in range(i + 1, n):
                direct += inner(rhos[i], pots[j]).real
                s_ij = _spinor_contraction(state.orbitals[i], state.orbitals[j])
                exchange += inner(coulomb_convolve(s_ij), s_ij).real
        direct *= p.U
        exchange *= p.U

    rho = density(state)
    self_int = -p.alpha * inner(rho, coulomb_convolve(rho)).real

    total = kinetic + external + direct - exchange + self_int
    return EnergyBreakdown(kinetic=kinetic, external=external,
                           coulomb_direct=direct, coulomb_exchange=exchange,
                           self_interaction=self_int, total=total)


def pt_gradient(state: SlaterState, p: PTParams, project: bool = True):
    """First variation: Fock-like action on each orbital, tangent-projected.

    F phi_i = D_A^dag D_A phi_i + V phi_i + U (J - K) phi_i
              - 2 alpha (rho * 1/|x|) phi_i,
    projected onto the orthogonal complement of the occupied span, so that
    d/dt pt_energy(state + t h) = 2 Re <grad, h> for tangent h.
    """
    _check_fields(state, p)
    n = state.n
    grid = state.grid
    rho = density(state)
    mean_pot = coulomb_convolve(rho).values  # rho * 1/|x|

    have_coulomb = p.U > 0 and n > 1
    pots = None
    exch_pot = {}
    if have_coulomb:
        pots = [coulomb_convolve(_orbital_density(phi)).values
                for phi in state.orbitals]
        for i in range(n):
            for j in range(i + 1, n):
                s_ij = _spinor_contraction(state.orbitals[i], state.orbitals[j])
                exch_pot[(i, j)] = coulomb_convolve(s_ij).values

    out = []
    for i, phi in enumerate(state.orbitals):
        comps = []
        for comp in (phi.up, phi.down):
            g = _kinetic_action(comp, p.A).values
            if p.V is not None:
                g = g + p.V.values * comp.values
            g = g - 2.0 * p.alpha * mean_pot * comp.values
            comps.append(g)
        if have_coulomb:
            jpot = sum(pots[k] for k in range(n) if k != i)
            comps[0] = comps[0] + p.U * jpot * phi.up.values
            comps[1] = comps[1] + p.U * jpot * phi.down.values
            for j in range(n):
                if j == i:
                    continue
                # exchange needs the potential of S_ji = conj(S_ij)
                kpot = exch_pot[(j, i)] if j < i else np.conj(exch_pot[(i, j)])
                comps[0] = comps[0] - p.U * kpot * state.orbitals[j].up.values
                comps[1] = comps[1] - p.U * kpot * state.orbitals[j].down.values
        out.append(SpinOrbital(ScalarField(grid, comps[0]), ScalarField(grid, comps[1])))

    if project:
        out = project_tangent(state, out)
    return out


def project_tangent(state: SlaterState, directions):
    """Remove occupied-span components: h_i <- h_i - sum_j phi_j <phi_j, h_i>."""
    from .slater import spinor_inner
    projected = []
    for h in directions:
        u = h.up.values.copy()
        d = h.down.values.copy()
        for phi in state.orbitals:
            c = spinor_inner(phi, h)
            u -= c * phi.up.values
            d -= c * phi.down.values
        projected.append(SpinOrbital(ScalarField(state.grid, u),
                                     ScalarField(state.grid, d)))
    return projected


def rescale_state(state: SlaterState, lam: float) -> SlaterState:
    """Dilation psi_lambda(x) = lambda^{3N/2} psi(lambda x), orbital-wise.

    Realized exactly by relabeling: the value arrays are scaled by
    lambda^{3/2} and the grid spacing becomes spacing / lambda, so the norm
    is preserved to roundoff and the support always fits the rescaled grid.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    old = state.grid
    new_grid = Grid3(old.dims, old.spacing / lam)
    c = lam**1.5
    orbitals = []
    for phi in state.orbitals:
        orbitals.append(SpinOrbital(
            ScalarField(new_grid, c * phi.up.values),
            ScalarField(new_grid, c * phi.down.values)))
    return SlaterState(orbitals, validate=False)


def rescale_params(p: PTParams, lam: float) -> PTParams:
    """Companion transform of PTParams for the scaling identity.

    alpha -> lam alpha, U -> lam U, A -> lam A(lam x), V -> lam^2 V(lam x),
    with the field samples relabeled onto the spacing/lam grid.
    """
    new_a = None
    new_v = None
    if p.A is not None:
        g = p.A.grid
        ng = Grid3(g.dims, g.spacing / lam)
        new_a = VectorPotentialField(tuple(
            ScalarField(ng, lam * c.values) for c in p.A.components))
    if p.V is not None:
        g = p.V.grid
        ng = Grid3(g.dims, g.spacing / lam)
        new_v = ScalarField(ng, lam**2 * p.V.values)
    return PTParams(alpha=lam * p.alpha, U=lam * p.U, A=new_a, V=new_v)
