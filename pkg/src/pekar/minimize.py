"""Orthonormality-constrained descent on the PT functional over determinants.

Projected gradient descent with Armijo backtracking and Loewdin
re-orthonormalization after every step (a projective retraction).  The
reference step rule is plain backtracking; a spectrally preconditioned
variant is available behind the same interface for production grids.  The
returned energy is an upper bound for the discrete PT infimum over
determinants (exact ansatz for N = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functional import PTParams, EnergyBreakdown, pt_energy, pt_gradient
from .grid import Grid3, ScalarField
from .slater import SlaterState, SpinOrbital, density, orthonormalize, spinor_inner


@dataclass
class MinimizerConfig:
    max_iters: int = 500
    grad_tol: float = 1e-4
    step_rule: str = "backtracking"     # fixed | backtracking | precond-backtracking
    step_size: float = 0.1              # fixed step, or initial backtracking step
    armijo: float = 1e-4
    shrink: float = 0.5
    grow: float = 1.3
    restarts: int = 1
    seed: int = 0
    strategy: str = "random-gaussians"

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.step_rule not in ("fixed", "backtracking", "precond-backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


@dataclass
class MinimizeResult:
    energy: float
    breakdown: EnergyBreakdown
    state: SlaterState
    iterations: int
    final_grad_norm: float
    converged: bool
    seed: int = 0
    box_warning: bool = False
    trace: list = field(default_factory=list)   # (iter, energy, grad_norm, step)


def _gaussian_orbital(grid: Grid3, center, sigma, spin_weights, k_phase=None):
    x, y, z = grid.coords()
    rsq = (x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2
    env = np.exp(-rsq / (2.0 * sigma**2)).astype(complex)
    if k_phase is not None:
        env = env * np.exp(1j * (k_phase[0] * x + k_phase[1] * y + k_phase[2] * z))
    wu, wd = spin_weights
    return SpinOrbital(ScalarField(grid, wu * env), ScalarField(grid, wd * env))


def initial_state(n: int, grid: Grid3, seed: int, strategy: str = "random-gaussians",
                  previous: SlaterState | None = None, sigma: float | None = None) -> SlaterState:
    """Deterministic seeded starting state, orthonormalized."""
    rng = np.random.default_rng(seed)
    box = min(grid.box_lengths)
    if sigma is None:
        sigma = box / 8.0
    orbitals = []
    if strategy == "random-gaussians":
        for _ in range(n):
            center = rng.uniform(-box / 8.0, box / 8.0, size=3)
            width = sigma * rng.uniform(0.7, 1.3)
            w = rng.normal(size=2) + 1j * rng.normal(size=2)
            w /= np.linalg.norm(w)
            orbitals.append(_gaussian_orbital(grid, center, width, w))
    elif strategy == "stacked-center":
        # all at the box center, alternating dominant spin, widths spread
        # and odd polynomial factors guaranteeing independence
        x, y, z = grid.coords()
        for i in range(n):
            width = sigma * (1.0 + 0.15 * (i // 2))
            main, minor = (1.0, 0.1) if i % 2 == 0 else (0.1, 1.0)
            phi = _gaussian_orbital(grid, (0.0, 0.0, 0.0), width, (main, minor))
            if i >= 2:
                poly = (x / sigma) ** (i // 2)
                phi = SpinOrbital(ScalarField(grid, phi.up.values * poly),
                                  ScalarField(grid, phi.down.values * poly))
            orbitals.append(phi)
    elif strategy == "perturbed-previous":
        if previous is None or previous.n != n:
            raise ValueError("perturbed-previous requires a previous state with matching N")
        for phi in previous.orbitals:
            du = rng.normal(scale=1e-2, size=grid.dims) * np.max(np.abs(phi.up.values))
            dd = rng.normal(scale=1e-2, size=grid.dims) * np.max(np.abs(phi.down.values))
            orbitals.append(SpinOrbital(ScalarField(grid, phi.up.values + du),
                                        ScalarField(grid, phi.down.values + dd)))
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    norms = [np.sqrt(o.norm_sq()) for o in orbitals]
    orbitals = [o.scaled(1.0 / nn) for o, nn in zip(orbitals, norms)]
    return orthonormalize(orbitals)


def _grad_norm(gradients) -> float:
    return float(np.sqrt(sum(spinor_inner(g, g).real for g in gradients)))


def _step_orbitals(state: SlaterState, gradients, step: float):
    new = []
    for phi, g in zip(state.orbitals, gradients):
        new.append(SpinOrbital(
            ScalarField(state.grid, phi.up.values - step * g.up.values),
            ScalarField(state.grid, phi.down.values - step * g.down.values)))
    return orthonormalize(new)


def _precondition(gradients, grid: Grid3, shift: float):
    """Apply (k^2 + shift)^{-1} spectrally: a cheap curvature model."""
    ksq = grid.k_sq()
    out = []
    for g in gradients:
        pu = np.fft.ifftn(np.fft.fftn(g.up.values) / (ksq + shift))
        pd = np.fft.ifftn(np.fft.fftn(g.down.values) / (ksq + shift))
        out.append(SpinOrbital(ScalarField(grid, pu), ScalarField(grid, pd)))
    return out


def outer_shell_fraction(state: SlaterState, shell: float = 0.1) -> float:
    """Fraction of density mass in the outer ``shell`` of the box (per axis)."""
    rho = density(state).values
    grid = state.grid
    mask = np.zeros(grid.dims, dtype=bool)
    for j in range(3):
        c = np.abs(grid.axis_coords(j))
        limit = (1.0 - shell) * grid.box_lengths[j] / 2.0
        sel = c >= limit
        shape = [1, 1, 1]
        shape[j] = grid.dims[j]
        mask |= np.broadcast_to(sel.reshape(shape), grid.dims)
    total = rho.sum()
    return float(rho[mask].sum() / total) if total > 0 else 0.0


def _descend(state: SlaterState, p: PTParams, cfg: MinimizerConfig, collect_trace: bool):
    energy = pt_energy(state, p).total
    step = cfg.step_size
    trace = []
    grad_norm = np.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        grads = pt_gradient(state, p)
        grad_norm = _grad_norm(grads)
        if collect_trace:
            trace.append((it - 1, energy, grad_norm, step))
        if grad_norm <= cfg.grad_tol:
            return state, energy, it - 1, grad_norm, True, trace

        if cfg.step_rule == "precond-backtracking":
            direction = _precondition(grads, state.grid, shift=max(1.0, abs(energy)))
        else:
            direction = grads
        # descent slope along -direction
        slope = sum(spinor_inner(g, d).real for g, d in zip(grads, direction))

        if cfg.step_rule == "fixed":
            state = _step_orbitals(state, direction, step)
            new_energy = pt_energy(state, p).total
            energy = new_energy
            continue

        accepted = False
        while step > 1e-14:
            candidate = _step_orbitals(state, direction, step)
            new_energy = pt_energy(candidate, p).total
            if new_energy <= energy - cfg.armijo * step * slope:
                state = candidate
                energy = new_energy
                step = min(step * cfg.grow, 1e6)
                accepted = True
                break
            step *= cfg.shrink
        if not accepted:
            # no decrease possible at machine-level steps: treat as stationary
            return state, energy, it, grad_norm, grad_norm <= cfg.grad_tol, trace
    return state, energy, it, grad_norm, False, trace


def minimize_pt(n: int, grid: Grid3, p: PTParams, cfg: MinimizerConfig,
                collect_trace: bool = False,
                initial: SlaterState | None = None) -> MinimizeResult:
    """Best-over-restarts projected descent; deterministic given (cfg.seed, restarts).

    Ties (within 1e-12) between restarts break toward the lowest seed.
    """
    best = None
    for r in range(cfg.restarts):
        seed = cfg.seed + r
        if initial is not None and r == 0:
            state0 = initial
        else:
            state0 = initial_state(n, grid, seed, cfg.strategy)
        state, energy, iters, gnorm, conv, trace = _descend(state0, p, cfg, collect_trace)
        if best is None or energy < best[1] - 1e-12:
            best = (state, energy, iters, gnorm, conv, trace, seed)
    state, energy, iters, gnorm, conv, trace, seed = best
    breakdown = pt_energy(state, p)
    leak = outer_shell_fraction(state)
    return MinimizeResult(energy=breakdown.total, breakdown=breakdown, state=state,
                          iterations=iters, final_grad_norm=gnorm, converged=conv,
                          seed=seed, box_warning=leak >= 1e-6, trace=trace)
