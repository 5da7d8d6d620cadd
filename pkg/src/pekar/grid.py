"""Uniform periodic 3-D grids, field arithmetic, and the Coulomb kernel.

Fields live on a periodic box with cubic cells; coordinates are centered so
the box spans [-L_j/2, L_j/2) per axis and the origin is an exact grid
point.  Derivatives are spectral.  The free-space Coulomb convolution uses
a spherically truncated 1/|x| kernel (truncation radius = half the shortest
box length), which removes periodic images for densities that are isolated
well inside the box.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class GridMismatchError(ValueError):
    """Two fields that must share a grid do not."""


class SupportOverflowError(ValueError):
    """A field's support violates the isolation margin required by the kernel."""


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic sampling box: ``dims`` points per axis, cubic cells."""

    dims: tuple[int, int, int]
    spacing: float

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(d) != d or d < 8 for d in self.dims):
            raise ValueError(f"dims must be three integers >= 8, got {self.dims}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def n_points(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def box_lengths(self) -> tuple[float, float, float]:
        return tuple(d * self.spacing for d in self.dims)

    def axis_coords(self, j):
        """Centered coordinates along axis j; 0 is always a grid point."""
        n = self.dims[j]
        return (np.arange(n) - n // 2) * self.spacing

    def coords(self):
        """Three broadcastable coordinate arrays (open meshgrid)."""
        return np.meshgrid(*(self.axis_coords(j) for j in range(3)),
                           indexing="ij", sparse=True)

    def radius_sq(self):
        x, y, z = self.coords()
        return x**2 + y**2 + z**2

    def k_vectors(self):
        """Reciprocal-lattice wave numbers per axis (FFT order)."""
        return tuple(2.0 * np.pi * np.fft.fftfreq(n, d=self.spacing)
                     for n in self.dims)

    def k_sq(self):
        return _k_sq(self.dims, self.spacing)

    def nearest_index(self, point):
        """Index triple of the grid point nearest to a real-space point."""
        idx = []
        for j in range(3):
            n = self.dims[j]
            i = int(round(point[j] / self.spacing)) + n // 2
            idx.append(i % n)
        return tuple(idx)


@lru_cache(maxsize=16)
def _k_sq(dims, spacing):
    ks = [2.0 * np.pi * np.fft.fftfreq(n, d=spacing) for n in dims]
    kx, ky, kz = np.meshgrid(*ks, indexing="ij", sparse=True)
    return kx**2 + ky**2 + kz**2


@lru_cache(maxsize=16)
def _coulomb_multiplier(dims, spacing):
    """Fourier multiplier of the spherically truncated Coulomb kernel.

    W(x) = 1/|x| for |x| <= R_c, 0 beyond, with R_c = half the shortest box
    length; its transform is 4 pi (1 - cos(|k| R_c)) / |k|^2, and the exact
    k = 0 value is 2 pi R_c^2.
    """
    r_cut = 0.5 * min(d * spacing for d in dims)
    ksq = _k_sq(dims, spacing)
    k = np.sqrt(ksq)
    with np.errstate(divide="ignore", invalid="ignore"):
        mult = 4.0 * np.pi * (1.0 - np.cos(k * r_cut)) / ksq
    mult[0, 0, 0] = 2.0 * np.pi * r_cut**2
    return mult


@dataclass
class ScalarField:
    """Sampled complex or real field on a Grid3."""

    grid: Grid3
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.dims:
            raise ValueError(
                f"value shape {self.values.shape} != grid dims {self.grid.dims}")

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def norm(self) -> float:
        return float(np.sqrt(inner(self, self).real))


@dataclass
class VectorPotentialField:
    """Three real component fields sharing one grid."""

    components: tuple[ScalarField, ScalarField, ScalarField]

    def __post_init__(self):
        g = self.components[0].grid
        for c in self.components:
            if c.grid != g:
                raise GridMismatchError("vector potential components on different grids")
            if not c.is_real:
                raise ValueError("vector potential components must be real")

    @property
    def grid(self) -> Grid3:
        return self.components[0].grid


def require_same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError("fields live on different grids")
    return g


def inner(f: ScalarField, g: ScalarField) -> complex:
    """Riemann-sum inner product, conjugate-linear in the first argument."""
    grid = require_same_grid(f, g)
    return complex(np.vdot(f.values, g.values) * grid.cell_volume)


def gradient(f: ScalarField):
    """Spectral gradient: three fields, one per axis."""
    fk = np.fft.fftn(f.values)
    out = []
    ks = f.grid.k_vectors()
    for j in range(3):
        shape = [1, 1, 1]
        shape[j] = f.grid.dims[j]
        kj = ks[j].reshape(shape)
        d = np.fft.ifftn(1j * kj * fk)
        if f.is_real:
            d = d.real
        out.append(ScalarField(f.grid, d))
    return out


def laplacian(f: ScalarField) -> ScalarField:
    fk = np.fft.fftn(f.values)
    out = np.fft.ifftn(-f.grid.k_sq() * fk)
    if f.is_real:
        out = out.real
    return ScalarField(f.grid, out)


def coulomb_convolve(rho: ScalarField, isolation_tol: float | None = None) -> ScalarField:
    """Free-space Coulomb convolution (rho * 1/|x|) via the truncated kernel.

    Exact free-space values are reproduced wherever every pair of points in
    the support of ``rho`` is closer than the truncation radius.  When
    ``isolation_tol`` is given, the fraction of |rho| mass outside the
    centered ball of radius min(L)/4 must not exceed it.
    """
    if isolation_tol is not None:
        r_iso = 0.25 * min(rho.grid.box_lengths)
        mass = np.abs(rho.values)
        total = mass.sum()
        if total > 0:
            outside = mass[rho.grid.radius_sq() > r_iso**2].sum()
            if outside > isolation_tol * total:
                raise SupportOverflowError(
                    f"support overflow: {outside / total:.3e} of |rho| mass outside "
                    f"the isolation ball of radius {r_iso:.3g}")
    mult = _coulomb_multiplier(rho.grid.dims, rho.grid.spacing)
    out = np.fft.ifftn(np.fft.fftn(rho.values) * mult)
    if rho.is_real:
        out = out.real
    return ScalarField(rho.grid, out)


def h1_norm_sq(f: ScalarField) -> float:
    """||f||^2 + ||grad f||^2, used as the discretization-tolerance scale."""
    val = inner(f, f).real
    for d in gradient(f):
        val += inner(d, d).real
    return float(val)


def hardy_check(f: ScalarField, tol_factor: float = 1e-3):
    """Evaluate both sides of the discrete Hardy inequality for one field.

    Returns (lhs, rhs) with lhs = <f, |x|^-2 f> (origin grid point excluded)
    and rhs = 4 ||grad f||^2 + tol, tol = tol_factor * H1-norm^2.
    """
    rsq = f.grid.radius_sq().copy()
    origin = tuple(n // 2 for n in f.grid.dims)
    weight = np.zeros(f.grid.dims)
    mask = np.ones(f.grid.dims, dtype=bool)
    mask[origin] = False
    np.divide(1.0, rsq, out=weight, where=mask)
    lhs = float(np.sum(np.abs(f.values) ** 2 * weight) * f.grid.cell_volume)
    grad_sq = sum(inner(d, d).real for d in gradient(f))
    rhs = 4.0 * grad_sq + tol_factor * h1_norm_sq(f)
    return lhs, rhs


def diamagnetic_check(f: ScalarField, a: VectorPotentialField, tol_factor: float = 1e-3):
    """Evaluate both sides of the discrete diamagnetic inequality.

    Returns (lhs, rhs) with lhs = ||grad |f| ||, rhs = ||(-i grad + a) f|| + tol.
    """
    require_same_grid(f, a.components[0])
    absf = ScalarField(f.grid, np.abs(f.values))
    lhs_sq = sum(inner(d, d).real for d in gradient(absf))
    rhs_sq = 0.0
    for j, d in enumerate(gradient(f)):
        covariant = -1j * d.values + a.components[j].values * f.values
        rhs_sq += float(np.sum(np.abs(covariant) ** 2) * f.grid.cell_volume)
    tol = tol_factor * h1_norm_sq(f)
    return float(np.sqrt(lhs_sq)), float(np.sqrt(rhs_sq)) + tol


FIELD_MAGIC = b"PTFLD1"


def write_field(fh, f: ScalarField):
    """Dump a field in PTFLD1 format (complex payload interleaved re, im)."""
    fh.write(FIELD_MAGIC)
    fh.write(np.asarray(f.grid.dims, dtype="<u4").tobytes())
    fh.write(np.asarray([f.grid.spacing], dtype="<f8").tobytes())
    if f.is_real:
        payload = np.ascontiguousarray(f.values, dtype="<f8")
    else:
        payload = np.empty(f.grid.dims + (2,), dtype="<f8")
        payload[..., 0] = f.values.real
        payload[..., 1] = f.values.imag
    fh.write(payload.tobytes())


def read_field(fh, complex_payload: bool | None = None) -> ScalarField:
    """Read one PTFLD1 field.

    For a single-field file ``complex_payload`` may be None (decided from the
    remaining byte count); when reading consecutive fields from a stream the
    caller must say which payload kind to expect.
    """
    magic = fh.read(6)
    if magic != FIELD_MAGIC:
        raise ValueError(f"bad field magic {magic!r}")
    dims = tuple(int(d) for d in np.frombuffer(fh.read(12), dtype="<u4"))
    spacing = float(np.frombuffer(fh.read(8), dtype="<f8")[0])
    n = dims[0] * dims[1] * dims[2]
    grid = Grid3(dims, spacing)
    if complex_payload is None:
        payload = fh.read()
        complex_payload = len(payload) >= 2 * n * 8
    else:
        payload = fh.read((2 * n if complex_payload else n) * 8)
    need = (2 * n if complex_payload else n) * 8
    if len(payload) < need:
        raise ValueError("truncated field payload")
    data = np.frombuffer(payload[:need], dtype="<f8")
    if complex_payload:
        pairs = data.reshape(dims + (2,))
        vals = (pairs[..., 0] + 1j * pairs[..., 1]).copy()
    else:
        vals = data.reshape(dims).copy()
    return ScalarField(grid, vals)
