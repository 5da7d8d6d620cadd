"""Cutoff constants and block-mode discretization of the phonon field.

The momentum ball B_Lambda is partitioned into cubes of side P indexed by
m in Z^3; each nonempty block B(m) = cube(m) intersect B_Lambda carries a
representative momentum k_m and the weight M_m = (int_{B(m)} dk / |k|^2)^{1/2}.
The head and tail cutoff constants M_Lambda = n sqrt(2 Lambda / pi) and
K_Lambda = sqrt(2 n / (pi Lambda)) are the closed forms of the radial
integrals behind the ultraviolet cutoff estimate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad


@dataclass
class CutoffParams:
    """UV cutoff bookkeeping; beta = 1 - 2 alpha n / (pi Lambda) must be positive."""

    Lambda: float
    P: float
    n: int
    alpha: float

    def __post_init__(self):
        if self.Lambda <= 0 or self.P <= 0 or self.n < 1 or self.alpha <= 0:
            raise ValueError("need Lambda, P, alpha > 0 and n >= 1")
        if self.beta <= 0:
            raise ValueError(
                f"cutoff too small: beta = 1 - 2*alpha*n/(pi*Lambda) = "
                f"{self.beta:.6g} <= 0 requires Lambda > {2 * self.alpha * self.n / math.pi:.6g}")

    @property
    def beta(self) -> float:
        return 1.0 - 2.0 * self.alpha * self.n / (math.pi * self.Lambda)


def head_constant(n: int, lam: float) -> float:
    """M_Lambda = (int_{|k| <= Lambda} n^2 / (2 pi^2 |k|^2) dk)^{1/2} = n sqrt(2 Lambda / pi)."""
    if n < 1 or lam <= 0:
        raise ValueError("need n >= 1 and Lambda > 0")
    return n * math.sqrt(2.0 * lam / math.pi)


def tail_constant(n: int, lam: float) -> float:
    """K_Lambda = (int_{|k| > Lambda} n / (2 pi^2 |k|^4) dk)^{1/2} = sqrt(2 n / (pi Lambda))."""
    if n < 1 or lam <= 0:
        raise ValueError("need n >= 1 and Lambda > 0")
    return math.sqrt(2.0 * n / (math.pi * lam))


def _nearest_cube_point_norm(m, p: float) -> float:
    """Distance from the origin to the cube [mP - P/2, mP + P/2]^3."""
    d2 = 0.0
    for mi in m:
        lo, hi = mi * p - p / 2.0, mi * p + p / 2.0
        if lo > 0:
            d2 += lo * lo
        elif hi < 0:
            d2 += hi * hi
    return math.sqrt(d2)


def enumerate_blocks(lam: float, p: float):
    """All m in Z^3 with B(m) nonempty (cube-ball intersection test)."""
    reach = int(math.floor(lam / p + 0.5))
    out = []
    rng = range(-reach, reach + 1)
    for m in itertools.product(rng, rng, rng):
        if _nearest_cube_point_norm(m, p) <= lam:
            out.append(m)
    return out


def block_count_bound(lam: float, p: float) -> float:
    return (2.0 * lam / p + 1.0) ** 3


def _project_to_block(point, m, lam: float, p: float, iters: int = 200):
    """Dykstra projection of a point onto cube(m) intersect B_Lambda."""
    lo = np.array(m, dtype=float) * p - p / 2.0
    hi = lo + p
    x = np.asarray(point, dtype=float).copy()
    q1 = np.zeros(3)
    q2 = np.zeros(3)
    for _ in range(iters):
        y = np.clip(x + q1, lo, hi)
        q1 = x + q1 - y
        r = np.linalg.norm(y + q2)
        z = (y + q2) * (lam / r) if r > lam else (y + q2)
        q2 = y + q2 - z
        if np.linalg.norm(z - x) < 1e-14 * max(lam, p):
            x = z
            break
        x = z
    # final feasibility snap
    x = np.clip(x, lo, hi)
    r = np.linalg.norm(x)
    if r > lam:
        x *= lam / r
        x = np.clip(x, lo, hi)
    return x


def representative(m, lam: float, p: float, rule: str = "nearest-center"):
    """Deterministic representative k_m in B(m).

    'nearest-center': the point of B(m) closest to the cube center.
    'center-clipped': the cube center radially clipped to B_Lambda, then
    projected into the block (sensitivity alternative).
    """
    center = np.array(m, dtype=float) * p
    if rule == "nearest-center":
        start = center
    elif rule == "center-clipped":
        r = np.linalg.norm(center)
        start = center if r <= lam else center * (lam / r)
    else:
        raise ValueError(f"unknown representative rule {rule!r}")
    return _project_to_block(start, m, lam, p)


def _z_integral(rho_sq: float, z0: float, z1: float) -> float:
    """int_{z0}^{z1} dz / (rho^2 + z^2), analytic."""
    if z1 <= z0:
        return 0.0
    rho = math.sqrt(rho_sq)
    if rho == 0.0:
        if z0 <= 0.0 <= z1:
            return math.inf
        return abs(1.0 / z0 - 1.0 / z1)
    return (math.atan2(z1, rho) - math.atan2(z0, rho)) / rho


def _column_integral(kx: float, ky: float, m, lam: float, p: float,
                     r_excl: float) -> float:
    """Analytic k_z integral of |k|^-2 over the block column, minus an inner ball."""
    rho_sq = kx * kx + ky * ky
    z_lo = m[2] * p - p / 2.0
    z_hi = m[2] * p + p / 2.0
    ball = lam * lam - rho_sq
    if ball <= 0:
        return 0.0
    zb = math.sqrt(ball)
    z0, z1 = max(z_lo, -zb), min(z_hi, zb)
    if z1 <= z0:
        return 0.0
    if r_excl > 0 and rho_sq < r_excl * r_excl:
        w = math.sqrt(r_excl * r_excl - rho_sq)
        return (_z_integral(rho_sq, z0, min(z1, -w))
                + _z_integral(rho_sq, max(z0, w), z1))
    return _z_integral(rho_sq, z0, z1)


def mode_weight_sq(m, lam: float, p: float, epsrel: float = 1e-8) -> float:
    """M_m^2 = int_{B(m)} dk / |k|^2 by nested adaptive quadrature.

    The singular block m = 0 is split into an inner ball of radius
    min(P/4, Lambda/2) (analytic value 4 pi r) plus a bounded remainder.
    """
    m = tuple(int(v) for v in m)
    if _nearest_cube_point_norm(m, p) > lam:
        raise ValueError(f"empty block {m}")
    r_excl = 0.0
    analytic = 0.0
    if m == (0, 0, 0):
        r_excl = min(p / 4.0, lam / 2.0)
        analytic = 4.0 * math.pi * r_excl

    x_lo, x_hi = m[0] * p - p / 2.0, m[0] * p + p / 2.0
    y_lo, y_hi = m[1] * p - p / 2.0, m[1] * p + p / 2.0

    def inner(kx):
        val, _ = quad(lambda ky: _column_integral(kx, ky, m, lam, p, r_excl),
                      y_lo, y_hi, epsabs=0.0, epsrel=epsrel, limit=200)
        return val

    val, _ = quad(inner, x_lo, x_hi, epsabs=0.0, epsrel=epsrel, limit=200)
    return analytic + val


def mode_weight(m, lam: float, p: float, epsrel: float = 1e-8) -> float:
    return math.sqrt(mode_weight_sq(m, lam, p, epsrel=epsrel))


@dataclass
class BlockMode:
    m: tuple[int, int, int]
    k: np.ndarray
    weight: float    # M_m


@dataclass
class BlockModeSet:
    """Finite phonon mode list: indices, representatives, and weights."""

    entries: list
    Lambda: float
    P: float

    @property
    def count(self) -> int:
        return len(self.entries)

    def total_weight_sq(self) -> float:
        """sum_m M_m^2; the partition identity makes this 4 pi Lambda."""
        return float(sum(e.weight**2 for e in self.entries))

    def to_rows(self):
        return [(e.m[0], e.m[1], e.m[2], e.k[0], e.k[1], e.k[2], e.weight)
                for e in self.entries]


def build_blocks(lam: float, p: float, representative_rule: str = "nearest-center",
                 epsrel: float = 1e-8) -> BlockModeSet:
    """Enumerate all nonempty blocks with representatives and weights."""
    entries = []
    for m in sorted(enumerate_blocks(lam, p)):
        k = representative(m, lam, p, rule=representative_rule)
        w = mode_weight(m, lam, p, epsrel=epsrel)
        entries.append(BlockMode(m=m, k=k, weight=w))
    return BlockModeSet(entries=entries, Lambda=lam, P=p)


def single_mode_set(weight: float, k=(0.0, 0.0, 0.0), lam: float = 1.0, p: float = 1.0) -> BlockModeSet:
    """Hand-built one-mode set (used by frozen-electron oracles)."""
    return BlockModeSet(entries=[BlockMode(m=(0, 0, 0), k=np.asarray(k, dtype=float),
                                           weight=float(weight))],
                        Lambda=lam, P=p)


def ball_integral(lam: float) -> float:
    """int_{B_Lambda} dk / |k|^2 = 4 pi Lambda (total of the partition identity)."""
    return 4.0 * math.pi * lam


def head_constant_quadrature(n: int, lam: float) -> float:
    """3-D radial quadrature cross-check of the closed-form M_Lambda."""
    val, _ = quad(lambda r: 4.0 * math.pi * n**2 / (2.0 * math.pi**2), 0.0, lam)
    return math.sqrt(val)


def tail_constant_quadrature(n: int, lam: float, r_max_factor: float = 1e6) -> float:
    """3-D radial quadrature cross-check of the closed-form K_Lambda."""
    val, _ = quad(lambda r: 4.0 * math.pi * n / (2.0 * math.pi**2 * r**2),
                  lam, lam * r_max_factor)
    # add the analytic tail beyond the quadrature horizon
    val += 4.0 * math.pi * n / (2.0 * math.pi**2 * lam * r_max_factor)
    return math.sqrt(val)
