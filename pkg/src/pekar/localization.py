"""Localization machinery: cutoff profile, permanent weights, ball merging.

The constructive ingredients for restricting N electrons to balls at a
controlled kinetic cost: a mollified Dirichlet ground-mode profile chi, the
permanent-normalized weight W(X, Y) = G(X, Y) P(X)^{-1/2} with
P = N! Per(M), Monte-Carlo estimators for the kinetic leakage F_j, and the
greedy enclosing-ball merging procedure with radii R_i = (3 n_i - 1) R / 2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


class ProfileBudgetError(ValueError):
    """Mollified profile exceeds its Dirichlet energy budget."""


@dataclass
class CutoffProfile:
    """Radial cutoff chi supported in the ball of radius R with int chi^2 = 1."""

    R: float
    r: np.ndarray            # radial sample points in [0, R]
    chi: np.ndarray          # profile values
    dchi: np.ndarray         # radial derivative samples
    dirichlet_energy: float  # int |grad chi|^2

    def __call__(self, dist):
        """chi evaluated at radial distance(s), 0 beyond the support."""
        dist = np.asarray(dist, dtype=float)
        out = np.interp(dist, self.r, self.chi, right=0.0)
        return out

    def grad_radial(self, dist):
        dist = np.asarray(dist, dtype=float)
        return np.interp(dist, self.r, self.dchi, right=0.0)

    def energy_budget(self) -> float:
        """The slack-1/2 budget: (3/2) pi^2 / R^2."""
        return 1.5 * np.pi**2 / self.R**2


def _smooth_step(t):
    """C-infinity step: 1 for t <= 0, 0 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
        f1 = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    return f0 / (f0 + f1)


def make_cutoff(R: float, grid_resolution: int = 4096,
                plateau: float = 0.9, support: float = 0.995) -> CutoffProfile:
    """Mollified Dirichlet ground mode of the ball of radius R.

    The unmollified mode sin(pi r / R) / r has Dirichlet energy exactly
    pi^2 / R^2; multiplying by a smooth step that is 1 on [0, plateau R] and
    0 from support*R on, then renormalizing, must stay within the slack-1/2
    budget (3/2) pi^2 / R^2 or a ProfileBudgetError is raised.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    if grid_resolution < 64:
        raise ProfileBudgetError("profile budget: resolution too coarse")
    r = np.linspace(0.0, R, grid_resolution)
    rr = np.maximum(r, 1e-12 * R)
    base = np.sin(np.pi * r / R) / rr
    base[0] = np.pi / R  # limit of sin(pi r / R)/r at r = 0
    t = (r - plateau * R) / ((support - plateau) * R)
    step = _smooth_step(t)
    chi = base * step
    # normalize: int_0^R chi^2 4 pi r^2 dr = 1
    norm_sq = 4.0 * np.pi * np.trapz(chi**2 * r**2, r)
    chi = chi / np.sqrt(norm_sq)
    dchi = np.gradient(chi, r)
    dirichlet = 4.0 * np.pi * np.trapz(dchi**2 * r**2, r)
    profile = CutoffProfile(R=R, r=r, chi=chi, dchi=dchi, dirichlet_energy=float(dirichlet))
    if dirichlet > profile.energy_budget():
        raise ProfileBudgetError(
            f"profile budget: Dirichlet energy {dirichlet:.6g} exceeds "
            f"{profile.energy_budget():.6g}")
    return profile


def dirichlet_mode_energy(R: float) -> float:
    """Lowest Dirichlet eigenvalue of the ball of radius R: pi^2 / R^2."""
    return np.pi**2 / R**2


def localization_error(n: int, R: float) -> float:
    """Additive localization cost 2 pi^2 N^2 / R^2 (twice the unit-ball eigenvalue)."""
    if n < 1 or not R > 0:
        raise ValueError("need n >= 1 and R > 0")
    return 2.0 * np.pi**2 * n**2 / R**2


def permanent(matrix: np.ndarray) -> float:
    """Permanent by Ryser's inclusion-exclusion with Gray-code row sums; n <= 20."""
    a = np.asarray(matrix)
    n, m = a.shape
    if n != m:
        raise ValueError("matrix must be square")
    if n > 20:
        raise ValueError(f"permanent size limit is 20, got {n}")
    if n == 0:
        return 1.0
    row_sums = np.zeros(n, dtype=a.dtype)
    total = 0.0
    gray = 0
    sign = 1 if n % 2 == 0 else -1
    for i in range(1, 2**n):
        new_gray = i ^ (i >> 1)
        bit = new_gray ^ gray
        col = bit.bit_length() - 1
        if new_gray & bit:
            row_sums += a[:, col]
        else:
            row_sums -= a[:, col]
        gray = new_gray
        k = bin(gray).count("1")
        term = np.prod(row_sums)
        total += term if (n - k) % 2 == 0 else -term
    return float(total) if not np.iscomplexobj(a) else complex(total)


def permanent_naive(matrix: np.ndarray):
    """Direct permutation-sum expansion; oracle for small n."""
    a = np.asarray(matrix)
    n = a.shape[0]
    rows = range(n)
    return sum(math.prod(a[i, p[i]] for i in rows)
               for p in itertools.permutations(range(n)))


def _pair_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x[:, None, :] - y[None, :, :], axis=-1)


def overlap_matrix(x: np.ndarray, chi: CutoffProfile) -> np.ndarray:
    """M_ij = int chi(x_i - y) chi(x_j - y) dy via the radial autocorrelation."""
    corr = chi_autocorrelation(chi)
    d = _pair_distances(x, x)
    return np.interp(d, corr[0], corr[1], right=0.0)


_CORR_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def chi_autocorrelation(chi: CutoffProfile, n_t: int = 512):
    """(t, C(t)) samples of the 3-D autocorrelation C(t) = (chi * chi)(|t|).

    C(t) = (2 pi / t) int chi(r) r [J(r + t) - J(|r - t|)] dr with
    J(s) = int_0^s chi(u) u du; C(0) = int chi^2 = 1.
    """
    key = id(chi)
    if key in _CORR_CACHE:
        return _CORR_CACHE[key]
    r = chi.r
    w = chi.chi * r
    j_cum = np.concatenate(([0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(r))))

    def j_of(s):
        return np.interp(s, r, j_cum, right=j_cum[-1])

    ts = np.linspace(0.0, 2.0 * chi.R, n_t)
    c = np.empty(n_t)
    c[0] = 1.0
    for i in range(1, n_t):
        t = ts[i]
        integrand = w * (j_of(r + t) - j_of(np.abs(r - t)))
        c[i] = (2.0 * np.pi / t) * np.trapz(integrand, r)
    c = np.clip(c, 0.0, None)
    _CORR_CACHE[key] = (ts, c)
    return ts, c


def g_product_sum(x: np.ndarray, y: np.ndarray, chi: CutoffProfile):
    """G(X, Y) = sum over permutations of prod chi(x_i - y_pi(i)) = Per(chi(x_i - y_j))."""
    return permanent(chi(_pair_distances(x, y)))


def localization_weight(x, y, chi: CutoffProfile) -> float:
    """W(X, Y) = G(X, Y) P(X)^{-1/2}; P = N! Per(M) >= N! so W is finite."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n = x.shape[0]
    if n > 12:
        raise ValueError("localization_weight limited to N <= 12 (permanent cost)")
    g = g_product_sum(x, y, chi)
    if g == 0.0:
        return 0.0
    p = math.factorial(n) * permanent(overlap_matrix(x, chi))
    return float(g / np.sqrt(p))


def _sample_chi_sq_radius(chi: CutoffProfile, rng, size):
    """Radii distributed as the chi^2 3-D density (inverse CDF on the samples)."""
    pdf = chi.chi**2 * chi.r**2 * 4.0 * np.pi
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(chi.r))))
    cdf /= cdf[-1]
    u = rng.uniform(size=size)
    return np.interp(u, cdf, chi.r)


def _sample_mixture(x: np.ndarray, chi: CutoffProfile, rng, n_samples: int):
    """Y samples where each y_j ~ (1/N) sum_i chi^2(y - x_i); returns (Y, q(Y)).

    The mixture dominates the support of G and its x_j-gradient, so ratio
    estimators against q are unbiased.
    """
    n = x.shape[0]
    comp = rng.integers(0, n, size=(n_samples, n))
    radii = _sample_chi_sq_radius(chi, rng, (n_samples, n))
    direc = rng.normal(size=(n_samples, n, 3))
    direc /= np.linalg.norm(direc, axis=-1, keepdims=True)
    y = x[comp] + radii[..., None] * direc
    # q(Y) = prod_j (1/N) sum_i chi^2(|y_j - x_i|)
    d = np.linalg.norm(y[:, :, None, :] - x[None, None, :, :], axis=-1)
    chi_vals = chi(d)
    q = np.prod(np.mean(chi_vals**2, axis=2), axis=1)
    return y, q


def partition_identity_mc(x, chi: CutoffProfile, n_samples: int = 20000, seed: int = 0):
    """MC estimate of int W(X, Y)^2 dY (should be 1); returns (estimate, std_error)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    rng = np.random.default_rng(seed)
    y, q = _sample_mixture(x, chi, rng, n_samples)
    p = math.factorial(n) * permanent(overlap_matrix(x, chi))
    d = np.linalg.norm(x[None, :, None, :] - y[:, None, :, :], axis=-1)
    chi_mat = chi(d)  # (samples, i, j) = chi(x_i - y_j)
    g = _batch_permanent(chi_mat)
    vals = np.zeros(n_samples)
    ok = q > 0
    vals[ok] = g[ok] ** 2 / (q[ok] * p)
    est = float(np.mean(vals))
    err = float(np.std(vals, ddof=1) / np.sqrt(n_samples))
    return est, err


def _batch_permanent(mats: np.ndarray) -> np.ndarray:
    """Permanents of a batch of small matrices (n <= 4 vectorized, else loop)."""
    n = mats.shape[-1]
    if n == 1:
        return mats[..., 0, 0]
    if n == 2:
        return mats[..., 0, 0] * mats[..., 1, 1] + mats[..., 0, 1] * mats[..., 1, 0]
    if n == 3:
        total = np.zeros(mats.shape[:-2])
        for p in itertools.permutations(range(3)):
            total = total + mats[..., 0, p[0]] * mats[..., 1, p[1]] * mats[..., 2, p[2]]
        return total
    if n == 4:
        total = np.zeros(mats.shape[:-2])
        for p in itertools.permutations(range(4)):
            total = total + (mats[..., 0, p[0]] * mats[..., 1, p[1]]
                             * mats[..., 2, p[2]] * mats[..., 3, p[3]])
        return total
    flat = mats.reshape(-1, n, n)
    return np.array([permanent(m) for m in flat]).reshape(mats.shape[:-2])


@dataclass
class FjEstimate:
    value: float
    std_error: float
    flagged: bool   # relative MC error above 10 %


def estimate_Fj(x_samples, chi: CutoffProfile, j: int = 0,
                mc_samples: int = 20000, seed: int = 0):
    """Upper-bound MC estimates of the kinetic leakage F_j(X) per X sample.

    Uses the estimator P(X)^{-1} int |grad_{x_j} G(X, Y)|^2 dY (the dropped
    -|grad P|^2 / 4P^2 term is negative, so this bounds F_j from above),
    with Y importance-sampled from the chi^2 mixture density.
    """
    results = []
    for s, x in enumerate(x_samples):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        if n > 6:
            raise ValueError("estimate_Fj limited to N <= 6")
        rng = np.random.default_rng(seed + 7919 * s)
        y, q = _sample_mixture(x, chi, rng, mc_samples)
        p = math.factorial(n) * permanent(overlap_matrix(x, chi))
        d = np.linalg.norm(x[None, :, None, :] - y[:, None, :, :], axis=-1)
        chi_mat = chi(d)
        # grad_{x_j} G = sum_k grad chi(x_j - y_k) * Per(minor_{jk})
        grad = np.zeros((mc_samples, 3))
        rows = [i for i in range(n) if i != j]
        for k in range(n):
            cols = [c for c in range(n) if c != k]
            minor = chi_mat[:, rows][:, :, cols] if n > 1 else None
            per_minor = _batch_permanent(minor) if n > 1 else np.ones(mc_samples)
            djk = x[j][None, :] - y[:, k, :]
            dist = np.linalg.norm(djk, axis=-1)
            dchi = chi.grad_radial(dist)
            with np.errstate(invalid="ignore", divide="ignore"):
                unit = np.where(dist[:, None] > 0, djk / np.maximum(dist, 1e-300)[:, None], 0.0)
            grad += (dchi * per_minor)[:, None] * unit
        vals = np.zeros(mc_samples)
        ok = q > 0
        vals[ok] = np.sum(grad[ok] ** 2, axis=1) / (q[ok] * p)
        est = float(np.mean(vals))
        err = float(np.std(vals, ddof=1) / np.sqrt(mc_samples))
        flagged = err > 0.1 * abs(est) if est != 0 else True
        results.append(FjEstimate(value=est, std_error=err, flagged=flagged))
    return results


@dataclass
class BallCluster:
    """Merged-ball summary: centers, radii R_i = (3 n_i - 1) R / 2, occupancies."""

    centers: np.ndarray      # (m, 3)
    occupancies: np.ndarray  # (m,) positive ints summing to N
    radii: np.ndarray        # (m,)
    base_radius: float       # R
    assignment: np.ndarray   # input index -> output ball index

    @property
    def m(self) -> int:
        return len(self.occupancies)

    def to_dict(self):
        return {
            "R": self.base_radius,
            "centers": self.centers.tolist(),
            "occupancies": self.occupancies.tolist(),
            "radii": self.radii.tolist(),
            "assignment": self.assignment.tolist(),
        }


def _ball_distance(c1, r1, c2, r2) -> float:
    return float(np.linalg.norm(c1 - c2) - r1 - r2)


def merge_balls(y, R: float) -> BallCluster:
    """Greedy closest-pair-first realization of the inductive merging procedure.

    Starting from the N balls B_R(y_j), any two balls closer than R are
    replaced by a ball with the occupancy-sum radius (3 n - 1) R / 2 centered
    at the minimal enclosing ball's center; that radius always suffices to
    contain both.  Terminates with pairwise ball distances >= R.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n_in = y.shape[0]
    centers = [y[i].copy() for i in range(n_in)]
    occs = [1] * n_in
    members = [[i] for i in range(n_in)]

    def radius(occ):
        return 0.5 * (3 * occ - 1) * R

    while True:
        m = len(centers)
        best = None
        for i in range(m):
            for j in range(i + 1, m):
                d = _ball_distance(centers[i], radius(occs[i]), centers[j], radius(occs[j]))
                if d < R - 1e-12 * R and (best is None or d < best[0]):
                    best = (d, i, j)
        if best is None:
            break
        _, i, j = best
        ci, cj = centers[i], centers[j]
        ri, rj = radius(occs[i]), radius(occs[j])
        d = float(np.linalg.norm(ci - cj))
        if d <= abs(ri - rj):
            new_center = ci if ri >= rj else cj
        else:
            # center of the minimal enclosing ball of the two balls
            new_center = 0.5 * (ci + cj) + 0.5 * (ri - rj) / d * (ci - cj)
        new_occ = occs[i] + occs[j]
        new_members = members[i] + members[j]
        for k in sorted((i, j), reverse=True):
            del centers[k], occs[k], members[k]
        centers.append(np.asarray(new_center, dtype=float))
        occs.append(new_occ)
        members.append(new_members)

    assignment = np.empty(n_in, dtype=int)
    for b, mem in enumerate(members):
        for idx in mem:
            assignment[idx] = b
    occ_arr = np.asarray(occs, dtype=int)
    return BallCluster(centers=np.asarray(centers), occupancies=occ_arr,
                       radii=np.array([radius(o) for o in occs]),
                       base_radius=float(R), assignment=assignment)
