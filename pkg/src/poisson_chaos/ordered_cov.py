"""Time-marked covariance identity and the Harris-FKG check.

Marking every point with an independent uniform time in [0, 1] strictly
orders the points of a finite-space process almost surely.  Conditioning on
the points born before time s splits the process into independent Poisson
stages with intensities s*lam and (1-s)*lam, which turns the covariance
identity into a site sum of a time integral:

    Cov(f, g) = sum_y lam_y int_0^1 E[ h_f(s, n_s, y) h_g(s, n_s, y) ] ds,

where n_s ~ Poisson(s lam) and h(s, n_s, y) = E_{zeta ~ Poisson((1-s) lam)}
D_y f(n_s + zeta).  The integral is evaluated by Gauss-Legendre quadrature,
which is exact for the polynomial integrands arising from polynomial
functionals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .charlier import (
    FiniteIntensity,
    ProductPoissonLattice,
    TruncationPolicy,
    pmf_vector,
    truncated_expectation,
)
from .errors import (
    EnvelopeMissingError,
    MonotonicityError,
    PartitionMismatchError,
    SiteRangeError,
)
from .functional import Counts, Functional

__all__ = [
    "TimeMarkedKernel",
    "CovarianceIdentity",
    "FkgCheck",
    "conditional_difference_mean",
    "covariance_identity",
    "fkg_check",
]


@dataclass(frozen=True)
class TimeMarkedKernel:
    """Quadrature rule on [0, 1] plus the truncation policy shared by the
    two Poisson stages.

    Caps are derived once from the full intensity (which dominates both
    s*lam and (1-s)*lam for every s) and reused across nodes, keeping the
    evaluation deterministic and the truncation valid at every node.
    """

    nodes: tuple[float, ...]
    weights: tuple[float, ...]
    policy: TruncationPolicy

    def __post_init__(self) -> None:
        if len(self.nodes) != len(self.weights) or not self.nodes:
            raise ValueError("nodes and weights must be nonempty and aligned")
        if not all(0.0 < s < 1.0 for s in self.nodes):
            raise ValueError("quadrature nodes must lie in (0, 1)")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError("quadrature weights must sum to 1")

    @classmethod
    def gauss_legendre(
        cls, n: int = 16, policy: TruncationPolicy = TruncationPolicy()
    ) -> "TimeMarkedKernel":
        x, w = np.polynomial.legendre.leggauss(n)
        return cls(tuple((x + 1.0) / 2.0), tuple(w / 2.0), policy)


def conditional_difference_mean(
    f: Functional,
    intensity: FiniteIntensity,
    y: int,
    s: float,
    before: Counts,
    policy: TruncationPolicy,
) -> float:
    """E over the later-born points zeta ~ Poisson((1-s) lam) of
    D_y f(before + zeta); the kernel of the time-marked identity."""
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    if not 0 <= y < intensity.k:
        raise SiteRangeError(f"site {y} out of range for k={intensity.k}")
    if len(before) != intensity.k:
        raise ValueError(f"counts have length {len(before)}, expected {intensity.k}")
    caps = policy.caps(intensity)
    pmfs = [pmf_vector((1.0 - s) * lam, cap) for lam, cap in zip(intensity.weights, caps)]
    total = 0.0
    for zeta in np.ndindex(*[c + 1 for c in caps]):
        base = tuple(b + z for b, z in zip(before, zeta))
        w = 1.0
        for axis, z in enumerate(zeta):
            w *= pmfs[axis][z]
        total += w * (f(base[:y] + (base[y] + 1,) + base[y + 1 :]) - f(base))
    return total


@dataclass(frozen=True)
class CovarianceIdentity:
    """Quadrature value of the time-marked covariance identity.

    rows carry the per-node, per-site inner expectations
    E[h_f h_g] (before the lam_y and quadrature weights are applied),
    by_site the site totals, and total their sum.
    """

    total: float
    by_site: tuple[float, ...]
    rows: tuple[tuple[int, float, float, int, float], ...]  # (node, s, weight, site, integrand)

    def csv_rows(self) -> list[list]:
        return [[*row] for row in self.rows]


def _difference_along(values: np.ndarray, axis: int) -> np.ndarray:
    upper = [slice(None)] * values.ndim
    lower = [slice(None)] * values.ndim
    upper[axis] = slice(1, None)
    lower[axis] = slice(0, -1)
    return values[tuple(upper)] - values[tuple(lower)]


def covariance_identity(
    f: Functional,
    g: Functional,
    intensity: FiniteIntensity,
    kernel: TimeMarkedKernel,
) -> CovarianceIdentity:
    """Cov(f, g) by quadrature over the time mark and truncated enumeration
    over both Poisson stages."""
    k = intensity.k
    if f.k != k or g.k != k:
        raise ValueError("functionals and intensity disagree on the number of sites")
    policy = kernel.policy
    if policy.mode == "declared-envelope":
        for fn in (f, g):
            if fn.envelope is None:
                raise EnvelopeMissingError(
                    f"functional {fn.name or fn!r} has no growth envelope; "
                    "covariance_identity in declared-envelope mode needs one"
                )
    caps = policy.caps(intensity)
    lattice = ProductPoissonLattice(intensity, caps)
    pad = tuple(c + 1 for c in caps)
    values_f = lattice.values(f, pad=pad)
    values_g = values_f if g is f else lattice.values(g, pad=pad)
    window = tuple(c + 1 for c in caps)

    per_site = [0.0] * k
    rows: list[tuple[int, float, float, int, float]] = []
    for node_index, (s, w_node) in enumerate(zip(kernel.nodes, kernel.weights)):
        first = [pmf_vector(s * lam, cap) for lam, cap in zip(intensity.weights, caps)]
        second = [pmf_vector((1.0 - s) * lam, cap) for lam, cap in zip(intensity.weights, caps)]
        w_first = first[0]
        for v in first[1:]:
            w_first = np.multiply.outer(w_first, v)
        w_second = second[0]
        for v in second[1:]:
            w_second = np.multiply.outer(w_second, v)
        w_first = w_first.reshape([c + 1 for c in caps])
        w_second = w_second.reshape([c + 1 for c in caps])

        for y in range(k):
            base = tuple(slice(0, c + 1) for c in caps)
            h_f = _stage_mean(values_f, y, w_second, window)[base]
            h_g = h_f if g is f else _stage_mean(values_g, y, w_second, window)[base]
            integrand = float(np.sum(w_first * h_f * h_g))
            rows.append((node_index, float(s), float(w_node), y, integrand))
            per_site[y] += intensity.weights[y] * w_node * integrand

    return CovarianceIdentity(sum(per_site), tuple(per_site), tuple(rows))


def _stage_mean(values: np.ndarray, y: int, w_second: np.ndarray, window: tuple[int, ...]) -> np.ndarray:
    """h(n_s) = sum_zeta w_second[zeta] * D_y values[n_s + zeta], via a
    sliding-window correlation."""
    diff = _difference_along(values, y)
    windows = sliding_window_view(diff, window)
    return np.tensordot(windows, w_second, axes=w_second.ndim)


@dataclass(frozen=True)
class FkgCheck:
    covariance: float
    certified_nonnegative: bool


def _verify_monotone(f: Functional, lattice: ProductPoissonLattice) -> None:
    assert f.increasing_sites is not None
    values = lattice.values(f, pad=1)
    scale = max(1.0, float(np.max(np.abs(values))))
    tol = 1e-12 * scale
    for axis in range(lattice.k):
        d = _difference_along(values, axis)[lattice.base_slice()]
        if axis in f.increasing_sites:
            bad = d < -tol
        else:
            bad = d > tol
        if np.any(bad):
            witness = tuple(int(i) for i in np.argwhere(bad)[0])
            direction = "increasing" if axis in f.increasing_sites else "decreasing"
            raise MonotonicityError(
                f"functional {f.name or f!r} declared {direction} at site {axis} but is not",
                witness,
                axis,
            )


def fkg_check(
    f: Functional,
    g: Functional,
    intensity: FiniteIntensity,
    policy: TruncationPolicy,
    tol: float = 1e-10,
) -> FkgCheck:
    """Harris-FKG: two functionals increasing on a common site set B and
    decreasing off B are nonnegatively correlated.  The declared partitions
    must match and are property-checked on the lattice; a violation aborts
    with a witness count vector."""
    if f.increasing_sites is None or g.increasing_sites is None:
        raise PartitionMismatchError("both functionals must declare monotone_sites")
    if f.increasing_sites != g.increasing_sites:
        raise PartitionMismatchError(
            f"partitions differ: {sorted(f.increasing_sites)} vs {sorted(g.increasing_sites)}"
        )
    lattice = ProductPoissonLattice(intensity, policy.caps(intensity))
    _verify_monotone(f, lattice)
    _verify_monotone(g, lattice)

    mean_f = truncated_expectation(intensity, f, policy)
    mean_g = truncated_expectation(intensity, g, policy)
    product = Functional(
        f.k,
        lambda n: f(n) * g(n),
        envelope=(f.envelope.times(g.envelope) if f.envelope and g.envelope else None),
        name=f"({f.name or 'f'})*({g.name or 'g'})",
    )
    mean_fg = truncated_expectation(intensity, product, policy)
    covariance = mean_fg.value - mean_f.value * mean_g.value
    error = (
        mean_fg.error_bound
        + abs(mean_f.value) * mean_g.error_bound
        + abs(mean_g.value) * mean_f.error_bound
        + mean_f.error_bound * mean_g.error_bound
    )
    return FkgCheck(covariance, covariance >= -(tol + error))
