"""Pathwise multiple Wiener-Ito integrals and Malliavin-type operators.

For sum-product integrands the integral of order n against the compensated
process evaluates pathwise as

    I_n(g)(mu) = sum_{J subset [n]} (-1)^(n-|J|) mu^(|J|)(tensor_{j in J} g_j)
                 * prod_{j not in J} lam(g_j),

with mu^(m) the factorial moment measure (ordered m-tuples of distinct
points).  On a finite ground space every order-n kernel also evaluates
through the Charlier product form

    I_n(h)(mu) = sum_m S_h(m) prod_i lam_i^{m_i} C_{m_i}(lam_i; mu_i),

where S_h(m) sums h over the site tuples with occupation pattern m.  The
derivative operator and the Kabanov-Skorohod integral are built on that
representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations
from typing import TYPE_CHECKING, Callable, Iterator, Sequence

import numpy as np

from .charlier import FiniteIntensity, TruncationPolicy, charlier
from .chaos import ChaosCoefficients, MultiIndex, chaos_coefficients, multi_indices
from .errors import SiteRangeError
from .functional import Counts, Functional, GrowthEnvelope, add_point

if TYPE_CHECKING:  # pragma: no cover
    from .mc import McEstimate

PathConfiguration = Counts

__all__ = [
    "PathConfiguration",
    "SumProductFunction",
    "ChaosEvaluation",
    "IsometryCheck",
    "iter_points",
    "remove_point",
    "factorial_moment",
    "wiener_ito_pathwise",
    "tensor_class_sums",
    "charlier_form",
    "symmetrize",
    "l2_inner",
    "isometry_check",
    "derivative_operator",
    "skorohod_pathwise",
    "section_coefficients",
    "skorohod_chaos",
]


def iter_points(mu: PathConfiguration) -> Iterator[int]:
    """Site indices of the points of mu, with multiplicity."""
    for site, n in enumerate(mu):
        for _ in range(n):
            yield site


def remove_point(mu: PathConfiguration, site: int) -> PathConfiguration:
    if mu[site] < 1:
        raise SiteRangeError(f"no point at site {site} to remove")
    return mu[:site] + (mu[site] - 1,) + mu[site + 1 :]


@dataclass(frozen=True)
class SumProductFunction:
    """Finite sum of tensor products of per-site weight vectors.

    Each term is (coefficient, factors) with factors an n-tuple of length-k
    weight vectors; all terms share the order n.
    """

    terms: tuple[tuple[float, tuple[tuple[float, ...], ...]], ...]

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("need at least one term")
        orders = {len(factors) for _, factors in self.terms}
        if len(orders) != 1:
            raise ValueError("all terms must share one order")
        if min(orders) < 1:
            raise ValueError("order must be >= 1")
        ks = {len(vec) for _, factors in self.terms for vec in factors}
        if len(ks) != 1:
            raise ValueError("all factors must have the same number of sites")

    @property
    def order(self) -> int:
        return len(self.terms[0][1])

    @property
    def k(self) -> int:
        return len(self.terms[0][1][0])

    @classmethod
    def product(cls, factors: Sequence[Sequence[float]], coefficient: float = 1.0) -> "SumProductFunction":
        return cls(((float(coefficient), tuple(tuple(float(x) for x in v) for v in factors)),))

    @classmethod
    def tensor_power(cls, vector: Sequence[float], n: int, coefficient: float = 1.0) -> "SumProductFunction":
        return cls.product([vector] * n, coefficient)

    @classmethod
    def indicator_power(cls, k: int, sites: Sequence[int], n: int) -> "SumProductFunction":
        vec = [1.0 if i in set(sites) else 0.0 for i in range(k)]
        return cls.tensor_power(vec, n)

    def plus(self, other: "SumProductFunction") -> "SumProductFunction":
        if other.order != self.order or other.k != self.k:
            raise ValueError("mismatched order or site count")
        return SumProductFunction(self.terms + other.terms)

    def tensor(self) -> np.ndarray:
        """Dense kernel on Y^n (shape (k,)*n)."""
        out = np.zeros((self.k,) * self.order)
        for coeff, factors in self.terms:
            block = np.array(factors[0], dtype=float)
            for vec in factors[1:]:
                block = np.multiply.outer(block, np.array(vec, dtype=float))
            out += coeff * block
        return out


def factorial_moment(mu: PathConfiguration, m: int, h: Callable[[tuple[int, ...]], float]) -> float:
    """mu^(m)(h): sum of h over ordered m-tuples of distinct points of mu.

    Points at the same site are distinct; the recursion follows the defining
    nested integral, removing each chosen point before the next draw.
    """
    if m < 1:
        raise ValueError("m must be >= 1")

    def recurse(remaining: list[int], chosen: tuple[int, ...]) -> float:
        if len(chosen) == m:
            return h(chosen)
        total = 0.0
        for site, n in enumerate(remaining):
            if n > 0:
                remaining[site] -= 1
                total += (n) * recurse(remaining, chosen + (site,))
                remaining[site] += 1
        return total

    return recurse(list(mu), ())


def wiener_ito_pathwise(g: SumProductFunction, mu: PathConfiguration, intensity: FiniteIntensity) -> float:
    """I_n(g)(mu) by the subset-sum formula over factorial moments."""
    if g.k != intensity.k:
        raise ValueError(f"kernel has k={g.k}, intensity has k={intensity.k}")
    n = g.order
    total = 0.0
    for coeff, factors in g.terms:
        lam_ints = [intensity.integral(v) for v in factors]
        term = 0.0
        for mask in range(1 << n):
            chosen = [j for j in range(n) if mask >> j & 1]
            rest = [j for j in range(n) if not mask >> j & 1]
            sign = (-1.0) ** (n - len(chosen))
            if chosen:
                fm = factorial_moment(
                    mu,
                    len(chosen),
                    lambda ys, idx=tuple(chosen): math.prod(factors[j][y] for j, y in zip(idx, ys)),
                )
            else:
                fm = 1.0
            comp = math.prod(lam_ints[j] for j in rest) if rest else 1.0
            term += sign * fm * comp
        total += coeff * term
    return total


def tensor_class_sums(tensor: np.ndarray) -> dict[MultiIndex, float]:
    """S_h(m) = sum of h over site tuples with occupation pattern m."""
    n = tensor.ndim
    k = tensor.shape[0]
    sums: dict[MultiIndex, float] = {}
    for idx in np.ndindex(*tensor.shape):
        m = [0] * k
        for y in idx:
            m[y] += 1
        key = tuple(m)
        sums[key] = sums.get(key, 0.0) + float(tensor[idx])
    return sums


def charlier_form(
    class_sums: dict[MultiIndex, float],
    mu: PathConfiguration,
    intensity: FiniteIntensity,
) -> float:
    """Pathwise I_n from class sums through the Charlier product form."""
    total = 0.0
    for m, s in class_sums.items():
        if s == 0.0:
            continue
        term = s
        for mi, lam, n in zip(m, intensity.weights, mu):
            if mi:
                term *= lam**mi * charlier(mi, lam, float(n))
        total += term
    return total


def symmetrize(tensor: np.ndarray) -> np.ndarray:
    """Average of the kernel over all argument permutations."""
    n = tensor.ndim
    if n == 0:
        return tensor
    out = np.zeros_like(tensor, dtype=float)
    for perm in permutations(range(n)):
        out += np.transpose(tensor, perm)
    return out / math.factorial(n)


def l2_inner(a: np.ndarray, b: np.ndarray, intensity: FiniteIntensity) -> float:
    """<a, b> in L^2(lambda^n) over site tuples."""
    if a.shape != b.shape:
        raise ValueError("kernels must share their shape")
    weight = np.ones(())
    lam = np.array(intensity.weights)
    for _ in range(a.ndim):
        weight = np.multiply.outer(weight, lam)
    return float(np.sum(a * b * weight))


@dataclass(frozen=True)
class IsometryCheck:
    """Monte Carlo estimate of E[I_m(g) I_n(h)] against the exact target
    1{m=n} m! <g~, h~>."""

    estimate: "McEstimate"
    target: float
    z: float


def isometry_check(
    g: SumProductFunction,
    h: SumProductFunction,
    intensity: FiniteIntensity,
    seed: int,
    n_samples: int,
) -> IsometryCheck:
    from . import mc

    target = 0.0
    if g.order == h.order:
        gs = symmetrize(g.tensor())
        hs = symmetrize(h.tensor())
        target = math.factorial(g.order) * l2_inner(gs, hs, intensity)

    batch = mc.sample_poisson(intensity, seed, n_samples)
    values_g = _integral_values(g, batch.counts, intensity)
    values_h = _integral_values(h, batch.counts, intensity)
    est = mc.estimate(values_g * values_h)
    if est.std_error > 0:
        z = (est.mean - target) / est.std_error
    else:
        z = 0.0 if est.mean == target else math.inf
    return IsometryCheck(est, target, z)


def _integral_values(g: SumProductFunction, counts: np.ndarray, intensity: FiniteIntensity) -> np.ndarray:
    """I_n(g) over a batch of count vectors, vectorised by the Charlier form."""
    sums = tensor_class_sums(g.tensor())
    out = np.zeros(counts.shape[0])
    for m, s in sums.items():
        if s == 0.0:
            continue
        col = np.full(counts.shape[0], s)
        for site, (mi, lam) in enumerate(zip(m, intensity.weights)):
            if mi:
                col = col * lam**mi * charlier(mi, lam, counts[:, site].astype(float))
        out += col
    return out


# ---------------------------------------------------------------------------
# Derivative operator and Kabanov-Skorohod integral
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChaosEvaluation:
    """Value computed from a truncated chaos family; ``truncated`` flags that
    the family's residual shows mass beyond its n_max."""

    value: float
    truncated: bool


def derivative_operator(
    coeffs: ChaosCoefficients,
    intensity: FiniteIntensity,
    mu: PathConfiguration,
    y: int,
) -> ChaosEvaluation:
    """D'_y f(mu) = sum_n n I_{n-1}((T_n f / n!) sectioned at y), using the
    finite-space Charlier form of the section integrals."""
    if not 0 <= y < intensity.k:
        raise SiteRangeError(f"site {y} out of range for k={intensity.k}")
    total = 0.0
    for n in range(1, coeffs.n_max + 1):
        inv = 1.0 / math.factorial(n)
        if n == 1:
            total += coeffs.coeffs[_unit(intensity.k, y)] * inv
            continue
        sums: dict[MultiIndex, float] = {}
        for mp in multi_indices(intensity.k, n - 1):
            mult = math.factorial(n - 1)
            for mi in mp:
                mult //= math.factorial(mi)
            sums[mp] = mult * coeffs.coeffs[_bump(mp, y)] * inv
        total += n * charlier_form(sums, mu, intensity)
    return ChaosEvaluation(total, not coeffs.looks_complete())


def _unit(k: int, y: int) -> MultiIndex:
    return tuple(1 if i == y else 0 for i in range(k))


def _bump(m: MultiIndex, y: int) -> MultiIndex:
    return m[:y] + (m[y] + 1,) + m[y + 1 :]


def skorohod_pathwise(
    h: Callable[[Counts, int], float],
    mu: PathConfiguration,
    intensity: FiniteIntensity,
) -> float:
    """delta'(h)(mu) = sum over points y of h(mu - delta_y, y)
    minus sum_i lam_i h(mu, i)."""
    total = 0.0
    for y in iter_points(mu):
        total += h(remove_point(mu, y), y)
    for i, lam in enumerate(intensity.weights):
        total -= lam * h(mu, i)
    return total


def section_coefficients(
    h: Callable[[Counts, int], float],
    envelope: GrowthEnvelope | None,
    intensity: FiniteIntensity,
    n_max: int,
    policy: TruncationPolicy,
) -> list[ChaosCoefficients]:
    """Chaos-expand every section h(., y); the envelope (shared across
    sections) enables rigorous truncation accounting."""
    sections = []
    for y in range(intensity.k):
        f = Functional(
            intensity.k,
            lambda counts, site=y: h(counts, site),
            envelope=envelope,
            name=f"h(.,{y})",
        )
        sections.append(chaos_coefficients(f, intensity, n_max, policy))
    return sections


def skorohod_chaos(
    sections: Sequence[ChaosCoefficients],
    intensity: FiniteIntensity,
    mu: PathConfiguration,
) -> ChaosEvaluation:
    """Kabanov-Skorohod integral delta(h)(mu) = sum_n I_{n+1}(h~_n) from the
    per-site chaos families of the sections h(., y).

    h~_n is the symmetrised lift of (y_1..y_n, y) -> a^{(y)}_{m(y_1..y_n)}/n!;
    symmetrisation preserves class sums, so the Charlier form needs only

        S_n(m') = sum_{y: m'_y > 0} multinomial(n; m' - e_y) a^{(y)}_{m'-e_y} / n!.
    """
    k = intensity.k
    if len(sections) != k:
        raise ValueError(f"need one section family per site, got {len(sections)}")
    n_max = min(s.n_max for s in sections)
    # order-1 term: I_1 of the section means
    sums1 = {_unit(k, y): sections[y].mean for y in range(k)}
    total = charlier_form(sums1, mu, intensity)
    for n in range(1, n_max + 1):
        inv = 1.0 / math.factorial(n)
        sums: dict[MultiIndex, float] = {}
        for mp in multi_indices(k, n + 1):
            s = 0.0
            for y in range(k):
                if mp[y] > 0:
                    mm = _drop(mp, y)
                    mult = math.factorial(n)
                    for mi in mm:
                        mult //= math.factorial(mi)
                    s += mult * sections[y].coeffs[mm] * inv
            sums[mp] = s
        total += charlier_form(sums, mu, intensity)
    truncated = any(not s.looks_complete() for s in sections)
    return ChaosEvaluation(total, truncated)


def _drop(m: MultiIndex, y: int) -> MultiIndex:
    return m[:y] + (m[y] - 1,) + m[y + 1 :]
