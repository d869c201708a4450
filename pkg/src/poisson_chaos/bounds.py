"""Variance inequalities: alternating brackets, truncated-series bounds,
the Poincare inequality, and the finite-chaos-order detector.

The squared-difference norms

    E ||D^n f(eta)||_n^2 = sum over site tuples (y_1..y_n) of
                           E[(D^n_{y_1..y_n} f(eta))^2] * prod lam_{y_i}

are reduced to multi-index sums: tuples with occupation pattern m contribute
identically, with multiplicity n! / prod m_i!.  The n-fold site differences
are forward finite differences of the lattice value array along the axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .charlier import FiniteIntensity, ProductPoissonLattice, TruncationPolicy
from .chaos import chaos_coefficients, index_weight, multi_indices
from .errors import EnvelopeMissingError
from .functional import Functional

__all__ = [
    "VarianceBracket",
    "expected_sq_difference_norm",
    "alternating_bracket",
    "truncated_bounds",
    "finite_chaos_order",
    "bracket_csv_rows",
]

# relative threshold for "vanishes identically on the lattice"; the a.s./a.e.
# condition is not machine-decidable, so the decision is reported together
# with the threshold and the caps it was taken on
VANISH_REL_THRESHOLD = 1e-10


@dataclass(frozen=True)
class VarianceBracket:
    """Two-sided variance bound with the direct variance and tightness flags.

    tolerance is the combined truncation error of all quantities involved
    (zero only in exact situations); equality flags are lattice decisions at
    vanish_threshold on the reported caps.
    """

    k: int
    lower: float
    upper: float
    variance: float
    lower_tight: bool
    upper_tight: bool
    tolerance: float
    vanish_threshold: float
    caps: tuple[int, ...]


class _DifferenceEngine:
    """Shared lattice evaluation for difference norms and vanishing checks."""

    def __init__(
        self,
        f: Functional,
        intensity: FiniteIntensity,
        policy: TruncationPolicy,
        max_order: int,
    ):
        if policy.mode == "declared-envelope" and f.envelope is None:
            raise EnvelopeMissingError(
                f"functional {f.name or f!r} has no growth envelope; "
                "declared-envelope mode needs one (or use adaptive-shell)"
            )
        self.f = f
        self.intensity = intensity
        self.rigorous = policy.mode == "declared-envelope"
        self.lattice = ProductPoissonLattice(intensity, policy.caps(intensity))
        self.values = self.lattice.values(f, pad=max_order)
        self.max_order = max_order
        base = self.values[self.lattice.base_slice()]
        self.scale = max(1.0, float(np.max(np.abs(base))))

    def _difference_array(self, m: tuple[int, ...]) -> np.ndarray:
        d = self.values
        for axis, reps in enumerate(m):
            if reps:
                d = np.diff(d, n=reps, axis=axis)
        return d

    def sq_norm(self, n: int) -> tuple[float, float]:
        """(E ||D^n f||_n^2, rigorous error bound)."""
        total, error = 0.0, 0.0
        for m in multi_indices(self.intensity.k, n):
            mult = math.factorial(n)
            lam_pow = 1.0
            for lam, mi in zip(self.intensity.weights, m):
                mult //= math.factorial(mi)
                lam_pow *= lam**mi
            d = self._difference_array(m)
            term = self.lattice.expect(d[self.lattice.base_slice()] ** 2)
            total += mult * lam_pow * term
            if self.rigorous:
                assert self.f.envelope is not None
                env = self.f.envelope.after_differences(n).squared()
                error += mult * lam_pow * self.lattice.tail_error(env)
        return total, error

    def vanishes(self, order: int) -> bool:
        """True when every order-fold difference is below threshold on the lattice."""
        threshold = VANISH_REL_THRESHOLD * self.scale
        for m in multi_indices(self.intensity.k, order):
            d = self._difference_array(m)
            if float(np.max(np.abs(d[self.lattice.base_slice()]))) > threshold:
                return False
        return True


def expected_sq_difference_norm(
    f: Functional,
    intensity: FiniteIntensity,
    n: int,
    policy: TruncationPolicy,
) -> float:
    """E ||D^n f(eta)||_n^2 via the multi-index multinomial reduction."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _DifferenceEngine(f, intensity, policy, n).sq_norm(n)[0]


def alternating_bracket(
    f: Functional,
    intensity: FiniteIntensity,
    k: int,
    policy: TruncationPolicy,
) -> VarianceBracket:
    """Alternating-sum variance bracket of order k:

        sum_{n=1}^{2k} (-1)^(n+1)/n! E||D^n f||^2  <=  Var f(eta)
                                                   <=  sum to 2k-1.

    Lower is tight iff the (2k+1)-fold differences vanish; upper iff the
    2k-fold ones do.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    engine = _DifferenceEngine(f, intensity, policy, 2 * k + 1)
    terms, errors = zip(*(engine.sq_norm(n) for n in range(1, 2 * k + 1)))
    lower = sum((-1.0) ** (n + 1) / math.factorial(n) * terms[n - 1] for n in range(1, 2 * k + 1))
    upper = sum((-1.0) ** (n + 1) / math.factorial(n) * terms[n - 1] for n in range(1, 2 * k))
    variance, var_error = _direct_variance(engine)
    tolerance = var_error + sum(e / math.factorial(n) for n, e in enumerate(errors, start=1))
    return VarianceBracket(
        k=k,
        lower=lower,
        upper=upper,
        variance=variance,
        lower_tight=engine.vanishes(2 * k + 1),
        upper_tight=engine.vanishes(2 * k),
        tolerance=tolerance,
        vanish_threshold=VANISH_REL_THRESHOLD * engine.scale,
        caps=engine.lattice.caps,
    )


def _direct_variance(engine: _DifferenceEngine) -> tuple[float, float]:
    base = engine.values[engine.lattice.base_slice()]
    mean = engine.lattice.expect(base)
    second = engine.lattice.expect(base**2)
    variance = second - mean * mean
    error = 0.0
    if engine.rigorous:
        assert engine.f.envelope is not None
        mean_err = engine.lattice.tail_error(engine.f.envelope)
        second_err = engine.lattice.tail_error(engine.f.envelope.squared())
        error = second_err + 2.0 * abs(mean) * mean_err + mean_err**2
    return variance, error


def truncated_bounds(
    f: Functional,
    intensity: FiniteIntensity,
    k: int,
    policy: TruncationPolicy,
) -> VarianceBracket:
    """Truncated-series bounds of order k:

        sum_{n=1}^{k} (1/n!) ||T_n f||^2  <=  Var f(eta)
            <=  sum_{n=1}^{k-1} (1/n!) ||T_n f||^2 + (1/k!) E||D^k f||^2.

    Both are equalities iff the (k+1)-fold differences vanish (the upper case
    k=1 is the Poincare inequality).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cc = chaos_coefficients(f, intensity, k, policy)
    # (1/n!) ||T_n f||_n^2 equals the order-n multi-index series term
    series_terms = [
        sum(index_weight(intensity, m) * cc.coeffs[m] ** 2 for m in multi_indices(intensity.k, n))
        for n in range(1, k + 1)
    ]
    engine = _DifferenceEngine(f, intensity, policy, k + 1)
    dk, dk_error = engine.sq_norm(k)
    lower = sum(series_terms)
    upper = sum(series_terms[: k - 1]) + dk / math.factorial(k)
    variance, var_error = _direct_variance(engine)
    tight = engine.vanishes(k + 1)
    tolerance = var_error + cc.series_error + dk_error / math.factorial(k)
    return VarianceBracket(
        k=k,
        lower=lower,
        upper=upper,
        variance=variance,
        lower_tight=tight,
        upper_tight=tight,
        tolerance=tolerance,
        vanish_threshold=VANISH_REL_THRESHOLD * engine.scale,
        caps=engine.lattice.caps,
    )


def finite_chaos_order(
    f: Functional,
    intensity: FiniteIntensity,
    k_max: int,
    policy: TruncationPolicy,
) -> int | None:
    """Least k <= k_max such that all (k+1)-fold differences vanish on the
    lattice (so the expansion terminates at order k), or None."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    engine = _DifferenceEngine(f, intensity, policy, k_max + 1)
    for k in range(k_max + 1):
        if engine.vanishes(k + 1):
            return k
    return None


def bracket_csv_rows(brackets: list[VarianceBracket]) -> list[list]:
    """Rows (k, lower, variance, upper, lower_tight, upper_tight)."""
    return [
        [b.k, b.lower, b.variance, b.upper, b.lower_tight, b.upper_tight]
        for b in brackets
    ]
