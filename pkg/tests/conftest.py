"""Shared fixtures and independent brute-force oracles.

The oracles deliberately avoid the package's lattice engine: plain nested
sums with their own Poisson pmf, so expected values are frozen from an
independent route.
"""

from __future__ import annotations

import math
import random
from itertools import product as cartesian

import pytest

from poisson_chaos import FiniteIntensity, TruncationPolicy


@pytest.fixture
def policy() -> TruncationPolicy:
    return TruncationPolicy(1e-12)


@pytest.fixture
def tight_policy() -> TruncationPolicy:
    return TruncationPolicy(1e-14)


@pytest.fixture
def lam1() -> FiniteIntensity:
    return FiniteIntensity((1.0,))


@pytest.fixture
def lam2() -> FiniteIntensity:
    return FiniteIntensity((1.0, 0.5))


def brute_pmf(lam: float, n: int) -> float:
    return math.exp(-lam) * lam**n / math.factorial(n)


def brute_expect(weights, f, cap: int = 40) -> float:
    """E f(eta) by direct nested summation, independent of the engine."""
    total = 0.0
    for counts in cartesian(range(cap + 1), repeat=len(weights)):
        w = 1.0
        for lam, n in zip(weights, counts):
            w *= brute_pmf(lam, n)
        total += w * f(counts)
    return total


def brute_variance(weights, f, cap: int = 40) -> float:
    mean = brute_expect(weights, f, cap)
    return brute_expect(weights, lambda n: f(n) ** 2, cap) - mean**2


def brute_covariance(weights, f, g, cap: int = 40) -> float:
    mean_f = brute_expect(weights, f, cap)
    mean_g = brute_expect(weights, g, cap)
    return brute_expect(weights, lambda n: f(n) * g(n), cap) - mean_f * mean_g


def random_polynomial(k: int, rng: random.Random, degree: int = 3, nonneg: bool = False):
    """Random DSL polynomial source of total degree <= degree, with a valid
    envelope (c = sum |coeff|, p = degree).  Returns (source, c, p)."""
    exponents = [a for a in cartesian(range(degree + 1), repeat=k) if 0 < sum(a) <= degree]
    terms = []
    c_total = 0.0
    for _ in range(rng.randint(1, 4)):
        coeff = round(rng.uniform(0.1, 2.0), 3)
        if not nonneg and rng.random() < 0.5:
            coeff = -coeff
        alpha = rng.choice(exponents)
        c_total += abs(coeff)
        factors = [repr(coeff)]
        for i, a in enumerate(alpha):
            if a == 1:
                factors.append(f"n{i+1}")
            elif a > 1:
                factors.append(f"n{i+1}^{a}")
        terms.append("*".join(factors))
    # constant offset keeps sources varied without changing the variance
    const = round(rng.uniform(-1.0, 1.0), 3)
    c_total += abs(const)
    source = " + ".join(terms + [repr(const)])
    return source, c_total, float(degree)
