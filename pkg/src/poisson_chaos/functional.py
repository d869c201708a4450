"""Functionals of occupation counts and the iterated difference operators.

A functional here is any real function of a count vector ``(n_1, .., n_k)``,
optionally carrying a polynomial growth envelope ``|f(n)| <= c * prod_i
(1 + n_i)^p`` (used for rigorous truncation error bounds) and a monotone
partition (the set of sites on which the functional is increasing; it must be
decreasing on the rest).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

from . import dsl
from .errors import SiteRangeError

Counts = tuple[int, ...]

__all__ = [
    "Counts",
    "GrowthEnvelope",
    "Functional",
    "add_point",
    "difference",
    "iterated_difference",
    "parse_functional",
    "linear_count",
    "quadratic_count",
    "exponential_decay",
    "threshold_indicator",
    "max_occupancy",
    "catalog",
]


@dataclass(frozen=True)
class GrowthEnvelope:
    """Declared bound |f(n)| <= c * prod_i (1 + n_i)^p."""

    c: float
    p: float

    def __post_init__(self) -> None:
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError("envelope constant c must be positive and finite")
        if not (self.p >= 0 and math.isfinite(self.p)):
            raise ValueError("envelope exponent p must be nonnegative and finite")

    def bound(self, counts: Counts) -> float:
        b = self.c
        for n in counts:
            b *= (1.0 + n) ** self.p
        return b

    def after_differences(self, n: int) -> "GrowthEnvelope":
        # |Df(n)| <= |f(n + e_y)| + |f(n)| and (2 + m)^p <= 2^p (1 + m)^p,
        # so one difference multiplies c by (1 + 2^p); iterate n times.
        return GrowthEnvelope(self.c * (1.0 + 2.0**self.p) ** n, self.p)

    def squared(self) -> "GrowthEnvelope":
        return GrowthEnvelope(self.c**2, 2.0 * self.p)

    def times(self, other: "GrowthEnvelope") -> "GrowthEnvelope":
        return GrowthEnvelope(self.c * other.c, self.p + other.p)

    def shifted(self, shift: Counts) -> "GrowthEnvelope":
        # envelope of n -> f(n + shift)
        c = self.c
        for s in shift:
            c *= (1.0 + s) ** self.p
        return GrowthEnvelope(c, self.p)


@dataclass(frozen=True)
class Functional:
    """Evaluatable functional of a count vector on k sites.

    ``increasing_sites`` declares the monotone partition: increasing on the
    listed (0-based) sites and decreasing on the complement.  ``None`` means
    no declaration.
    """

    k: int
    body: Callable[[Counts], float]
    envelope: GrowthEnvelope | None = None
    increasing_sites: frozenset[int] | None = None
    name: str = ""

    def __call__(self, counts: Counts) -> float:
        return self.body(counts)

    def with_envelope(self, c: float, p: float) -> "Functional":
        return replace(self, envelope=GrowthEnvelope(c, p))

    def with_monotone(self, increasing: Iterable[int]) -> "Functional":
        sites = frozenset(int(i) for i in increasing)
        for i in sites:
            if not 0 <= i < self.k:
                raise SiteRangeError(f"monotone site {i} out of range for k={self.k}")
        return replace(self, increasing_sites=sites)


def add_point(counts: Counts, site: int) -> Counts:
    return counts[:site] + (counts[site] + 1,) + counts[site + 1 :]


def _check_site(k: int, site: int) -> None:
    if not 0 <= site < k:
        raise SiteRangeError(f"site {site} out of range for k={k}")


def difference(f: Functional, y: int) -> Functional:
    """Add-one-cost operator: mu -> f(mu + delta_y) - f(mu)."""
    _check_site(f.k, y)
    body = f.body

    def diff(counts: Counts) -> float:
        return body(add_point(counts, y)) - body(counts)

    env = f.envelope.after_differences(1) if f.envelope is not None else None
    return Functional(f.k, diff, envelope=env, name=f"D_{y}[{f.name or 'f'}]")


def iterated_difference(f: Functional, sites: Sequence[int]) -> Functional:
    """n-fold difference evaluated by the explicit subset sum

        D^n f(mu) = sum over J subset of {1..n} of (-1)^(n-|J|) f(mu + sum_{j in J} e_{y_j}),

    which is symmetric in the sites."""
    sites = tuple(int(y) for y in sites)
    for y in sites:
        _check_site(f.k, y)
    n = len(sites)
    if n == 0:
        return f

    terms: list[tuple[float, Counts]] = []
    for mask in range(1 << n):
        shift = [0] * f.k
        bits = 0
        for j in range(n):
            if mask >> j & 1:
                shift[sites[j]] += 1
                bits += 1
        terms.append((float((-1) ** (n - bits)), tuple(shift)))
    body = f.body

    def diff(counts: Counts) -> float:
        return sum(sign * body(tuple(c + s for c, s in zip(counts, shift))) for sign, shift in terms)

    env = f.envelope.after_differences(n) if f.envelope is not None else None
    return Functional(f.k, diff, envelope=env, name=f"D^{n}[{f.name or 'f'}]")


def parse_functional(
    source: str,
    k: int,
    envelope: tuple[float, float] | None = None,
    increasing: Iterable[int] | None = None,
    name: str = "",
) -> Functional:
    """Build a Functional from expression source over n1..nk."""
    tree = dsl.parse(source, k)

    def body(counts: Counts) -> float:
        return dsl.evaluate(tree, counts)

    f = Functional(k, body, name=name or source)
    if envelope is not None:
        f = f.with_envelope(*envelope)
    if increasing is not None:
        f = f.with_monotone(increasing)
    return f


# ---------------------------------------------------------------------------
# Built-in catalog
# ---------------------------------------------------------------------------


def _weights(k: int, v: Sequence[float] | None, default: float = 1.0) -> tuple[float, ...]:
    if v is None:
        return (default,) * k
    v = tuple(float(x) for x in v)
    if len(v) != k:
        raise ValueError(f"weight vector has length {len(v)}, expected k={k}")
    return v


def linear_count(k: int, v: Sequence[float] | None = None) -> Functional:
    """mu(v) = sum_i v_i n_i with v >= 0 (default v == 1)."""
    w = _weights(k, v)
    if min(w) < 0:
        raise ValueError("linear_count expects nonnegative weights")
    c = max(max(w), 1e-300)
    f = Functional(k, lambda n: sum(wi * ni for wi, ni in zip(w, n)), name="linear")
    return f.with_envelope(c, 1.0).with_monotone(range(k))


def quadratic_count(k: int, v: Sequence[float] | None = None) -> Functional:
    """mu(v)^2 with v >= 0 (default v == 1); equals n^2 when k = 1."""
    w = _weights(k, v)
    if min(w) < 0:
        raise ValueError("quadratic_count expects nonnegative weights")
    c = max(max(w) ** 2, 1e-300)
    f = Functional(k, lambda n: sum(wi * ni for wi, ni in zip(w, n)) ** 2, name="quadratic")
    return f.with_envelope(c, 2.0).with_monotone(range(k))


def exponential_decay(k: int, v: Sequence[float] | None = None) -> Functional:
    """exp(-mu(v)) with per-site v >= 0 (default v == 1); decreasing on all sites."""
    w = _weights(k, v)
    if min(w) < 0:
        raise ValueError("exponential_decay expects nonnegative weights")
    f = Functional(
        k,
        lambda n: math.exp(-sum(wi * ni for wi, ni in zip(w, n))),
        name="exponential",
    )
    return f.with_envelope(1.0, 0.0).with_monotone(())


def threshold_indicator(k: int, sites: Iterable[int], t: int) -> Functional:
    """ind(eta(B) >= t) for B the given site set; increasing on every site."""
    B = sorted(set(int(i) for i in sites))
    for i in B:
        if not 0 <= i < k:
            raise SiteRangeError(f"site {i} out of range for k={k}")
    t = int(t)
    f = Functional(
        k,
        lambda n: 1.0 if sum(n[i] for i in B) >= t else 0.0,
        name=f"indicator(B={B},t={t})",
    )
    return f.with_envelope(1.0, 0.0).with_monotone(range(k))


def max_occupancy(k: int) -> Functional:
    """max_i n_i; increasing on every site."""
    f = Functional(k, lambda n: float(max(n)), name="max_occupancy")
    return f.with_envelope(1.0, 1.0).with_monotone(range(k))


def catalog(k: int) -> dict[str, Functional]:
    """Standard instances used throughout the verification suite."""
    return {
        "linear": linear_count(k),
        "quadratic": quadratic_count(k),
        "exponential": exponential_decay(k),
        "indicator": threshold_indicator(k, range(k), 1),
        "max_occupancy": max_occupancy(k),
    }
