import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poisson_chaos import FiniteIntensity, TruncationPolicy
from poisson_chaos.charlier import (
    ExpectationResult,
    charlier,
    charlier_second_moment,
    descending_factorial,
    minimal_cap,
    poisson_pmf,
    truncated_expectation,
    weighted_poisson_tail,
)
from poisson_chaos.errors import (
    EnvelopeMissingError,
    EnvelopeViolationError,
    NonFiniteValueError,
)
from poisson_chaos.functional import Functional, parse_functional

from conftest import brute_expect


def exact_charlier(n: int, lam: Fraction, x: int) -> Fraction:
    """Defining sum in exact rational arithmetic; the independent oracle."""
    total = Fraction(0)
    for j in range(n + 1):
        falling = Fraction(1)
        for i in range(j):
            falling *= x - i
        total += math.comb(n, j) * Fraction(-1) ** (n - j) * lam ** (-j) * falling
    return total


class TestDescendingFactorial:
    def test_direct_product(self):
        assert descending_factorial(4.0, 2) == 12.0

    def test_zero_factor(self):
        assert descending_factorial(2.0, 3) == 0.0

    @given(st.floats(-50, 50, allow_nan=False))
    def test_empty_product(self, x):
        assert descending_factorial(x, 0) == 1.0

    def test_rejects_negative_j(self):
        with pytest.raises(ValueError):
            descending_factorial(1.0, -1)

    def test_array_input(self):
        out = descending_factorial(np.array([3.0, 4.0]), 2)
        assert out.tolist() == [6.0, 12.0]


class TestCharlier:
    @given(st.floats(0.1, 10), st.floats(-20, 20))
    def test_order_zero_is_one(self, lam, x):
        assert charlier(0, lam, x) == 1.0

    def test_linear_case(self):
        assert charlier(1, 2.0, 2.0) == 0.0

    def test_quadratic_case(self):
        assert charlier(2, 1.0, 2.0) == -1.0

    @pytest.mark.parametrize("lam", [0.0, -1.0])
    def test_rejects_nonpositive_lambda(self, lam):
        with pytest.raises(ValueError):
            charlier(2, lam, 1.0)

    @pytest.mark.parametrize("lam", [Fraction(1, 2), Fraction(1), Fraction(2)])
    def test_recurrence_matches_defining_sum(self, lam):
        # the module switches evaluation strategies; both must reproduce the
        # exact rational values on an integer grid to 1e-12 relative
        for n in range(9):
            for x in range(21):
                expected = float(exact_charlier(n, lam, x))
                got = charlier(n, float(lam), float(x))
                assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_high_degree_recurrence_path(self):
        lam = Fraction(2)
        for x in range(8):
            expected = exact_charlier(35, lam, x)
            got = charlier(35, 2.0, float(x))
            assert got == pytest.approx(float(expected), rel=1e-9)

    def test_vectorised_matches_scalar(self):
        xs = np.arange(6.0)
        out = charlier(3, 0.5, xs)
        for x, v in zip(xs, out):
            assert v == charlier(3, 0.5, float(x))


class TestCharlierSecondMoment:
    def test_order_zero(self):
        assert charlier_second_moment(0, 3.7) == 1.0

    def test_paper_value(self):
        assert charlier_second_moment(2, 1.0) == 2.0

    def test_derived_value(self):
        assert charlier_second_moment(3, 2.0) == 0.75

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(ValueError):
            charlier_second_moment(2, 0.0)

    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_three_way_consistency(self, lam):
        # E[C_n C_m] = 1{n=m} n! lam^-n, checked through the expectation
        # engine within its own reported error bound
        policy = TruncationPolicy(1e-12)
        intensity = FiniteIntensity((lam,))
        for n in range(7):
            for m in range(n, 7):
                env_c = (1.0 + 1.0 / lam) ** (n + m)
                f = Functional(
                    1,
                    lambda counts, n=n, m=m: charlier(n, lam, float(counts[0]))
                    * charlier(m, lam, float(counts[0])),
                    envelope=None,
                    name=f"C{n}*C{m}",
                ).with_envelope(env_c, float(n + m))
                res = truncated_expectation(intensity, f, policy)
                target = charlier_second_moment(n, lam) if n == m else 0.0
                assert abs(res.value - target) <= res.error_bound + 1e-10


class TestPoissonKernels:
    def test_pmf_normalises(self):
        total = sum(poisson_pmf(2.5, n) for n in range(80))
        assert total == pytest.approx(1.0, abs=1e-14)

    def test_pmf_large_cap_no_overflow(self):
        assert poisson_pmf(5.0, 500) == 0.0

    @pytest.mark.parametrize("lam", [0.3, 1.0, 7.5])
    def test_minimal_cap_is_minimal(self, lam):
        budget = 1e-9
        cap = minimal_cap(lam, budget)
        assert weighted_poisson_tail(lam, 0.0, cap) <= budget
        if cap > 0:
            assert weighted_poisson_tail(lam, 0.0, cap - 1) > budget

    def test_weighted_tail_bounds_truth(self):
        lam, p, cap = 1.5, 2.0, 6
        direct = sum((1 + n) ** p * poisson_pmf(lam, n) for n in range(cap + 1, 300))
        bound = weighted_poisson_tail(lam, p, cap)
        assert bound >= direct
        assert bound <= direct * 1.01


class TestFiniteIntensity:
    def test_total(self):
        lam = FiniteIntensity((1.0, 0.5, 0.25))
        assert lam.total() == 1.75
        assert lam.k == 3

    @pytest.mark.parametrize("weights", [(), (0.0,), (-1.0,), (math.inf,)])
    def test_rejects_bad_weights(self, weights):
        with pytest.raises(ValueError):
            FiniteIntensity(weights)


class TestTruncatedExpectation:
    def test_mean_of_counts(self, lam1, policy):
        f = parse_functional("n1", 1, envelope=(1.0, 1.0))
        res = truncated_expectation(lam1, f, policy)
        assert abs(res.value - 1.0) <= res.error_bound
        assert res.rigorous

    def test_second_moment(self, lam1, policy):
        f = parse_functional("n1^2", 1, envelope=(1.0, 2.0))
        res = truncated_expectation(lam1, f, policy)
        assert abs(res.value - 2.0) <= res.error_bound

    def test_laplace_point(self, lam1, policy):
        f = parse_functional("exp(-n1)", 1, envelope=(1.0, 0.0))
        res = truncated_expectation(lam1, f, policy)
        target = math.exp(-(1.0 - math.exp(-1.0)))
        assert abs(res.value - target) <= res.error_bound + 1e-15

    def test_matches_brute_oracle(self, lam2, policy):
        f = parse_functional("n1^2*n2 + n1", 2, envelope=(2.0, 3.0))
        oracle = brute_expect(lam2.weights, lambda n: n[0] ** 2 * n[1] + n[0])
        res = truncated_expectation(lam2, f, policy)
        assert abs(res.value - oracle) <= res.error_bound + 1e-12

    def test_error_bound_monotone_in_caps(self, lam2):
        f = parse_functional("n1^2 + n2", 2, envelope=(2.0, 2.0))
        bounds = []
        for caps in [(8, 8), (10, 9), (14, 12), (20, 18)]:
            policy = TruncationPolicy(1e-6, caps_override=caps)
            bounds.append(truncated_expectation(lam2, f, policy).error_bound)
        assert bounds == sorted(bounds, reverse=True)

    def test_declared_mode_requires_envelope(self, lam1, policy):
        f = parse_functional("n1", 1)
        with pytest.raises(EnvelopeMissingError):
            truncated_expectation(lam1, f, policy)

    def test_adaptive_mode_without_envelope(self, lam1):
        policy = TruncationPolicy(1e-10, mode="adaptive-shell")
        f = parse_functional("exp(-n1)", 1)
        res = truncated_expectation(lam1, f, policy)
        assert not res.rigorous
        assert res.value == pytest.approx(math.exp(-(1.0 - math.exp(-1.0))), abs=1e-9)
        assert res.error_bound >= 0.0

    def test_envelope_violation_detected(self, lam1, policy):
        f = parse_functional("n1^2", 1, envelope=(1.0, 1.0))  # wrong: quadratic growth
        with pytest.raises(EnvelopeViolationError):
            truncated_expectation(lam1, f, policy)

    def test_non_finite_value_rejected(self, lam1, policy):
        f = Functional(1, lambda n: math.inf if n[0] == 3 else 1.0).with_envelope(10.0, 0.0)
        with pytest.raises(NonFiniteValueError):
            truncated_expectation(lam1, f, policy)

    def test_result_repr_flags_heuristic(self):
        assert "heuristic" in str(ExpectationResult(1.0, 0.1, 5, rigorous=False))
        assert "heuristic" not in str(ExpectationResult(1.0, 0.1, 5, rigorous=True))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 4.0), st.integers(0, 5))
def test_second_moment_identity_random(lam, n):
    # brute-force check of n! lam^-n against direct summation
    direct = sum(
        poisson_pmf(lam, x) * charlier(n, lam, float(x)) ** 2 for x in range(150)
    )
    assert direct == pytest.approx(charlier_second_moment(n, lam), rel=1e-9)
