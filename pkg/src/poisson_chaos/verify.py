"""The identity verification suite behind ``poisson-chaos verify``.

Every identity the package implements is checked either exactly (truncated
enumeration, with tolerances combining the rigorous truncation bounds) or
stochastically (seeded Monte Carlo with paired z-scores).  Exact checks use
the configured lattice; MC checks share one sample batch per seed.  The
|z| <= z_threshold rule (default 4) keeps the false-alarm probability of the
whole suite below 1%.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as _cartesian

import numpy as np

from . import mc
from .bounds import alternating_bracket, finite_chaos_order, truncated_bounds
from .charlier import (
    FiniteIntensity,
    ProductPoissonLattice,
    TruncationPolicy,
    charlier,
    truncated_expectation,
)
from .chaos import chaos_coefficients, coefficient_by_orthogonality, fock_covariance, reconstruct
from .config import ExperimentConfig
from .functional import Counts, Functional, GrowthEnvelope, add_point, catalog
from .ordered_cov import TimeMarkedKernel, covariance_identity, fkg_check
from .wiener_ito import (
    SumProductFunction,
    derivative_operator,
    isometry_check,
    section_coefficients,
    skorohod_chaos,
    skorohod_pathwise,
    wiener_ito_pathwise,
)

__all__ = ["CheckResult", "run_suite"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    method: str  # "exact" or "mc"
    discrepancy: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "method": self.method,
            "discrepancy": self.discrepancy,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "detail": self.detail,
        }


def _result(name: str, method: str, discrepancy: float, tolerance: float, detail: str = "") -> CheckResult:
    discrepancy, tolerance = float(discrepancy), float(tolerance)
    ok = bool(math.isfinite(discrepancy) and discrepancy <= tolerance)
    return CheckResult(name, method, discrepancy, tolerance, ok, detail)


def run_suite(config: ExperimentConfig) -> list[CheckResult]:
    intensity = config.finite_intensity()
    policy = config.policy()
    functionals = config.functional_objects()
    seed = config.seed
    n = config.n_samples
    zt = config.z_threshold

    checks: list[CheckResult] = []
    checks.extend(_laplace(intensity, seed, n, zt))
    checks.extend(_mecke(intensity, seed, n, zt))
    checks.extend(_isometry_grid(intensity, seed, n, zt))
    checks.extend(_charlier_identity(len(intensity.weights), seed))
    checks.extend(_fock_and_reconstruction(functionals, intensity, config.n_max, policy))
    checks.extend(_coefficient_recovery(functionals, intensity, policy))
    checks.extend(_brackets(functionals, intensity, config.k, policy))
    checks.extend(_derivative_and_skorohod(intensity, policy))
    checks.extend(_duality(intensity, policy))
    checks.extend(_covariance_identity(intensity, config.quadrature_nodes, policy))
    checks.extend(_fkg(functionals, intensity, policy))
    checks.extend(_mc_variance(functionals, intensity, config.n_max, policy, seed, n, zt))

    if config.tolerance_override is not None:
        forced = config.tolerance_override
        checks = [
            _result(c.name, c.method, c.discrepancy, forced, c.detail)
            for c in checks
        ]
    return checks


# ---------------------------------------------------------------------------
# MC identities
# ---------------------------------------------------------------------------


def _laplace(intensity, seed, n, zt) -> list[CheckResult]:
    res = mc.laplace_check((1.0,) * intensity.k, intensity, seed, n)
    return [
        _result(
            "laplace_functional", "mc", abs(res.z), zt,
            f"mc={res.mc.mean:.6g} exact={res.exact:.6g}",
        )
    ]


def _mecke(intensity, seed, n, zt) -> list[CheckResult]:
    k = intensity.k
    out = []
    res = mc.mecke_check(lambda mu, y: float(sum(mu)), intensity, seed, n)
    out.append(_result("mecke[h=mu(Y)]", "mc", abs(res.z), zt, f"lhs={res.lhs.mean:.6g} rhs={res.rhs.mean:.6g}"))
    res = mc.mecke_check(lambda mu, y: (1.0 + y) * mu[y], intensity, seed + 1, n)
    out.append(_result("mecke[h=site-weighted]", "mc", abs(res.z), zt, f"lhs={res.lhs.mean:.6g} rhs={res.rhs.mean:.6g}"))
    for m in (2, 3):
        res = mc.mecke_multivariate_check(
            lambda mu, ys: float(sum(mu)) + float(sum(ys)), m, intensity, seed + m, n
        )
        out.append(
            _result(f"mecke_multivariate[m={m}]", "mc", abs(res.z), zt,
                    f"lhs={res.lhs.mean:.6g} rhs={res.rhs.mean:.6g}")
        )
    return out


def _isometry_grid(intensity, seed, n, zt) -> list[CheckResult]:
    k = intensity.k
    u = [1.0 if i == 0 else 0.0 for i in range(k)]
    v = [1.0] * k
    out = []
    for m_ord, n_ord in _cartesian(range(1, 4), range(1, 4)):
        g = SumProductFunction.tensor_power(u, m_ord)
        h = SumProductFunction.tensor_power(v, n_ord)
        chk = isometry_check(g, h, intensity, seed, n)
        out.append(
            _result(
                f"isometry[m={m_ord},n={n_ord}]", "mc", abs(chk.z), zt,
                f"estimate={chk.estimate.mean:.6g} target={chk.target:.6g}",
            )
        )
    return out


# ---------------------------------------------------------------------------
# Exact identities
# ---------------------------------------------------------------------------


def _charlier_identity(k: int, seed: int, n_configs: int = 10_000) -> list[CheckResult]:
    """Pathwise Charlier product identity for disjoint singleton blocks with
    unit masses: integer arithmetic on both routes, so the tolerance is 0."""
    unit = FiniteIntensity((1.0,) * k)
    batch = mc.sample_poisson(unit, seed + 10, n_configs)
    patterns = [m for m in _cartesian(range(3), repeat=k) if 1 <= sum(m) <= 4][: 6]
    worst = 0.0
    for m in patterns:
        factors = []
        for site, reps in enumerate(m):
            vec = [1.0 if i == site else 0.0 for i in range(k)]
            factors.extend([vec] * reps)
        g = SumProductFunction.product(factors)
        for mu in batch.draws():
            lhs = wiener_ito_pathwise(g, mu, unit)
            rhs = 1.0
            for site, reps in enumerate(m):
                if reps:
                    rhs *= charlier(reps, 1.0, float(mu[site]))
            worst = max(worst, abs(lhs - rhs))
    return [_result("charlier_identity", "exact", worst, 0.0, f"{n_configs} configurations, {len(patterns)} block patterns")]


def _finite_order(f: Functional, intensity, policy, k_max: int = 6):
    try:
        return finite_chaos_order(f, intensity, k_max, policy)
    except Exception:
        return None


def _tight(policy: TruncationPolicy) -> TruncationPolicy:
    # checks asserting 1e-8 .. 1e-10 tolerances need the lattice to carry
    # less truncation error than that, whatever the configured epsilon
    return TruncationPolicy(min(policy.tail_epsilon, 1e-16), policy.mode)


def _fock_and_reconstruction(functionals, intensity, n_max, policy) -> list[CheckResult]:
    out = []
    tight = _tight(policy)
    # reconstruction is asserted on the configured truncation lattice, with
    # the coefficient family cut at the functional's finite chaos order so
    # that pure-cancellation indices (~1e-13) cannot be amplified by the
    # Charlier growth at the box corners
    lattice = ProductPoissonLattice(intensity, policy.caps(intensity))
    for name, f in functionals.items():
        cc = chaos_coefficients(f, intensity, n_max, tight)
        series = cc.variance - cc.residual
        tol = cc.series_error + cc.variance_error
        order = _finite_order(f, intensity, tight, k_max=n_max)
        if order is not None and order <= n_max:
            disc = abs(cc.residual)
            out.append(_result(f"fock_isometry[{name}]", "exact", disc, tol + 1e-8,
                               f"series={series:.9g} variance={cc.variance:.9g}"))
            cc_rec = chaos_coefficients(f, intensity, max(order, 1), tight)
            worst = 0.0
            for counts in lattice.points():
                worst = max(worst, abs(reconstruct(cc_rec, intensity, counts) - f(counts)))
            out.append(_result(f"reconstruction[{name}]", "exact", worst, 1e-10,
                               f"finite chaos order {order}"))
        else:
            # infinite expansion: the partial series must stay below the variance
            disc = max(0.0, -cc.residual)
            out.append(_result(f"fock_isometry[{name}]", "exact", disc, tol + 1e-8,
                               f"series={series:.9g} <= variance={cc.variance:.9g}"))
    return out


def _coefficient_recovery(functionals, intensity, policy) -> list[CheckResult]:
    out = []
    k = intensity.k
    for name, f in functionals.items():
        cc = chaos_coefficients(f, intensity, 2, policy)
        worst, bound = 0.0, 0.0
        for m, a in cc.coeffs.items():
            recovered = coefficient_by_orthogonality(f, intensity, m, policy)
            worst = max(worst, abs(recovered - a))
            if cc.coeff_errors is not None:
                bound = max(bound, cc.coeff_errors[m])
        out.append(_result(f"coefficient_recovery[{name}]", "exact", worst, bound + 1e-7,
                           f"orders <= 2, {len(cc.coeffs)} indices"))
    return out


def _brackets(functionals, intensity, k_bound, policy) -> list[CheckResult]:
    out = []
    for name, f in functionals.items():
        worst, tol_used = 0.0, 0.0
        flags_ok = True
        order = _finite_order(f, intensity, policy, k_max=2 * k_bound + 1)
        for k in range(1, k_bound + 1):
            alt = alternating_bracket(f, intensity, k, policy)
            trn = truncated_bounds(f, intensity, k, policy)
            for b in (alt, trn):
                worst = max(worst, b.lower - b.variance, b.variance - b.upper)
                tol_used = max(tol_used, b.tolerance)
            expect_lower = order is not None and order <= 2 * k
            expect_upper = order is not None and order <= 2 * k - 1
            if alt.lower_tight != expect_lower or alt.upper_tight != expect_upper:
                flags_ok = False
            if trn.lower_tight != (order is not None and order <= k):
                flags_ok = False
        disc = worst if flags_ok else math.inf
        out.append(_result(f"variance_brackets[{name}]", "exact", max(disc, 0.0), tol_used + 1e-10,
                           f"orders k=1..{k_bound}, finite chaos order {order}"))
    return out


def _derivative_and_skorohod(intensity, policy) -> list[CheckResult]:
    out = []
    k = intensity.k
    cat = catalog(k)
    lattice = ProductPoissonLattice(intensity, policy.caps(intensity))
    # D = D' for finite-chaos functionals
    worst = 0.0
    for name in ("linear", "quadratic"):
        f = cat[name]
        cc = chaos_coefficients(f, intensity, 2, policy)
        for mu in lattice.points():
            for y in range(k):
                pathwise = f(add_point(mu, y)) - f(mu)
                worst = max(worst, abs(derivative_operator(cc, intensity, mu, y).value - pathwise))
    out.append(_result("derivative_operator[D=D']", "exact", worst, 1e-8, "linear and quadratic on the lattice"))

    # delta = delta' for finite-chaos integrands
    weights = intensity.weights
    integrands = {
        "h(mu,y)=g(y)": (lambda mu, y: 1.0 + 0.5 * y, GrowthEnvelope(1.0 + 0.5 * k, 0.0)),
        "h(mu,y)=1_B(y)mu(B)": (lambda mu, y: float(mu[0]) if y == 0 else 0.0, GrowthEnvelope(1.0, 1.0)),
        "h(mu,y)=mu(Y)": (lambda mu, y: float(sum(mu)), GrowthEnvelope(1.0, 1.0)),
    }
    worst = 0.0
    for label, (h, env) in integrands.items():
        sections = section_coefficients(h, env, intensity, 3, policy)
        for mu in lattice.points():
            a = skorohod_chaos(sections, intensity, mu).value
            b = skorohod_pathwise(h, mu, intensity)
            worst = max(worst, abs(a - b))
    out.append(_result("skorohod[delta=delta']", "exact", worst, 1e-8, f"{len(integrands)} integrands on the lattice"))
    return out


def _duality(intensity, policy) -> list[CheckResult]:
    """E sum_y lam_y D_y f h(eta, y) = E f delta(h), via both the chaos form
    of delta and the pathwise delta'."""
    k = intensity.k
    f = catalog(k)["quadratic"]
    lam_total = intensity.total()
    integrands = {
        "g(y)": (lambda mu, y: 1.0 + 0.5 * y, GrowthEnvelope(1.0 + 0.5 * k, 0.0)),
        "mu(Y)": (lambda mu, y: float(sum(mu)), GrowthEnvelope(1.0, 1.0)),
    }
    worst, tol = 0.0, 0.0
    for label, (h, env) in integrands.items():
        def lhs_body(mu: Counts) -> float:
            total = 0.0
            for y in range(k):
                total += intensity.weights[y] * (f(add_point(mu, y)) - f(mu)) * h(mu, y)
            return total

        lhs_env = GrowthEnvelope(lam_total * f.envelope.after_differences(1).c * env.c * 1.001, f.envelope.p + env.p)
        lhs = truncated_expectation(intensity, Functional(k, lhs_body, lhs_env, name="duality-lhs"), policy)

        def rhs_path_body(mu: Counts) -> float:
            return f(mu) * skorohod_pathwise(h, mu, intensity)

        # delta'(h) is bounded by (points + mass) * sup|h| on the lattice scale
        rhs_env = GrowthEnvelope(f.envelope.c * env.c * (1.0 + lam_total) * 4.0, f.envelope.p + env.p + 1.0)
        rhs_path = truncated_expectation(intensity, Functional(k, rhs_path_body, rhs_env, name="duality-rhs-path"), policy)

        sections = section_coefficients(h, env, intensity, 3, policy)

        def rhs_chaos_body(mu: Counts) -> float:
            return f(mu) * skorohod_chaos(sections, intensity, mu).value

        rhs_chaos = truncated_expectation(intensity, Functional(k, rhs_chaos_body, rhs_env, name="duality-rhs-chaos"), policy)

        worst = max(worst, abs(lhs.value - rhs_path.value), abs(lhs.value - rhs_chaos.value))
        tol = max(tol, lhs.error_bound + rhs_path.error_bound + rhs_chaos.error_bound)
    return [_result("skorohod_duality", "exact", worst, tol + 1e-8, "quadratic f, two integrands, both delta routes")]


def _covariance_identity(intensity, nodes, policy) -> list[CheckResult]:
    out = []
    policy = _tight(policy)
    kernel = TimeMarkedKernel.gauss_legendre(nodes, policy)
    cat = catalog(intensity.k)
    for name, tol in (("quadratic", 1e-8), ("exponential", 1e-6)):
        f = cat[name]
        identity = covariance_identity(f, f, intensity, kernel)
        direct = _direct_covariance(f, f, intensity, policy)
        out.append(
            _result(f"covariance_identity[{name}]", "exact", abs(identity.total - direct), tol,
                    f"identity={identity.total:.9g} direct={direct:.9g}")
        )
    return out


def _direct_covariance(f, g, intensity, policy) -> float:
    env = f.envelope.times(g.envelope) if f.envelope and g.envelope else None
    prod = Functional(f.k, lambda mu: f(mu) * g(mu), env, name="f*g")
    e_fg = truncated_expectation(intensity, prod, policy).value
    e_f = truncated_expectation(intensity, f, policy).value
    e_g = truncated_expectation(intensity, g, policy).value
    return e_fg - e_f * e_g


def _fkg(functionals, intensity, policy) -> list[CheckResult]:
    increasing = {
        name: f for name, f in functionals.items()
        if f.increasing_sites is not None and f.increasing_sites == frozenset(range(intensity.k))
    }
    worst = 0.0
    pairs = 0
    names = sorted(increasing)
    for i, a in enumerate(names):
        for b in names[i:]:
            res = fkg_check(increasing[a], increasing[b], intensity, policy)
            if not res.certified_nonnegative:
                worst = max(worst, -res.covariance)
            pairs += 1
    return [_result("harris_fkg", "exact", worst, 1e-10, f"{pairs} increasing pairs certified")]


def _mc_variance(functionals, intensity, n_max, policy, seed, n, zt) -> list[CheckResult]:
    name, f = next(iter(functionals.items()))
    for cand, fc in functionals.items():
        order = _finite_order(fc, intensity, policy, k_max=n_max)
        if order is not None and 1 <= order <= n_max:
            name, f = cand, fc
            break
    series = fock_covariance(f, f, intensity, n_max, policy).total
    batch = mc.shared_batch(intensity, seed, n)
    values = np.array([f(mu) for mu in batch.draws()])
    centred = values - values.mean()
    sample_var = float(np.sum(centred**2) / (len(values) - 1))
    m2 = float(np.mean(centred**2))
    m4 = float(np.mean(centred**4))
    se = math.sqrt(max(m4 - m2 * m2, 0.0) / len(values))
    z = (sample_var - series) / se if se > 0 else 0.0
    return [
        _result(f"mc_variance_vs_chaos[{name}]", "mc", abs(z), zt,
                f"sample={sample_var:.6g} chaos={series:.6g}")
    ]
