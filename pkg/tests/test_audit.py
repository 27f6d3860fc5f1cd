import json
import math

import numpy as np
import pytest
from scipy import stats

from conftest import adjacent_kde_pair
from gpdp import (
    AuditReport,
    KernelSpec,
    ParameterError,
    PrivacyParams,
    RkhsElement,
    analytic_dp_check,
    c_beta,
    kde_build,
    kde_sensitivity_gaussian,
    kde_sensitivity_sobolev,
    noise_scale,
    power_experiment,
    rkhs_norm,
    sobolev_norm_1d,
)

# ||e^t||^2 at gamma = 2: (1 + e^2)/2 + 5 (e^2 - 1) / 8, mpmath
EXP_NORM_G2 = 8.18768811129698150563423089315


def kde_setup(rng, n=100, h=0.1, d=1, alpha=1.0, beta=0.1):
    a, b = adjacent_kde_pair(rng, n, d)
    params = PrivacyParams(alpha, beta)
    sigma = noise_scale(params, kde_sensitivity_gaussian(n, h, d))
    return kde_build(a, h), kde_build(b, h), sigma, params


# ---------------------------------------------------------------- analytic


def test_identical_functions(rng):
    f, _, sigma, params = kde_setup(rng)
    rep = analytic_dp_check(f, f, np.linspace(0, 1, 10)[:, None], sigma, params)
    assert rep.u_norm == 0.0 and rep.violation_prob == 0.0 and rep.bound_ok


def test_violation_matches_formula(rng):
    f1, f2, sigma, params = kde_setup(rng)
    grid = np.linspace(0, 1, 20)[:, None]
    rep = analytic_dp_check(f1, f2, grid, sigma, params)
    K = f1.kernel.cross(grid, grid)
    delta = f1(grid) - f2(grid)
    u = math.sqrt(delta @ np.linalg.solve(K, delta)) / sigma
    assert rep.u_norm == pytest.approx(u, rel=1e-6)
    assert rep.violation_prob == pytest.approx(stats.norm.sf((1.0 - u * u / 2) / u), rel=1e-6)
    assert 0.0 <= rep.violation_prob <= 1.0


def test_violation_decreases_with_sigma(rng):
    f1, f2, sigma, params = kde_setup(rng)
    grid = np.linspace(0, 1, 16)[:, None]
    probs = [analytic_dp_check(f1, f2, grid, sigma * s, params).violation_prob
             for s in (0.1, 1.0, 10.0)]
    assert probs[0] > probs[1] > probs[2]


def test_u_bounded_by_sensitivity(rng):
    # u <= ||f1 - f2||_H / sigma <= delta / sigma = alpha / c(beta)
    for _ in range(50):
        f1, f2, sigma, params = kde_setup(rng, n=int(rng.integers(5, 200)),
                                          h=float(rng.uniform(0.05, 0.3)))
        grid = rng.uniform(size=(32, 1))
        rep = analytic_dp_check(f1, f2, grid, sigma, params)
        assert rep.u_norm <= 1.0 / c_beta(0.1) + 1e-6
        assert rep.bound_ok


def test_sobolev_route_certified(rng):
    n, h = 100, 0.1
    a, b = adjacent_kde_pair(rng, n, 1)
    bound = kde_sensitivity_sobolev(n, h)
    params = PrivacyParams(1.0, 0.1)
    rep = analytic_dp_check(kde_build(a, h), kde_build(b, h), rng.uniform(size=(32, 1)),
                            noise_scale(params, bound), params, kernel=bound.kernel)
    assert rep.bound_ok


def test_callables_need_kernel(rng):
    grid = np.linspace(0, 1, 5)[:, None]
    p = PrivacyParams(1.0, 0.1)
    with pytest.raises(ParameterError):
        analytic_dp_check(lambda x: x[:, 0], lambda x: 0 * x[:, 0], grid, 1.0, p)
    rep = analytic_dp_check(lambda x: x[:, 0], lambda x: 0 * x[:, 0], grid, 1.0, p,
                            kernel=KernelSpec.exp_l1(1.0))
    assert rep.u_norm > 0


def test_audit_errors(rng):
    f1, f2, sigma, params = kde_setup(rng)
    with pytest.raises(ParameterError):
        analytic_dp_check(f1, f2, [[0.1], [0.1]], sigma, params)
    with pytest.raises(ParameterError):
        analytic_dp_check(f1, f2, [[0.1]], 0.0, params)


def test_report_json_fields(rng):
    f1, f2, sigma, params = kde_setup(rng)
    rep = analytic_dp_check(f1, f2, [[0.2], [0.4]], sigma, params)
    d = json.loads(rep.to_json())
    for key in ("grid", "u_norm", "violation_prob", "bound_ok", "power_estimate", "power_se"):
        assert key in d
    assert d["grid"] == [[0.2], [0.4]]
    assert isinstance(rep, AuditReport)


# ---------------------------------------------------------------- power


def test_power_within_bound(rng):
    f1, f2, sigma, params = kde_setup(rng)
    grid = np.linspace(0, 1, 16)[:, None]
    rep = power_experiment(f1, f2, grid, sigma, params, gamma=0.05, reps=10_000, seed=1)
    assert rep.power_bound == pytest.approx(0.05 * math.e + 0.1)
    assert rep.power_estimate <= rep.power_bound + 3 * rep.power_se
    # the Monte Carlo estimate tracks the exact power of the test
    assert abs(rep.power_estimate - rep.extra["power_exact"]) <= 4 * rep.power_se


def test_power_level_zero(rng):
    f1, f2, sigma, params = kde_setup(rng)
    rep = power_experiment(f1, f2, [[0.3], [0.6]], sigma, params, gamma=0.0, reps=1000)
    assert rep.power_estimate == 0.0
    assert rep.power_estimate <= params.beta + 3 * rep.power_se


def test_power_large_sigma_is_level(rng):
    f1, f2, sigma, params = kde_setup(rng)
    rep = power_experiment(f1, f2, [[0.3], [0.6]], sigma * 1e6, params, gamma=0.1,
                           reps=10_000, seed=3)
    assert rep.power_estimate == pytest.approx(0.1, abs=4 * rep.power_se)


def test_power_detects_undersized_noise(rng):
    f1, f2, sigma, params = kde_setup(rng)
    grid = np.linspace(0, 1, 16)[:, None]
    rep = power_experiment(f1, f2, grid, sigma * 0.05, params, gamma=0.05, reps=2000)
    assert rep.power_estimate > rep.power_bound


def test_power_rejects_small_reps(rng):
    f1, f2, sigma, params = kde_setup(rng)
    with pytest.raises(ParameterError):
        power_experiment(f1, f2, [[0.3]], sigma, params, gamma=0.05, reps=999)
    with pytest.raises(ParameterError):
        power_experiment(f1, f2, [[0.3]], sigma, params, gamma=1.5)


# ---------------------------------------------------------------- Sobolev


def test_sobolev_constant():
    for g in (0.5, 1.0, 10.0):
        assert sobolev_norm_1d(np.ones(2049), g) == pytest.approx(1 + g / 2, rel=1e-14)
    assert sobolev_norm_1d(np.zeros(1024), 1.0) == 0.0


def test_sobolev_section_has_unit_norm():
    grid = np.linspace(0, 1, 20_001)
    g = 3.0
    for y in (0.0, 0.37, 1.0):
        f = np.exp(-g * np.abs(grid - y))
        # both one-sided derivatives square to g^2 f^2, including at the kink
        df = g * f
        assert sobolev_norm_1d(f, g, derivative=df) == pytest.approx(1.0, abs=1e-6)


def test_sobolev_second_order_convergence():
    errors = []
    for n in (1025, 2049, 4097, 8193):
        t = np.linspace(0, 1, n)
        errors.append(abs(sobolev_norm_1d(np.exp(t), 2.0, derivative=np.exp(t))
                          - EXP_NORM_G2))
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    assert all(3.0 <= r <= 5.0 for r in ratios)


def test_sobolev_finite_difference_derivative():
    t = np.linspace(0, 1, 4097)
    assert sobolev_norm_1d(np.exp(t), 2.0) == pytest.approx(EXP_NORM_G2, rel=1e-6)


def test_sobolev_bump_bound(rng):
    h = 0.1
    t = np.linspace(0, 1, 8193)
    for mu in rng.uniform(0.2, 0.8, size=10):
        phi = np.exp(-(t - mu) ** 2 / (2 * h * h)) / (math.sqrt(2 * math.pi) * h)
        assert sobolev_norm_1d(phi, 1 / h) <= 1 / (math.sqrt(2 * math.pi) * h * h)


def test_sobolev_errors():
    with pytest.raises(ParameterError):
        sobolev_norm_1d(np.ones(1000), 1.0)
    with pytest.raises(ParameterError):
        sobolev_norm_1d(np.ones(2048), 0.0)
    with pytest.raises(ParameterError):
        sobolev_norm_1d(np.ones(2048), 1.0, grid=np.linspace(0, 1, 2048) ** 2)
    sobolev_norm_1d(np.ones(2048), 1.0, grid=np.linspace(0, 1, 2048))


def test_sobolev_norm_matches_rkhs_norm():
    """Sobolev quadrature and kernel algebra agree on a finite span."""
    g = 2.5
    f = RkhsElement(KernelSpec.exp_l1(g), [[0.2], [0.5], [0.9]], [1.0, -0.4, 0.7])
    t = np.linspace(0, 1, 40_001)
    vals = f(t[:, None])
    # one-sided derivatives; the kinks sit on grid nodes, where the trapezoid
    # rule needs the mean of the two one-sided squared values
    left = sum(c * g * np.where(t <= x[0], 1.0, -1.0) * np.exp(-g * np.abs(t - x[0]))
               for x, c in zip(f.centers, f.coeffs))
    right = sum(c * g * np.where(t < x[0], 1.0, -1.0) * np.exp(-g * np.abs(t - x[0]))
                for x, c in zip(f.centers, f.coeffs))
    deriv = np.sqrt(0.5 * (left ** 2 + right ** 2))
    assert sobolev_norm_1d(vals, g, derivative=deriv) == pytest.approx(rkhs_norm(f) ** 2,
                                                                      rel=1e-8)
