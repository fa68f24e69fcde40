"""Regression, rate algebra, holding times, survival fits."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chi_exit import (
    RegularGrid,
    build_sqrt_generator,
    chi_mean_holding_time,
    dominance_timescale,
    exit_path_direction,
    fit_survival_rate,
    flat_potential,
    gammas_to_rate,
    holding_probability,
    rate_from_eigenpair,
    regress,
    regress_generator_action,
    set_mean_holding_time,
)
from chi_exit.rates import RegressionResult

EPS1 = 0.007105040325860086
EPS2 = 0.0017351331593899657


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-2, max_value=2),
       st.floats(min_value=-1, max_value=1),
       st.integers(min_value=0, max_value=1000))
def test_regress_recovers_exact_line(g1, g2, salt):
    rng = np.random.default_rng(salt)
    xs = rng.uniform(0, 1, 25)
    xs[0], xs[1] = 0.0, 1.0  # guarantee spread
    ys = g1 * xs + g2
    # the LAD fit is an LP whose termination tolerance sits far above
    # the least-squares floor
    for norm, atol in (("least_squares", 1e-8), ("least_absolute", 1e-6)):
        fit = regress(xs, ys, norm)
        np.testing.assert_allclose([fit.gamma1, fit.gamma2], [g1, g2],
                                   rtol=0, atol=atol)
        assert fit.residual_norm < 25 * atol
        assert fit.n_points == 25


def test_lad_ignores_one_outlier():
    xs = np.linspace(0, 1, 12)
    ys = 0.8 * xs + 0.05
    ys[4] += 3.0
    lad = regress(xs, ys, "least_absolute")
    ls = regress(xs, ys, "least_squares")
    np.testing.assert_allclose([lad.gamma1, lad.gamma2], [0.8, 0.05],
                               rtol=0, atol=1e-8)
    assert abs(ls.gamma1 - 0.8) > 0.1


def test_regress_rejects_constant_predictor():
    with pytest.raises(ValueError, match="variance"):
        regress(np.full(10, 0.3), np.linspace(0, 1, 10))


def test_regress_norm_names():
    xs = np.linspace(0, 1, 5)
    with pytest.raises(ValueError):
        regress(xs, xs, "l-infinity")


def test_gammas_to_rate_published_chain():
    fit = RegressionResult(gamma1=0.8201, gamma2=0.0900, residual_norm=0.0,
                           n_points=2500, norm_kind="least_squares")
    report = gammas_to_rate(fit, 100.0, "route")
    alpha = -math.log(0.8201) / 100.0
    beta = alpha * 0.0900 / (0.8201 - 1.0)
    np.testing.assert_allclose(report.alpha, alpha, rtol=1e-14)
    np.testing.assert_allclose(report.beta, beta, rtol=1e-14)
    np.testing.assert_allclose(report.eps1, alpha + beta, rtol=1e-14)
    np.testing.assert_allclose(report.eps2, -beta, rtol=1e-14)
    np.testing.assert_allclose(report.alpha, 0.0020, rtol=0, atol=5e-5)
    np.testing.assert_allclose(report.beta, -0.0010, rtol=0, atol=5e-5)
    np.testing.assert_allclose(report.eps1, 0.0010, rtol=0, atol=5e-5)
    np.testing.assert_allclose(report.pi_chi,
                               0.0900 / (1.0 - 0.8201), rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=1e-4, max_value=0.05),
       st.floats(min_value=1e-5, max_value=0.04),
       st.floats(min_value=0.5, max_value=200.0))
def test_gamma_rate_round_trip(eps1, eps2, tau):
    # forward: rates -> gammas; back through the inversion, to 1e-12
    alpha, beta = eps1 + eps2, -eps2
    g1 = math.exp(-alpha * tau)
    g2 = beta * (g1 - 1.0) / alpha
    fit = RegressionResult(gamma1=g1, gamma2=g2, residual_norm=0.0,
                           n_points=10, norm_kind="least_squares")
    report = gammas_to_rate(fit, tau, "round-trip")
    np.testing.assert_allclose([report.eps1, report.eps2], [eps1, eps2],
                               rtol=1e-12)


def test_gammas_to_rate_no_decay():
    fit = RegressionResult(gamma1=1.02, gamma2=0.0, residual_norm=0.0,
                           n_points=10, norm_kind="least_squares")
    report = gammas_to_rate(fit, 1.0, "noisy")
    assert report.note == "no decay detected"
    assert not report.meaningful
    assert math.isnan(report.eps1)


def test_gammas_to_rate_noise_dominated():
    fit = RegressionResult(gamma1=-0.2, gamma2=0.0, residual_norm=0.0,
                           n_points=10, norm_kind="least_squares")
    with pytest.raises(ValueError, match="noise dominated"):
        gammas_to_rate(fit, 1.0, "noisy")
    with pytest.raises(ValueError):
        gammas_to_rate(RegressionResult(0.5, 0.1, 0.0, 10, "least_squares"),
                       0.0, "noisy")


def test_rate_from_eigenpair_frozen(report1):
    np.testing.assert_allclose(report1.eps1, EPS1, rtol=1e-9)
    np.testing.assert_allclose(report1.eps2, EPS2, rtol=1e-9)
    assert report1.meaningful
    np.testing.assert_allclose(report1.pi_chi, 0.19627817964037228,
                               rtol=1e-9)


def test_rate_from_eigenpair_validation():
    with pytest.raises(ValueError):
        rate_from_eigenpair(-0.01, 0.2, "bad")
    with pytest.raises(ValueError):
        rate_from_eigenpair(0.01, 1.2, "bad")


def test_meaningful_threshold():
    # meaningful iff eps2 < eps1, i.e. pi_chi < 1/2
    fast = rate_from_eigenpair(0.01, 0.3, "ok")
    slow = rate_from_eigenpair(0.01, 0.7, "not ok")
    assert fast.meaningful and not slow.meaningful


def test_holding_probability(report1):
    val = holding_probability(report1, 0.8, 10.0)
    np.testing.assert_allclose(val, 0.8 * math.exp(-report1.eps1 * 10.0),
                               rtol=1e-14)
    bad = rate_from_eigenpair(0.01, 0.9, "bad")
    with pytest.raises(ValueError, match="meaningful"):
        holding_probability(bad, 0.8, 10.0)


def test_chi_mean_holding_time(report1):
    np.testing.assert_allclose(chi_mean_holding_time(report1, 0.22),
                               0.22 / report1.eps1, rtol=1e-14)


def test_set_mean_holding_time_chain(flat_chain3):
    t = set_mean_holding_time(flat_chain3, np.array([False, True, False]))
    np.testing.assert_allclose(t, [0.0, 0.5, 0.0], rtol=0, atol=1e-14)


def test_set_mean_holding_time_validation(flat_chain3):
    with pytest.raises(ValueError):
        set_mean_holding_time(flat_chain3, np.zeros(3, dtype=bool))
    with pytest.raises(ValueError):
        set_mean_holding_time(flat_chain3, np.ones(3, dtype=bool))


def test_set_mean_holding_time_benchmark(gen50, chi1):
    mask = chi1.values > 0.22
    t = set_mean_holding_time(gen50, mask)
    assert np.all(t[~mask] == 0.0)
    assert np.all(t[mask] > 0.0)
    assert t.max() > 100.0


def test_regress_generator_action_identity(gen50, chi1):
    # for an eigen-affine membership the fit is exact
    report = regress_generator_action(gen50, chi1, "least_squares")
    np.testing.assert_allclose(report.alpha, chi1.meta["eps_bar"], rtol=1e-9)
    np.testing.assert_allclose(
        report.beta, -chi1.meta["eps_bar"] * chi1.meta["beta_bar"],
        rtol=1e-9)
    np.testing.assert_allclose(report.eps1, EPS1, rtol=1e-9)


def test_dominance_timescale():
    eps2 = 0.002
    np.testing.assert_allclose(dominance_timescale(0.5, eps2),
                               math.log(2) / (2 * 0.5 * eps2), rtol=1e-14)
    np.testing.assert_allclose(dominance_timescale(1 - 1e-9, eps2),
                               1.0 / eps2, rtol=1e-6)
    with pytest.raises(ValueError):
        dominance_timescale(1.0, eps2)
    with pytest.raises(ValueError):
        dominance_timescale(0.5, 0.0)


def test_fit_survival_rate_exact_quantiles():
    rate = 0.004
    n = 400
    u = (np.arange(n) + 0.5) / n
    times = -np.log(1 - u) / rate
    np.testing.assert_allclose(fit_survival_rate(times), rate, rtol=0.05)


def test_fit_survival_rate_with_censoring():
    rate = 0.01
    n = 500
    u = (np.arange(n) + 0.5) / n
    times = -np.log(1 - u) / rate
    horizon = 250.0
    censored = times >= horizon
    times = np.minimum(times, horizon)
    fitted = fit_survival_rate(times, censored)
    np.testing.assert_allclose(fitted, rate, rtol=0.05)


def test_fit_survival_rate_needs_exits():
    with pytest.raises(ValueError, match="censor"):
        fit_survival_rate(np.array([5.0, 5.0, 5.0]),
                          np.array([True, True, True]))


def test_exit_path_direction_unit_norm(chi1):
    d = exit_path_direction(chi1, np.array([0.52, 0.88]))
    np.testing.assert_allclose(np.linalg.norm(d), 1.0, rtol=1e-12)


def test_exit_path_descends(chi1):
    x = np.array([0.52, 0.88])
    h = 0.02
    values = [chi1(x)]
    for _ in range(40):
        x = x + h * exit_path_direction(chi1, x)
        values.append(chi1(x))
    assert values[-1] < 0.05 < 0.9 < values[0]
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


def test_exit_path_rejects_extremum(chi1):
    peak = chi1.grid.centers[int(np.argmax(chi1.values))]
    with pytest.raises(ValueError, match="critical point"):
        exit_path_direction(chi1, peak)


def test_exit_path_plain_array():
    pot = flat_potential()
    grid = RegularGrid(5, 5, pot.domain)
    gen = build_sqrt_generator(pot, grid, 1.0)
    field = grid.centers[:, 0].copy()
    d = exit_path_direction(field, np.array([0.5, 0.5]), grid=grid)
    np.testing.assert_allclose(d, [-1.0, 0.0], rtol=0, atol=1e-12)
