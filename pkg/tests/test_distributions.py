"""Distribution primitives: closed forms, sampling, KS, and fitting edges.

Expensive 50k-sample fit recovery lives in the acceptance suite; this file
covers the hand-derivable identities and the error contract.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from cyclesim.distributions import (
    BURR_FAMILY,
    DEFAULT_AMAX_BURR,
    DEFAULT_VMAX_JSU,
    JSU_FAMILY,
    BurrXIIParams,
    JohnsonSUParams,
    burr_cdf,
    burr_pdf,
    burr_quantile,
    fit_mle,
    jsu_cdf,
    jsu_pdf,
    jsu_quantile,
    ks_statistic,
    sample,
)
from cyclesim.errors import (
    InsufficientDataError,
    NonPositiveSampleError,
    QuantileDomainError,
    ZeroVarianceError,
)

UNIT_BURR = BurrXIIParams(1.0, 1.0, 1.0)
UNIT_JSU = JohnsonSUParams(0.0, 1.0, 0.0, 1.0)


# --- Burr XII ----------------------------------------------------------------

def test_burr_pdf_zero_below_support():
    assert burr_pdf(-1.0, UNIT_BURR) == 0.0
    assert burr_pdf(-1e-9, BurrXIIParams(2.0, 3.0, 1.5)) == 0.0


def test_burr_pdf_at_zero_unit_params():
    # f(0) = (c k / s) (0)^(c-1) (1+0)^(-k-1) = 1 for c = k = s = 1
    assert burr_pdf(0.0, UNIT_BURR) == pytest.approx(1.0)


def test_burr_pdf_integrates_to_one():
    p = BurrXIIParams(2.0, 3.0, 1.0)
    total, err = quad(lambda x: burr_pdf(x, p), 0.0, 1e3)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_burr_cdf_unit_params_median_at_one():
    # F(1) = 1 - 1/(1+1) = 0.5
    assert burr_cdf(1.0, UNIT_BURR) == pytest.approx(0.5)
    assert burr_cdf(0.0, UNIT_BURR) == 0.0
    assert burr_cdf(0.0, BurrXIIParams(4.0, 0.5, 2.0)) == 0.0


def test_burr_quantile_inverts_median():
    assert burr_quantile(0.5, UNIT_BURR) == pytest.approx(1.0)


def test_burr_quantile_domain():
    for u in (0.0, 1.0, -0.2, 1.3):
        with pytest.raises(QuantileDomainError):
            burr_quantile(u, UNIT_BURR)


# --- Johnson S_U -------------------------------------------------------------

def test_jsu_standard_symmetry():
    assert jsu_cdf(0.0, UNIT_JSU) == pytest.approx(0.5)
    assert jsu_quantile(0.5, UNIT_JSU) == pytest.approx(0.0, abs=1e-12)


def test_jsu_pdf_integrates_to_one():
    p = JohnsonSUParams(0.5, 1.2, 6.0, 2.0)
    total, err = quad(lambda x: jsu_pdf(x, p), -np.inf, np.inf)
    assert total == pytest.approx(1.0, abs=1e-6)
    # over a finite [-50, 50] window the integral must match the CDF mass
    # exactly; the tail outside is ~7.7e-6 and not negligible at 1e-6
    window, err = quad(lambda x: jsu_pdf(x, p), -50.0, 50.0)
    assert window == pytest.approx(jsu_cdf(50.0, p) - jsu_cdf(-50.0, p), abs=1e-9)


def test_jsu_quantile_domain():
    with pytest.raises(QuantileDomainError):
        jsu_quantile(1.0, UNIT_JSU)


@settings(max_examples=60)
@given(
    c=st.floats(0.7, 8.0),
    k=st.floats(0.7, 8.0),
    scale=st.floats(0.2, 5.0),
    u=st.floats(1e-6, 1.0 - 1e-6),
)
def test_burr_cdf_quantile_identity(c, k, scale, u):
    p = BurrXIIParams(c, k, scale)
    assert burr_cdf(burr_quantile(u, p), p) == pytest.approx(u, abs=1e-10)


@settings(max_examples=60)
@given(
    gamma=st.floats(-3.0, 3.0),
    delta=st.floats(0.3, 5.0),
    xi=st.floats(-10.0, 10.0),
    scale=st.floats(0.2, 5.0),
    u=st.floats(1e-6, 1.0 - 1e-6),
)
def test_jsu_cdf_quantile_identity(gamma, delta, xi, scale, u):
    p = JohnsonSUParams(gamma, delta, xi, scale)
    assert jsu_cdf(jsu_quantile(u, p), p) == pytest.approx(u, abs=1e-10)


def test_cdfs_monotone():
    xs = np.linspace(-5.0, 20.0, 400)
    assert np.all(np.diff(burr_cdf(xs, BurrXIIParams(2.5, 1.5, 0.7))) >= 0)
    assert np.all(np.diff(jsu_cdf(xs, DEFAULT_VMAX_JSU)) >= 0)


# --- sampling ----------------------------------------------------------------

class _ForcedUniform:
    """Stand-in generator returning a fixed uniform stream."""

    def __init__(self, value):
        self.value = value

    def random(self, n):
        return np.full(n, self.value)


def test_sample_forced_median_hits_quantile():
    out = sample(UNIT_BURR, _ForcedUniform(0.5), 1)
    assert out[0] == pytest.approx(1.0)


def test_sample_is_inverse_transform():
    p = DEFAULT_VMAX_JSU
    draws = sample(p, np.random.Generator(np.random.PCG64(5)), 1000)
    u = np.random.Generator(np.random.PCG64(5)).random(1000)
    assert np.allclose(draws, jsu_quantile(np.clip(u, 2**-53, 1 - 2**-53), p))


def test_sample_deterministic_under_seed():
    a = sample(DEFAULT_AMAX_BURR, np.random.Generator(np.random.PCG64(9)), 500)
    b = sample(DEFAULT_AMAX_BURR, np.random.Generator(np.random.PCG64(9)), 500)
    assert np.array_equal(a, b)


def test_sample_ks_against_own_cdf():
    rng = np.random.Generator(np.random.PCG64(17))
    draws = sample(UNIT_JSU, rng, 100_000)
    assert ks_statistic(draws, lambda x: jsu_cdf(x, UNIT_JSU)) < 0.01


# --- KS statistic ------------------------------------------------------------

def test_ks_samples_at_centered_quantiles():
    n = 40
    u = (np.arange(1, n + 1) - 0.5) / n
    x = burr_quantile(u, UNIT_BURR)
    assert ks_statistic(x, lambda v: burr_cdf(v, UNIT_BURR)) == pytest.approx(0.5 / n)


def test_ks_single_sample_at_median():
    x = [burr_quantile(0.5, UNIT_BURR)]
    assert ks_statistic(x, lambda v: burr_cdf(v, UNIT_BURR)) == pytest.approx(0.5)


def test_ks_wrong_family_is_worse():
    rng = np.random.Generator(np.random.PCG64(3))
    draws = sample(BurrXIIParams(3.0, 2.0, 1.5), rng, 4000)
    own = fit_mle(draws, BURR_FAMILY)
    other = fit_mle(draws, JSU_FAMILY)
    assert other.ks_statistic > own.ks_statistic


# --- fitting contract ---------------------------------------------------------

def test_fit_insufficient_data():
    with pytest.raises(InsufficientDataError):
        fit_mle(np.ones(10) + np.arange(10), BURR_FAMILY)


def test_fit_burr_rejects_non_positive():
    x = np.concatenate([np.full(60, 2.0) + np.arange(60) * 0.01, [-1.0]])
    with pytest.raises(NonPositiveSampleError):
        fit_mle(x, BURR_FAMILY)


def test_fit_degenerate_sample_never_fits():
    with pytest.raises(ZeroVarianceError):
        fit_mle(np.full(100, 3.3), BURR_FAMILY)
    with pytest.raises(ZeroVarianceError):
        fit_mle(np.full(100, 3.3), JSU_FAMILY)


def test_fit_unknown_family():
    with pytest.raises(ValueError):
        fit_mle(np.arange(1.0, 101.0), "weibull")


def test_fit_loglik_never_below_init():
    rng = np.random.Generator(np.random.PCG64(11))
    truth = BurrXIIParams(2.0, 1.5, 1.0)
    x = sample(truth, rng, 2000)
    init = BurrXIIParams(1.0, 1.0, float(np.median(x)))
    res = fit_mle(x, BURR_FAMILY, init=init)

    def loglik(p):
        return float(np.sum(np.log(burr_pdf(x, p))))

    assert res.log_likelihood >= loglik(init) - 1e-9
    assert res.converged


# --- shipped defaults ---------------------------------------------------------

def test_default_burr_tail_matches_reference_fraction():
    # 7.7 % of maneuvers at or above the 1.2 m/s^2 scalar default
    assert 1.0 - burr_cdf(1.2, DEFAULT_AMAX_BURR) == pytest.approx(0.077, abs=1e-6)


def test_default_jsu_tail_matches_reference_fraction():
    # 86.7 % of rides faster than the 5.56 m/s scalar default
    assert 1.0 - jsu_cdf(5.56, DEFAULT_VMAX_JSU) == pytest.approx(0.867, abs=1e-6)
