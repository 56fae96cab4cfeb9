import math

import numpy as np
import pytest
from scipy import special

from app.exceptions import ModelDomainError, QuadratureError
from app.models.channel import CorrelationProfile
from app.models.params import FluidAntennaGeometry, ModelOptions, NetworkParams, QuadratureSpec
from app.models.results import TrialConfig
from app.services.channel_estimation import build_pilot_budget
from app.services.channel_model import correlation_profile, rice_params
from app.services.monte_carlo import empirical_outage
from app.services.performance_analysis import (
    _per_port_cdf,
    average_sum_rate,
    conditional_outage_exact,
    conditional_outage_mean_approx,
    joint_estimated_cdf,
    link_state,
    outage,
    rate_integral,
    sum_rate_with_error,
)

RHO = 50.0
IDEAL = ModelOptions(csi_mode="perfect", perfect_li=True)


@pytest.fixture
def single_port():
    return FluidAntennaGeometry(N=1)


def test_joint_cdf_vanishes_at_zero_threshold():
    profile = CorrelationProfile(mu=np.array([0.0, 0.5, 0.2]))
    assert joint_estimated_cdf([0.0, 1.0, 1.0], RHO, [1.0, 0.75, 0.96], profile) == 0.0
    with pytest.raises(ModelDomainError):
        joint_estimated_cdf([-1.0, 1.0, 1.0], RHO, [1.0, 0.75, 0.96], profile)
    with pytest.raises(ModelDomainError):
        joint_estimated_cdf([1.0, 1.0], RHO, [1.0, 0.75, 0.96], profile)


def test_joint_cdf_of_one_port_is_rayleigh():
    profile = CorrelationProfile(mu=np.zeros(1))
    assert joint_estimated_cdf([0.8], RHO, [2.0], profile) == pytest.approx(-math.expm1(-0.64 / 2.0))


def test_joint_cdf_factorizes_for_uncorrelated_ports():
    profile = CorrelationProfile(mu=np.zeros(3))
    taus = np.array([0.9, 1.1, 0.5])
    st2 = np.array([1.0, 0.8, 1.3])
    expected = np.prod(-np.expm1(-taus ** 2 / st2))
    assert joint_estimated_cdf(taus, RHO, st2, profile) == pytest.approx(expected, rel=1e-5)


def test_joint_cdf_grows_with_correlation():
    taus = np.array([0.7, 0.7])
    st2 = np.array([1.0, 1.0])
    weak = joint_estimated_cdf(taus, RHO, st2, CorrelationProfile(mu=np.array([0.0, 0.1])))
    strong = joint_estimated_cdf(taus, RHO, st2, CorrelationProfile(mu=np.array([0.0, 0.9])))
    assert strong > weak


def test_single_port_mean_outage_is_rayleigh(params, single_port):
    budget = build_pilot_budget(params, single_port)
    state = link_state("DL", RHO, params, single_port, budget, IDEAL)
    assert state.floor[0] == pytest.approx(params.N0)
    assert np.all(state.li_coeff == 0)
    theta = float(state.signal[0] / (state.mean[0] + state.floor[0]))
    result = conditional_outage_mean_approx("DL", theta, RHO, params, single_port, budget, options=IDEAL, state=state)
    assert result.value == pytest.approx(1.0 - math.exp(-1.0), rel=1e-9)
    assert result.engine == "mean_approx"


def test_single_port_exact_outage_matches_gamma_laplace_transform(params, single_port):
    budget = build_pilot_budget(params, single_port)
    state = link_state("DL", RHO, params, single_port, budget, IDEAL)
    theta = float(state.signal[0] / (state.mean[0] + state.floor[0]))
    s = theta / state.signal[0]
    mean, var = state.mean[0], state.variance[0]
    shape, scale = mean ** 2 / var, var / mean
    expected = 1.0 - math.exp(-s * state.floor[0]) * (1.0 + s * scale) ** -shape
    result = conditional_outage_exact("DL", theta, RHO, params, single_port, budget, options=IDEAL, state=state)
    assert result.value == pytest.approx(expected, abs=1e-2)
    assert result.engine == "exact_gamma"


def test_exact_engine_tends_to_mean_approx_as_variance_vanishes(params, fa, budget, fast_spec):
    state = link_state("UL", RHO, params, fa, budget, variance_scale=1e-6)
    theta = float(state.signal[0] / (state.mean[0] + state.floor[0]))
    exact = conditional_outage_exact("UL", theta, RHO, params, fa, budget, fast_spec, state=state)
    mean = conditional_outage_mean_approx("UL", theta, RHO, params, fa, budget, fast_spec, state=state)
    assert exact.value == pytest.approx(mean.value, abs=5e-3)


def test_perfect_li_never_raises_outage(params, fa, budget, fast_spec):
    with_li = link_state("DL", RHO, params, fa, budget)
    without_li = link_state("DL", RHO, params, fa, budget, ModelOptions(perfect_li=True))
    theta = float(with_li.signal[0] / (with_li.mean[0] + with_li.floor[0]))
    residual = conditional_outage_mean_approx("DL", theta, RHO, params, fa, budget, fast_spec, state=with_li)
    cancelled = conditional_outage_mean_approx(
        "DL", theta, RHO, params, fa, budget, fast_spec, ModelOptions(perfect_li=True), state=without_li
    )
    assert cancelled.value <= residual.value + fast_spec.nesting_tol


def test_conditional_outage_needs_positive_inputs(params, fa, budget):
    with pytest.raises(ModelDomainError):
        conditional_outage_mean_approx("DL", 0.0, RHO, params, fa, budget)
    with pytest.raises(ModelDomainError):
        link_state("DL", 0.0, params, fa, budget)


def test_outage_is_a_probability_and_grows_with_threshold(params, fast_spec):
    fa = FluidAntennaGeometry(N=2)
    budget = build_pilot_budget(params, fa)
    cache = {}
    low = outage("UL", 1e-3, params, fa, budget, fast_spec, engine="mean", cache=cache)
    high = outage("UL", 1.0, params, fa, budget, fast_spec, engine="mean", cache=cache)
    assert 0.0 <= low.value <= high.value <= 1.0
    assert low.coverage == pytest.approx(1.0 - low.value)
    assert cache


def test_rate_integral_against_exponential_integral():
    expected = math.exp(0.1) * special.exp1(0.1)
    fine = QuadratureSpec(theta_step_db=0.5)
    value, error = rate_integral(lambda theta: math.exp(-theta / 10.0), fine, coverage_at_zero=1.0)
    assert value == pytest.approx(expected, rel=1e-3)
    coarse, _ = rate_integral(lambda theta: math.exp(-theta / 10.0), coverage_at_zero=1.0)
    assert coarse == pytest.approx(expected, rel=1e-2)
    assert error >= 0


def test_rate_integral_stops_at_the_grid_cap():
    with pytest.raises(QuadratureError):
        rate_integral(lambda theta: 1.0)


def test_single_port_sum_rate(params, single_port, fast_spec):
    budget = build_pilot_budget(params, single_port)
    rate, error = sum_rate_with_error(params, single_port, budget, fast_spec, IDEAL, engine="mean")
    assert math.isfinite(rate) and rate > 0
    assert error >= 0
    assert average_sum_rate(params, single_port, budget, fast_spec, IDEAL, engine="mean") == pytest.approx(rate)


def test_per_port_cdf_survives_thresholds_deep_in_the_tail():
    rice = rice_params(correlation_profile(FluidAntennaGeometry(N=2)), 1.0, np.zeros(2), "orthogonal")
    thresholds = np.empty((1, 2, 2))
    # 1 - e^{-60} and 1 - e^{-80} are both 1.0 in double precision
    thresholds[0, 0] = np.array([60.0, 80.0]) * rice.sigma_tilde2[0]
    thresholds[0, 1] = 80.0 * rice.sigma_tilde2[1]
    value = _per_port_cdf(rice, thresholds, np.array([0.5, 0.5]), 8)
    assert np.all(np.isfinite(value))
    assert value[0] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("direction", ["DL", "UL"])
def test_exact_outage_at_default_parameters(direction, fast_spec):
    params = NetworkParams()
    fa = FluidAntennaGeometry(N=2)
    result = outage(direction, params.theta, params, fa, build_pilot_budget(params, fa), fast_spec, engine="exact")
    assert math.isfinite(result.value)
    assert 0.0 <= result.value <= 1.0


def test_exact_engine_agrees_with_simulation(params, fa, budget, fast_spec):
    # both engines draw the estimate from the same law and share one interference draw per block
    options = ModelOptions(interference_coupling="common", ce_convention="orthogonal", sim_ce_convention="orthogonal")
    cfg = TrialConfig(params=params, fa=fa, budget=budget, n_trials=4000, base_seed=11, options=options)
    p_dl, p_ul, stderr = empirical_outage(cfg)
    cache = {}
    exact_dl = outage("DL", params.theta, params, fa, budget, fast_spec, options, engine="exact", cache=cache)
    exact_ul = outage("UL", params.theta, params, fa, budget, fast_spec, options, engine="exact", cache=cache)
    tolerance = max(0.04, 4 * stderr)
    assert exact_dl.value == pytest.approx(p_dl, abs=tolerance)
    assert exact_ul.value == pytest.approx(p_ul, abs=tolerance)
