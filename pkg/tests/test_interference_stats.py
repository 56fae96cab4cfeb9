import math

import numpy as np
import pytest
from testfixtures import LogCapture

import app.services.interference_stats as stats_module
from app.database.variance_store import get_variance_store
from app.exceptions import ModelDomainError
from app.models.params import NetworkParams
from app.services.interference_stats import (
    campbell_mean,
    gamma_match,
    interference_variance,
    mean_dl_bs,
    mean_dl_bs_ports,
    mean_dl_ue,
    mean_ul_bs,
    port_moments,
    residual_li_power,
)
from app.services.network_geometry import port_distance, port_distances

RHO = 50.0


def test_bs_to_ue_closed_mean_matches_campbell(params, fa):
    for i in (1, 2):
        closed = mean_dl_bs(params, RHO, i, fa)
        assert campbell_mean("f1_bs_to_ue", params, RHO, i, fa) == pytest.approx(closed, rel=1e-6)
    r = port_distance(RHO, 1, fa)
    expected = 2.0 * math.pi * params.lambda_b * params.P * r ** -2 / 2.0
    assert mean_dl_bs(params, RHO, 1, fa) == pytest.approx(expected)


def test_port_means_match_single_port_means(params, fa):
    means = mean_dl_bs_ports(params, RHO, fa)
    expected = [mean_dl_bs(params, RHO, i, fa) for i in range(1, fa.N + 1)]
    np.testing.assert_allclose(means, expected)


def test_means_scale_linearly_with_bs_power(params, fa):
    doubled = NetworkParams(P=2.0)
    assert mean_dl_bs(doubled, RHO, 1, fa) == pytest.approx(2.0 * mean_dl_bs(params, RHO, 1, fa))
    assert mean_ul_bs(doubled, form="campbell") == pytest.approx(2.0 * mean_ul_bs(params, form="campbell"))


def test_bs_to_bs_campbell_form_is_the_integral(params):
    assert campbell_mean("f3_bs_to_bs", params) == pytest.approx(mean_ul_bs(params, form="campbell"), rel=1e-5)
    assert mean_ul_bs(params, RHO, "campbell") == mean_ul_bs(params, 5.0, "campbell")


def test_exponent_must_exceed_two(fa):
    params = NetworkParams.model_construct(**{**NetworkParams().model_dump(), "a": 2.0})
    with pytest.raises(ModelDomainError):
        mean_dl_bs(params, RHO, 1, fa)


def test_negative_ue_to_ue_closed_form_is_clamped(params, monkeypatch):
    monkeypatch.setattr(stats_module, "exp_integral_en", lambda n, x: 10.0)
    with LogCapture() as logs:
        value = mean_dl_ue(params)
    assert value == 0.0
    assert any(record.levelname == "WARNING" for record in logs.records)


def test_gamma_match():
    shape, scale = gamma_match(2.0, 8.0)
    assert shape == pytest.approx(0.5)
    assert scale == pytest.approx(4.0)
    assert shape * scale == pytest.approx(2.0)
    with pytest.raises(ModelDomainError):
        gamma_match(0.0, 1.0)
    with pytest.raises(ModelDomainError):
        gamma_match(1.0, -1.0)


def test_residual_li_power(params, fa):
    assert residual_li_power("UL", params, RHO, 1, fa, 0.5) == pytest.approx(0.5 * params.P)
    assert residual_li_power("DL", params, RHO, 1, fa, 0.0) == 0.0
    with pytest.raises(ModelDomainError):
        residual_li_power("DL", params, RHO, 1, fa, -1.0)


def test_bs_to_ue_variance_under_rayleigh_fading(params, fa):
    variance, error = interference_variance("f1_bs_to_ue", params, RHO, 1, fa)
    r = port_distance(RHO, 1, fa)
    a = params.a
    # E[h²] = 2 for unit-mean exponential fading.
    expected = 2.0 * 2.0 * math.pi * params.lambda_b * params.P ** 2 * r ** (2 - 2 * a) / (2 * a - 2)
    assert variance == pytest.approx(expected, rel=1e-5)
    assert error >= 0


def test_variances_are_cached_except_bs_to_ue(params, fa):
    store = get_variance_store()
    first = interference_variance("f3_bs_to_bs", params)
    assert len(store) == 1
    assert interference_variance("f3_bs_to_bs", params) == first
    assert store.hits == 1
    with open(store.path, encoding="utf-8") as handle:
        assert len(handle.readlines()) == 2

    for rho in (10.0, 25.0, RHO, 80.0):
        interference_variance("f1_bs_to_ue", params, rho, 1, fa)
        port_moments("DL", params, rho, fa)
    # only the ρ-free UE-to-UE variance joins the BS-to-BS one
    assert len(store) == 2
    with open(store.path, encoding="utf-8") as handle:
        assert len(handle.readlines()) == 3


def test_uncached_variance_skips_the_store(params):
    interference_variance("f3_bs_to_bs", params, use_cache=False)
    assert len(get_variance_store()) == 0


def test_downlink_port_moments(params, fa):
    means, variances = port_moments("DL", params, RHO, fa)
    assert means.shape == (fa.N,)
    assert variances.shape == (fa.N,)
    np.testing.assert_allclose(means, means[::-1])
    np.testing.assert_allclose(variances, variances[::-1])
    r = port_distances(RHO, fa)
    # ports nearer the serving BS see more BS interference
    assert np.all(np.diff(means) * np.diff(r) <= 0)
    assert np.all(variances > 0)
