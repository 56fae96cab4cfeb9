import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from app.exceptions import ModelDomainError
from app.utils.special_functions import (
    bessel_i0,
    bessel_i0e,
    bessel_j0,
    exp_integral_en,
    lower_incomplete_gamma,
    marcum_q1,
    upper_incomplete_gamma,
)


def test_bessel_j0_values():
    assert bessel_j0(0.0) == pytest.approx(1.0, abs=1e-15)
    assert bessel_j0(2.404825557695773) == pytest.approx(0.0, abs=1e-12)
    assert bessel_j0(-5.0) == bessel_j0(5.0)


def test_bessel_j0_keeps_array_shape():
    x = np.linspace(0.0, 10.0, 7)
    out = bessel_j0(x)
    assert isinstance(out, np.ndarray)
    np.testing.assert_allclose(out, special.j0(x), rtol=1e-14)


def test_bessel_i0_and_scaled_form():
    assert bessel_i0(0.0) == 1.0
    assert bessel_i0(1.0) == pytest.approx(1.2660658777520082, rel=1e-14)
    assert bessel_i0e(700.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi * 700.0), rel=1e-3)
    assert math.isfinite(bessel_i0e(1e6))


def test_bessel_i0_rejects_negative_argument():
    with pytest.raises(ModelDomainError):
        bessel_i0(-1.0)
    with pytest.raises(ModelDomainError):
        bessel_i0e(np.array([1.0, -0.5]))


def test_marcum_q1_boundaries():
    assert marcum_q1(2.0, 0.0) == 1.0
    assert marcum_q1(0.0, 1.3) == pytest.approx(math.exp(-1.3 ** 2 / 2.0), rel=1e-14)
    assert marcum_q1(0.0, 0.0) == 1.0


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (1.0, 2.0), (3.0, 1.0), (4.0, 4.0), (5.0, 5.5), (9.0, 8.0), (20.0, 19.0)])
def test_marcum_q1_matches_noncentral_chi_square(a, b):
    expected = stats.ncx2.sf(b ** 2, 2, a ** 2)
    assert marcum_q1(a, b) == pytest.approx(expected, rel=1e-8, abs=1e-13)


def test_marcum_q1_broadcasts_and_stays_in_unit_interval():
    a = np.linspace(0.0, 10.0, 11)[:, None]
    b = np.linspace(0.0, 10.0, 6)[None, :]
    q = marcum_q1(a, b)
    assert q.shape == (11, 6)
    assert np.all((q >= 0.0) & (q <= 1.0))
    # decreasing in b, increasing in a
    assert np.all(np.diff(q, axis=1) <= 1e-12)
    assert np.all(np.diff(q, axis=0) >= -1e-12)


def test_marcum_q1_rejects_negative_and_nonfinite():
    with pytest.raises(ModelDomainError):
        marcum_q1(-1.0, 1.0)
    with pytest.raises(ModelDomainError):
        marcum_q1(1.0, float("nan"))


def test_upper_incomplete_gamma_identities():
    assert upper_incomplete_gamma(1.0, 2.5) == pytest.approx(math.exp(-2.5), rel=1e-12)
    assert upper_incomplete_gamma(0.5, 0.0) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert upper_incomplete_gamma(0.5, 1.2) == pytest.approx(math.sqrt(math.pi) * math.erfc(math.sqrt(1.2)), rel=1e-12)
    assert upper_incomplete_gamma(0.0, 1.0) == pytest.approx(0.21938393439552029, rel=1e-12)


@pytest.mark.parametrize("s,x", [(-0.5, 2.0), (-1.5, 0.7), (-2.0, 3.0)])
def test_upper_incomplete_gamma_negative_order(s, x):
    expected, _ = integrate.quad(lambda t: t ** (s - 1.0) * math.exp(-t), x, np.inf, epsabs=1e-14, epsrel=1e-12)
    assert upper_incomplete_gamma(s, x) == pytest.approx(expected, rel=1e-8)


def test_incomplete_gamma_domain_errors():
    with pytest.raises(ModelDomainError):
        upper_incomplete_gamma(-0.5, 0.0)
    with pytest.raises(ModelDomainError):
        upper_incomplete_gamma(1.0, -1.0)
    with pytest.raises(ModelDomainError):
        lower_incomplete_gamma(0.0, 1.0)


def test_lower_plus_upper_is_complete_gamma():
    s, x = 2.6, 1.9
    assert lower_incomplete_gamma(s, x) + upper_incomplete_gamma(s, x) == pytest.approx(math.gamma(s), rel=1e-12)


def test_exp_integral_en():
    assert exp_integral_en(1, 1.0) == pytest.approx(0.21938393439552029, rel=1e-12)
    assert exp_integral_en(0, 2.0) == pytest.approx(math.exp(-2.0) / 2.0, rel=1e-12)
    expected, _ = integrate.quad(lambda t: math.exp(-0.4 * t) * t ** -1.5, 1.0, np.inf, epsabs=1e-14, epsrel=1e-12)
    assert exp_integral_en(1.5, 0.4) == pytest.approx(expected, rel=1e-8)


def test_exp_integral_en_bound():
    for n in (0.5, 1, 2, 3.5):
        for x in (0.1, 1.0, 5.0):
            assert exp_integral_en(n, x) <= math.exp(-x) / x * (1.0 + 1e-12)


def test_exp_integral_en_needs_positive_argument():
    with pytest.raises(ModelDomainError):
        exp_integral_en(2, 0.0)
