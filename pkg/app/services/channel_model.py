"""Spatially correlated port channels, LMMSE estimates and residual loop-interference draws."""
import logging
import math
from typing import Literal, Optional, Tuple, Union

import numpy as np

from app.exceptions import ModelDomainError
from app.models.channel import ChannelDraw, CorrelationProfile, RiceParams
from app.models.params import FluidAntennaGeometry, NetworkParams
from app.utils.special_functions import bessel_j0

logger = logging.getLogger(__name__)

Convention = Literal["orthogonal", "inflated"]

# Floor for effective variances that vanish when two ports are fully correlated.
MIN_SCATTER = 1e-12


def correlation_profile(fa: FluidAntennaGeometry) -> CorrelationProfile:
    """μ_1 = 0 and μ_i = J0(2π(i - 1)κ / (N - 1)) for the other ports."""
    if fa.N == 1:
        return CorrelationProfile(mu=np.zeros(1))
    i = np.arange(1, fa.N + 1)
    mu = bessel_j0(2.0 * math.pi * (i - 1) * fa.kappa / (fa.N - 1))
    mu[0] = 0.0
    return CorrelationProfile(mu=mu)


def _complex_normal(rng: np.random.Generator, shape, variance: Union[float, np.ndarray] = 1.0) -> np.ndarray:
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _correlated_unit(profile: CorrelationProfile, rng: np.random.Generator, size: Optional[int]) -> np.ndarray:
    """
    Unit-variance port vector built on the reference port's components:
    z_1 = w_1 and z_i = sqrt(1 - μ_i²)·w_i + μ_i·w_1.
    """
    shape = (profile.n_ports,) if size is None else (size, profile.n_ports)
    w = _complex_normal(rng, shape)
    mu = profile.mu
    reference = w[..., :1]
    z = np.sqrt(np.clip(1.0 - mu ** 2, 0.0, None)) * w + mu * reference
    z[..., 0] = w[..., 0]
    return z


def draw_true_channels(
    profile: CorrelationProfile,
    sigma2: float,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> np.ndarray:
    """True complex channels of all ports, each CN(0, σ²), correlated through port 1."""
    return math.sqrt(sigma2) * _correlated_unit(profile, rng, size)


def draw_estimated_channels(
    g: np.ndarray,
    sigma_e2: np.ndarray,
    rng: np.random.Generator,
    sigma2: float = 1.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split true channels into LMMSE estimate and error, g = ĝ + e.

    Per port, ĝ | g = k·g + CN(0, k·σ²_e) with k = 1 - σ²_e/σ², which makes
    ĝ ~ CN(0, σ² - σ²_e) and e ~ CN(0, σ²_e) independent of ĝ.
    """
    sigma_e2 = np.asarray(sigma_e2, dtype=float)
    if np.any(sigma_e2 < 0) or np.any(sigma_e2 > sigma2):
        raise ModelDomainError(f"error variances must lie in [0, {sigma2}]")
    k = 1.0 - sigma_e2 / sigma2
    g_hat = k * g + _complex_normal(rng, np.shape(g), k * sigma_e2)
    return g_hat, g - g_hat


def rice_params(
    profile: CorrelationProfile,
    sigma2: float,
    sigma_e2: np.ndarray,
    convention: Convention = "orthogonal",
) -> RiceParams:
    """
    Conditional law of |ĝ_j| given |ĝ_1| under the chosen estimate convention.

    inflated:   σ̃_1² = σ² + σ²_e1, σ̃_j² = σ²(1 - μ_j²) + σ²_ej, line μ_j
    orthogonal: c_i = sqrt(1 - σ²_ei/σ²), σ̃_1² = σ² - σ²_e1,
                σ̃_j² = (σ² - σ²_ej)(1 - μ_j²), line μ_j·c_j/c_1
    """
    mu = profile.mu
    sigma_e2 = np.asarray(sigma_e2, dtype=float)
    if convention == "inflated":
        sigma_tilde2 = sigma2 * (1.0 - mu ** 2) + sigma_e2
        line = mu.copy()
    elif convention == "orthogonal":
        c = np.sqrt(np.clip(1.0 - sigma_e2 / sigma2, 0.0, 1.0))
        sigma_tilde2 = sigma2 * c ** 2 * (1.0 - mu ** 2)
        line = mu * c / c[0] if c[0] > 0 else np.zeros_like(mu)
    else:
        raise ModelDomainError(f"unknown estimate convention {convention!r}")
    sigma_tilde2 = np.maximum(sigma_tilde2, MIN_SCATTER * sigma2)
    line[0] = 0.0
    return RiceParams(line_coeffs=line, sigma_tilde2=sigma_tilde2)


def draw_estimated_block(
    profile: CorrelationProfile,
    sigma2: float,
    sigma_e2: np.ndarray,
    rng: np.random.Generator,
    convention: Convention = "orthogonal",
    size: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Draw (g, ĝ, e) for one block starting from the estimate.

    orthogonal: ĝ_i = c_i·z_i with z the correlated unit vector; the true
    channel keeps variance σ². inflated: ĝ_1 ~ CN(0, σ̃_1²) and
    ĝ_j = μ_j ĝ_1 + CN(0, σ̃_j²), realizing the inflated law exactly.
    In both, e ~ CN(0, σ²_e) independent and g = ĝ + e. With size set every
    array gains a leading axis of that length.
    """
    sigma_e2 = np.asarray(sigma_e2, dtype=float)
    if np.any(sigma_e2 < 0) or np.any(sigma_e2 > sigma2):
        raise ModelDomainError(f"error variances must lie in [0, {sigma2}]")
    shape = (profile.n_ports,) if size is None else (size, profile.n_ports)
    if convention == "orthogonal":
        c = np.sqrt(1.0 - sigma_e2 / sigma2)
        g_hat = math.sqrt(sigma2) * c * _correlated_unit(profile, rng, size)
    else:
        law = rice_params(profile, sigma2, sigma_e2, "inflated")
        g_hat = _complex_normal(rng, shape, law.sigma_tilde2)
        g_hat[..., 1:] += profile.mu[1:] * g_hat[..., :1]
    e = _complex_normal(rng, shape, sigma_e2)
    return g_hat + e, g_hat, e


def draw_residual_li(
    params: NetworkParams,
    sigma2_li: float,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> Union[float, np.ndarray]:
    """Residual LI power gain ~ Gamma(shape μ, scale σ²_LI/μ), mean σ²_LI, with μ = params.mu_nakagami."""
    mu_nakagami = params.mu_nakagami
    if not 0 <= sigma2_li <= 1:
        raise ModelDomainError(f"LI error variance must lie in [0, 1], got {sigma2_li}")
    if sigma2_li == 0:
        return 0.0 if size is None else np.zeros(size)
    return rng.gamma(mu_nakagami, sigma2_li / mu_nakagami, size)


def draw_channel_block(
    profile: CorrelationProfile,
    sigma2: float,
    sigma_e2: np.ndarray,
    sigma2_li_ue: float,
    sigma2_li_bs: float,
    params: NetworkParams,
    rng: np.random.Generator,
    convention: Convention = "orthogonal",
) -> ChannelDraw:
    g, g_hat, e = draw_estimated_block(profile, sigma2, sigma_e2, rng, convention)
    return ChannelDraw(
        g=g,
        g_hat=g_hat,
        e=e,
        h_LI_ue=float(draw_residual_li(params, sigma2_li_ue, rng)),
        h_LI_bs=float(draw_residual_li(params, sigma2_li_bs, rng)),
    )


def select_port(g_hat: np.ndarray) -> Union[int, np.ndarray]:
    """1-based index of the strongest estimated port; ties go to the lowest index."""
    amplitudes = np.abs(np.asarray(g_hat))
    if amplitudes.shape[-1] == 0:
        raise ModelDomainError("cannot select a port from an empty vector")
    choice = np.argmax(amplitudes, axis=-1) + 1
    return int(choice) if np.ndim(choice) == 0 else choice
