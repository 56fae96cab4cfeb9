"""
Analytical engine: joint cdf of the estimated port amplitudes, conditional
and unconditional outage, and the average DL + UL sum rate.

The joint cdf is written as an integral over t = |ĝ_1|²/σ̃_1² with the
other ports Rice-distributed given port 1. After the substitution
y = 1 - e^{-t} every inner integral runs over a finite interval. The
interference is a gamma mixture evaluated at quantile nodes and the
residual LI gain adds one more mixture dimension.
"""
import logging
import math
from typing import Callable, Dict, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import integrate

from app.exceptions import ModelDomainError, QuadratureError
from app.models.channel import CorrelationProfile, RiceParams
from app.models.params import FluidAntennaGeometry, ModelOptions, NetworkParams, PilotBudget, QuadratureSpec
from app.models.results import OutageResult
from app.services.channel_estimation import (
    direct_ce_variances,
    effective_rate_fraction,
    li_ce_variance_bs,
    li_ce_variance_ue,
)
from app.services.channel_model import correlation_profile, rice_params
from app.services.interference_stats import port_moments
from app.services.network_geometry import port_distances, ue_tx_power
from app.utils.quadrature import adaptive_quad, gamma_mixture_nodes, legendre_unit
from app.utils.special_functions import marcum_q1

logger = logging.getLogger(__name__)

Direction = Literal["DL", "UL"]
AnalyticEngine = Literal["exact", "mean"]

MAX_REFINEMENTS = 3
# Extension step of the rate grid when coverage is still above the cutoff.
THETA_EXTENSION_DB = 10.0


class LinkState(BaseModel):
    """
    Everything the conditional outage needs at one serving distance.

    The SINR threshold of port j for interference x and unit-mean LI gain G is
    Θ_j = θ / signal_j · (x + floor_j + li_coeff_j · G).
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    direction: Direction
    rho: float
    rice: RiceParams
    signal: np.ndarray
    floor: np.ndarray
    li_coeff: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    mu_nakagami: float

    @property
    def n_ports(self) -> int:
        return int(self.signal.shape[0])


def link_state(
    direction: Direction,
    rho: float,
    params: NetworkParams,
    fa: FluidAntennaGeometry,
    budget: PilotBudget,
    options: ModelOptions = ModelOptions(),
    variance_scale: float = 1.0,
) -> LinkState:
    if not rho > 0:
        raise ModelDomainError(f"serving distance must be positive, got {rho}")
    if variance_scale < 0:
        raise ModelDomainError("variance_scale must be nonnegative")
    perfect = options.csi_mode == "perfect"
    r = port_distances(rho, fa)
    sigma_e2 = np.zeros(fa.N) if perfect else direct_ce_variances(params, rho, fa, budget)
    rice = rice_params(correlation_profile(fa), params.sigma2, sigma_e2, options.ce_convention)

    if direction == "DL":
        signal = params.P * r ** -params.a
        li_var = np.array([
            li_ce_variance_ue(params, rho, j, fa, budget, options.mean_form, allow_zero_pilots=perfect)
            for j in range(1, fa.N + 1)
        ])
        li_power = np.asarray(ue_tx_power(r, params))
    else:
        signal = np.asarray(ue_tx_power(r, params)) * r ** -params.a
        li_var = np.full(fa.N, li_ce_variance_bs(params, rho, budget, options.mean_form, allow_zero_pilots=perfect))
        li_power = np.full(fa.N, params.P)
    # Σ carries σ²_LI·I_LI with I_LI = P_LI·|h_LI|² and E|h_LI|² = σ²_LI.
    li_coeff = np.zeros(fa.N) if options.perfect_li else li_var ** 2 * li_power

    means, variances = port_moments(direction, params, rho, fa, options.mean_form)
    return LinkState(
        direction=direction,
        rho=rho,
        rice=rice,
        signal=signal,
        floor=signal * sigma_e2 + params.N0,
        li_coeff=li_coeff,
        mean=means,
        variance=variances * variance_scale,
        mu_nakagami=params.mu_nakagami,
    )


def _li_nodes(state: LinkState, options: ModelOptions, spec: QuadratureSpec) -> Tuple[np.ndarray, np.ndarray]:
    if options.li_mode == "mean" or not np.any(state.li_coeff > 0):
        return np.ones(1), np.ones(1)
    return gamma_mixture_nodes(1.0, 1.0 / state.mu_nakagami, spec.li_nodes)


def _thresholds(state: LinkState, theta: float, x: np.ndarray, li_gain: np.ndarray) -> np.ndarray:
    """Power thresholds Θ with shape (L, N, M) for interference nodes x of shape (N, M)."""
    inner = x[None] + state.floor[None, :, None] + state.li_coeff[None, :, None] * li_gain[:, None, None]
    return theta / state.signal[None, :, None] * inner


def _rice_coefficient(rice: RiceParams) -> np.ndarray:
    """a_j(t) = sqrt(2t) times this vector, for ports 2..N."""
    st2 = rice.sigma_tilde2
    return rice.line_coeffs[1:] * np.sqrt(st2[0] / st2[1:])


def _per_port_cdf(rice: RiceParams, thresholds: np.ndarray, weights: np.ndarray, n_t: int) -> np.ndarray:
    """
    Joint cdf averaged over independent per-port interference, one value per LI node.

    Port 1's nodes are sorted so the y-integral splits into panels between
    consecutive upper limits; a cumulative sum then gives the integral up to
    every node at the cost of one pass. Panel nodes are mapped back to t from
    the panel's own t-range, so they stay finite after 1 - e^{-T} rounds to 1.
    """
    st2 = rice.sigma_tilde2
    order = np.argsort(thresholds[:, 0, :], axis=-1)
    T = np.take_along_axis(thresholds[:, 0, :], order, axis=-1) / st2[0]
    outer_weights = weights[order]

    if rice.line_coeffs.shape[0] == 1:
        return (-np.expm1(-T) * outer_weights).sum(axis=-1)
    # On [T_lo, T_hi]: y = 1 - e^{-T_lo}(1 - f·u) with f = 1 - e^{-(T_hi - T_lo)}.
    t_lower = np.concatenate((np.zeros(T.shape[:-1] + (1,)), T[..., :-1]), axis=-1)
    fraction = -np.expm1(-(T - t_lower))
    width = np.exp(-t_lower) * fraction
    u, w = legendre_unit(n_t)
    t = t_lower[..., None] - np.log1p(-fraction[..., None] * u)
    wy = width[..., None] * w

    a = np.sqrt(2.0 * t)[:, None] * _rice_coefficient(rice)[None, :, None, None]
    b = np.sqrt(2.0 * thresholds[:, 1:, :] / st2[1:, None])
    q = marcum_q1(a[..., None], b[:, :, None, None, :])
    G = ((1.0 - q) * weights).sum(axis=-1)
    H = np.cumsum((G.prod(axis=1) * wy).sum(axis=-1), axis=-1)
    return (H * outer_weights).sum(axis=-1)


def _common_cdf(rice: RiceParams, thresholds: np.ndarray, n_t: int) -> np.ndarray:
    """Joint cdf at every threshold vector Θ[l, :, m], shape (L, M)."""
    st2 = rice.sigma_tilde2
    Y = -np.expm1(-thresholds[:, 0, :] / st2[0])
    if rice.line_coeffs.shape[0] == 1:
        return Y
    u, w = legendre_unit(n_t)
    y = Y[..., None] * u
    wy = Y[..., None] * w
    t = -np.log1p(-y)
    a = np.sqrt(2.0 * t)[:, None] * _rice_coefficient(rice)[None, :, None, None]
    b = np.sqrt(2.0 * thresholds[:, 1:, :] / st2[1:, None])
    q = marcum_q1(a, b[..., None])
    return ((1.0 - q).prod(axis=1) * wy).sum(axis=-1)


def _refine(evaluate: Callable[[int, int], float], spec: QuadratureSpec, what: str) -> Tuple[float, float]:
    """
    Run a fixed-rule evaluation at increasing resolution until two successive
    results agree within nesting_tol; the first comparison also halves the
    gamma nodes.
    """
    n_t = spec.t_nodes
    coarse = evaluate(max(spec.gamma_nodes // 2, 1), n_t)
    for _ in range(MAX_REFINEMENTS + 1):
        n_t *= 2
        fine = evaluate(spec.gamma_nodes, n_t)
        error = abs(fine - coarse)
        if error <= spec.nesting_tol:
            return fine, error
        coarse = fine
    logger.error(f"{what}: inner rules disagree by {error:.2e} after {MAX_REFINEMENTS} refinements")
    raise QuadratureError(f"{what} did not converge", error_estimate=error)


def _state_or_build(state, direction, rho, params, fa, budget, options, variance_scale) -> LinkState:
    if state is not None:
        return state
    return link_state(direction, rho, params, fa, budget, options, variance_scale)


def _check_theta(theta: float):
    if not theta > 0:
        raise ModelDomainError(f"SINR threshold must be positive, got {theta}")


def conditional_outage_exact(
    direction: Direction,
    theta: float,
    rho: float,
    params: NetworkParams,
    fa: FluidAntennaGeometry,
    budget: PilotBudget,
    spec: QuadratureSpec = QuadratureSpec(),
    options: ModelOptions = ModelOptions(),
    variance_scale: float = 1.0,
    state: Optional[LinkState] = None,
) -> OutageResult:
    """
    Outage given ρ with the interference at each port drawn from its gamma law.

    per_port coupling treats the ports' interference as independent draws;
    common coupling uses one comonotone draw shared by all ports.
    """
    _check_theta(theta)
    state = _state_or_build(state, direction, rho, params, fa, budget, options, variance_scale)
    li_gain, li_weights = _li_nodes(state, options, spec)

    def evaluate(m: int, n_t: int) -> float:
        x, w = gamma_mixture_nodes(state.mean, state.variance, m)
        thresholds = _thresholds(state, theta, x, li_gain)
        if options.interference_coupling == "common":
            per_li = (_common_cdf(state.rice, thresholds, n_t) * w).sum(axis=-1)
        else:
            per_li = _per_port_cdf(state.rice, thresholds, w, n_t)
        return float((per_li * li_weights).sum())

    value, error = _refine(evaluate, spec, f"{direction} conditional outage at ρ={state.rho:.3g}")
    return OutageResult(value=min(max(value, 0.0), 1.0), engine="exact_gamma", quadrature_error_estimate=error)


def conditional_outage_mean_approx(
    direction: Direction,
    theta: float,
    rho: float,
    params: NetworkParams,
    fa: FluidAntennaGeometry,
    budget: PilotBudget,
    spec: QuadratureSpec = QuadratureSpec(),
    options: ModelOptions = ModelOptions(),
    state: Optional[LinkState] = None,
) -> OutageResult:
    """Outage given ρ with every port's interference replaced by its conditional mean."""
    _check_theta(theta)
    state = _state_or_build(state, direction, rho, params, fa, budget, options, 1.0)
    li_gain, li_weights = _li_nodes(state, options, spec)
    thresholds = _thresholds(state, theta, state.mean[:, None], li_gain)

    def evaluate(_m: int, n_t: int) -> float:
        return float((_common_cdf(state.rice, thresholds, n_t)[:, 0] * li_weights).sum())

    value, error = _refine(evaluate, spec, f"{direction} mean-interference outage at ρ={state.rho:.3g}")
    return OutageResult(value=min(max(value, 0.0), 1.0), engine="mean_approx", quadrature_error_estimate=error)


def joint_estimated_cdf(
    taus,
    rho: float,
    sigma_tilde2,
    profile: CorrelationProfile,
    line_coeffs: Optional[np.ndarray] = None,
    spec: QuadratureSpec = QuadratureSpec(),
) -> float:
    """
    P[|ĝ_1| ≤ τ_1, ..., |ĝ_N| ≤ τ_N] at serving distance ρ.

    F = ∫_0^{τ_1²/σ̃_1²} e^{-t} Π_{j≥2} [1 - Q_1(sqrt(2t)·m_j σ̃_1/σ̃_j, sqrt(2)·τ_j/σ̃_j)] dt,
    with m_j = μ_j unless line_coeffs says otherwise.
    """
    taus = np.asarray(taus, dtype=float)
    st2 = np.asarray(sigma_tilde2, dtype=float)
    if np.any(taus < 0):
        raise ModelDomainError("amplitude thresholds must be nonnegative")
    if taus.shape != st2.shape or taus.shape[0] != profile.n_ports:
        raise ModelDomainError("taus, sigma_tilde2 and the correlation profile must have one entry per port")
    if np.any(taus == 0):
        return 0.0
    Y = -math.expm1(-taus[0] ** 2 / st2[0])
    if profile.n_ports == 1:
        return Y
    line = profile.mu if line_coeffs is None else np.asarray(line_coeffs, dtype=float)
    coef = line[1:] * np.sqrt(st2[0] / st2[1:])
    b = math.sqrt(2.0) * taus[1:] / np.sqrt(st2[1:])

    def integrand(y: float) -> float:
        t = -math.log1p(-y)
        return float(np.prod(1.0 - marcum_q1(math.sqrt(2.0 * t) * coef, b)))

    value, _ = adaptive_quad(
        integrand, 0.0, Y,
        epsrel=spec.rel_tol, epsabs=spec.abs_tol, limit=spec.max_depth,
        what=f"joint amplitude cdf at ρ={rho:.3g}",
    )
    return min(max(value, 0.0), 1.0)


def outage(
    direction: Direction,
    theta: float,
    params: NetworkParams,
    fa: FluidAntennaGeometry,
    budget: PilotBudget,
    spec: QuadratureSpec = QuadratureSpec(),
    options: ModelOptions = ModelOptions(),
    engine: AnalyticEngine = "exact",
    cache: Optional[Dict[Tuple[str, float], LinkState]] = None,
) -> OutageResult:
    """
    Unconditional outage, E_ρ[P(θ | ρ)] over the contact distance.

    With u = πλ_bρ² the weight becomes e^{-u}; the range is cut where the
    remaining mass drops below infinite_tail_cutoff. States per ρ node can
    be shared across thresholds through cache.
    """
    _check_theta(theta)
    lam = params.lambda_b
    cache = {} if cache is None else cache
    inner_errors = []

    def integrand(u: float) -> float:
        rho = math.sqrt(u / (math.pi * lam))
        key = (direction, rho)
        if key not in cache:
            cache[key] = link_state(direction, rho, params, fa, budget, options)
        if engine == "exact":
            result = conditional_outage_exact(direction, theta, rho, params, fa, budget, spec, options, state=cache[key])
        else:
            result = conditional_outage_mean_approx(direction, theta, rho, params, fa, budget, spec, options, state=cache[key])
        inner_errors.append(result.quadrature_error_estimate)
        return result.value * math.exp(-u)

    u_max = -math.log(spec.infinite_tail_cutoff)
    # The outer rule cannot resolve below the inner nesting tolerance.
    value, error = adaptive_quad(
        integrand, 0.0, u_max,
        epsrel=spec.rel_tol, epsabs=max(spec.abs_tol, 1e-2 * spec.nesting_tol), limit=spec.max_depth,
        what=f"{direction} outage at θ={theta:.3g}",
    )
    total_error = error + spec.infinite_tail_cutoff + max(inner_errors, default=0.0)
    value = min(max(value, 0.0), 1.0)
    logger.debug(f"{direction} outage ({engine}) at θ={theta:.3g}: {value:.5f} ± {total_error:.1e}")
    return OutageResult(
        value=value,
        engine="exact_gamma" if engine == "exact" else "mean_approx",
        quadrature_error_estimate=total_error,
    )


def rate_integral(
    coverage: Callable[[float], float],
    spec: QuadratureSpec = QuadratureSpec(),
    coverage_at_zero: float = 2.0,
) -> Tuple[float, float]:
    """
    ∫_0^∞ c(θ) / (1 + θ) dθ for a nonincreasing coverage function c.

    Simpson's rule in ln θ on the dB grid of spec, extended in steps of 10 dB
    until c drops below coverage_tail_cutoff. Below the grid a trapezoid
    against c(0) covers [0, θ_min]. Returns the integral and an error
    estimate (Simpson against trapezoid plus the truncated tail).
    """
    step = spec.theta_step_db
    grid_db = list(np.arange(spec.theta_min_db, spec.theta_max_db + 0.5 * step, step))
    values = [coverage(10.0 ** (db / 10.0)) for db in grid_db]
    while values[-1] >= spec.coverage_tail_cutoff:
        if grid_db[-1] >= spec.theta_cap_db:
            logger.error(f"Coverage still {values[-1]:.2e} at {grid_db[-1]:.0f} dB")
            raise QuadratureError(
                f"coverage does not fall below {spec.coverage_tail_cutoff} before {spec.theta_cap_db} dB",
                error_estimate=values[-1],
            )
        stop = min(grid_db[-1] + THETA_EXTENSION_DB, spec.theta_cap_db)
        extra = list(np.arange(grid_db[-1] + step, stop + 0.5 * step, step))
        grid_db += extra
        values += [coverage(10.0 ** (db / 10.0)) for db in extra]

    theta = 10.0 ** (np.asarray(grid_db) / 10.0)
    cov = np.asarray(values)
    log_theta = np.log(theta)
    body = cov * theta / (1.0 + theta)
    simpson = integrate.simpson(body, x=log_theta)
    trapezoid = integrate.trapezoid(body, x=log_theta)
    head = math.log1p(theta[0]) * (cov[0] + coverage_at_zero) / 2.0
    error = abs(simpson - trapezoid) + cov[-1] + math.log1p(theta[0]) * abs(coverage_at_zero - cov[0]) / 2.0
    return head + simpson, error


def sum_rate_with_error(
    params: NetworkParams,
    fa: FluidAntennaGeometry,
    budget: PilotBudget,
    spec: QuadratureSpec = QuadratureSpec(),
    options: ModelOptions = ModelOptions(),
    engine: AnalyticEngine = "exact",
) -> Tuple[float, float]:
    """Average DL + UL sum rate in bit/s and its error estimate."""
    cache: Dict[Tuple[str, float], LinkState] = {}

    def coverage(theta: float) -> float:
        return sum(
            outage(direction, theta, params, fa, budget, spec, options, engine, cache).coverage
            for direction in ("DL", "UL")
        )

    integral, error = rate_integral(coverage, spec)
    scale = params.Bc * effective_rate_fraction(budget) / math.log(2.0)
    rate = max(scale * integral, 0.0)
    logger.info(f"Average sum rate ({engine}, N={fa.N}): {rate:.4e} bit/s")
    return rate, scale * error


def average_sum_rate(
    params: NetworkParams,
    fa: FluidAntennaGeometry,
    budget: PilotBudget,
    spec: QuadratureSpec = QuadratureSpec(),
    options: ModelOptions = ModelOptions(),
    engine: AnalyticEngine = "exact",
) -> float:
    """B_c (1 - L_e/L_c) / ln 2 · ∫ (coverage_DL + coverage_UL) / (1 + θ) dθ."""
    return sum_rate_with_error(params, fa, budget, spec, options, engine)[0]
