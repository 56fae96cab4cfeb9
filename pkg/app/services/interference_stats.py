"""
Interference statistics of the four interferer classes.

Means come from the closed forms (or from Campbell integrals over the
exclusion densities), variances from the second derivative of the
numerically integrated log-Laplace transform, and the total DL/UL
interference is moment-matched to a gamma law.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Literal, Optional, Tuple

import numpy as np

from app.config.settings import MC_MAX_WORKERS
from app.database.variance_store import get_variance_store, parameter_hash
from app.exceptions import ModelDomainError
from app.models.params import (
    ExclusionDensity,
    FluidAntennaGeometry,
    InterferenceKind,
    ModelOptions,
    NetworkParams,
)
from app.models.results import InterferenceStats
from app.services.network_geometry import port_distance, port_distances, saturation_radius
from app.utils.quadrature import adaptive_quad, legendre_interval
from app.utils.special_functions import exp_integral_en, lower_incomplete_gamma, upper_incomplete_gamma

logger = logging.getLogger(__name__)

MeanForm = Literal["closed", "campbell"]

KINDS: Tuple[InterferenceKind, ...] = ("f1_bs_to_ue", "f2_ue_to_bs", "f3_bs_to_bs", "f4_ue_to_ue")

VARIANCE_STEP = 1e-6
MIN_ORACLE_SAMPLES = 100_000
ORACLE_BATCHES = 20
MARK_NODES = 64
# e^{-60} is below double precision relative to one.
EXP_TAIL = 60.0
# Points drawn per vectorized chunk of the shot-noise sampler.
SAMPLER_CHUNK_POINTS = 2_000_000


def _check_exponent(params: NetworkParams):
    if params.a <= 2:
        raise ModelDomainError(f"mean interference diverges for a <= 2 (a = {params.a})")


def _v_floor(params: NetworkParams, b: float) -> float:
    return math.pi * params.lambda_b * b ** 2


def _v_star(params: NetworkParams) -> float:
    """πλ_b·R*² with R* the distance where UEs reach P_m; infinite for ε = 0."""
    radius = saturation_radius(params)
    return math.inf if math.isinf(radius) else math.pi * params.lambda_b * radius ** 2


def _ue_power(R: np.ndarray, params: NetworkParams) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if params.epsilon == 0:
        return np.full(R.shape, min(params.omega, params.P_m))
    return np.minimum(params.omega * R ** (params.a * params.epsilon), params.P_m)


def mean_ue_tx_power(params: NetworkParams) -> float:
    """E[P_u(R)] over the contact distance R of an interfering UE to its own BS."""
    if params.epsilon == 0:
        return min(params.omega, params.P_m)
    v_star = _v_star(params)
    order = params.a * params.epsilon / 2.0
    return (
        params.omega * (math.pi * params.lambda_b) ** (-order) * lower_incomplete_gamma(1.0 + order, v_star)
        + params.P_m * math.exp(-v_star)
    )


def _radial_f34(params: NetworkParams, b: float) -> float:
    """∫_b^∞ r^{-a} λ(1 - e^{-πλr²}) 2πr dr = πλ b^{2-a}(2 - (a-2)E_{a/2}(πλb²))/(a-2)."""
    v_b = _v_floor(params, b)
    a = params.a
    return math.pi * params.lambda_b * b ** (2 - a) * (2.0 - (a - 2.0) * exp_integral_en(a / 2.0, v_b)) / (a - 2.0)


def _radial_f1(params: NetworkParams, r_min: float) -> float:
    return 2.0 * math.pi * params.lambda_b * r_min ** (2 - params.a) / (params.a - 2.0)


def mean_dl_bs(params: NetworkParams, rho: float, i: int, fa: FluidAntennaGeometry) -> float:
    """Mean BS-to-UE interference at port i, (2πσ²/(a-2))·Pλ_b·r_i^{2-a}(ρ)."""
    _check_exponent(params)
    r_i = port_distance(rho, i, fa)
    return params.P * params.sigma2 * _radial_f1(params, r_i)


def mean_dl_bs_ports(params: NetworkParams, rho: float, fa: FluidAntennaGeometry) -> np.ndarray:
    _check_exponent(params)
    r = port_distances(rho, fa)
    return params.P * params.sigma2 * 2.0 * math.pi * params.lambda_b * r ** (2 - params.a) / (params.a - 2.0)


def mean_ul_bs(params: NetworkParams, rho: Optional[float] = None, form: MeanForm = "closed") -> float:
    """Mean BS-to-BS interference at the tagged BS; independent of ρ."""
    _check_exponent(params)
    if form == "campbell":
        return params.P * params.sigma2 * _radial_f34(params, params.b_b)
    a, b = params.a, params.b_b
    e_n = exp_integral_en(a / 2.0, _v_floor(params, b))
    return (math.pi * params.sigma2 * b ** (2 - a) / (a - 2.0)) * params.P * params.lambda_b * ((a - 2.0) * e_n + 2.0)


def mean_dl_ue(params: NetworkParams, rho: Optional[float] = None, form: MeanForm = "closed") -> float:
    """
    Mean UE-to-UE interference at the typical UE.

    The closed form can turn negative for some parameters; the value is then
    clamped at zero with a warning.
    """
    _check_exponent(params)
    if form == "campbell":
        return mean_ue_tx_power(params) * params.sigma2 * _radial_f34(params, params.b_u)
    a, b, lam = params.a, params.b_u, params.lambda_b
    e_n = exp_integral_en(a / 2.0, _v_floor(params, b))
    radial = (math.pi * params.sigma2 * b ** (2 - a) / (a - 2.0)) * params.P * lam * ((a - 2.0) * e_n - 2.0)
    if params.epsilon == 0:
        power_term = -min(params.omega, params.P_m)
    else:
        v_star = _v_star(params)
        order = 1.0 + a * params.epsilon / 2.0
        delta_gamma = upper_incomplete_gamma(order, v_star) - math.gamma(order)
        power_term = (
            params.omega * delta_gamma / (math.pi * lam) ** (a * params.epsilon / 2.0)
            - params.P_m * math.exp(-v_star)
        )
    value = radial * power_term
    if value < 0:
        logger.warning(f"Closed-form UE-to-UE mean is negative ({value:.3e}); clamped to 0")
        return 0.0
    return value


def _mean_ul_ue_constant_power(params: NetworkParams) -> float:
    """ε = 0: every UE sends min(ω, P_m); the b_u floor keeps the f2 integral finite."""
    a, b = params.a, params.b_u
    lam = params.lambda_b
    v_b = _v_floor(params, b)
    floor_part = b ** (2 - a) * -math.expm1(-v_b)
    far_part = (math.pi * lam) ** ((a - 2.0) / 2.0) * upper_incomplete_gamma(2.0 - a / 2.0, v_b)
    return min(params.omega, params.P_m) * params.sigma2 * 2.0 * math.pi * lam / (a - 2.0) * (floor_part + far_part)


def mean_ul_ue(params: NetworkParams, rho: Optional[float] = None, form: MeanForm = "closed") -> float:
    """Mean UE-to-BS interference at the tagged BS; independent of ρ."""
    _check_exponent(params)
    if params.epsilon == 0:
        return _mean_ul_ue_constant_power(params)
    if form == "campbell":
        value, _ = _shot_noise_functional("f2_ue_to_bs", params, lambda c: c)
        return value
    a, eps, lam = params.a, params.epsilon, params.lambda_b
    v_star = _v_star(params)
    order = 2.0 - (a / 2.0) * (eps - 1.0)
    delta_gamma = upper_incomplete_gamma(order, v_star) - math.gamma(order)
    bracket = (
        params.P_m * upper_incomplete_gamma(2.0 - a / 2.0, v_star)
        - math.pi ** (-a * eps / 2.0) * params.omega * lam ** (1.0 - eps) * delta_gamma
    )
    value = 2.0 * math.pi ** (a / 2.0) / (a - 2.0) * params.P * lam ** (a / 2.0) * bracket
    if value < 0:
        logger.warning(f"Closed-form UE-to-BS mean is negative ({value:.3e}); clamped to 0")
        return 0.0
    return value


def residual_li_power(
    direction: Literal["DL", "UL"],
    params: NetworkParams,
    rho: float,
    i: int,
    fa: FluidAntennaGeometry,
    li_gain: float,
) -> float:
    """Residual LI power: P_u(r_i(ρ))·gain at the UE (DL), P·gain at the BS (UL)."""
    if li_gain < 0:
        raise ModelDomainError("LI gain must be nonnegative")
    if direction == "UL":
        return params.P * li_gain
    r_i = port_distance(rho, i, fa)
    return float(_ue_power(max(r_i, 0.0), params)) * li_gain


def gamma_match(mean: float, variance: float) -> Tuple[float, float]:
    """Shape mean²/var and scale var/mean of the moment-matched gamma law."""
    if not (mean > 0 and variance > 0):
        raise ModelDomainError(f"gamma matching needs positive moments, got mean={mean}, var={variance}")
    return mean ** 2 / variance, variance / mean


def exclusion_density(kind: InterferenceKind, params: NetworkParams, cutoff: float) -> ExclusionDensity:
    return ExclusionDensity(kind=kind, cutoff=cutoff, lambda_b=params.lambda_b)


def _mark_nodes(params: NetworkParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Transmit powers and weights of the UE power mark.

    Legendre nodes on [0, v*] in v = πλR² carry the power-controlled part,
    one atom of mass e^{-v*} carries the UEs at P_m.
    """
    if params.epsilon == 0:
        return np.array([min(params.omega, params.P_m)]), np.array([1.0])
    v_star = _v_star(params)
    upper = min(v_star, EXP_TAIL)
    v, w = legendre_interval(0.0, upper, MARK_NODES)
    R = np.sqrt(v / (math.pi * params.lambda_b))
    powers = _ue_power(R, params)
    weights = w * np.exp(-v)
    if v_star <= EXP_TAIL:
        powers = np.append(powers, params.P_m)
        weights = np.append(weights, math.exp(-v_star))
    return powers, weights


def _class_cutoff(kind: InterferenceKind, params: NetworkParams, rho, i, fa) -> float:
    if kind == "f1_bs_to_ue":
        if rho is None:
            raise ModelDomainError("BS-to-UE statistics need the serving distance ρ")
        return port_distance(rho, i, fa) if fa is not None else float(rho)
    if kind == "f3_bs_to_bs":
        return params.b_b
    return params.b_u


def _largest_mark(kind: InterferenceKind, params: NetworkParams) -> float:
    if kind in ("f1_bs_to_ue", "f3_bs_to_bs"):
        return params.P
    return params.P_m if params.epsilon > 0 else min(params.omega, params.P_m)


def _shot_noise_functional(
    kind: InterferenceKind,
    params: NetworkParams,
    g: Callable[[np.ndarray], np.ndarray],
    rho: Optional[float] = None,
    i: int = 1,
    fa: Optional[FluidAntennaGeometry] = None,
) -> Tuple[float, float]:
    """
    ∫ E_mark[g(c)] f(r) 2πr dr with c = mark·σ²·r^{-a}, the mean received power
    of one interferer, over the class's exclusion density.
    """
    _check_exponent(params)
    lam, a, s2 = params.lambda_b, params.a, params.sigma2
    cutoff = _class_cutoff(kind, params, rho, i, fa)
    density = exclusion_density(kind, params, cutoff)

    if kind in ("f1_bs_to_ue", "f3_bs_to_bs"):
        def integrand(r):
            return float(density.density(r)) * 2.0 * math.pi * r * float(g(params.P * s2 * r ** -a))

        return adaptive_quad(integrand, cutoff, math.inf, what=f"{kind} radial integral")

    powers, weights = _mark_nodes(params)
    if kind == "f4_ue_to_ue":
        def integrand(r):
            marked = float(np.dot(weights, g(powers * s2 * r ** -a)))
            return float(density.density(r)) * 2.0 * math.pi * r * marked

        return adaptive_quad(integrand, cutoff, math.inf, what=f"{kind} radial integral")

    # f2: the mark R also sets the exclusion radius, so integrate r inside R.
    floor = params.b_u

    def inner(R: float) -> float:
        power = float(_ue_power(R, params))
        if power == 0:
            return 0.0

        def radial(r):
            return lam * 2.0 * math.pi * r * float(g(power * s2 * r ** -a))

        value, _ = adaptive_quad(radial, max(R, floor), math.inf, what="f2 radial integral")
        return value

    v_b = _v_floor(params, floor)
    v_star = _v_star(params)
    breaks = sorted({0.0, min(v_b, EXP_TAIL), min(v_star, EXP_TAIL), EXP_TAIL})
    total, error = 0.0, 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        value, err = adaptive_quad(
            lambda v: inner(math.sqrt(v / (math.pi * lam))) * math.exp(-v),
            lo, hi, what="f2 mark integral",
        )
        total += value
        error += err
    return total, error


def campbell_mean(
    kind: InterferenceKind,
    params: NetworkParams,
    rho: Optional[float] = None,
    i: int = 1,
    fa: Optional[FluidAntennaGeometry] = None,
) -> float:
    """Mean of one class by direct quadrature of Campbell's formula."""
    value, _ = _shot_noise_functional(kind, params, lambda c: c, rho, i, fa)
    return value


def log_laplace(
    kind: InterferenceKind,
    params: NetworkParams,
    s: float,
    rho: Optional[float] = None,
    i: int = 1,
    fa: Optional[FluidAntennaGeometry] = None,
) -> float:
    """log E[exp(-sI)] under Rayleigh fading: -∫ E_mark[1 - 1/(1 + s·c)] f(r) 2πr dr."""
    value, _ = _shot_noise_functional(kind, params, lambda c: s * c / (1.0 + s * c), rho, i, fa)
    return -value


def interference_variance(
    kind: InterferenceKind,
    params: NetworkParams,
    rho: Optional[float] = None,
    i: int = 1,
    fa: Optional[FluidAntennaGeometry] = None,
    use_cache: bool = True,
) -> Tuple[float, float]:
    """
    Var(I) of one class as the central second difference of log L at s = 0.

    The three log-Laplace terms are combined inside the integrand,
    (log L(h) - 2 log L(0) + log L(-h))/h² = ∫ E_mark[2c²/(1 - h²c²)] f(r) 2πr dr,
    with h = 1e-6 / c_max. Returns (variance, quadrature error estimate).
    """
    cutoff = _class_cutoff(kind, params, rho, i, fa)
    c_max = _largest_mark(kind, params) * params.sigma2 * cutoff ** -params.a
    step = VARIANCE_STEP / c_max
    key_params = {
        "kind": kind,
        "cutoff": cutoff,
        "lambda_b": params.lambda_b,
        "a": params.a,
        "P": params.P,
        "P_m": params.P_m,
        "omega": params.omega,
        "epsilon": params.epsilon,
        "sigma2": params.sigma2,
        "b_b": params.b_b,
        "b_u": params.b_u,
        "step": VARIANCE_STEP,
    }
    # The BS-to-UE cutoff moves with ρ, so those variances are not worth keeping.
    store = get_variance_store() if use_cache and kind != "f1_bs_to_ue" else None
    key = parameter_hash(key_params)
    if store is not None:
        cached = store.get(key)
        if cached is not None:
            return cached

    value, error = _shot_noise_functional(
        kind, params, lambda c: 2.0 * c ** 2 / (1.0 - (step * c) ** 2), rho, i, fa
    )
    if store is not None:
        store.put(key, key_params, value, error)
    return value, error


def class_means(
    params: NetworkParams,
    rho: float,
    i: int,
    fa: FluidAntennaGeometry,
    form: MeanForm = "closed",
) -> Tuple[float, float, float, float]:
    """(mean_dl_bs, mean_dl_ue, mean_ul_bs, mean_ul_ue) at port i."""
    return (
        mean_dl_bs(params, rho, i, fa),
        mean_dl_ue(params, rho, form),
        mean_ul_bs(params, rho, form),
        mean_ul_ue(params, rho, form),
    )


def interference_stats(
    params: NetworkParams,
    rho: float,
    i: int,
    fa: FluidAntennaGeometry,
    options: ModelOptions = ModelOptions(),
) -> InterferenceStats:
    """Means, total variances and gamma laws of the DL and UL interference at port i."""
    m_dl_bs, m_dl_ue, m_ul_bs, m_ul_ue = class_means(params, rho, i, fa, options.mean_form)
    var_dl = interference_variance("f1_bs_to_ue", params, rho, i, fa)[0] + interference_variance("f4_ue_to_ue", params)[0]
    var_ul = interference_variance("f3_bs_to_bs", params)[0] + interference_variance("f2_ue_to_bs", params)[0]
    return InterferenceStats(
        rho=rho,
        port=i,
        mean_dl_bs=m_dl_bs,
        mean_dl_ue=m_dl_ue,
        mean_ul_bs=m_ul_bs,
        mean_ul_ue=m_ul_ue,
        var_total_dl=var_dl,
        var_total_ul=var_ul,
        gamma_dl=gamma_match(m_dl_bs + m_dl_ue, var_dl),
        gamma_ul=gamma_match(m_ul_bs + m_ul_ue, var_ul),
    )


def port_moments(
    direction: Literal["DL", "UL"],
    params: NetworkParams,
    rho: float,
    fa: FluidAntennaGeometry,
    form: MeanForm = "closed",
) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and variance of the total interference at every port, as two vectors of length N."""
    if direction == "DL":
        means = mean_dl_bs_ports(params, rho, fa) + mean_dl_ue(params, rho, form)
        ue_var = interference_variance("f4_ue_to_ue", params)[0]
        half = (fa.N + 1) // 2
        bs_var = np.array([interference_variance("f1_bs_to_ue", params, rho, j, fa)[0] for j in range(1, half + 1)])
        # r_i is a palindrome in i, so only half the ports need their own integral.
        bs_var = np.concatenate((bs_var, bs_var[: fa.N - half][::-1]))
        return means, bs_var + ue_var
    mean = mean_ul_bs(params, rho, form) + mean_ul_ue(params, rho, form)
    var = interference_variance("f3_bs_to_bs", params)[0] + interference_variance("f2_ue_to_bs", params)[0]
    return np.full(fa.N, mean), np.full(fa.N, var)


def _window_for(params: NetworkParams, cutoff: float) -> float:
    by_tail = cutoff * 1e3 ** (1.0 / (params.a - 2.0))
    by_count = math.sqrt(200.0 / (math.pi * params.lambda_b))
    return max(by_tail, by_count, 2.0 * cutoff)


def _tail_mean(kind: InterferenceKind, params: NetworkParams, window: float) -> float:
    """Mean interference from beyond the sampling window, added back as a constant."""
    if kind == "f1_bs_to_ue":
        return params.P * params.sigma2 * _radial_f1(params, window)
    if kind == "f3_bs_to_bs":
        return params.P * params.sigma2 * _radial_f34(params, window)
    if kind == "f4_ue_to_ue":
        return mean_ue_tx_power(params) * params.sigma2 * _radial_f34(params, window)
    return mean_ue_tx_power(params) * params.sigma2 * _radial_f1(params, window)


def sample_shot_noise(
    kind: InterferenceKind,
    params: NetworkParams,
    n_samples: int,
    rng: np.random.Generator,
    rho: Optional[float] = None,
    i: int = 1,
    fa: Optional[FluidAntennaGeometry] = None,
    window: Optional[float] = None,
    fading: bool = True,
    include_tail: bool = True,
) -> np.ndarray:
    """
    Independent draws of one interference class.

    Interferers form a PPP of density λ_b in the annulus between the class
    cutoff and the window radius, thinned to the exclusion density. UE marks
    draw their own serving distance R from the contact law; for f2 that R is
    also the exclusion radius. The mean from beyond the window is added as a
    constant when include_tail is set.
    """
    lam, a, s2 = params.lambda_b, params.a, params.sigma2
    cutoff = _class_cutoff(kind, params, rho, i, fa)
    window = window or _window_for(params, cutoff)
    if window <= cutoff:
        raise ModelDomainError(f"sampling window {window} m must exceed the cutoff {cutoff} m")
    area_mean = lam * math.pi * (window ** 2 - cutoff ** 2)
    chunk = max(1, int(SAMPLER_CHUNK_POINTS / max(area_mean, 1.0)))
    tail = _tail_mean(kind, params, window) if include_tail else 0.0

    out = np.empty(n_samples)
    for start in range(0, n_samples, chunk):
        n = min(chunk, n_samples - start)
        counts = rng.poisson(area_mean, n)
        total = int(counts.sum())
        ids = np.repeat(np.arange(n), counts)
        r = np.sqrt(cutoff ** 2 + (window ** 2 - cutoff ** 2) * rng.random(total))
        keep = np.ones(total, dtype=bool)
        if kind in ("f3_bs_to_bs", "f4_ue_to_ue"):
            keep &= rng.random(total) < -np.expm1(-math.pi * lam * r ** 2)
        if kind in ("f1_bs_to_ue", "f3_bs_to_bs"):
            mark = np.full(total, params.P)
        else:
            R = np.sqrt(rng.exponential(1.0, total) / (math.pi * lam))
            mark = _ue_power(R, params)
            if kind == "f2_ue_to_bs":
                keep &= r > R
        gain = rng.exponential(1.0, total) if fading else np.ones(total)
        power = np.where(keep, mark * s2 * r ** -a * gain, 0.0)
        out[start:start + n] = np.bincount(ids, weights=power, minlength=n) + tail
    return out


def _batch_moments(args) -> Tuple[int, float, float]:
    kind, params, n, seed, batch, rho, i, fa, window = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, batch]))
    samples = sample_shot_noise(kind, params, n, rng, rho, i, fa, window)
    mean = float(samples.mean())
    return n, mean, float(((samples - mean) ** 2).sum())


def interference_variance_oracle(
    kind: InterferenceKind,
    params: NetworkParams,
    rho: Optional[float] = None,
    n_samples: int = MIN_ORACLE_SAMPLES,
    seed: int = 0,
    method: Literal["monte_carlo", "laplace"] = "monte_carlo",
    i: int = 1,
    fa: Optional[FluidAntennaGeometry] = None,
    window: Optional[float] = None,
) -> Tuple[float, float]:
    """
    Independent estimate of Var(I) for one class with its standard error.

    monte_carlo: shot-noise samples in batches on a thread pool, merged by
    streaming moments; the standard error comes from the spread of the
    batch variances. laplace: the log-Laplace route with its quadrature
    error estimate.
    """
    if method == "laplace":
        return interference_variance(kind, params, rho, i, fa, use_cache=False)
    if n_samples < MIN_ORACLE_SAMPLES:
        raise ModelDomainError(f"variance oracle needs at least {MIN_ORACLE_SAMPLES} samples, got {n_samples}")

    sizes = [n_samples // ORACLE_BATCHES + (1 if b < n_samples % ORACLE_BATCHES else 0) for b in range(ORACLE_BATCHES)]
    tasks = [(kind, params, size, seed, b, rho, i, fa, window) for b, size in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=MC_MAX_WORKERS) as pool:
        parts = list(pool.map(_batch_moments, tasks))

    count, mean, m2 = 0, 0.0, 0.0
    for n, batch_mean, batch_m2 in parts:
        merged = count + n
        delta = batch_mean - mean
        mean += delta * n / merged
        m2 += batch_m2 + delta ** 2 * count * n / merged
        count = merged
    variance = m2 / (count - 1)
    batch_vars = np.array([m / (n - 1) for n, _, m in parts])
    stderr = float(batch_vars.std(ddof=1) / math.sqrt(len(parts)))
    logger.info(f"Variance oracle for {kind}: {variance:.4e} ± {stderr:.1e} from {count} samples")
    return variance, stderr
