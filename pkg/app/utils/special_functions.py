"""
Special functions used by the interference and outage analysis.

Every kernel works in double precision on top of scipy.special and is pure.
The documented accuracy is relative 1e-10 with an absolute floor of 1e-14
unless a function says otherwise.
"""
import logging
import math
from typing import Union

import numpy as np
from scipy import special, stats

from app.exceptions import ModelDomainError
from app.models.params import AccuracySpec

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_ACCURACY = AccuracySpec()

# Above this product the Bessel series needs too many terms; the
# non-central chi-square survival function takes over.
MARCUM_SERIES_LIMIT = 30.0
MARCUM_MAX_TERMS = 400


def _as_float_array(x: ArrayLike, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ModelDomainError(f"{name} must be finite, got {x!r}")
    return arr


def _unwrap(arr: np.ndarray, like: ArrayLike) -> ArrayLike:
    return float(arr) if np.ndim(like) == 0 else arr


def bessel_j0(x: ArrayLike) -> ArrayLike:
    """Bessel function of the first kind, order zero. Even in x."""
    arr = _as_float_array(x, "x")
    return _unwrap(special.j0(np.abs(arr)), x)


def bessel_i0(x: ArrayLike) -> ArrayLike:
    """Modified Bessel function of the first kind, order zero, for x >= 0."""
    arr = _as_float_array(x, "x")
    if np.any(arr < 0):
        raise ModelDomainError(f"bessel_i0 needs x >= 0, got {x!r}")
    return _unwrap(special.i0e(arr) * np.exp(arr), x)


def bessel_i0e(x: ArrayLike) -> ArrayLike:
    """Exponentially scaled e^{-x}·I0(x); finite for every x >= 0."""
    arr = _as_float_array(x, "x")
    if np.any(arr < 0):
        raise ModelDomainError(f"bessel_i0e needs x >= 0, got {x!r}")
    return _unwrap(special.i0e(arr), x)


def _marcum_series(a: np.ndarray, b: np.ndarray, accuracy: AccuracySpec) -> np.ndarray:
    """
    Neumann series in exponentially scaled Bessel functions.

    For a < b:  Q = Σ_{k>=0} (a/b)^k e^{-(a-b)²/2} ive(k, ab)
    For a >= b: Q = 1 - Σ_{k>=1} (b/a)^k e^{-(a-b)²/2} ive(k, ab)

    Once k > ab consecutive terms at least halve, so the remainder is bounded
    by the last term and the loop stops when that term is below tolerance.
    """
    lower = a < b
    ratio = np.where(lower, a / np.where(lower, b, 1.0), b / np.where(lower, 1.0, a))
    z = a * b
    scale = np.exp(-0.5 * (a - b) ** 2)
    total = np.zeros_like(a)
    power = np.ones_like(a)
    active = np.arange(a.size)
    for k in range(MARCUM_MAX_TERMS):
        term = power[active] * scale[active] * special.ive(k, z[active])
        if k == 0:
            term = np.where(lower[active], term, 0.0)
        total[active] += term
        power[active] *= ratio[active]
        done = (k > z[active]) & (term <= accuracy.rel_tol * total[active] + accuracy.abs_tol)
        active = active[~done]
        if active.size == 0:
            break
    else:
        logger.warning(f"Marcum Q series stopped after {MARCUM_MAX_TERMS} terms")
    return np.where(lower, total, 1.0 - total)


def marcum_q1(a: ArrayLike, b: ArrayLike, accuracy: AccuracySpec = DEFAULT_ACCURACY) -> ArrayLike:
    """
    First-order Marcum Q function Q1(a, b) = ∫_b^∞ t·exp(-(t² + a²)/2)·I0(a t) dt.

    Broadcasts over a and b. Uses the Bessel series for a·b <= 30 and the
    non-central chi-square survival function (2 degrees of freedom,
    noncentrality a²) above it.
    """
    a_arr = _as_float_array(a, "a")
    b_arr = _as_float_array(b, "b")
    if np.any(a_arr < 0) or np.any(b_arr < 0):
        raise ModelDomainError("marcum_q1 needs a >= 0 and b >= 0")
    a_arr, b_arr = np.broadcast_arrays(a_arr, b_arr)
    out = np.ones(a_arr.shape)

    rayleigh = (a_arr == 0) & (b_arr > 0)
    out[rayleigh] = np.exp(-0.5 * b_arr[rayleigh] ** 2)

    z = a_arr * b_arr
    series = (a_arr > 0) & (b_arr > 0) & (z <= MARCUM_SERIES_LIMIT)
    if np.any(series):
        out[series] = _marcum_series(a_arr[series], b_arr[series], accuracy)
    asymptotic = (a_arr > 0) & (b_arr > 0) & (z > MARCUM_SERIES_LIMIT)
    if np.any(asymptotic):
        out[asymptotic] = stats.ncx2.sf(b_arr[asymptotic] ** 2, 2, a_arr[asymptotic] ** 2)

    out = np.clip(out, 0.0, 1.0)
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return float(out)
    return out


def upper_incomplete_gamma(s: float, x: float) -> float:
    """
    Non-normalized upper incomplete gamma Γ(s, x) for real s and x >= 0.

    s > 0 uses the regularized function, s = 0 is E1(x), and negative s is
    reached by the downward recurrence Γ(s, x) = (Γ(s+1, x) - x^s e^{-x}) / s.
    """
    if not (math.isfinite(s) and math.isfinite(x)):
        raise ModelDomainError(f"upper_incomplete_gamma needs finite arguments, got s={s}, x={x}")
    if x < 0:
        raise ModelDomainError(f"upper_incomplete_gamma needs x >= 0, got {x}")
    if s <= 0 and x == 0:
        raise ModelDomainError(f"Γ({s}, 0) diverges")
    if s > 0:
        return float(special.gammaincc(s, x) * special.gamma(s))
    if s == 0:
        return float(special.exp1(x))

    steps = math.ceil(-s)
    seed = s + steps
    value = float(special.exp1(x)) if seed == 0 else float(special.gammaincc(seed, x) * special.gamma(seed))
    for k in range(steps - 1, -1, -1):
        order = s + k
        value = (value - x ** order * math.exp(-x)) / order
    return value


def lower_incomplete_gamma(s: float, x: float) -> float:
    """Non-normalized lower incomplete gamma γ(s, x) for s > 0."""
    if s <= 0 or x < 0:
        raise ModelDomainError(f"lower_incomplete_gamma needs s > 0 and x >= 0, got s={s}, x={x}")
    return float(special.gammainc(s, x) * special.gamma(s))


def exp_integral_en(n: float, x: float) -> float:
    """Generalized exponential integral E_n(x) = ∫_1^∞ e^{-xt} t^{-n} dt for x > 0."""
    if not (math.isfinite(n) and math.isfinite(x)):
        raise ModelDomainError(f"exp_integral_en needs finite arguments, got n={n}, x={x}")
    if x <= 0:
        raise ModelDomainError(f"exp_integral_en needs x > 0, got {x}")
    if n >= 0 and float(n).is_integer():
        return float(special.expn(int(n), x))
    return x ** (n - 1.0) * upper_incomplete_gamma(1.0 - n, x)
