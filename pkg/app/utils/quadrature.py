"""Quadrature helpers: checked adaptive integrals and fixed Gauss-Legendre rules."""
import logging
import warnings
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, stats

from app.exceptions import QuadratureError

logger = logging.getLogger(__name__)


def adaptive_quad(
    func: Callable[[float], float],
    lower: float,
    upper: float,
    epsrel: float = 1e-8,
    epsabs: float = 1e-14,
    limit: int = 200,
    points: Optional[Sequence[float]] = None,
    what: str = "integral",
) -> Tuple[float, float]:
    """
    scipy.integrate.quad that raises QuadratureError instead of warning.

    A result is accepted when quad reports success or when its own error
    estimate still meets ten times the requested tolerance.
    """
    kwargs = {"epsrel": epsrel, "epsabs": epsabs, "limit": limit, "full_output": 1}
    if points is not None and np.isfinite(upper):
        inner = sorted(p for p in points if lower < p < upper)
        if inner:
            kwargs["points"] = inner
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        result = integrate.quad(func, lower, upper, **kwargs)
    value, error = result[0], result[1]
    status = result[3] if len(result) > 3 else None
    tolerance = max(epsabs, epsrel * abs(value))
    if status is not None and error > 10.0 * tolerance:
        logger.error(f"{what} on [{lower}, {upper}] did not converge: value={value:.6e}, error={error:.2e}")
        raise QuadratureError(f"{what} did not converge: {status}", error_estimate=error)
    return value, error


@lru_cache(maxsize=64)
def legendre_unit(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def legendre_interval(lower: float, upper: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = legendre_unit(n)
    width = upper - lower
    return lower + width * nodes, width * weights


def gamma_mixture_nodes(mean, variance, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quantile nodes of the moment-matched gamma law.

    Returns x = F^{-1}(u) at the Legendre nodes u on (0, 1) for Gamma with
    shape mean²/variance and scale variance/mean, so E[h(X)] ≈ Σ w_k h(x_k)
    for any shape. Broadcasts over leading axes; the node axis is last. A
    nonpositive variance or mean collapses the law onto the mean.
    """
    u, w = legendre_unit(n)
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    degenerate = (variance <= 0) | (mean <= 0)
    shape = np.where(degenerate, 1.0, mean ** 2 / np.where(degenerate, 1.0, variance))
    scale = np.where(degenerate, 1.0, variance / np.where(degenerate, 1.0, mean))
    x = stats.gamma.ppf(u, shape[..., None], scale=scale[..., None])
    x = np.where(degenerate[..., None], np.maximum(mean, 0.0)[..., None], x)
    return x, w
