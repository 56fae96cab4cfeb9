"""Point-process sampling, nearest-BS association and fluid-antenna port geometry."""
import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from app.exceptions import ModelDomainError, NoServingBaseStationError
from app.models.channel import BsField
from app.models.params import FluidAntennaGeometry, NetworkParams

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]

# Window checks: expected BS count and the share of the mean interference
# that lies beyond the window edge.
MIN_EXPECTED_BS = 500.0
MAX_TRUNCATION_SHARE = 1e-3
# Default window: 3000 m at 5e-5 BS/m², scaled to keep the expected count fixed.
REFERENCE_RADIUS = 3000.0
REFERENCE_DENSITY = 5e-5


def _generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_bs_field(params: NetworkParams, r_sim: float, rng_seed: SeedLike) -> BsField:
    """Draw a homogeneous PPP of base stations in a disc of radius r_sim around the origin."""
    if not r_sim > 0:
        raise ModelDomainError(f"r_sim must be positive, got {r_sim}")
    rng = _generator(rng_seed)
    count = rng.poisson(params.lambda_b * math.pi * r_sim ** 2)
    radius = r_sim * np.sqrt(rng.random(count))
    angle = 2.0 * math.pi * rng.random(count)
    positions = np.column_stack((radius * np.cos(angle), radius * np.sin(angle)))
    serving = int(np.argmin(radius)) if count > 0 else None
    return BsField(positions=positions, r_sim=r_sim, origin_serving_index=serving)


def associate(field: BsField) -> Tuple[int, float]:
    """Index of the serving BS and its distance ρ to the typical UE."""
    if field.origin_serving_index is None:
        raise NoServingBaseStationError(f"no base station inside a window of radius {field.r_sim} m")
    idx = field.origin_serving_index
    return idx, float(np.hypot(*field.positions[idx]))


def contact_distance_pdf(rho: Union[float, np.ndarray], lambda_b: float) -> Union[float, np.ndarray]:
    """pdf 2πλρ·exp(-πλρ²) of the distance to the nearest BS."""
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < 0):
        raise ModelDomainError("contact distance must be nonnegative")
    value = 2.0 * math.pi * lambda_b * arr * np.exp(-math.pi * lambda_b * arr ** 2)
    return float(value) if np.ndim(rho) == 0 else value


def port_offsets(fa: FluidAntennaGeometry) -> np.ndarray:
    """Squared lateral offsets (κλ/2)²·((N - 2i + 1)/(N - 1))² of every port."""
    if fa.N == 1:
        return np.zeros(1)
    i = np.arange(1, fa.N + 1)
    return (fa.length ** 2 / 4.0) * ((fa.N - 2 * i + 1) / (fa.N - 1)) ** 2


def port_distance(rho: Union[float, np.ndarray], i: int, fa: FluidAntennaGeometry) -> Union[float, np.ndarray]:
    """Distance r_i(ρ) from port i (1-based) to a transmitter at distance ρ from the antenna centre."""
    if not 1 <= i <= fa.N:
        raise ModelDomainError(f"port index {i} outside 1..{fa.N}")
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < 0):
        raise ModelDomainError("distance must be nonnegative")
    value = np.sqrt(arr ** 2 + port_offsets(fa)[i - 1])
    return float(value) if np.ndim(rho) == 0 else value


def port_distances(rho: float, fa: FluidAntennaGeometry) -> np.ndarray:
    """r_i(ρ) for every port, as a vector of length N."""
    if rho < 0:
        raise ModelDomainError("distance must be nonnegative")
    return np.sqrt(rho ** 2 + port_offsets(fa))


def switching_channel_uses(fa: FluidAntennaGeometry, Bc: float) -> float:
    """Channel uses consumed while the fluid metal visits every port, (N - 1)·δ·B_c."""
    return (fa.N - 1) * fa.delay * Bc


def ue_tx_power(R: Union[float, np.ndarray], params: NetworkParams) -> Union[float, np.ndarray]:
    """Fractional power control min(ω R^{aε}, P_m) for a UE at distance R from its BS."""
    arr = np.asarray(R, dtype=float)
    if np.any(arr <= 0):
        raise ModelDomainError("UE-to-BS distance must be positive")
    value = np.minimum(params.omega * arr ** (params.a * params.epsilon), params.P_m)
    return float(value) if np.ndim(R) == 0 else value


def saturation_radius(params: NetworkParams) -> float:
    """Distance beyond which UEs transmit at P_m; infinite when ε = 0."""
    if params.epsilon == 0:
        return math.inf
    return (params.P_m / params.omega) ** (1.0 / (params.a * params.epsilon))


def truncation_share(params: NetworkParams, r_sim: float) -> float:
    """
    Share of the mean BS interference at a typical serving distance that lies
    beyond r_sim, (ρ̄ / r_sim)^(a - 2) with ρ̄ = 1 / (2√λ_b).
    """
    mean_contact = 0.5 / math.sqrt(params.lambda_b)
    return (mean_contact / r_sim) ** (params.a - 2.0)


def window_radius(params: NetworkParams, r_sim: Optional[float] = None) -> float:
    """
    Radius of the simulation disc.

    Without a request the radius is 3000 m scaled by sqrt(5e-5 / λ_b). A
    requested radius is kept when it holds at least 500 expected BSs and
    leaves under 0.1% of the mean interference outside; otherwise the smallest
    radius meeting both is returned.
    """
    by_count = math.sqrt(MIN_EXPECTED_BS / (math.pi * params.lambda_b))
    by_tail = 0.5 / math.sqrt(params.lambda_b) * MAX_TRUNCATION_SHARE ** (-1.0 / (params.a - 2.0))
    needed = max(by_count, by_tail)
    if r_sim is None:
        return max(REFERENCE_RADIUS * math.sqrt(REFERENCE_DENSITY / params.lambda_b), needed)
    if r_sim < needed:
        logger.warning(
            f"Window radius {r_sim:.1f} m leaves a truncation share of "
            f"{truncation_share(params, r_sim):.2e}; using {needed:.1f} m"
        )
        return needed
    return r_sim
