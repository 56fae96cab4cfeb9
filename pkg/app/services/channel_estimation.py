"""Pilot budget bookkeeping and LMMSE error variances of the direct and LI links."""
import logging
import math

import numpy as np

from app.exceptions import PilotBudgetExhaustedError
from app.models.params import FluidAntennaGeometry, NetworkParams, PilotBudget
from app.services.interference_stats import MeanForm, mean_dl_bs, mean_dl_bs_ports, mean_dl_ue, mean_ul_bs
from app.services.network_geometry import port_distance, port_distances, switching_channel_uses, ue_tx_power

logger = logging.getLogger(__name__)


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def build_pilot_budget(
    params: NetworkParams,
    fa: FluidAntennaGeometry,
    allow_infeasible: bool = False,
) -> PilotBudget:
    """
    Split the coherence block for a given antenna.

    Λ = floor((L_d - ceil(l_s)) / N), Λ_b = round(w·L_LI), Λ_u = L_LI - Λ_b.
    Raises PilotBudgetExhaustedError when any count is below one unless
    allow_infeasible is set.
    """
    l_s = switching_channel_uses(fa, params.Bc)
    direct = params.Ld - math.ceil(l_s - 1e-9)
    Lambda = max(direct, 0) // fa.N
    Lambda_b = _round_half_up(params.w_split * params.L_LI)
    Lambda_u = params.L_LI - Lambda_b
    budget = PilotBudget(
        Lc=params.coherence_uses,
        Le=params.Le,
        Ld=params.Ld,
        L_LI=params.L_LI,
        Lt=params.coherence_uses - params.Le,
        l_s=l_s,
        Lambda=Lambda,
        Lambda_b=Lambda_b,
        Lambda_u=Lambda_u,
    )
    if not budget.feasible and not allow_infeasible:
        raise PilotBudgetExhaustedError(
            f"pilot budget exhausted for N={fa.N}: Λ={Lambda} (Ld={params.Ld}, l_s={l_s:.2f}), "
            f"Λ_b={Lambda_b}, Λ_u={Lambda_u}"
        )
    return budget


def _lmmse_error(pilots: int, signal: float, noise: float, allow_zero_pilots: bool, what: str) -> float:
    if pilots < 1:
        if allow_zero_pilots:
            return 1.0
        raise PilotBudgetExhaustedError(f"no pilot symbols left for the {what}")
    if signal == 0:
        return 1.0
    return 1.0 / (1.0 + pilots * signal / noise)


def direct_ce_variance(
    params: NetworkParams,
    rho: float,
    i: int,
    fa: FluidAntennaGeometry,
    budget: PilotBudget,
    allow_zero_pilots: bool = False,
) -> float:
    """σ²_e at port i: (1 + ΛP r_i^{-a} / (N0 + E[(I_i^DL)_BS | ρ]))^{-1}."""
    r_i = port_distance(rho, i, fa)
    noise = params.N0 + mean_dl_bs(params, rho, i, fa)
    return _lmmse_error(budget.Lambda, params.P * r_i ** -params.a, noise, allow_zero_pilots, "direct link")


def direct_ce_variances(
    params: NetworkParams,
    rho: float,
    fa: FluidAntennaGeometry,
    budget: PilotBudget,
) -> np.ndarray:
    """σ²_e of every port as a vector."""
    if budget.Lambda < 1:
        raise PilotBudgetExhaustedError("no pilot symbols left for the direct link")
    r = port_distances(rho, fa)
    snr = budget.Lambda * params.P * r ** -params.a / (params.N0 + mean_dl_bs_ports(params, rho, fa))
    return 1.0 / (1.0 + snr)


def li_ce_variance_ue(
    params: NetworkParams,
    rho: float,
    i: int,
    fa: FluidAntennaGeometry,
    budget: PilotBudget,
    form: MeanForm = "closed",
    allow_zero_pilots: bool = False,
) -> float:
    """LI error variance at the UE: (1 + Λ_u P_u(r_i(ρ)) v_LI / (N0 + E[(I^DL)_UE | ρ]))^{-1}."""
    signal = ue_tx_power(port_distance(rho, i, fa), params) * params.v_LI
    noise = params.N0 + mean_dl_ue(params, rho, form)
    return _lmmse_error(budget.Lambda_u, signal, noise, allow_zero_pilots, "UE loop-interference link")


def li_ce_variance_bs(
    params: NetworkParams,
    rho: float,
    budget: PilotBudget,
    form: MeanForm = "closed",
    allow_zero_pilots: bool = False,
) -> float:
    """LI error variance at the BS: (1 + Λ_b P v_LI / (N0 + E[(I^UL)_BS | ρ]))^{-1}."""
    noise = params.N0 + mean_ul_bs(params, rho, form)
    return _lmmse_error(budget.Lambda_b, params.P * params.v_LI, noise, allow_zero_pilots, "BS loop-interference link")


def effective_rate_fraction(budget: PilotBudget) -> float:
    """Share of the block left for data, 1 - L_e/L_c."""
    return 1.0 - budget.Le / budget.Lc
