"""
End-to-end Monte Carlo simulator of the typical full-duplex link.

Each trial is one coherence block: a fresh BS field around the typical UE,
nearest-BS association, channel estimation and port selection, one
interfering UE per interfering cell, residual LI and both SINRs. Trials
own their generator seeded from (base_seed, trial_index), so results do
not depend on how batches are scheduled.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.config.settings import MC_BATCH_SIZE, MC_MAX_WORKERS
from app.exceptions import InsufficientTrialsError, NoServingBaseStationError
from app.models.params import FluidAntennaGeometry, NetworkParams
from app.models.results import TrialConfig, TrialOutcome
from app.services.channel_estimation import (
    direct_ce_variances,
    effective_rate_fraction,
    li_ce_variance_bs,
    li_ce_variance_ue,
)
from app.services.channel_model import correlation_profile, draw_estimated_block, draw_residual_li, select_port
from app.services.network_geometry import associate, port_distance, sample_bs_field, ue_tx_power, window_radius

logger = logging.getLogger(__name__)

MIN_VALID_TRIALS = 1000

TRIAL_DUMP_COLUMNS = [
    "trial_index", "valid", "n_bs", "rho", "selected_port",
    "sinr_dl", "sinr_ul", "outage_dl", "outage_ul", "rate_contribution",
]


def _trial_rng(base_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([base_seed, trial_index]))


def link_interference(
    params: NetworkParams,
    fa: FluidAntennaGeometry,
    port: int,
    tagged: np.ndarray,
    bs: np.ndarray,
    ue: np.ndarray,
    ue_power: np.ndarray,
    fading: np.ndarray,
) -> Tuple[float, float]:
    """
    Multi-user interference (DL at the selected port, UL at the tagged BS).

    The typical UE sits at the origin. Distances at the UE are per-port
    distances to the selected port. Interfering BSs within b_b of the tagged
    BS and interfering UEs within b_u of their victim are excluded, the same
    cut-offs the exclusion densities use. fading rows: BS→UE, UE→UE, BS→BS, UE→BS.
    """
    a = params.a
    d_bs_ue = port_distance(np.linalg.norm(bs, axis=1), port, fa)
    d_ue_ue = port_distance(np.linalg.norm(ue, axis=1), port, fa)
    d_bs_bs = np.linalg.norm(bs - tagged, axis=1)
    d_ue_bs = np.linalg.norm(ue - tagged, axis=1)

    far_ue_ue = d_ue_ue > params.b_u
    far_bs_bs = d_bs_bs > params.b_b
    far_ue_bs = d_ue_bs > params.b_u
    i_dl = (
        (params.P * d_bs_ue ** -a * fading[0]).sum()
        + (ue_power[far_ue_ue] * d_ue_ue[far_ue_ue] ** -a * fading[1][far_ue_ue]).sum()
    )
    i_ul = (
        (params.P * d_bs_bs[far_bs_bs] ** -a * fading[2][far_bs_bs]).sum()
        + (ue_power[far_ue_bs] * d_ue_bs[far_ue_bs] ** -a * fading[3][far_ue_bs]).sum()
    )
    return float(i_dl), float(i_ul)


def _simulate(cfg: TrialConfig, trial_index: int, r_sim: float) -> TrialOutcome:
    params, fa, options = cfg.params, cfg.fa, cfg.options
    rng = _trial_rng(cfg.base_seed, trial_index)
    field = sample_bs_field(params, r_sim, rng)
    try:
        serving, rho = associate(field)
    except NoServingBaseStationError:
        logger.debug(f"Trial {trial_index}: empty field, marked invalid")
        return TrialOutcome(trial_index=trial_index, valid=False)

    a, s2 = params.a, params.sigma2
    perfect = options.csi_mode == "perfect"
    sigma_e2 = np.zeros(fa.N) if perfect else direct_ce_variances(params, rho, fa, cfg.budget)
    _, g_hat, _ = draw_estimated_block(correlation_profile(fa), s2, sigma_e2, rng, options.sim_ce_convention)
    port = select_port(g_hat)
    r = port_distance(rho, port, fa)
    p_ue = ue_tx_power(r, params)

    tagged = field.positions[serving]
    bs = np.delete(field.positions, serving, axis=0)
    # One active UE per interfering cell, uniform in a disc of the mean cell radius.
    cell = 1.0 / math.sqrt(math.pi * params.lambda_b)
    R = cell * np.sqrt(1.0 - rng.random(len(bs)))
    phi = 2.0 * math.pi * rng.random(len(bs))
    ue = bs + np.column_stack((R * np.cos(phi), R * np.sin(phi)))
    ue_power = ue_tx_power(R, params) if len(bs) else np.zeros(0)

    fading = rng.exponential(s2, (4, len(bs)))
    i_dl, i_ul = link_interference(params, fa, port, tagged, bs, ue, ue_power, fading)

    li_var_ue = li_ce_variance_ue(params, rho, port, fa, cfg.budget, options.mean_form, allow_zero_pilots=perfect)
    li_var_bs = li_ce_variance_bs(params, rho, cfg.budget, options.mean_form, allow_zero_pilots=perfect)
    if options.perfect_li:
        h_ue = h_bs = 0.0
    else:
        h_ue = float(draw_residual_li(params, li_var_ue, rng))
        h_bs = float(draw_residual_li(params, li_var_bs, rng))

    gain = abs(g_hat[port - 1]) ** 2
    e2 = sigma_e2[port - 1]
    noise_dl = li_var_ue * p_ue * h_ue + params.P * r ** -a * e2 + params.N0
    noise_ul = li_var_bs * params.P * h_bs + p_ue * r ** -a * e2 + params.N0
    sinr_dl = params.P * r ** -a * gain / (i_dl + noise_dl)
    sinr_ul = p_ue * r ** -a * gain / (i_ul + noise_ul)
    rate = params.Bc * effective_rate_fraction(cfg.budget) * (math.log2(1.0 + sinr_dl) + math.log2(1.0 + sinr_ul))
    return TrialOutcome(
        trial_index=trial_index,
        valid=True,
        n_bs=field.size,
        rho=rho,
        selected_port=port,
        sinr_dl=float(sinr_dl),
        sinr_ul=float(sinr_ul),
        outage_dl=bool(sinr_dl < params.theta),
        outage_ul=bool(sinr_ul < params.theta),
        rate_contribution=rate,
    )


def run_trial(cfg: TrialConfig, trial_index: int) -> TrialOutcome:
    """Simulate one coherence block; an empty BS field gives an invalid outcome."""
    return _simulate(cfg, trial_index, window_radius(cfg.params, cfg.r_sim))


def run_trials(cfg: TrialConfig) -> List[TrialOutcome]:
    """All cfg.n_trials trials in index order, simulated in batches on a thread pool."""
    r_sim = window_radius(cfg.params, cfg.r_sim)
    batches = [range(start, min(start + MC_BATCH_SIZE, cfg.n_trials)) for start in range(0, cfg.n_trials, MC_BATCH_SIZE)]
    logger.info(f"Simulating {cfg.n_trials} trials (N={cfg.fa.N}, r_sim={r_sim:.0f} m) in {len(batches)} batches")
    with ThreadPoolExecutor(max_workers=MC_MAX_WORKERS) as pool:
        parts = list(pool.map(lambda batch: [_simulate(cfg, k, r_sim) for k in batch], batches))
    outcomes = [outcome for part in parts for outcome in part]
    invalid = sum(not o.valid for o in outcomes)
    if invalid:
        logger.warning(f"{invalid} of {cfg.n_trials} trials had an empty field and were dropped")
    return outcomes


def _valid(outcomes: Sequence[TrialOutcome]) -> List[TrialOutcome]:
    valid = [o for o in outcomes if o.valid]
    if len(valid) < MIN_VALID_TRIALS:
        logger.error(f"Only {len(valid)} valid trials, need {MIN_VALID_TRIALS}")
        raise InsufficientTrialsError(f"{len(valid)} valid trials, at least {MIN_VALID_TRIALS} needed")
    return valid


def empirical_outage(
    cfg: TrialConfig,
    theta: Optional[float] = None,
    outcomes: Optional[Sequence[TrialOutcome]] = None,
) -> Tuple[float, float, float]:
    """
    Share of valid trials with SINR below θ for DL and UL, and the larger
    of the two binomial standard errors. θ defaults to the config's.
    """
    theta = cfg.params.theta if theta is None else theta
    valid = _valid(run_trials(cfg) if outcomes is None else outcomes)
    n = len(valid)
    p_dl = sum(o.sinr_dl < theta for o in valid) / n
    p_ul = sum(o.sinr_ul < theta for o in valid) / n
    stderr = max(math.sqrt(p * (1.0 - p) / n) for p in (p_dl, p_ul))
    return p_dl, p_ul, stderr


def empirical_sum_rate(
    cfg: TrialConfig,
    outcomes: Optional[Sequence[TrialOutcome]] = None,
) -> Tuple[float, float]:
    """Mean per-trial DL + UL rate in bit/s and its standard error."""
    valid = _valid(run_trials(cfg) if outcomes is None else outcomes)
    rates = np.array([o.rate_contribution for o in valid])
    return float(rates.mean()), float(rates.std(ddof=1) / math.sqrt(len(rates)))


def dump_trials(outcomes: Sequence[TrialOutcome], path: Union[str, Path]) -> Path:
    """Write one CSV row per trial; columns are described in app/docs/TRIAL_DUMP.md."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([o.model_dump() for o in outcomes], columns=TRIAL_DUMP_COLUMNS)
    frame.to_csv(path, index=False)
    logger.info(f"Wrote {len(frame)} trials to {path}")
    return path
