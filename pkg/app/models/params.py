"""Parameter models: network, fluid antenna, pilot budget and numerical settings."""
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class NetworkParams(BaseModel):
    """
    Immutable parameter set of the full-duplex cellular network.

    All quantities are linear SI values. Defaults follow the reference
    simulation table (30 dBm powers, omega = -40 dB, a = 4, B_c = 100 MHz).
    """
    model_config = ConfigDict(frozen=True)

    lambda_b: float = Field(5e-5, gt=0, description="BS density per m².")
    lambda_u: float = Field(5e-4, gt=0, description="UE density per m². Bookkeeping only.")
    a: float = Field(4.0, gt=2, description="Path-loss exponent.")
    P: float = Field(1.0, gt=0, description="BS transmit power in W.")
    P_m: float = Field(1.0, gt=0, description="UE maximum transmit power in W.")
    omega: float = Field(1e-4, gt=0, description="Receive-sensitivity target of the UL power control.")
    epsilon: float = Field(0.8, ge=0, le=1, description="Power-control fraction.")
    N0: float = Field(1e-5, gt=0, description="Noise variance.")
    sigma2: float = Field(1.0, gt=0, description="Channel variance σ².")
    b_b: float = Field(1.0, gt=0, description="Minimum BS-to-BS interference distance in m.")
    b_u: float = Field(1.0, gt=0, description="Minimum UE-to-UE interference distance in m.")
    v_LI: float = Field(1e-3, ge=0, description="Loop-interference path-loss constant.")
    mu_nakagami: float = Field(1.0, ge=0.5, description="Nakagami shape of the residual LI channel.")
    Bc: float = Field(1e8, gt=0, description="Coherence bandwidth in Hz.")
    Tc: float = Field(0.05, gt=0, description="Coherence time in s.")
    Lc: Optional[float] = Field(1e4, gt=0, description="Channel uses per coherence block. Bc·Tc when unset.")
    Le: int = Field(200, ge=0, description="Pilot channel uses per block.")
    Ld: int = Field(180, ge=0, description="Pilot channel uses for the direct links.")
    L_LI: int = Field(20, ge=0, description="Pilot channel uses for the LI links.")
    w_split: float = Field(0.5, gt=0, le=1, description="Share of the LI pilots used at the BS.")
    theta: float = Field(0.01, gt=0, description="SINR threshold, linear.")

    @model_validator(mode="after")
    def _check_budget(self) -> "NetworkParams":
        if self.Le != self.Ld + self.L_LI:
            raise ValueError(f"Le ({self.Le}) must equal Ld + L_LI ({self.Ld} + {self.L_LI})")
        if self.coherence_uses < self.Le:
            raise ValueError(f"Lc ({self.coherence_uses}) must be at least Le ({self.Le})")
        return self

    @property
    def coherence_uses(self) -> float:
        return self.Lc if self.Lc is not None else self.Bc * self.Tc


class FluidAntennaGeometry(BaseModel):
    """Port layout and fluid-metal motion parameters of the UE's fluid antenna."""
    model_config = ConfigDict(frozen=True)

    N: int = Field(15, ge=1, description="Number of ports.")
    kappa: float = Field(0.2, ge=0, description="Antenna length in wavelengths.")
    wavelength: float = Field(6e-4, gt=0, description="Carrier wavelength in m.")
    q_charge: float = Field(0.07, gt=0, description="Surface charge of the fluid metal in V.")
    viscosity: float = Field(0.002, gt=0, description="Electrolyte viscosity in Pa·s.")
    DL_ratio: float = Field(5.0, gt=0, description="Thickness-to-length ratio D/L of the channel.")
    delta_phi: float = Field(10.0, gt=0, description="Applied voltage difference in V.")

    @property
    def length(self) -> float:
        """Physical antenna length κλ in m."""
        return self.kappa * self.wavelength

    @property
    def velocity(self) -> float:
        """Fluid-metal velocity u = (q / 6μ)·(D/L)·Δφ in m/s."""
        return self.q_charge / (6.0 * self.viscosity) * self.DL_ratio * self.delta_phi

    @property
    def delay(self) -> float:
        """Travel time between adjacent ports in s; zero for a single port."""
        if self.N == 1:
            return 0.0
        return self.length / (self.velocity * (self.N - 1))

    @property
    def displacements(self) -> np.ndarray:
        if self.N == 1:
            return np.zeros(1)
        return np.arange(self.N) / (self.N - 1) * self.length


class PilotBudget(BaseModel):
    """Split of one coherence block into pilot, switching and data channel uses."""
    model_config = ConfigDict(frozen=True)

    Lc: float
    Le: int
    Ld: int
    L_LI: int
    Lt: float
    l_s: float = Field(..., ge=0, description="Channel uses lost to fluid-metal switching.")
    Lambda: int = Field(..., description="Pilot symbols per port for the direct link.")
    Lambda_b: int = Field(..., description="LI pilot symbols at the BS.")
    Lambda_u: int = Field(..., description="LI pilot symbols at the UE.")

    @property
    def feasible(self) -> bool:
        return self.Lambda >= 1 and self.Lambda_b >= 1 and self.Lambda_u >= 1


class AccuracySpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    rel_tol: float = Field(1e-10, gt=0)
    abs_tol: float = Field(1e-14, gt=0)


class QuadratureSpec(BaseModel):
    """Tolerances and rule sizes of the analytical engine."""
    model_config = ConfigDict(frozen=True)

    rel_tol: float = Field(1e-6, gt=0, description="Relative tolerance of adaptive integrals.")
    abs_tol: float = Field(1e-10, gt=0, description="Absolute tolerance of adaptive integrals.")
    max_depth: int = Field(200, ge=1, description="Subinterval limit of adaptive integrals.")
    infinite_tail_cutoff: float = Field(1e-9, gt=0, le=1e-8, description="Mass dropped when truncating [0, ∞).")
    gamma_nodes: int = Field(16, ge=2, description="Quantile nodes per gamma mixture.")
    t_nodes: int = Field(8, ge=2, description="Gauss-Legendre nodes per inner panel.")
    li_nodes: int = Field(6, ge=1, description="Quantile nodes for the residual LI gain.")
    nesting_tol: float = Field(2e-3, gt=0, description="Largest accepted gap between the fine and coarse inner rules.")
    theta_min_db: float = Field(-40.0, description="Lower end of the rate threshold grid.")
    theta_max_db: float = Field(40.0, description="Upper end of the rate threshold grid before extension.")
    theta_step_db: float = Field(2.0, gt=0)
    theta_cap_db: float = Field(100.0, description="Hard limit of the threshold grid extension.")
    coverage_tail_cutoff: float = Field(1e-4, gt=0, description="Coverage below which the rate integral is truncated.")

    @model_validator(mode="after")
    def _check_grid(self) -> "QuadratureSpec":
        if not self.theta_min_db < self.theta_max_db <= self.theta_cap_db:
            raise ValueError("theta grid must satisfy theta_min_db < theta_max_db <= theta_cap_db")
        return self


class ModelOptions(BaseModel):
    """Modelling switches shared by the analytical engine and the simulator."""
    model_config = ConfigDict(frozen=True)

    ce_convention: Literal["orthogonal", "inflated"] = Field(
        "inflated", description="Law of the estimated channel across ports in the analytical engine."
    )
    sim_ce_convention: Literal["orthogonal", "inflated"] = Field(
        "orthogonal", description="Law of the estimated channel the simulator draws from."
    )
    interference_coupling: Literal["per_port", "common"] = Field(
        "per_port", description="Whether each port sees its own interference draw in the analytical engine."
    )
    mean_form: Literal["closed", "campbell"] = Field(
        "closed", description="Mean interference from the closed forms or from Campbell integrals."
    )
    li_mode: Literal["gamma", "mean"] = Field(
        "gamma", description="Integrate the residual LI gain over its law or replace it by its mean."
    )
    csi_mode: Literal["estimated", "perfect"] = Field("estimated", description="Direct-link CSI quality.")
    perfect_li: bool = Field(False, description="Cancel loop interference perfectly.")


InterferenceKind = Literal["f1_bs_to_ue", "f2_ue_to_bs", "f3_bs_to_bs", "f4_ue_to_ue"]


class ExclusionDensity(BaseModel):
    """
    Spatial density of one interferer class around its victim.

    f1, f2: λ_b·1{r > cutoff}; f3, f4: λ_b(1 - exp(-πλ_b r²))·1{r > cutoff}.
    For f2 the cutoff is the interferer's own serving distance R.
    """
    model_config = ConfigDict(frozen=True)

    kind: InterferenceKind
    cutoff: float = Field(..., ge=0)
    lambda_b: float = Field(..., gt=0)

    def density(self, r):
        r = np.asarray(r, dtype=float)
        value = np.where(r > self.cutoff, self.lambda_b, 0.0)
        if self.kind in ("f3_bs_to_bs", "f4_ue_to_ue"):
            value = value * -np.expm1(-np.pi * self.lambda_b * r ** 2)
        return value
