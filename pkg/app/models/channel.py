"""Array-carrying models for channel draws and sampled base-station fields."""
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class CorrelationProfile(BaseModel):
    """Autocorrelation of every port with the reference port (port 1)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mu: np.ndarray = Field(..., description="N coefficients; mu[0] = 0 for the reference port.")

    @property
    def n_ports(self) -> int:
        return int(self.mu.shape[0])


class ChannelDraw(BaseModel):
    """One coherence block: true and estimated channels of all ports plus residual LI gains."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    g: np.ndarray
    g_hat: np.ndarray
    e: np.ndarray
    h_LI_ue: float = Field(..., ge=0)
    h_LI_bs: float = Field(..., ge=0)


class RiceParams(BaseModel):
    """
    Conditional law of the estimated amplitudes given the reference port.

    Given |ĝ_1| = τ, |ĝ_j| is Rice with noncentrality line_coeffs[j]·τ and
    per-dimension scatter sigma_tilde2[j] / 2.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    line_coeffs: np.ndarray
    sigma_tilde2: np.ndarray

    def nu(self, tau_1: float) -> np.ndarray:
        return self.line_coeffs * tau_1


class BsField(BaseModel):
    """Base stations of one PPP draw inside a disc centred on the typical UE."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    positions: np.ndarray = Field(..., description="(n, 2) coordinates in m.")
    r_sim: float = Field(..., gt=0)
    origin_serving_index: Optional[int] = Field(None, description="Index of the BS nearest to the origin.")

    @property
    def size(self) -> int:
        return int(self.positions.shape[0])
