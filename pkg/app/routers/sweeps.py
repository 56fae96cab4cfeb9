import logging
from typing import Any, Dict, Optional

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from app.config.experiment import load
from app.exceptions import DOMAIN_ERRORS, ConfigValidationError
from app.models.results import ComparisonReport, Engine, PerfCurve, SweepSpec
from app.services.experiment_service import compare_engines, run_sweep

router = APIRouter(
    prefix="/sweeps",
    tags=["sweeps"],
)

logger = logging.getLogger(__name__)


class SweepRequest(BaseModel):
    spec: SweepSpec = Field(..., description="Variable, grid and engines of the curve")
    config: Dict[str, Any] = Field(
        default_factory=dict,
        description="Config values on top of the defaults; units allowed, e.g. {'P': '30 dBm'}",
    )


class CompareRequest(BaseModel):
    curve: PerfCurve = Field(..., description="A curve returned by POST /sweeps")
    reference: Optional[Engine] = Field(None, description="Reference engine; monte_carlo when present")
    candidate: Optional[Engine] = Field(None, description="Engine compared against the reference")


def _domain_error(e: Exception) -> HTTPException:
    if isinstance(e, ConfigValidationError):
        return HTTPException(status_code=422, detail={"issues": e.issues})
    return HTTPException(status_code=422, detail=str(e))


@router.post("", response_model=PerfCurve)
def create_sweep(request: SweepRequest) -> PerfCurve:
    """
    Evaluate a sweep and return the curve with its provenance.

    Infeasible grid points come back marked, not dropped.
    """
    try:
        logger.info(f"Sweep request '{request.spec.name}' over {request.spec.variable}")
        config = load(overrides=request.config)
        return run_sweep(request.spec, config)
    except DOMAIN_ERRORS as e:
        logger.error(f"Sweep '{request.spec.name}' rejected: {e}")
        raise _domain_error(e)
    except Exception as e:
        logger.error(f"Error in create_sweep endpoint: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/compare", response_model=ComparisonReport)
def compare_sweep(request: CompareRequest) -> ComparisonReport:
    """Pointwise engine gaps; pass/fail only when the simulator is one of the two engines."""
    try:
        return compare_engines(request.curve, request.reference, request.candidate)
    except DOMAIN_ERRORS as e:
        logger.error(f"Comparison of '{request.curve.name}' rejected: {e}")
        raise _domain_error(e)
    except Exception as e:
        logger.error(f"Error in compare_sweep endpoint: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))
