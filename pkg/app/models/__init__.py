"""Pydantic domain models shared by the simulation and analysis services."""
from app.models.params import (
    AccuracySpec,
    ExclusionDensity,
    FluidAntennaGeometry,
    InterferenceKind,
    ModelOptions,
    NetworkParams,
    PilotBudget,
    QuadratureSpec,
)
from app.models.channel import BsField, ChannelDraw, CorrelationProfile, RiceParams
from app.models.results import (
    ComparisonReport,
    CurvePoint,
    InterferenceStats,
    OracleCheck,
    OracleReport,
    OutageResult,
    PerfCurve,
    PointGap,
    Provenance,
    SweepSpec,
    TrialConfig,
    TrialOutcome,
)

__all__ = [
    "AccuracySpec",
    "BsField",
    "ChannelDraw",
    "ComparisonReport",
    "CorrelationProfile",
    "CurvePoint",
    "ExclusionDensity",
    "FluidAntennaGeometry",
    "InterferenceKind",
    "InterferenceStats",
    "ModelOptions",
    "NetworkParams",
    "OracleCheck",
    "OracleReport",
    "OutageResult",
    "PerfCurve",
    "PilotBudget",
    "PointGap",
    "Provenance",
    "QuadratureSpec",
    "RiceParams",
    "SweepSpec",
    "TrialConfig",
    "TrialOutcome",
]
