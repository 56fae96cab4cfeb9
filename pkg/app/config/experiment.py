"""
Experiment configuration: defaults ← config file ← FAFD_* environment ← overrides.

Every quantity is stored linear and in SI units. String values may carry a
unit (dBm, dB, MHz, cm, ...) and are converted when the config is parsed.
"""
import logging
import math
import os
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Union

from dotenv import dotenv_values
from pydantic import ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.exceptions import ConfigValidationError, ModelDomainError
from app.models.params import FluidAntennaGeometry, ModelOptions, NetworkParams, QuadratureSpec
from app.models.results import TrialConfig
from app.services.channel_estimation import build_pilot_budget
from app.services.network_geometry import switching_channel_uses

logger = logging.getLogger(__name__)

ENV_PREFIX = "FAFD_"

QuantityKind = Literal["power", "ratio", "length", "frequency", "time", "voltage", "density", "count", "plain"]

# unit -> (kind, conversion to SI linear)
UNITS = {
    "dBm": ("power", lambda v: 10.0 ** ((v - 30.0) / 10.0)),
    "dBW": ("power", lambda v: 10.0 ** (v / 10.0)),
    "W": ("power", lambda v: v),
    "mW": ("power", lambda v: v * 1e-3),
    "dB": ("ratio", lambda v: 10.0 ** (v / 10.0)),
    "m": ("length", lambda v: v),
    "cm": ("length", lambda v: v * 1e-2),
    "mm": ("length", lambda v: v * 1e-3),
    "Hz": ("frequency", lambda v: v),
    "kHz": ("frequency", lambda v: v * 1e3),
    "MHz": ("frequency", lambda v: v * 1e6),
    "GHz": ("frequency", lambda v: v * 1e9),
    "s": ("time", lambda v: v),
    "ms": ("time", lambda v: v * 1e-3),
    "us": ("time", lambda v: v * 1e-6),
    "V": ("voltage", lambda v: v),
    "/m2": ("density", lambda v: v),
}

FIELD_UNITS: Dict[str, QuantityKind] = {
    "lambda_b": "density",
    "lambda_u": "density",
    "P": "power",
    "P_m": "power",
    "N0": "power",
    "omega": "ratio",
    "theta": "ratio",
    "v_LI": "ratio",
    "b_b": "length",
    "b_u": "length",
    "wavelength": "length",
    "r_sim": "length",
    "Bc": "frequency",
    "Tc": "time",
    "q_charge": "voltage",
    "delta_phi": "voltage",
    "N": "count",
    "Le": "count",
    "Ld": "count",
    "L_LI": "count",
    "Lc": "count",
    "n_trials": "count",
    "base_seed": "count",
}

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")

NETWORK_FIELDS = tuple(NetworkParams.model_fields)
GEOMETRY_FIELDS = tuple(FluidAntennaGeometry.model_fields)
OPTION_FIELDS = tuple(ModelOptions.model_fields)
QUADRATURE_PREFIX = "quad_"

# Human-readable forms written above each key by emit_defaults.
DISPLAY_FORMS = {
    "lambda_b": "5e-5 /m2",
    "a": "4",
    "P": "30 dBm",
    "P_m": "30 dBm",
    "omega": "-40 dB",
    "epsilon": "0.8",
    "N0": "1e-5",
    "sigma2": "sigma = 1",
    "v_LI": "0.001",
    "Bc": "100 MHz",
    "Tc": "50 ms",
    "theta": "-20 dB",
    "N": "15",
    "kappa": "0.2",
    "wavelength": "0.06 cm",
    "q_charge": "0.07 V",
    "viscosity": "0.002",
    "DL_ratio": "D/L = 5",
    "delta_phi": "10 V",
}


def parse_quantity(value: Union[str, float, int], kind: QuantityKind = "plain") -> float:
    """
    Convert "30 dBm", "-40 dB", "0.06 cm", "100 MHz" or a bare number to a
    linear SI float. A unit that does not fit the expected kind is rejected.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    match = _NUMBER.match(str(value))
    if not match:
        raise ModelDomainError(f"cannot read a number from {value!r}")
    number, unit = float(match.group(1)), match.group(2)
    if not unit:
        return number
    if unit not in UNITS:
        raise ModelDomainError(f"unknown unit {unit!r} in {value!r}")
    unit_kind, convert = UNITS[unit]
    if kind != "plain" and unit_kind != kind:
        raise ModelDomainError(f"{value!r} is a {unit_kind}, expected a {kind}")
    return convert(number)


class ExperimentConfig(BaseSettings):
    """Flat experiment configuration; see emit_defaults for every key."""
    model_config = SettingsConfigDict(env_prefix=ENV_PREFIX, extra="forbid", frozen=True)

    # Network
    lambda_b: float = 5e-5
    lambda_u: float = 5e-4
    a: float = 4.0
    P: float = 1.0
    P_m: float = 1.0
    omega: float = 1e-4
    epsilon: float = 0.8
    N0: float = 1e-5
    sigma2: float = 1.0
    b_b: float = 1.0
    b_u: float = 1.0
    v_LI: float = 1e-3
    mu_nakagami: float = 1.0
    Bc: float = 1e8
    Tc: float = 0.05
    Lc: Optional[float] = 1e4
    Le: int = 200
    Ld: int = 180
    L_LI: int = 20
    w_split: float = 0.5
    theta: float = 0.01

    # Fluid antenna
    N: int = 15
    kappa: float = 0.2
    wavelength: float = 6e-4
    q_charge: float = 0.07
    viscosity: float = 0.002
    DL_ratio: float = 5.0
    delta_phi: float = 10.0

    # Simulation
    n_trials: int = 10_000
    base_seed: int = 2024
    r_sim: Optional[float] = None

    # Model switches
    ce_convention: Literal["orthogonal", "inflated"] = "inflated"
    sim_ce_convention: Literal["orthogonal", "inflated"] = "orthogonal"
    interference_coupling: Literal["per_port", "common"] = "per_port"
    mean_form: Literal["closed", "campbell"] = "closed"
    li_mode: Literal["gamma", "mean"] = "gamma"
    csi_mode: Literal["estimated", "perfect"] = "estimated"
    perfect_li: bool = False

    # Analytical engine
    quad_rel_tol: float = 1e-6
    quad_gamma_nodes: int = 16
    quad_t_nodes: int = 8
    quad_li_nodes: int = 6
    quad_nesting_tol: float = 2e-3

    @field_validator("*", mode="before")
    @classmethod
    def _parse_units(cls, value: Any, info) -> Any:
        if not isinstance(value, str):
            return value
        if value.strip() == "" and info.field_name in ("Lc", "r_sim"):
            return None
        kind = FIELD_UNITS.get(info.field_name)
        if kind is None:
            annotation = cls.model_fields[info.field_name].annotation
            if annotation is float or annotation == Optional[float]:
                return parse_quantity(value)
            return value
        number = parse_quantity(value, kind)
        if kind == "count":
            if not float(number).is_integer():
                raise ValueError(f"{value!r} is not a whole number")
            return int(number)
        return number

    def network_params(self) -> NetworkParams:
        return NetworkParams(**{name: getattr(self, name) for name in NETWORK_FIELDS})

    def fa_geometry(self) -> FluidAntennaGeometry:
        return FluidAntennaGeometry(**{name: getattr(self, name) for name in GEOMETRY_FIELDS})

    def model_options(self) -> ModelOptions:
        return ModelOptions(**{name: getattr(self, name) for name in OPTION_FIELDS})

    def quadrature_spec(self) -> QuadratureSpec:
        return QuadratureSpec(
            rel_tol=self.quad_rel_tol,
            gamma_nodes=self.quad_gamma_nodes,
            t_nodes=self.quad_t_nodes,
            li_nodes=self.quad_li_nodes,
            nesting_tol=self.quad_nesting_tol,
        )

    def trial_config(self, budget) -> TrialConfig:
        return TrialConfig(
            params=self.network_params(),
            fa=self.fa_geometry(),
            budget=budget,
            n_trials=self.n_trials,
            base_seed=self.base_seed,
            r_sim=self.r_sim,
            options=self.model_options(),
        )


def _canonical_key(key: str) -> str:
    key = key.strip()
    if key.upper().startswith(ENV_PREFIX):
        key = key[len(ENV_PREFIX):]
    lookup = {name.lower(): name for name in ExperimentConfig.model_fields}
    return lookup.get(key.lower(), key)


def _normalize(values: Mapping[str, Any]) -> Dict[str, Any]:
    return {_canonical_key(key): value for key, value in values.items() if value is not None}


def parse_assignments(assignments: Iterable[str]) -> Dict[str, str]:
    """["P=30 dBm", "N=10"] -> {"P": "30 dBm", "N": "10"}."""
    values = {}
    issues = []
    for item in assignments:
        if "=" not in item:
            issues.append(f"override {item!r} is not KEY=VALUE")
            continue
        key, value = item.split("=", 1)
        values[_canonical_key(key)] = value.strip()
    if issues:
        raise ConfigValidationError(issues)
    return values


def _format_errors(error: ValidationError, prefix: str = "") -> List[str]:
    issues = []
    for entry in error.errors():
        location = ".".join(str(part) for part in entry["loc"]) or "config"
        issues.append(f"{prefix}{location}: {entry['msg']}")
    return issues


def _build(values: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        issues = _format_errors(e)
        logger.error(f"Configuration rejected with {len(issues)} issues")
        raise ConfigValidationError(issues) from e


def load(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Union[Mapping[str, Any], Iterable[str]]] = None,
) -> ExperimentConfig:
    """
    Resolve the layered configuration.

    Keys in the file and in overrides are field names, case-insensitive, with
    or without the FAFD_ prefix. Environment variables need the prefix.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigValidationError([f"config file {path} not found"])
        values.update(_normalize(dotenv_values(path)))
        logger.info(f"Loaded {len(values)} config values from {path}")
    env = {key: value for key, value in os.environ.items() if key.upper().startswith(ENV_PREFIX)}
    values.update(_normalize(env))
    if overrides:
        if isinstance(overrides, Mapping):
            values.update(_normalize(overrides))
        else:
            values.update(parse_assignments(overrides))
    return _build(values)


def with_overrides(config: ExperimentConfig, overrides: Mapping[str, Any]) -> ExperimentConfig:
    """A copy of config with some fields replaced, parsed and validated like a fresh load."""
    return _build({**config.model_dump(), **_normalize(overrides)})


def validate_config(config: ExperimentConfig) -> List[str]:
    """
    Build every model the engines need and collect all violations.

    Raises ConfigValidationError with the full list; returns the list of
    warnings (for example a pilot budget the estimated-CSI mode cannot meet)
    when the config is usable.
    """
    issues: List[str] = []
    built = {}
    for name, builder in (
        ("network", config.network_params),
        ("fluid_antenna", config.fa_geometry),
        ("options", config.model_options),
        ("quadrature", config.quadrature_spec),
    ):
        try:
            built[name] = builder()
        except ValidationError as e:
            issues.extend(_format_errors(e, prefix=f"{name}."))
    if config.n_trials < 1:
        issues.append("n_trials: must be at least 1")
    if config.base_seed < 0:
        issues.append("base_seed: must be nonnegative")
    if config.r_sim is not None and config.r_sim <= 0:
        issues.append("r_sim: must be positive")
    if not issues and built["options"].csi_mode == "estimated":
        budget = build_pilot_budget(built["network"], built["fluid_antenna"], allow_infeasible=True)
        if budget.Lambda_b < 1 or budget.Lambda_u < 1:
            issues.append(
                f"L_LI, w_split: loop-interference pilots split into Λ_b={budget.Lambda_b}, "
                f"Λ_u={budget.Lambda_u}; estimated CSI needs at least one each"
            )
    if issues:
        logger.error(f"Configuration rejected with {len(issues)} issues")
        raise ConfigValidationError(issues)

    warnings = []
    l_s = switching_channel_uses(built["fluid_antenna"], config.Bc)
    if config.Ld <= l_s:
        warnings.append(f"Ld = {config.Ld} does not exceed the switching overhead l_s = {l_s:.2f}")
    elif (config.Ld - math.ceil(l_s - 1e-9)) // config.N < 1:
        warnings.append(f"fewer than one direct pilot per port for N = {config.N}")
    for warning in warnings:
        logger.warning(warning)
    return warnings


def _emit_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_defaults(config: Optional[ExperimentConfig] = None) -> str:
    """
    Config-file text for every key, canonical SI values written with repr so
    that loading the text reproduces the values exactly.
    """
    config = config or ExperimentConfig.model_construct()
    lines = ["# Fluid-antenna full-duplex network: simulation parameters (linear SI units)", ""]
    for name in ExperimentConfig.model_fields:
        value = getattr(config, name)
        if name in DISPLAY_FORMS:
            lines.append(f"# {name}: {DISPLAY_FORMS[name]}")
        if value is None:
            lines.append(f"# {name} unset: automatic")
            continue
        lines.append(f"{name}={_emit_value(value)}")
    return "\n".join(lines) + "\n"
