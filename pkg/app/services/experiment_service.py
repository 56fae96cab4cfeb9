"""
Sweep orchestration, engine comparison, sweep presets and curve files.
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd

from app.config.experiment import FIELD_UNITS, ExperimentConfig, parse_quantity, validate_config, with_overrides
from app.config.settings import CODE_VERSION
from app.database.variance_store import parameter_hash
from app.exceptions import (
    ConfigValidationError,
    InsufficientTrialsError,
    ModelDomainError,
    PilotBudgetExhaustedError,
    QuadratureError,
)
from app.models.results import (
    ComparisonReport,
    CurvePoint,
    Engine,
    PerfCurve,
    PointGap,
    Provenance,
    SweepSpec,
    SweepVariable,
)
from app.services.channel_estimation import build_pilot_budget
from app.services.monte_carlo import dump_trials, empirical_outage, empirical_sum_rate, run_trials
from app.services.performance_analysis import outage, sum_rate_with_error

logger = logging.getLogger(__name__)

OUTAGE_TOLERANCE = 0.02
RATE_TOLERANCE = 0.05
SIGMA_BAND = 3.0

ANALYTIC_ENGINES = {"analytic_exact": "exact", "analytic_mean": "mean"}


def config_hash(config: ExperimentConfig) -> str:
    return parameter_hash(config.model_dump())


def resolve_grid(spec: SweepSpec) -> List[float]:
    """Grid values in linear SI units; whole numbers for count variables."""
    kind = FIELD_UNITS.get(spec.variable, "plain")
    values = [parse_quantity(v, kind) for v in spec.grid]
    if kind == "count":
        if any(not float(v).is_integer() for v in values):
            raise ConfigValidationError([f"grid of {spec.variable} must hold whole numbers"])
        values = [float(int(v)) for v in values]
    return values


def point_overrides(variable: SweepVariable, x: float, config: ExperimentConfig) -> Dict[str, Any]:
    """Fields to change for one grid value; an Le step moves Ld and keeps L_LI."""
    if variable == "Le":
        return {"Le": int(x), "Ld": int(x) - config.L_LI}
    if variable == "N":
        return {"N": int(x)}
    return {variable: x}


def point_configs(spec: SweepSpec, config: ExperimentConfig) -> Tuple[List[float], List[ExperimentConfig]]:
    """
    Validate every grid point before any computation; all problems are
    reported together.
    """
    base = with_overrides(config, spec.overrides) if spec.overrides else config
    abscissa = resolve_grid(spec)
    configs, issues = [], []
    for index, x in enumerate(abscissa):
        try:
            point = with_overrides(base, point_overrides(spec.variable, x, base))
            validate_config(point)
            configs.append(point)
        except ConfigValidationError as e:
            issues.extend(f"grid[{index}] {spec.variable}={x:g}: {issue}" for issue in e.issues)
    if issues:
        raise ConfigValidationError(issues)
    return abscissa, configs


def evaluate_point(
    config: ExperimentConfig,
    index: int,
    x: float,
    engine: Engine,
    metrics: List[str],
    dump_dir: Optional[str] = None,
) -> CurvePoint:
    """
    One engine at one grid point. The point is infeasible exactly when fewer
    than one direct pilot per port is left; a failed integral or a numerical
    domain error is recorded in note.
    """
    params, fa = config.network_params(), config.fa_geometry()
    options = config.model_options()
    budget = build_pilot_budget(params, fa, allow_infeasible=True)
    if budget.Lambda < 1:
        note = f"pilot budget exhausted (Λ={budget.Lambda}, Ld={budget.Ld}, l_s={budget.l_s:.2f}, N={fa.N})"
        logger.warning(f"Point {index} ({x:g}) infeasible: {note}")
        return CurvePoint(index=index, x=x, engine=engine, feasible=False, note=note)

    values: Dict[str, Any] = {}
    try:
        if engine == "monte_carlo":
            trial_config = config.trial_config(budget)
            outcomes = run_trials(trial_config)
            if dump_dir:
                dump_trials(outcomes, Path(dump_dir) / f"trials_{index:03d}.csv")
            if "outage" in metrics:
                p_dl, p_ul, stderr = empirical_outage(trial_config, outcomes=outcomes)
                values.update(p_dl=p_dl, p_ul=p_ul, p_dl_err=stderr, p_ul_err=stderr)
            if "rate" in metrics:
                rate, rate_err = empirical_sum_rate(trial_config, outcomes=outcomes)
                values.update(rate=rate, rate_err=rate_err)
        else:
            mode = ANALYTIC_ENGINES[engine]
            spec = config.quadrature_spec()
            if "outage" in metrics:
                dl = outage("DL", params.theta, params, fa, budget, spec, options, mode)
                ul = outage("UL", params.theta, params, fa, budget, spec, options, mode)
                values.update(
                    p_dl=dl.value, p_ul=ul.value,
                    p_dl_err=dl.quadrature_error_estimate, p_ul_err=ul.quadrature_error_estimate,
                )
            if "rate" in metrics:
                rate, rate_err = sum_rate_with_error(params, fa, budget, spec, options, mode)
                values.update(rate=rate, rate_err=rate_err)
    except QuadratureError as e:
        logger.error(f"Point {index} ({x:g}) with {engine} failed: {e}")
        return CurvePoint(index=index, x=x, engine=engine, feasible=True, note=f"quadrature failed: {e}")
    except (ModelDomainError, PilotBudgetExhaustedError, InsufficientTrialsError) as e:
        logger.error(f"Point {index} ({x:g}) with {engine} failed: {e}")
        return CurvePoint(index=index, x=x, engine=engine, feasible=True, note=f"evaluation failed: {e}")
    return CurvePoint(index=index, x=x, engine=engine, feasible=True, **values)


def build_curve(
    spec: SweepSpec,
    config: ExperimentConfig,
    abscissa: List[float],
    points: List[CurvePoint],
) -> PerfCurve:
    provenance = Provenance(
        config_hash=config_hash(config),
        base_seed=config.base_seed,
        code_version=CODE_VERSION,
        sweep=spec.model_dump(),
        config=config.model_dump(),
    )
    ordered = sorted(points, key=lambda p: (p.index, p.engine))
    return PerfCurve(name=spec.name, variable=spec.variable, abscissa=abscissa, points=ordered, provenance=provenance)


def run_sweep(spec: SweepSpec, config: ExperimentConfig, dump_dir: Optional[str] = None) -> PerfCurve:
    """
    Evaluate every (grid point, engine) pair and collect the curve.

    Points are validated up front, fanned out over the sweep graph and
    gathered in grid order. The curve is written when spec.output_path is set.
    """
    from app.graph.sweep_graph import invoke_sweep

    abscissa, configs = point_configs(spec, config)
    logger.info(f"Sweep '{spec.name}': {spec.variable} over {len(abscissa)} points with {', '.join(spec.engines)}")
    result = invoke_sweep(
        {
            "spec": spec,
            "config": with_overrides(config, spec.overrides) if spec.overrides else config,
            "abscissa": abscissa,
            "point_configs": configs,
            "dump_dir": dump_dir,
            "points": [],
        }
    )
    curve = result["curve"]
    if spec.output_path:
        write_curve(curve, spec.output_path)
    return curve


def _stderr(point: CurvePoint) -> float:
    return max(point.p_dl_err or 0.0, point.p_ul_err or 0.0)


def _gap(a: Optional[float], b: Optional[float]) -> Optional[float]:
    if a is None or b is None:
        return None
    return abs(a - b)


def compare_engines(
    curve: PerfCurve,
    reference: Optional[Engine] = None,
    candidate: Optional[Engine] = None,
    mode: Optional[Literal["acceptance", "documentation"]] = None,
) -> ComparisonReport:
    """
    Pointwise gaps between two engines of a curve.

    Against the simulator (acceptance) an outage gap passes within
    max(0.02, 3·stderr) and a rate within 5% relative. Two analytical engines
    are compared in documentation mode: gaps only, no verdict.
    """
    engines = curve.engines
    if reference is None or candidate is None:
        if len(engines) < 2:
            raise ModelDomainError(f"comparison needs two engines, curve has {engines}")
        if "monte_carlo" in engines:
            reference = reference or "monte_carlo"
            candidate = candidate or next(e for e in ("analytic_exact", "analytic_mean") if e in engines)
        else:
            reference, candidate = reference or "analytic_exact", candidate or "analytic_mean"
    for engine in (reference, candidate):
        if engine not in engines:
            raise ModelDomainError(f"engine {engine} not in curve (has {engines})")
    if mode is None:
        mode = "acceptance" if "monte_carlo" in (reference, candidate) and reference != candidate else "documentation"

    ref = {p.index: p for p in curve.series(reference)}
    cand = {p.index: p for p in curve.series(candidate)}
    if set(ref) != set(cand):
        raise ModelDomainError(f"{reference} and {candidate} cover different grid points")

    gaps = []
    for index in sorted(ref):
        r, c = ref[index], cand[index]
        if r.feasible != c.feasible:
            raise ModelDomainError(f"point {index} is feasible for only one engine")
        gap = PointGap(index=index, x=r.x)
        if r.feasible:
            gap.gap_p_dl = _gap(r.p_dl, c.p_dl)
            gap.gap_p_ul = _gap(r.p_ul, c.p_ul)
            if r.rate is not None and c.rate is not None and r.rate > 0:
                gap.rel_gap_rate = abs(c.rate - r.rate) / r.rate
            if mode == "acceptance":
                stderr = _stderr(r if r.engine == "monte_carlo" else c)
                gap.tolerance_p = max(OUTAGE_TOLERANCE, SIGMA_BAND * stderr)
                checks = [g <= gap.tolerance_p for g in (gap.gap_p_dl, gap.gap_p_ul) if g is not None]
                if gap.rel_gap_rate is not None:
                    checks.append(gap.rel_gap_rate <= RATE_TOLERANCE)
                gap.passed = all(checks)
        gaps.append(gap)

    def _max(values):
        values = [v for v in values if v is not None]
        return max(values) if values else None

    report = ComparisonReport(
        reference=reference,
        candidate=candidate,
        mode=mode,
        gaps=gaps,
        max_gap_p_dl=_max(g.gap_p_dl for g in gaps),
        max_gap_p_ul=_max(g.gap_p_ul for g in gaps),
        max_rel_gap_rate=_max(g.rel_gap_rate for g in gaps),
        passed=all(g.passed for g in gaps if g.passed is not None) if mode == "acceptance" else None,
    )
    logger.info(
        f"Compared {candidate} with {reference} on '{curve.name}': max outage gap "
        f"{_max([report.max_gap_p_dl, report.max_gap_p_ul])}, passed={report.passed}"
    )
    return report


def locate_interior_maximum(curve: PerfCurve, engine: Engine) -> Tuple[float, float, bool]:
    """(x*, rate*, interior) of the rate maximum over the feasible points of one engine."""
    points = [p for p in curve.series(engine) if p.feasible and p.rate is not None]
    if not points:
        raise ModelDomainError(f"no feasible rate values for {engine} in '{curve.name}'")
    best = max(points, key=lambda p: p.rate)
    interior = points[0].index < best.index < points[-1].index
    return best.x, best.rate, interior


def headline_gain(curve: PerfCurve, engine: Engine, n_ports: int = 20, baseline: int = 1) -> float:
    """rate(N = n_ports) / rate(N = baseline) on an N sweep."""
    if curve.variable != "N":
        raise ModelDomainError("headline gain needs a sweep over N")
    rates = {int(p.x): p.rate for p in curve.series(engine) if p.feasible and p.rate is not None}
    if n_ports not in rates or baseline not in rates or not rates[baseline] > 0:
        raise ModelDomainError(f"curve lacks feasible rates at N={n_ports} and N={baseline}")
    return rates[n_ports] / rates[baseline]


def _db_grid(start: float, stop: float, step: float) -> List[str]:
    return [f"{v:g} dBm" for v in np.arange(start, stop + 0.5 * step, step)]


def preset_specs(name: str, engines: Optional[List[Engine]] = None) -> List[SweepSpec]:
    """
    Named sweep families.

    outage_power: outage against P for N in {5, 10, 20} and for κ in {0.5, 1, 2} at N = 10.
    rate_density: rate against λ_b on a log grid for ε in {0.2, 0.5, 0.8}.
    rate_ports: rate against N for Le in {50, 100, 200} plus perfect CSI at Le = 200.
    voltage_gradient: outage and rate against N for Δφ in {3, 10, 100} V.
    """
    if name == "outage_power":
        engines = engines or ["analytic_exact", "monte_carlo"]
        grid = _db_grid(0.0, 50.0, 5.0)
        specs = [
            SweepSpec(name=f"outage_power_N{n}", variable="P", grid=grid, engines=engines, metrics=["outage"],
                      overrides={"N": n, "theta": "-20 dB", "epsilon": 0.8})
            for n in (5, 10, 20)
        ]
        specs += [
            SweepSpec(name=f"outage_power_kappa{k:g}", variable="P", grid=grid, engines=engines, metrics=["outage"],
                      overrides={"N": 10, "kappa": k, "theta": "-20 dB", "epsilon": 0.8})
            for k in (0.5, 1.0, 2.0)
        ]
        return specs
    if name == "rate_density":
        engines = engines or ["analytic_mean"]
        grid = [float(v) for v in 10.0 ** np.linspace(-5.0, -2.0, 13)]
        return [
            SweepSpec(name=f"rate_density_eps{eps:g}", variable="lambda_b", grid=grid, engines=engines, metrics=["rate"],
                      overrides={"epsilon": eps})
            for eps in (0.2, 0.5, 0.8)
        ]
    if name == "rate_ports":
        engines = engines or ["analytic_mean"]
        grid = [1, 2, 4, 6, 8, 10, 15, 20, 25, 30]
        specs = [
            SweepSpec(name=f"rate_ports_Le{le}", variable="N", grid=grid, engines=engines, metrics=["rate"],
                      overrides={"Le": le, "Ld": le - 20, "L_LI": 20})
            for le in (50, 100, 200)
        ]
        specs.append(SweepSpec(name="rate_ports_perfect", variable="N", grid=grid, engines=engines, metrics=["rate"],
                               overrides={"csi_mode": "perfect"}))
        return specs
    if name == "voltage_gradient":
        engines = engines or ["analytic_mean"]
        grid = [1] + list(range(5, 55, 5))
        return [
            SweepSpec(name=f"voltage_gradient_dphi{v:g}", variable="N", grid=grid, engines=engines,
                      overrides={"delta_phi": v})
            for v in (3.0, 10.0, 100.0)
        ]
    raise ModelDomainError(f"unknown preset {name!r}; choose one of {', '.join(PRESETS)}")


PRESETS = ("outage_power", "rate_density", "rate_ports", "voltage_gradient")


def _provenance_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".provenance.json")


def write_curve(curve: PerfCurve, path: Union[str, Path]) -> Tuple[Path, Path]:
    """Write the curve CSV and its provenance sidecar; returns both paths."""
    csv_path = Path(path)
    if csv_path.suffix != ".csv":
        csv_path = csv_path / f"{curve.name}.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    curve.to_frame().to_csv(csv_path, index=False)
    sidecar = _provenance_path(csv_path)
    sidecar.write_text(json.dumps(curve.provenance.model_dump(), sort_keys=True, indent=2) + "\n")
    logger.info(f"Wrote curve '{curve.name}' to {csv_path}")
    return csv_path, sidecar


def read_curve(path: Union[str, Path]) -> PerfCurve:
    """Rebuild a curve from its CSV and provenance sidecar."""
    csv_path = Path(path)
    sidecar = _provenance_path(csv_path)
    if not csv_path.is_file() or not sidecar.is_file():
        raise ModelDomainError(f"{csv_path} or its provenance sidecar is missing")
    provenance = Provenance(**json.loads(sidecar.read_text()))
    spec = SweepSpec(**provenance.sweep)
    frame = pd.read_csv(csv_path)
    points = []
    for row in frame.to_dict(orient="records"):
        clean = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
        points.append(CurvePoint(
            index=int(clean["index"]),
            x=float(clean[spec.variable]),
            engine=clean["engine"],
            feasible=bool(clean["feasible"]),
            note=clean.get("note") or "",
            **{k: clean.get(k) for k in ("p_dl", "p_ul", "rate", "p_dl_err", "p_ul_err", "rate_err")},
        ))
    abscissa = sorted({(p.index, p.x) for p in points})
    return PerfCurve(
        name=spec.name,
        variable=spec.variable,
        abscissa=[x for _, x in abscissa],
        points=points,
        provenance=provenance,
    )
