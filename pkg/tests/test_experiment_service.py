from pathlib import Path

import pytest
from testfixtures import TempDirectory

import app.services.experiment_service as experiment_service
from app.config.experiment import ExperimentConfig, load
from app.exceptions import ConfigValidationError, ModelDomainError, QuadratureError
from app.models.results import CurvePoint, SweepSpec
from app.services.channel_estimation import build_pilot_budget
from app.services.experiment_service import (
    PRESETS,
    build_curve,
    compare_engines,
    evaluate_point,
    headline_gain,
    locate_interior_maximum,
    point_configs,
    preset_specs,
    read_curve,
    resolve_grid,
    run_sweep,
    write_curve,
)

FAST = {
    "quad_rel_tol": 1e-4,
    "quad_gamma_nodes": 8,
    "quad_t_nodes": 6,
    "quad_li_nodes": 4,
    "quad_nesting_tol": 5e-3,
}


def make_curve(points, variable="P", abscissa=None, engines=None):
    abscissa = abscissa or sorted({p.x for p in points})
    engines = engines or sorted({p.engine for p in points})
    spec = SweepSpec(name="hand_made", variable=variable, grid=abscissa, engines=engines)
    return build_curve(spec, ExperimentConfig(), abscissa, points)


def point(index, x, engine, **values):
    return CurvePoint(index=index, x=x, engine=engine, feasible=values.pop("feasible", True), **values)


def test_resolve_grid_converts_units():
    spec = SweepSpec(variable="P", grid=["30 dBm", 0.5], engines=["analytic_mean"])
    assert resolve_grid(spec) == pytest.approx([1.0, 0.5])
    with pytest.raises(ConfigValidationError):
        resolve_grid(SweepSpec(variable="N", grid=[2.5], engines=["analytic_mean"]))


def test_le_sweep_moves_the_direct_pilots():
    spec = SweepSpec(variable="Le", grid=[100, 200], engines=["analytic_mean"])
    abscissa, configs = point_configs(spec, ExperimentConfig())
    assert abscissa == [100.0, 200.0]
    assert [(c.Le, c.Ld, c.L_LI) for c in configs] == [(100, 80, 20), (200, 180, 20)]


def test_invalid_grid_points_are_reported_together():
    spec = SweepSpec(variable="kappa", grid=[-1.0, 0.5, -2.0], engines=["analytic_mean"])
    with pytest.raises(ConfigValidationError) as info:
        point_configs(spec, ExperimentConfig())
    issues = info.value.issues
    assert any(issue.startswith("grid[0] kappa=-1") for issue in issues)
    assert any(issue.startswith("grid[2] kappa=-2") for issue in issues)
    assert not any(issue.startswith("grid[1]") for issue in issues)


def test_exhausted_budget_marks_point_infeasible():
    config = load(overrides={"N": 20, "Le": 60, "Ld": 40})
    result = evaluate_point(config, 3, 20.0, "analytic_mean", ["outage", "rate"])
    assert not result.feasible
    assert "pilot budget exhausted" in result.note
    assert result.p_dl is None and result.rate is None


def test_failed_integral_is_recorded_in_note(monkeypatch):
    def failing_outage(*args, **kwargs):
        raise QuadratureError("outer integral did not converge", error_estimate=0.1)

    monkeypatch.setattr(experiment_service, "outage", failing_outage)
    result = evaluate_point(ExperimentConfig(), 0, 1.0, "analytic_exact", ["outage"])
    assert result.feasible
    assert result.note.startswith("quadrature failed")
    assert result.p_dl is None


def test_domain_error_is_recorded_in_note_and_the_sweep_goes_on(monkeypatch):
    def failing_outage(*args, **kwargs):
        raise ModelDomainError("marcum_q1 needs finite arguments")

    monkeypatch.setattr(experiment_service, "outage", failing_outage)
    result = evaluate_point(ExperimentConfig(), 0, 1.0, "analytic_exact", ["outage"])
    assert result.feasible
    assert result.note.startswith("evaluation failed")
    assert result.p_dl is None

    spec = SweepSpec(name="failing", variable="theta", grid=[0.1, 1.0], engines=["analytic_exact"], metrics=["outage"])
    curve = run_sweep(spec, load(overrides={"N": 2, **FAST}))
    assert len(curve.points) == 2
    assert all(p.note.startswith("evaluation failed") for p in curve.points)


def test_perfect_csi_point_is_infeasible_without_direct_pilots():
    config = load(overrides={"N": 20, "Le": 60, "Ld": 40, "csi_mode": "perfect"})
    result = evaluate_point(config, 0, 20.0, "analytic_mean", ["outage"])
    assert not result.feasible
    assert "pilot budget exhausted" in result.note


def test_monte_carlo_point_with_trial_dump():
    config = load(overrides={"N": 2, "n_trials": 1000})
    with TempDirectory() as d:
        result = evaluate_point(config, 4, 2.0, "monte_carlo", ["outage", "rate"], dump_dir=d.path)
        assert (Path(d.path) / "trials_004.csv").is_file()
    assert result.feasible
    assert 0.0 <= result.p_dl <= 1.0 and 0.0 <= result.p_ul <= 1.0
    assert result.p_dl_err >= 0
    assert result.rate > 0


def test_singleton_sweep_matches_a_direct_evaluation():
    config = load(overrides={"N": 2, **FAST})
    spec = SweepSpec(name="single", variable="theta", grid=["-20 dB"], engines=["analytic_mean"], metrics=["outage"])
    curve = run_sweep(spec, config)
    assert curve.abscissa == pytest.approx([0.01])
    assert len(curve.points) == 1
    _, configs = point_configs(spec, config)
    direct = evaluate_point(configs[0], 0, curve.abscissa[0], "analytic_mean", ["outage"])
    assert curve.points[0].p_dl == pytest.approx(direct.p_dl)
    assert curve.points[0].p_ul == pytest.approx(direct.p_ul)
    assert curve.provenance.base_seed == config.base_seed
    assert curve.provenance.sweep["name"] == "single"


def test_identical_analytic_engines_compare_in_documentation_mode():
    points = []
    for index, x in enumerate((1.0, 2.0)):
        for engine in ("analytic_exact", "analytic_mean"):
            points.append(point(index, x, engine, p_dl=0.2 * x, p_ul=0.1 * x, rate=1e8))
    report = compare_engines(make_curve(points))
    assert report.mode == "documentation"
    assert report.reference == "analytic_exact"
    assert report.max_gap_p_dl == 0.0
    assert report.max_rel_gap_rate == 0.0
    assert report.passed is None


def test_acceptance_against_the_simulator():
    points = [
        point(0, 1.0, "analytic_exact", p_dl=0.30, p_ul=0.40),
        point(0, 1.0, "monte_carlo", p_dl=0.31, p_ul=0.41, p_dl_err=0.001, p_ul_err=0.001),
        point(1, 2.0, "analytic_exact", p_dl=0.20, p_ul=0.30),
        point(1, 2.0, "monte_carlo", p_dl=0.25, p_ul=0.30, p_dl_err=0.001, p_ul_err=0.001),
    ]
    report = compare_engines(make_curve(points))
    assert report.mode == "acceptance"
    assert report.reference == "monte_carlo"
    assert report.gaps[0].passed is True
    assert report.gaps[1].passed is False
    assert report.gaps[1].tolerance_p == pytest.approx(0.02)
    assert report.passed is False


def test_wide_simulator_error_widens_the_tolerance():
    points = [
        point(0, 1.0, "analytic_mean", p_dl=0.30, p_ul=0.30),
        point(0, 1.0, "monte_carlo", p_dl=0.33, p_ul=0.30, p_dl_err=0.02, p_ul_err=0.01),
    ]
    report = compare_engines(make_curve(points))
    assert report.gaps[0].tolerance_p == pytest.approx(0.06)
    assert report.passed is True


def test_comparison_errors():
    single = make_curve([point(0, 1.0, "analytic_mean", p_dl=0.1)])
    with pytest.raises(ModelDomainError):
        compare_engines(single)
    with pytest.raises(ModelDomainError):
        compare_engines(single, "analytic_mean", "monte_carlo")
    mismatched = make_curve([
        point(0, 1.0, "analytic_mean", p_dl=0.1),
        point(0, 1.0, "monte_carlo", feasible=False),
    ])
    with pytest.raises(ModelDomainError):
        compare_engines(mismatched)


def test_interior_maximum_and_headline_gain():
    rates = {1: 1.0, 10: 3.0, 20: 2.5, 30: 2.0}
    points = [point(i, float(n), "analytic_mean", rate=r) for i, (n, r) in enumerate(rates.items())]
    curve = make_curve(points, variable="N")
    assert locate_interior_maximum(curve, "analytic_mean") == (10.0, 3.0, True)
    assert headline_gain(curve, "analytic_mean") == pytest.approx(2.5)
    with pytest.raises(ModelDomainError):
        headline_gain(curve, "analytic_mean", n_ports=25)
    with pytest.raises(ModelDomainError):
        locate_interior_maximum(curve, "monte_carlo")


def test_presets():
    assert set(PRESETS) == {"outage_power", "rate_density", "rate_ports", "voltage_gradient"}
    outage_power = preset_specs("outage_power")
    assert len(outage_power) == 6
    assert all(len(spec.grid) == 11 and spec.metrics == ["outage"] for spec in outage_power)
    assert outage_power[0].engines == ["analytic_exact", "monte_carlo"]
    rate_ports = {spec.name: spec for spec in preset_specs("rate_ports", ["analytic_exact"])}
    assert rate_ports["rate_ports_Le50"].overrides["Ld"] == 30
    assert rate_ports["rate_ports_perfect"].engines == ["analytic_exact"]
    assert len(preset_specs("rate_density")[0].grid) == 13
    with pytest.raises(ModelDomainError):
        preset_specs("everything")


def test_voltage_gradient_presets_leave_room_for_direct_pilots():
    for spec in preset_specs("voltage_gradient"):
        _, configs = point_configs(spec, ExperimentConfig())
        feasible = [
            c.N for c in configs
            if build_pilot_budget(c.network_params(), c.fa_geometry(), allow_infeasible=True).Lambda >= 1
        ]
        assert max(feasible) >= 20, spec.name


def test_curve_files_round_trip():
    points = [
        point(0, 1.0, "analytic_mean", p_dl=0.25, p_ul=0.5, rate=1.5e8, p_dl_err=1e-4),
        point(0, 1.0, "monte_carlo", p_dl=0.26, p_ul=0.49, p_dl_err=0.004, p_ul_err=0.004),
        point(1, 2.0, "analytic_mean", feasible=False, note="pilot budget exhausted"),
        point(1, 2.0, "monte_carlo", feasible=False, note="pilot budget exhausted"),
    ]
    curve = make_curve(points)
    with TempDirectory() as d:
        csv_path, sidecar = write_curve(curve, d.getpath("curves"))
        assert csv_path.name == "hand_made.csv"
        assert sidecar.name == "hand_made.provenance.json"
        loaded = read_curve(csv_path)
    assert loaded.points == curve.points
    assert loaded.abscissa == curve.abscissa
    assert loaded.provenance == curve.provenance


def test_read_curve_needs_the_sidecar():
    with TempDirectory() as d:
        path = d.write("lonely.csv", "index,P\n", encoding="utf-8")
        with pytest.raises(ModelDomainError):
            read_curve(path)
