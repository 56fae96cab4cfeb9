from pathlib import Path

import pytest
from testfixtures import TempDirectory

import app.cli as cli
from app.cli import EXIT_DOMAIN, EXIT_FAILED, EXIT_OK, main
from app.config.experiment import ExperimentConfig
from app.models.results import CurvePoint, SweepSpec
from app.services.experiment_service import build_curve, write_curve


@pytest.fixture(autouse=True)
def plain_output(monkeypatch):
    monkeypatch.setattr(cli, "colorama_init", lambda: None)


def written_curve(directory, candidate_p_dl):
    spec = SweepSpec(name="cli_curve", variable="P", grid=[1.0], engines=["analytic_exact", "monte_carlo"])
    points = [
        CurvePoint(index=0, x=1.0, engine="analytic_exact", feasible=True, p_dl=candidate_p_dl, p_ul=0.2),
        CurvePoint(index=0, x=1.0, engine="monte_carlo", feasible=True, p_dl=0.2, p_ul=0.2, p_dl_err=0.001, p_ul_err=0.001),
    ]
    csv_path, _ = write_curve(build_curve(spec, ExperimentConfig(), [1.0], points), directory)
    return str(csv_path)


def test_defaults_to_stdout(capsys):
    assert main(["defaults"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "P=1.0" in out
    assert "# omega: -40 dB" in out


def test_defaults_file_validates(capsys):
    with TempDirectory() as d:
        path = d.getpath("defaults.env")
        assert main(["defaults", "--output", path]) == EXIT_OK
        assert main(["validate-config", "--config", path]) == EXIT_OK
    assert "configuration valid" in capsys.readouterr().out


def test_validate_reports_pilot_warning(capsys):
    assert main(["validate-config", "--set", "Le=60", "--set", "Ld=40", "--set", "N=20"]) == EXIT_OK
    assert "warning" in capsys.readouterr().out


@pytest.mark.parametrize("override", ["P=5 cm", "Le=100", "nonsense"])
def test_bad_override_exits_with_domain_code(capsys, override):
    assert main(["validate-config", "--set", override]) == EXIT_DOMAIN
    assert "configuration rejected" in capsys.readouterr().err


def test_sweep_needs_a_grid(capsys):
    assert main(["sweep", "--variable", "P"]) == EXIT_DOMAIN
    assert "--preset" in capsys.readouterr().err


def test_sweep_with_infeasible_points(capsys):
    with TempDirectory() as d:
        code = main([
            "sweep", "--variable", "Le", "--grid", "60", "--set", "N=20",
            "--engines", "analytic_mean", "--name", "tiny", "--output", d.path,
        ])
        assert code == EXIT_OK
        assert (Path(d.path) / "tiny.csv").is_file()
        assert (Path(d.path) / "tiny.provenance.json").is_file()
    assert "infeasible" in capsys.readouterr().out


def test_compare_exit_codes(capsys):
    with TempDirectory() as d:
        assert main(["compare", written_curve(d.getpath("close"), 0.21)]) == EXIT_OK
        assert main(["compare", written_curve(d.getpath("far"), 0.40)]) == EXIT_FAILED
    out = capsys.readouterr().out
    assert "PASSED" in out
    assert "FAILED" in out


def test_compare_missing_engine(capsys):
    with TempDirectory() as d:
        path = written_curve(d.getpath("curve"), 0.2)
        assert main(["compare", path, "--candidate", "analytic_mean"]) == EXIT_DOMAIN
