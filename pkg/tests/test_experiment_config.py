import pytest
from testfixtures import TempDirectory

from app.config.experiment import (
    ExperimentConfig,
    emit_defaults,
    load,
    parse_assignments,
    parse_quantity,
    validate_config,
    with_overrides,
)
from app.exceptions import ConfigValidationError, ModelDomainError


@pytest.mark.parametrize("text,kind,expected", [
    ("30 dBm", "power", 1.0),
    ("0 dBW", "power", 1.0),
    ("-40 dB", "ratio", 1e-4),
    ("0.06 cm", "length", 6e-4),
    ("100 MHz", "frequency", 1e8),
    ("50 ms", "time", 0.05),
    ("5e-5", "density", 5e-5),
    (12, "count", 12.0),
])
def test_parse_quantity(text, kind, expected):
    assert parse_quantity(text, kind) == pytest.approx(expected)


def test_parse_quantity_rejects_bad_input():
    with pytest.raises(ModelDomainError):
        parse_quantity("30 dBm", "length")
    with pytest.raises(ModelDomainError):
        parse_quantity("thirty")
    with pytest.raises(ModelDomainError):
        parse_quantity("3 parsecs")


def test_defaults_round_trip_exactly():
    text = emit_defaults()
    assert "# P: 30 dBm" in text
    assert "P=1.0" in text
    with TempDirectory() as d:
        path = d.write("defaults.env", text, encoding="utf-8")
        loaded = load(path)
    assert loaded.model_dump() == ExperimentConfig().model_dump()


def test_overrides_carry_units():
    config = load(overrides={"omega": "-40 dB", "P": "20 dBm", "wavelength": "0.06 cm", "Bc": "100 MHz"})
    assert config.omega == pytest.approx(1e-4)
    assert config.P == pytest.approx(0.1)
    assert config.wavelength == pytest.approx(6e-4)
    assert config.network_params().Bc == pytest.approx(1e8)


def test_layering_file_then_environment_then_overrides(monkeypatch):
    monkeypatch.delenv("FAFD_N", raising=False)
    with TempDirectory() as d:
        path = d.write("exp.env", "N=5\nkappa=0.5\n", encoding="utf-8")
        assert load(path).N == 5
        monkeypatch.setenv("FAFD_N", "7")
        config = load(path)
        assert config.N == 7
        assert config.kappa == 0.5
        assert load(path, {"N": 9}).N == 9
        assert load(path, ["fafd_n=11"]).N == 11


def test_missing_config_file():
    with pytest.raises(ConfigValidationError):
        load("/nonexistent/exp.env")


def test_parse_assignments():
    assert parse_assignments(["P=30 dBm", "n=10"]) == {"P": "30 dBm", "N": "10"}
    with pytest.raises(ConfigValidationError):
        parse_assignments(["P=30 dBm", "no-equals-sign"])


def test_unknown_key_and_wrong_unit_are_rejected():
    with pytest.raises(ConfigValidationError):
        load(overrides={"not_a_field": 1})
    with pytest.raises(ConfigValidationError) as info:
        load(overrides={"P": "5 cm"})
    assert any("P" in issue for issue in info.value.issues)


def test_validation_collects_every_issue():
    config = load(overrides={"Le": 100, "kappa": -1.0, "n_trials": 0})
    with pytest.raises(ConfigValidationError) as info:
        validate_config(config)
    issues = info.value.issues
    assert any(issue.startswith("network.") for issue in issues)
    assert any(issue.startswith("fluid_antenna.") for issue in issues)
    assert any(issue.startswith("n_trials") for issue in issues)


def test_validation_warns_about_exhausted_pilots():
    assert validate_config(ExperimentConfig()) == []
    warnings = validate_config(load(overrides={"Le": 60, "Ld": 40, "N": 20}))
    assert len(warnings) == 1
    assert "switching overhead" in warnings[0]


def test_estimated_csi_needs_loop_interference_pilots_on_both_sides():
    with pytest.raises(ConfigValidationError) as info:
        validate_config(load(overrides={"w_split": 1.0}))
    assert any("loop-interference pilots" in issue for issue in info.value.issues)
    assert validate_config(load(overrides={"w_split": 1.0, "csi_mode": "perfect"})) == []


def test_with_overrides_keeps_the_original():
    base = ExperimentConfig()
    changed = with_overrides(base, {"N": 3, "P": "20 dBm"})
    assert changed.N == 3
    assert changed.P == pytest.approx(0.1)
    assert base.N == 15


def test_builders(budget):
    config = ExperimentConfig()
    assert config.network_params().Le == 200
    assert config.fa_geometry().N == 15
    assert config.model_options().ce_convention == "inflated"
    assert config.model_options().sim_ce_convention == "orthogonal"
    assert config.quadrature_spec().gamma_nodes == 16
    trial = config.trial_config(budget)
    assert trial.n_trials == 10_000
    assert trial.base_seed == 2024
