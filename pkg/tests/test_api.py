import pytest
from fastapi.testclient import TestClient

from app.config.experiment import ExperimentConfig
from app.models.results import CurvePoint, SweepSpec
from app.services.experiment_service import build_curve
from main import app


@pytest.fixture
def client():
    return TestClient(app)


def test_root_lists_endpoints(client):
    response = client.get("/")
    assert response.status_code == 200
    assert response.json()["endpoints"]["sweep"] == "/sweeps"


def test_health_reports_the_variance_cache(client, variance_cache):
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "healthy"
    assert body["variance_cache"] == {"path": variance_cache.path, "records": 0}


def test_defaults(client):
    response = client.get("/defaults")
    assert response.status_code == 200
    assert "theta=0.01" in response.text


def test_bad_config_is_unprocessable(client):
    spec = {"variable": "P", "grid": ["30 dBm"], "engines": ["analytic_mean"]}
    response = client.post("/sweeps", json={"spec": spec, "config": {"Le": 100}})
    assert response.status_code == 422
    assert response.json()["detail"]["issues"]


def test_infeasible_sweep_comes_back_marked(client):
    spec = {"name": "tiny", "variable": "Le", "grid": [60], "engines": ["analytic_mean"]}
    response = client.post("/sweeps", json={"spec": spec, "config": {"N": 20}})
    assert response.status_code == 200
    curve = response.json()
    assert curve["name"] == "tiny"
    assert [p["feasible"] for p in curve["points"]] == [False]


def test_compare(client):
    spec = SweepSpec(name="api_curve", variable="P", grid=[1.0], engines=["analytic_exact", "analytic_mean"])
    points = [
        CurvePoint(index=0, x=1.0, engine="analytic_exact", feasible=True, p_dl=0.3, p_ul=0.2),
        CurvePoint(index=0, x=1.0, engine="analytic_mean", feasible=True, p_dl=0.25, p_ul=0.2),
    ]
    curve = build_curve(spec, ExperimentConfig(), [1.0], points).model_dump(mode="json")
    response = client.post("/sweeps/compare", json={"curve": curve})
    assert response.status_code == 200
    report = response.json()
    assert report["mode"] == "documentation"
    assert report["max_gap_p_dl"] == pytest.approx(0.05)

    response = client.post("/sweeps/compare", json={"curve": curve, "candidate": "monte_carlo"})
    assert response.status_code == 422
