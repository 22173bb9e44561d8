import numpy as np
import pytest
from fastapi.testclient import TestClient

from api.server import app


@pytest.fixture
def client():
    return TestClient(app)


@pytest.fixture
def coeff_payload(factor_panel):
    panel, _ = factor_panel(p=8, n=40, r=2, K=5)
    return {"coeffs": panel.coeffs.tolist(), "basis": {"kind": "fourier", "K": 5, "G": 21}}


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_threshold_level(client):
    response = client.post("/threshold-level", json={"C_dot": 1.0, "n": 100, "p": 25})
    assert response.status_code == 200
    expected = np.sqrt(np.log(25) / 100) + 1 / 5
    assert response.json()["lambda"] == pytest.approx(expected)


def test_threshold_level_rejects_small_p(client):
    assert client.post("/threshold-level", json={"n": 100, "p": 1}).status_code == 422


def test_select(client, coeff_payload):
    response = client.post("/select", json={"panel": coeff_payload})
    assert response.status_code == 200
    body = response.json()
    assert body["report"]["chosen_model"] in ("ffm1", "ffm2")
    assert len(body["omega_eigenvalues"]) == 8


def test_fit_returns_summary(client, coeff_payload):
    response = client.post(
        "/fit", json={"panel": coeff_payload, "method": "digit", "r": 2, "include_matrix": True}
    )
    assert response.status_code == 200
    body = response.json()
    assert (body["p"], body["K"], body["n"]) == (8, 5, 40)
    assert np.asarray(body["matrix"]).shape == (40, 40)
    assert body["norm_SF"] > 0


def test_fit_with_rank_too_large(client, coeff_payload):
    response = client.post("/fit", json={"panel": coeff_payload, "method": "digit", "r": 9})
    assert response.status_code == 422
    assert response.json()["detail"]["code"] == "digit/invalid-argument"


def test_panel_needs_exactly_one_source(client, coeff_payload):
    both = dict(coeff_payload, samples=coeff_payload["coeffs"])
    assert client.post("/fit", json={"panel": both, "method": "fpoet", "r": 1}).status_code == 422
    neither = {"basis": coeff_payload["basis"]}
    assert client.post("/fit", json={"panel": neither, "method": "fpoet", "r": 1}).status_code == 422
