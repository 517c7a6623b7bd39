"""HTTP API tests against the FastAPI app."""

import pytest
from fastapi.testclient import TestClient

from app import app
from config.settings import settings


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


class TestHealth:
    def test_root(self, client):
        response = client.get("/")
        assert response.status_code == 200
        assert response.json()["health"] == "/api/v1/health"

    def test_health(self, client):
        response = client.get("/api/v1/health/")
        assert response.status_code == 200
        assert response.json()["status"] == "healthy"

    def test_detailed_health(self, client):
        data = client.get("/api/v1/health/detailed").json()
        assert data["components"]["self_test"]["status"] == "healthy"
        assert data["components"]["self_test"]["lambda_r_3_3"] == pytest.approx(2.336662, abs=1e-5)


class TestThresholdEndpoints:
    def test_table(self, client):
        response = client.get("/api/v1/thresholds/", params={"q": [3, 4], "k": [3]})
        assert response.status_code == 200
        rows = response.json()
        assert [(r["q"], r["k"]) for r in rows] == [(3, 3), (4, 3)]
        assert rows[0]["c_r_exact"] == pytest.approx(9.357, abs=1e-3)

    def test_table_rejects_small_q(self, client):
        response = client.get("/api/v1/thresholds/", params={"q": [2]})
        assert response.status_code == 422
        assert response.json()["type"] == "ValidationError"

    def test_fixed_point(self, client):
        data = client.get("/api/v1/thresholds/fixed-point", params={"q": 3, "k": 3, "c": 12}).json()
        assert data["fixed_point"]["lambda"] == pytest.approx(4.2487, abs=2e-3)
        assert data["upsilon"]["defined"] is True
        assert data["c_r"] == pytest.approx(9.357, abs=1e-3)


class TestExperimentEndpoints:
    def test_thresholds(self, client):
        response = client.post("/api/v1/experiments/thresholds", json={"q": [3, 4]})
        assert response.status_code == 200
        payload = response.json()
        assert len(payload["summary"]) == 2
        assert "workers" not in payload["config"]

    def test_core(self, client):
        body = {"c": [12.0], "n": 500, "trials": 2, "seed": 1}
        payload = client.post("/api/v1/experiments/core", json=body).json()
        assert len(payload["records"]) == 2
        assert payload["summary"][0]["upsilon"] == pytest.approx(0.9717, abs=1e-3)

    def test_size_limits(self, client):
        body = {"n": settings.api_max_n + 1, "trials": 1}
        response = client.post("/api/v1/experiments/core", json=body)
        assert response.status_code == 413
        assert response.json()["type"] == "ResourceGuardError"

    def test_invalid_body(self, client):
        response = client.post("/api/v1/experiments/core", json={"q": [1], "n": 10})
        assert response.status_code == 422

    def test_unknown_kind(self, client):
        assert client.post("/api/v1/experiments/nothing", json={}).status_code == 422

    def test_statistics_error(self, client):
        response = client.post("/api/v1/experiments/cycles", json={"n": 100, "trials": 10})
        assert response.status_code == 422
        assert response.json()["type"] == "StatisticsError"
