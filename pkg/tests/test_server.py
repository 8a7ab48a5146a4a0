"""
Tests for the HTTP API.
"""

import pytest
from fastapi.testclient import TestClient

import server


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setattr(server, "RESULTS_DIR", tmp_path)
    return TestClient(server.app)


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_experiments(client):
    names = [item["name"] for item in client.get("/experiments").json()["experiments"]]
    assert names == ["cavity", "metamaterial", "manufactured"]


def test_study(client, tmp_path):
    response = client.post("/study", json={"experiment": "manufactured", "kappa": -2.0,
                                           "methods": ["hdg", "cg"], "k": 1, "levels": [2, 4]})
    assert response.status_code == 200
    tables = response.json()["tables"]
    assert [t["method"] for t in tables] == ["hdg", "cg"]
    assert tables[0]["rows"][0]["rate_u"] is None
    assert tables[1]["rows"][1]["e_ubar"] is None
    assert (tmp_path / "manufactured_cg_k1.csv").is_file()


def test_study_rejects_bad_contrast(client):
    response = client.post("/study", json={"kappa": 1.0})
    assert response.status_code == 400
    assert response.json()["error"].startswith("cli: kappa must be negative")


def test_study_rejects_large_levels(client):
    response = client.post("/study", json={"levels": [8, server.MAX_LEVEL * 2]})
    assert response.status_code == 400


def test_slice(client):
    response = client.post("/slice", json={"experiment": "cavity", "kappa": -2.0, "k": 1, "n": 2,
                                           "methods": ["hdg", "cg"], "slice_points": 11})
    assert response.status_code == 200
    body = response.json()
    assert body["slice_x2"] == 0.5
    assert len(body["rows"]) == 11
    assert set(body["rows"][0]) == {"x1", "u_hdg", "u_cg", "u_exact"}
    assert body["discrepancy"] >= 0.0


def test_slice_rejects_metamaterial_critical_contrast(client):
    response = client.post("/slice", json={"experiment": "metamaterial", "kappa": -1.0, "n": 2})
    assert response.status_code == 400
    assert response.json()["error"].startswith("problems:")
