import numpy as np
import pytest
from fastapi.testclient import TestClient

import app as service
from src.services.trainer import score_series


@pytest.fixture
def client():
    return TestClient(service.app)


@pytest.fixture
def loaded(tiny_model, monkeypatch):
    monkeypatch.setattr(service.state, "model", tiny_model)
    return tiny_model


class TestHealth:
    def test_without_checkpoint(self, client, monkeypatch):
        monkeypatch.setattr(service.state, "model", None)
        response = client.get("/health_check")
        assert response.status_code == 200
        assert response.json() == {"status": "ok", "checkpoint_loaded": False}

    def test_with_checkpoint(self, client, loaded):
        assert client.get("/health_check").json()["checkpoint_loaded"] is True


class TestScore:
    def test_no_model_is_503(self, client, monkeypatch):
        monkeypatch.setattr(service.state, "model", None)
        response = client.post("/score", json={"series": [[0.0, 0.0, 0.0]]})
        assert response.status_code == 503

    def test_scores_match_direct_scoring(self, client, loaded, tiny_series):
        response = client.post("/score", json={"series": tiny_series.T.tolist()})
        assert response.status_code == 200
        body = response.json()
        expected, _ = score_series(loaded, tiny_series)
        assert body["timestamps"] == expected.timestamps.tolist()
        np.testing.assert_allclose(body["scores"], expected.scores, rtol=1e-12)

    @pytest.mark.parametrize(
        "series",
        [
            [[0.1, 0.2]] * 40,
            [[0.1, 0.2, 0.3]] * 10,
            [],
            [[0.1, 0.2, 0.3], [0.1]],
        ],
    )
    def test_bad_series_is_400(self, client, loaded, series):
        assert client.post("/score", json={"series": series}).status_code == 400

    def test_schema_violation_is_422(self, client, loaded):
        assert client.post("/score", json={"rows": []}).status_code == 422


class TestEvaluate:
    def test_report(self, client):
        response = client.post("/evaluate", json={"scores": [0.1, 0.9, 0.8, 0.2], "labels": [0, 1, 1, 0]})
        assert response.status_code == 200
        report = response.json()["report"]
        assert report["threshold"] == 0.8
        assert report["f1_adjusted"] == 1.0

    def test_all_normal_threshold_is_infinite(self, client):
        response = client.post("/evaluate", json={"scores": [0.3, 0.1], "labels": [0, 0]})
        assert response.json()["report"]["threshold"] == "inf"

    @pytest.mark.parametrize(
        "payload",
        [
            {"scores": [0.1, 0.2], "labels": [0]},
            {"scores": [0.1, 0.2], "labels": [0, 2]},
            {"scores": [], "labels": []},
        ],
    )
    def test_bad_payload_is_400(self, client, payload):
        assert client.post("/evaluate", json=payload).status_code == 400
