import json

import pytest
from fastapi.testclient import TestClient

from solarscan.autolabel import ReviewItem, ReviewQueue
from solarscan.model import LocationLabel, PvAssessment, QuantityBucket
from solarscan.service import create_app
from solarscan.store import Store


def assessment(likelihood, confidence, present=True):
    loc = LocationLabel.TOP if present else LocationLabel.NA
    qty = QuantityBucket.ONE_TO_FIVE if present else QuantityBucket.NA
    return PvAssessment(present, loc, qty, likelihood, confidence)


@pytest.fixture()
def data_dir(tmp_path):
    store = Store(tmp_path / "d")
    queue = ReviewQueue(store.queue_path, store.labels_path)
    queue.save(
        [
            ReviewItem(tile_id="s_0_0", prediction=assessment(0.55, 0.7)),
            ReviewItem(tile_id="s_0_1", prediction=assessment(0.52, 0.3)),
            ReviewItem(tile_id="s_0_2", prediction=None),
        ]
    )
    return tmp_path / "d"


@pytest.fixture()
def client(data_dir):
    return TestClient(create_app(data_dir))


class TestQueueEndpoint:
    def test_sorted_ascending_confidence_missing_first(self, client):
        body = client.get("/api/queue").json()
        assert body["total_pending"] == 3
        assert [i["tile_id"] for i in body["items"]] == ["s_0_2", "s_0_1", "s_0_0"]
        assert body["items"][0]["prediction"] is None

    def test_limit(self, client):
        body = client.get("/api/queue", params={"limit": 1}).json()
        assert len(body["items"]) == 1
        assert body["total_pending"] == 3

    def test_unsupported_order(self, client):
        assert client.get("/api/queue", params={"order": "random"}).status_code == 400

    def test_empty_queue(self, tmp_path):
        client = TestClient(create_app(tmp_path / "fresh"))
        body = client.get("/api/queue").json()
        assert body == {"items": [], "total_pending": 0}


class TestTileEndpoints:
    def test_image_served_with_png_type(self, client, data_dir):
        path = Store(data_dir).tile_png_path("s_0_0")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(b"\x89PNG\r\n\x1a\nfake")
        resp = client.get("/api/tiles/s_0_0/image")
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        assert resp.content.startswith(b"\x89PNG")

    def test_missing_image_404(self, client):
        assert client.get("/api/tiles/nope_0_0/image").status_code == 404

    def test_missing_prediction_404(self, client):
        assert client.get("/api/tiles/s_0_0/prediction").status_code == 404


class TestCorrections:
    def correction(self, present=True):
        if present:
            return {"present": True, "location": "top", "quantity": "1 to 5", "reviewer": "alice"}
        return {"present": False, "location": "NA", "quantity": "NA", "reviewer": "alice"}

    def test_confirmation(self, client):
        resp = client.post("/api/items/s_0_0/correction", json=self.correction())
        assert resp.status_code == 200
        assert resp.json() == {"tile_id": "s_0_0", "status": "confirmed"}

    def test_correction_changes_status_and_labels(self, client, data_dir):
        resp = client.post("/api/items/s_0_0/correction", json=self.correction(present=False))
        assert resp.json()["status"] == "corrected"
        labels = [json.loads(l) for l in Store(data_dir).labels_path.read_text().strip().splitlines()]
        assert labels[-1]["tile_id"] == "s_0_0"
        assert labels[-1]["present"] is False
        assert labels[-1]["annotator"] == "alice"

    def test_double_resolution_409(self, client):
        client.post("/api/items/s_0_0/correction", json=self.correction())
        assert client.post("/api/items/s_0_0/correction", json=self.correction()).status_code == 409

    def test_unknown_item_404(self, client):
        assert client.post("/api/items/zzz/correction", json=self.correction()).status_code == 404

    def test_non_canonical_location_400(self, client):
        body = self.correction()
        body["location"] = "upper left"
        assert client.post("/api/items/s_0_0/correction", json=body).status_code == 400

    def test_unknown_quantity_400(self, client):
        body = self.correction()
        body["quantity"] = "several"
        assert client.post("/api/items/s_0_0/correction", json=body).status_code == 400

    def test_resolved_item_leaves_queue(self, client):
        client.post("/api/items/s_0_1/correction", json=self.correction())
        ids = [i["tile_id"] for i in client.get("/api/queue").json()["items"]]
        assert "s_0_1" not in ids


class TestReportsAndConfig:
    def test_no_report_404(self, client):
        assert client.get("/api/reports/latest").status_code == 404

    def test_latest_report_served(self, client, data_dir):
        store = Store(data_dir)
        store.reports_dir.mkdir(parents=True, exist_ok=True)
        (store.reports_dir / "latest.json").write_text(json.dumps({"region": "all"}))
        assert client.get("/api/reports/latest").json() == {"region": "all"}

    def test_default_triage_config(self, client):
        cfg = client.get("/api/triage/config").json()
        assert cfg["confidence_threshold"] == 0.8
        assert cfg["likelihood_margin"] == 0.1

    def test_put_config_round_trip(self, client):
        resp = client.put(
            "/api/triage/config", json={"confidence_threshold": 0.9, "likelihood_margin": 0.05}
        )
        assert resp.status_code == 200
        assert client.get("/api/triage/config").json()["confidence_threshold"] == 0.9

    def test_put_invalid_config_400(self, client):
        resp = client.put(
            "/api/triage/config", json={"confidence_threshold": 2.0, "likelihood_margin": 0.1}
        )
        assert resp.status_code == 400
