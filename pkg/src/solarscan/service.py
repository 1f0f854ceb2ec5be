"""HTTP review service: queue browsing, tile images, corrections, reports."""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .autolabel import ReviewQueue, TriageConfig
from .errors import AlreadyResolved, NoSuchLabel, NotFound
from .model import (
    GroundTruthLabel,
    LocationLabel,
    QuantityBucket,
    assessment_to_json,
    canonicalize_location,
    canonicalize_quantity,
)
from .store import Store


class CorrectionBody(BaseModel):
    present: bool
    location: str
    quantity: str
    reviewer: str = "reviewer"


class TriageConfigBody(BaseModel):
    confidence_threshold: float
    likelihood_margin: float


def _now() -> str:
    from datetime import datetime, timezone

    return datetime.now(timezone.utc).isoformat()


def create_app(data_dir, static_dir=None) -> FastAPI:
    store = Store(data_dir)
    queue = ReviewQueue(store.queue_path, store.labels_path)
    app = FastAPI(title="solarscan review service")

    def journal_assessments() -> dict:
        from .store import read_jsonl

        out = {}
        for obj in read_jsonl(store.journal_path):
            if obj.get("assessment") is not None:
                out[obj["tile_id"]] = obj["assessment"]
        return out

    @app.get("/api/queue")
    def get_queue(order: str = "confidence_asc", limit: int = 50):
        items = queue.pending()
        if order != "confidence_asc":
            raise HTTPException(status_code=400, detail=f"unsupported order: {order}")
        view = []
        for item in items[: max(limit, 0)]:
            pred = assessment_to_json(item.prediction) if item.prediction else None
            view.append(
                {
                    "tile_id": item.tile_id,
                    "prediction": pred,
                    "confidence": item.prediction.confidence if item.prediction else None,
                    "likelihood": item.prediction.likelihood if item.prediction else None,
                }
            )
        return {"items": view, "total_pending": len(items)}

    @app.get("/api/tiles/{tile_id}/image")
    def tile_image(tile_id: str):
        path = store.tile_png_path(tile_id)
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"no tile {tile_id}")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.get("/api/tiles/{tile_id}/prediction")
    def tile_prediction(tile_id: str):
        assessment = journal_assessments().get(tile_id)
        if assessment is None:
            raise HTTPException(status_code=404, detail=f"no prediction for tile {tile_id}")
        return assessment

    @app.post("/api/items/{tile_id}/correction")
    def post_correction(tile_id: str, body: CorrectionBody):
        try:
            location = canonicalize_location(body.location)
            quantity = canonicalize_quantity(body.quantity)
            if location.value != body.location or quantity.value != body.quantity:
                raise HTTPException(status_code=400, detail="labels must use canonical vocabulary strings")
            correction = GroundTruthLabel(
                tile_id=tile_id,
                present=body.present,
                location=location,
                quantity=quantity,
                annotator=body.reviewer,
                annotated_at=_now(),
            )
        except (NoSuchLabel, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            item = queue.apply_correction(tile_id, correction, body.reviewer)
        except NotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except AlreadyResolved as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"tile_id": item.tile_id, "status": item.status}

    @app.get("/api/reports/latest")
    def latest_report():
        path = store.reports_dir / "latest.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail="no report yet; run evaluate")
        return json.loads(path.read_text())

    @app.get("/api/triage/config")
    def get_triage_config():
        if store.triage_config_path.exists():
            return json.loads(store.triage_config_path.read_text())
        return TriageConfig().to_json()

    @app.put("/api/triage/config")
    def put_triage_config(body: TriageConfigBody):
        try:
            cfg = TriageConfig(body.confidence_threshold, body.likelihood_margin)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        store.triage_config_path.write_text(json.dumps(cfg.to_json(), indent=2))
        return cfg.to_json()

    static = Path(static_dir) if static_dir else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if static.is_dir():
        app.mount("/", StaticFiles(directory=static, html=True), name="ui")

    return app
