"""Model backends (remote, replay, mock) and the batch runner.

The mock backend is a deterministic pixel heuristic standing in for the
remote vision model, so the whole pipeline can be exercised offline against
synthesized scenes.
"""

from __future__ import annotations

import json
import math
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
import requests
from scipy import ndimage

from .errors import BackendUnavailable, DecodeError, ReplayMiss
from .imagery import Tile, decode_image_payload, png_to_array, region_for_centroid
from .model import ParseOutcome, PvAssessment, bucket_for_count, parse_model_response, serialize_assessment
from .prompting import PromptBundle, render_messages

# Components below this fraction of the tile area are treated as noise.
MIN_COMPONENT_AREA_FRACTION = 0.002


@dataclass
class BackendConfig:
    kind: str  # "remote" | "replay" | "mock"
    endpoint: str = ""
    model_id: str = ""
    credential_env: str = "LLM_API_KEY"
    max_retries: int = 5
    parallelism: int = 4
    backoff_s: float = 1.0
    fixtures_dir: Optional[str] = None  # replay
    http_post: object = requests.post  # injectable for tests

    def __post_init__(self):
        if self.kind not in ("remote", "replay", "mock"):
            raise ValueError(f"unknown backend kind: {self.kind}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.kind == "remote" and not (self.endpoint and self.model_id):
            raise ValueError("remote backend requires endpoint and model_id")


@dataclass
class InferenceRecord:
    tile_id: str
    bundle_hash: str
    backend_kind: str
    raw_response: str
    outcome: ParseOutcome
    latency_ms: int
    attempt_count: int
    created_at: str

    def to_json(self) -> dict:
        out = {
            "tile_id": self.tile_id,
            "bundle_hash": self.bundle_hash,
            "backend_kind": self.backend_kind,
            "raw_response": self.raw_response,
            "status": self.outcome.status,
            "warnings": self.outcome.warnings,
            "latency_ms": self.latency_ms,
            "attempt_count": self.attempt_count,
            "created_at": self.created_at,
        }
        if self.outcome.assessment is not None:
            out["assessment"] = json.loads(serialize_assessment(self.outcome.assessment))
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "InferenceRecord":
        outcome = parse_model_response(obj["raw_response"], mode="lenient")
        return cls(
            tile_id=obj["tile_id"],
            bundle_hash=obj["bundle_hash"],
            backend_kind=obj["backend_kind"],
            raw_response=obj["raw_response"],
            outcome=outcome,
            latency_ms=int(obj.get("latency_ms", 0)),
            attempt_count=int(obj.get("attempt_count", 1)),
            created_at=obj.get("created_at", ""),
        )


# --- Mock oracle -------------------------------------------------------------


def _assess_png(png: bytes) -> PvAssessment:
    arr = png_to_array(png).astype(float)
    r, g, b = arr[:, :, 0], arr[:, :, 1], arr[:, :, 2]
    lum = 0.299 * r + 0.587 * g + 0.114 * b
    mask = (lum < 110) & (b >= r)

    labels, n_labels = ndimage.label(mask)
    total_px = mask.size
    keep = []
    for idx in range(1, n_labels + 1):
        area = int((labels == idx).sum())
        if area / total_px >= MIN_COMPONENT_AREA_FRACTION:
            keep.append(idx)

    if not keep:
        area_frac = 0.0
        contrast = 0.0
        present = False
        location = None
        quantity = None
    else:
        present = True
        panel_mask = np.isin(labels, keep)
        area_frac = panel_mask.mean()
        ys, xs = np.nonzero(panel_mask)
        # Area-weighted centroid of all kept components = centroid of their union.
        cx = (xs.mean() + 0.5) / mask.shape[1]
        cy = (ys.mean() + 0.5) / mask.shape[0]
        location = region_for_centroid(min(cx, 1.0), min(cy, 1.0))
        quantity = bucket_for_count(len(keep))
        # Boundary contrast: luminance step across the dilated rim of the mask.
        rim = ndimage.binary_dilation(panel_mask, iterations=2) & ~panel_mask
        contrast = float(abs(lum[rim].mean() - lum[panel_mask].mean())) if rim.any() else 0.0

    likelihood = 1.0 / (1.0 + math.exp(-(400.0 * area_frac - 1.2)))
    confidence = 0.5 + 0.5 * (1.0 - math.exp(-contrast / 40.0))

    if not present:
        from .model import LocationLabel, QuantityBucket

        return PvAssessment(False, LocationLabel.NA, QuantityBucket.NA, likelihood, confidence)
    return PvAssessment(True, location, quantity, likelihood, confidence)


def mock_oracle_assess(tile: Tile) -> PvAssessment:
    """Deterministic pixel-heuristic assessment of a tile raster."""
    return _assess_png(tile.pixel_data)


# --- Backends ----------------------------------------------------------------


class MockBackend:
    kind = "mock"

    def complete(self, messages: list) -> str:
        payload = _image_payload_from_messages(messages)
        assessment = _assess_png(decode_image_payload(payload))
        return serialize_assessment(assessment)


class ReplayBackend:
    kind = "replay"

    def __init__(self, fixtures_dir):
        self.fixtures_dir = Path(fixtures_dir)

    def complete_for_hash(self, bundle_hash: str) -> str:
        path = self.fixtures_dir / f"{bundle_hash}.txt"
        if not path.exists():
            raise ReplayMiss(f"no fixture for bundle hash {bundle_hash}")
        return path.read_text()

    @staticmethod
    def store_fixture(fixtures_dir, bundle_hash: str, raw_response: str):
        path = Path(fixtures_dir) / f"{bundle_hash}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(raw_response)


class RemoteBackend:
    """Chat-completions-with-image adapter; provider specifics are confined here."""

    kind = "remote"

    def __init__(self, config: BackendConfig):
        self.config = config

    def complete(self, messages: list) -> str:
        cfg = self.config
        api_key = os.environ.get(cfg.credential_env, "")
        body = {
            "model": cfg.model_id,
            "temperature": 0,
            "messages": [self._adapt_message(m) for m in messages],
        }
        headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
        last_err: Exception = BackendUnavailable("no attempt made")
        for attempt in range(1, cfg.max_retries + 1):
            resp = None
            try:
                resp = cfg.http_post(cfg.endpoint, json=body, headers=headers, timeout=120)
            except requests.RequestException as exc:
                last_err = exc
            if resp is not None:
                if resp.status_code == 200:
                    data = resp.json()
                    return data["choices"][0]["message"]["content"]
                if resp.status_code not in (429,) and resp.status_code < 500:
                    raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
                last_err = BackendUnavailable(f"HTTP {resp.status_code}")
            if attempt < cfg.max_retries:
                delay = cfg.backoff_s * (2 ** (attempt - 1)) * (1 + 0.1 * random.random())
                retry_after = getattr(resp, "headers", {}).get("Retry-After") if resp is not None else None
                if retry_after is not None:
                    try:
                        delay = float(retry_after)
                    except (TypeError, ValueError):
                        pass
                time.sleep(delay)
        raise BackendUnavailable(str(last_err))

    @staticmethod
    def _adapt_message(message: dict) -> dict:
        content = message["content"]
        if isinstance(content, str):
            return {"role": message["role"], "content": content}
        adapted = []
        for block in content:
            if block["type"] == "image":
                adapted.append(
                    {
                        "type": "image_url",
                        "image_url": {"url": f"data:{block['media_type']};base64,{block['data']}"},
                    }
                )
            else:
                adapted.append(block)
        return {"role": message["role"], "content": adapted}


def _image_payload_from_messages(messages: list) -> str:
    for message in messages:
        content = message.get("content")
        if isinstance(content, list):
            for block in content:
                if block.get("type") == "image":
                    return block["data"]
    raise DecodeError("no image block in rendered messages")


def make_backend(config: BackendConfig):
    if config.kind == "mock":
        return MockBackend()
    if config.kind == "replay":
        if not config.fixtures_dir:
            raise ValueError("replay backend requires fixtures_dir")
        return ReplayBackend(config.fixtures_dir)
    return RemoteBackend(config)


# --- Runner ------------------------------------------------------------------


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def run_inference(config: BackendConfig, bundle: PromptBundle, tile_id: str, backend=None) -> InferenceRecord:
    """Run one tile through the backend; rejected parses are recorded, not raised."""
    backend = backend or make_backend(config)
    start = time.monotonic()
    if isinstance(backend, ReplayBackend):
        raw = backend.complete_for_hash(bundle.bundle_hash)
        attempts = 1
    else:
        raw = backend.complete(render_messages(bundle))
        attempts = 1
    latency_ms = int((time.monotonic() - start) * 1000)
    outcome = parse_model_response(raw, mode="lenient")
    return InferenceRecord(
        tile_id=tile_id,
        bundle_hash=bundle.bundle_hash,
        backend_kind=config.kind,
        raw_response=raw,
        outcome=outcome,
        latency_ms=latency_ms,
        attempt_count=attempts,
        created_at=_now(),
    )


@dataclass
class BatchSummary:
    total: int = 0
    ok: int = 0
    repaired: int = 0
    rejected: int = 0
    failed: int = 0


def run_batch(
    config: BackendConfig,
    tiles: list,
    template,
    examples: list,
    k: int,
    journal_path=None,
) -> tuple:
    """Assess every tile; order preserved, partial failures isolated per tile.

    Returns (records, summary). When journal_path is set, records are
    appended (and flushed) as they complete, through a single writer.
    """
    from .imagery import encode_image_payload
    from .prompting import assemble_prompt

    if not tiles:
        raise ValueError("tiles must be non-empty")
    backend = make_backend(config)
    journal_lock = threading.Lock()
    journal_fh = open(journal_path, "a") if journal_path else None

    def work(item):
        index, tile = item
        try:
            bundle = assemble_prompt(template, examples, k, encode_image_payload(tile))
            record = run_inference(config, bundle, tile.tile_id, backend=backend)
        except Exception as exc:  # never abort the batch for one tile
            record = InferenceRecord(
                tile_id=tile.tile_id,
                bundle_hash="",
                backend_kind=config.kind,
                raw_response="",
                outcome=ParseOutcome(status="rejected", warnings=[f"backend failure: {exc}"]),
                latency_ms=0,
                attempt_count=1,
                created_at=_now(),
            )
        if journal_fh is not None:
            with journal_lock:
                journal_fh.write(json.dumps(record.to_json()) + "\n")
                journal_fh.flush()
        return index, record

    try:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(work, enumerate(tiles)))
    finally:
        if journal_fh is not None:
            journal_fh.close()

    results.sort(key=lambda pair: pair[0])
    records = [record for _, record in results]
    summary = BatchSummary(total=len(records))
    for record in records:
        if record.outcome.status == "ok":
            summary.ok += 1
        elif record.outcome.status == "repaired":
            summary.repaired += 1
        else:
            summary.rejected += 1
            if record.outcome.warnings and record.outcome.warnings[0].startswith("backend failure"):
                summary.failed += 1
    return records, summary


def read_journal(path) -> list:
    records = []
    if not Path(path).exists():
        return records
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(InferenceRecord.from_json(json.loads(line)))
    return records
