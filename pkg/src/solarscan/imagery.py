"""Satellite imagery: fetch with caching, 4x4 slicing, synthesis, encoding.

Scenes and tiles carry their raster as PNG bytes so content hashes and
tiling are reproducible. The 9-region geometry (thirds grid) lives here
and is shared by the mock oracle and the review UI overlay.
"""

from __future__ import annotations

import base64
import hashlib
import io
import os
import random
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import requests
from PIL import Image

from .errors import AuthError, DecodeError, EncodeError, InvalidSpec, OutOfRange, RateLimited
from .model import LocationLabel


@dataclass(frozen=True)
class SceneImage:
    scene_id: str
    center: tuple  # (lat, lon)
    zoom: int
    width_px: int
    height_px: int
    pixel_data: bytes  # PNG
    fetched_at: str
    region_name: str = ""

    def __post_init__(self):
        if self.width_px % 4 or self.height_px % 4:
            raise ValueError("scene dimensions must be divisible by 4")
        if not self.pixel_data:
            raise ValueError("scene pixel data is empty")

    def manifest_entry(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "center": list(self.center),
            "zoom": self.zoom,
            "width_px": self.width_px,
            "height_px": self.height_px,
            "fetched_at": self.fetched_at,
            "region_name": self.region_name,
        }


@dataclass(frozen=True)
class Tile:
    tile_id: str
    scene_id: str
    row: int
    col: int
    width_px: int
    height_px: int
    pixel_data: bytes  # PNG


@dataclass(frozen=True)
class PanelRect:
    """Axis-aligned rectangle in tile-normalized coordinates, y downward."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0):
            raise InvalidSpec(f"invalid panel rect: {self}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def centroid(self) -> tuple:
        return ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)


def tile_id_for(scene_id: str, row: int, col: int) -> str:
    return f"{scene_id}_{row}_{col}"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def png_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def png_to_array(data: bytes) -> np.ndarray:
    try:
        return np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))
    except Exception as exc:
        raise DecodeError(f"not a decodable raster: {exc}") from exc


# --- Static map client -------------------------------------------------------


@dataclass
class StaticMapConfig:
    cache_dir: Path
    base_url: str = "https://maps.googleapis.com/maps/api/staticmap"
    api_key_env: str = "MAPS_API_KEY"
    maptype: str = "satellite"
    max_retries: int = 5
    backoff_s: float = 1.0
    timeout_s: float = 30.0
    http_get: Callable = requests.get  # injectable for tests


_flight_locks: dict = {}
_flight_guard = threading.Lock()


def _single_flight_lock(key: str) -> threading.Lock:
    with _flight_guard:
        return _flight_locks.setdefault(key, threading.Lock())


def scene_cache_key(config: StaticMapConfig, point, zoom: int, size: int) -> str:
    lat, lon = point
    raw = f"{config.base_url}|{lat:.6f}|{lon:.6f}|{zoom}|{size}|{config.maptype}"
    return hashlib.sha256(raw.encode()).hexdigest()[:16]


def _atomic_write(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + f".tmp{os.getpid()}")
    tmp.write_bytes(data)
    tmp.replace(path)


def fetch_scene(point, zoom: int, size: int, config: StaticMapConfig, region_name: str = "") -> SceneImage:
    """Fetch one static-map scene, via the content-addressed cache when possible.

    Concurrent requests for the same key collapse to one upstream call;
    cache writes are atomic (write-temp-then-rename).
    """
    if size % 4:
        raise ValueError(f"scene size must be divisible by 4, got {size}")
    key = scene_cache_key(config, point, zoom, size)
    cache_path = Path(config.cache_dir) / "scenes" / f"{key}.png"

    with _single_flight_lock(key):
        if not cache_path.exists():
            data = _fetch_raster(point, zoom, size, config)
            _atomic_write(cache_path, data)
        data = cache_path.read_bytes()

    arr = png_to_array(data)
    return SceneImage(
        scene_id=hashlib.sha256(data).hexdigest()[:16],
        center=tuple(point),
        zoom=zoom,
        width_px=arr.shape[1],
        height_px=arr.shape[0],
        pixel_data=data,
        fetched_at=_now(),
        region_name=region_name,
    )


def _fetch_raster(point, zoom: int, size: int, config: StaticMapConfig) -> bytes:
    api_key = os.environ.get(config.api_key_env, "")
    if not api_key:
        raise AuthError(f"no credential in ${config.api_key_env}")
    lat, lon = point
    params = {
        "center": f"{lat:.6f},{lon:.6f}",
        "zoom": zoom,
        "size": f"{size}x{size}",
        "maptype": config.maptype,
        "key": api_key,
    }
    last_err: Exception = RateLimited("no attempt made")
    for attempt in range(1, config.max_retries + 1):
        resp = None
        try:
            resp = config.http_get(config.base_url, params=params, timeout=config.timeout_s)
        except requests.RequestException as exc:
            last_err = exc
        if resp is not None:
            status = resp.status_code
            if status == 200:
                arr = png_to_array(resp.content)  # raises DecodeError on junk
                if arr.shape[1] != size or arr.shape[0] != size:
                    raise DecodeError(
                        f"provider returned {arr.shape[1]}x{arr.shape[0]}, expected {size}x{size}"
                    )
                # Re-encode as PNG so the cached raster format is canonical.
                return png_bytes(arr)
            if status in (401, 403):
                raise AuthError(f"credential rejected (HTTP {status})")
            if status == 429 or status >= 500:
                last_err = RateLimited(f"HTTP {status}")
            else:
                raise DecodeError(f"unexpected HTTP {status}")
        if attempt < config.max_retries:
            delay = config.backoff_s * (2 ** (attempt - 1)) * (1 + 0.1 * random.random())
            retry_after = getattr(resp, "headers", {}).get("Retry-After") if resp is not None else None
            if retry_after is not None:
                try:
                    delay = float(retry_after)
                except (TypeError, ValueError):
                    pass
            time.sleep(delay)
    if isinstance(last_err, RateLimited):
        raise last_err
    raise RateLimited(f"retry budget exhausted: {last_err}")


# --- Slicing and geometry ----------------------------------------------------


def slice_scene(scene: SceneImage) -> list:
    """16 tiles in row-major order; reassembly is pixel-exact."""
    arr = png_to_array(scene.pixel_data)
    th, tw = scene.height_px // 4, scene.width_px // 4
    tiles = []
    for r in range(4):
        for c in range(4):
            patch = arr[r * th : (r + 1) * th, c * tw : (c + 1) * tw]
            tiles.append(
                Tile(
                    tile_id=tile_id_for(scene.scene_id, r, c),
                    scene_id=scene.scene_id,
                    row=r,
                    col=c,
                    width_px=tw,
                    height_px=th,
                    pixel_data=png_bytes(patch),
                )
            )
    return tiles


_REGION_GRID = (
    (LocationLabel.TOP_LEFT, LocationLabel.TOP, LocationLabel.TOP_RIGHT),
    (LocationLabel.LEFT, LocationLabel.CENTER, LocationLabel.RIGHT),
    (LocationLabel.BOTTOM_LEFT, LocationLabel.BOTTOM, LocationLabel.BOTTOM_RIGHT),
)


def region_for_centroid(x: float, y: float) -> LocationLabel:
    """Thirds-grid label for a point in the unit square (y grows downward).

    Band cuts at 1/3 and 2/3; a point exactly on a cut joins the lower band.
    Never returns NA.
    """
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise OutOfRange(f"centroid outside unit square: ({x}, {y})")

    def band(v):
        if v <= 1 / 3:
            return 0
        if v <= 2 / 3:
            return 1
        return 2

    return _REGION_GRID[band(y)][band(x)]


def encode_image_payload(tile: Tile) -> str:
    """Standard base64 of the tile's PNG bytes."""
    if not tile.pixel_data:
        raise EncodeError("tile raster is empty")
    png_to_array(tile.pixel_data)  # must be decodable
    return base64.b64encode(tile.pixel_data).decode("ascii")


def decode_image_payload(payload: str) -> bytes:
    try:
        return base64.b64decode(payload.encode("ascii"), validate=True)
    except Exception as exc:
        raise DecodeError(f"invalid base64 payload: {exc}") from exc


# --- Synthesis ---------------------------------------------------------------

MAX_PANELS_PER_TILE = 20
PANEL_COLOR = np.array([44, 52, 70], dtype=float)  # dark blue-gray


def synthesize_scene(spec: dict, seed: int, size: int = 640, region_name: str = "synthetic"):
    """Render a synthetic rooftop scene with known panel geometry.

    spec maps (row, col) -> list[PanelRect] in tile-normalized coordinates.
    Returns (SceneImage, ground truth dict tile_id -> (count, rects)).
    Deterministic in (spec, seed, size).
    """
    if size % 4:
        raise InvalidSpec(f"scene size must be divisible by 4, got {size}")
    for key, rects in spec.items():
        r, c = key
        if not (0 <= r <= 3 and 0 <= c <= 3):
            raise InvalidSpec(f"tile index out of range: {key}")
        if len(rects) > MAX_PANELS_PER_TILE:
            raise InvalidSpec(f"more than {MAX_PANELS_PER_TILE} panels in tile {key}")

    rng = np.random.default_rng(seed)
    base = rng.uniform(150, 185)
    background = np.empty((size, size, 3), dtype=float)
    background[:, :, 0] = base + 12
    background[:, :, 1] = base + 2
    background[:, :, 2] = base - 10
    # Coarse shading plus fine grain, both seeded.
    coarse = np.kron(rng.normal(0, 9, (size // 16, size // 16)), np.ones((16, 16)))
    background += coarse[:, :, None]
    background += rng.normal(0, 7, (size, size, 1))

    tile_px = size // 4
    for (r, c), rects in spec.items():
        oy, ox = r * tile_px, c * tile_px
        for rect in rects:
            y0 = oy + int(round(rect.y0 * tile_px))
            y1 = oy + int(round(rect.y1 * tile_px))
            x0 = ox + int(round(rect.x0 * tile_px))
            x1 = ox + int(round(rect.x1 * tile_px))
            patch = PANEL_COLOR + rng.normal(0, 3, (y1 - y0, x1 - x0, 3))
            background[y0:y1, x0:x1] = patch

    arr = np.clip(background, 0, 255).astype(np.uint8)
    data = png_bytes(arr)
    scene = SceneImage(
        scene_id=hashlib.sha256(data).hexdigest()[:16],
        center=(0.0, 0.0),
        zoom=0,
        width_px=size,
        height_px=size,
        pixel_data=data,
        fetched_at=_now(),
        region_name=region_name,
    )
    truth = {}
    for r in range(4):
        for c in range(4):
            rects = list(spec.get((r, c), []))
            truth[tile_id_for(scene.scene_id, r, c)] = (len(rects), rects)
    return scene, truth
