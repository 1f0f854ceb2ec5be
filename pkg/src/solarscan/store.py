"""File-backed run state: manifests, journals, rasters, lock file.

All pipeline state is plain files under one data directory so runs are
reproducible and diffable.
"""

from __future__ import annotations

import contextlib
import json
import os
import re
import uuid
from datetime import datetime, timezone
from pathlib import Path

from .errors import NotFound, SolarscanError
from .imagery import SceneImage, Tile
from .model import GroundTruthLabel


class Locked(SolarscanError):
    """Another pipeline stage holds the data-directory lock."""


def slugify(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def read_jsonl(path) -> list:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def append_jsonl(path, objs):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as fh:
        for obj in objs:
            fh.write(json.dumps(obj) + "\n")


class Store:
    def __init__(self, data_dir):
        self.root = Path(data_dir)

    # -- paths --
    @property
    def scene_manifest_path(self):
        return self.root / "scene_manifest.jsonl"

    @property
    def labels_path(self):
        return self.root / "labels.jsonl"

    @property
    def journal_path(self):
        return self.root / "journal.jsonl"

    @property
    def queue_path(self):
        return self.root / "review_queue.jsonl"

    @property
    def triage_config_path(self):
        return self.root / "triage_config.json"

    @property
    def reports_dir(self):
        return self.root / "reports"

    @property
    def runs_path(self):
        return self.root / "runs.jsonl"

    @property
    def cache_dir(self):
        return self.root / "cache"

    def sites_path(self, region_name: str):
        return self.root / "sites" / f"{slugify(region_name)}.jsonl"

    # -- scenes and tiles --
    def save_scene(self, scene: SceneImage):
        scene_path = self.root / "scenes" / f"{scene.scene_id}.png"
        scene_path.parent.mkdir(parents=True, exist_ok=True)
        if not scene_path.exists():
            scene_path.write_bytes(scene.pixel_data)
            append_jsonl(self.scene_manifest_path, [scene.manifest_entry()])

    def scene_entries(self) -> list:
        return read_jsonl(self.scene_manifest_path)

    def load_scene(self, entry: dict) -> SceneImage:
        data = (self.root / "scenes" / f"{entry['scene_id']}.png").read_bytes()
        return SceneImage(
            scene_id=entry["scene_id"],
            center=tuple(entry["center"]),
            zoom=entry["zoom"],
            width_px=entry["width_px"],
            height_px=entry["height_px"],
            pixel_data=data,
            fetched_at=entry["fetched_at"],
            region_name=entry.get("region_name", ""),
        )

    def save_tiles(self, tiles: list):
        for tile in tiles:
            path = self.root / "tiles" / tile.scene_id / f"{tile.row}_{tile.col}.png"
            path.parent.mkdir(parents=True, exist_ok=True)
            if not path.exists():
                path.write_bytes(tile.pixel_data)

    def tile_png_path(self, tile_id: str) -> Path:
        scene_id, row, col = tile_id.rsplit("_", 2)
        return self.root / "tiles" / scene_id / f"{row}_{col}.png"

    def load_tile(self, tile_id: str) -> Tile:
        path = self.tile_png_path(tile_id)
        if not path.exists():
            raise NotFound(f"no tile raster for id {tile_id}")
        scene_id, row, col = tile_id.rsplit("_", 2)
        data = path.read_bytes()
        from .imagery import png_to_array

        arr = png_to_array(data)
        return Tile(
            tile_id=tile_id,
            scene_id=scene_id,
            row=int(row),
            col=int(col),
            width_px=arr.shape[1],
            height_px=arr.shape[0],
            pixel_data=data,
        )

    def all_tiles(self) -> list:
        tiles = []
        for entry in self.scene_entries():
            scene_dir = self.root / "tiles" / entry["scene_id"]
            if not scene_dir.is_dir():
                continue
            for r in range(4):
                for c in range(4):
                    tile_id = f"{entry['scene_id']}_{r}_{c}"
                    if (scene_dir / f"{r}_{c}.png").exists():
                        tiles.append(self.load_tile(tile_id))
        return tiles

    def region_by_scene(self) -> dict:
        return {e["scene_id"]: e.get("region_name", "") for e in self.scene_entries()}

    # -- labels --
    def labels(self, include_auto: bool = False) -> list:
        """Effective ground truth: last label per tile wins."""
        by_id = {}
        for obj in read_jsonl(self.labels_path):
            label = GroundTruthLabel.from_json(obj)
            if not include_auto and label.annotator == "auto":
                continue
            by_id[label.tile_id] = label
        return list(by_id.values())

    def append_labels(self, labels: list):
        append_jsonl(self.labels_path, [l.to_json() for l in labels])

    # -- run records --
    def record_run(self, stage: str, config: dict, counts: dict, started_at: str) -> dict:
        record = {
            "run_id": uuid.uuid4().hex[:12],
            "stage": stage,
            "config": config,
            "started_at": started_at,
            "finished_at": _now(),
            "counts": counts,
        }
        append_jsonl(self.runs_path, [record])
        return record

    @contextlib.contextmanager
    def lock(self):
        """One CLI stage at a time per data directory."""
        self.root.mkdir(parents=True, exist_ok=True)
        lock_path = self.root / ".lock"
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise Locked(f"data directory is locked by another stage: {lock_path}")
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield
        finally:
            with contextlib.suppress(FileNotFoundError):
                lock_path.unlink()
