"""Synthetic dataset generation: seeded scene layouts with exact ground truth."""

from __future__ import annotations

import json
import random
from datetime import datetime, timezone

from .errors import InvalidSpec
from .imagery import PanelRect, slice_scene, synthesize_scene, tile_id_for
from .model import GroundTruthLabel, LocationLabel, QuantityBucket, bucket_for_count
from .imagery import region_for_centroid

# Panels are placed on a cell grid inside each tile so components stay
# disjoint and above the mock oracle's area threshold.
_CELL_GRID = [(r, c) for r in range(3) for c in range(4)]  # 12 slots per tile


def _random_tile_layout(rng: random.Random, max_panels: int) -> list:
    count = rng.randint(1, min(max_panels, len(_CELL_GRID)))
    cells = rng.sample(_CELL_GRID, count)
    rects = []
    for cr, cc in cells:
        cell_w, cell_h = 1 / 4, 1 / 3
        w = rng.uniform(0.10, 0.18)
        h = rng.uniform(0.12, 0.22)
        x0 = cc * cell_w + rng.uniform(0.02, cell_w - w - 0.02)
        y0 = cr * cell_h + rng.uniform(0.02, cell_h - h - 0.02)
        rects.append(PanelRect(x0, y0, x0 + w, y0 + h))
    return rects


def random_layouts(n_scenes: int, seed: int, empty_tile_fraction: float = 0.35, max_panels: int = 6) -> list:
    """One layout dict per scene: (row, col) -> list[PanelRect]."""
    if not 0.0 <= empty_tile_fraction <= 1.0:
        raise InvalidSpec(f"empty_tile_fraction out of [0,1]: {empty_tile_fraction}")
    layouts = []
    for i in range(n_scenes):
        rng = random.Random(seed * 100_003 + i)
        layout = {}
        for r in range(4):
            for c in range(4):
                if rng.random() >= empty_tile_fraction:
                    layout[(r, c)] = _random_tile_layout(rng, max_panels)
        layouts.append(layout)
    return layouts


def layouts_from_spec_file(path) -> tuple:
    """Read a synthesis spec file.

    Either {"scenes": N, "empty_tile_fraction": f, "max_panels": m, "size": s}
    for random generation, or {"layouts": [{"0_0": [[x0,y0,x1,y1], ...]}, ...]}
    for explicit geometry. Returns (layouts_or_none, options dict).
    """
    with open(path) as fh:
        spec = json.load(fh)
    options = {
        "size": int(spec.get("size", 640)),
        "scenes": int(spec.get("scenes", 0)),
        "empty_tile_fraction": float(spec.get("empty_tile_fraction", 0.35)),
        "max_panels": int(spec.get("max_panels", 6)),
    }
    if "layouts" in spec:
        layouts = []
        for entry in spec["layouts"]:
            layout = {}
            for key, rects in entry.items():
                r, c = (int(p) for p in key.split("_"))
                layout[(r, c)] = [PanelRect(*rect) for rect in rects]
            layouts.append(layout)
        return layouts, options
    if options["scenes"] <= 0:
        raise InvalidSpec("spec needs either 'layouts' or a positive 'scenes' count")
    return None, options


def truth_label_for(tile_id: str, count: int, rects: list, annotated_at: str) -> GroundTruthLabel:
    """Exact ground truth from the synthesizer's geometry."""
    if count == 0:
        return GroundTruthLabel(
            tile_id=tile_id,
            present=False,
            location=LocationLabel.NA,
            quantity=QuantityBucket.NA,
            annotator="synth",
            annotated_at=annotated_at,
        )
    total_area = sum(rect.area for rect in rects)
    cx = sum(rect.area * rect.centroid[0] for rect in rects) / total_area
    cy = sum(rect.area * rect.centroid[1] for rect in rects) / total_area
    return GroundTruthLabel(
        tile_id=tile_id,
        present=True,
        location=region_for_centroid(cx, cy),
        quantity=bucket_for_count(count),
        annotator="synth",
        annotated_at=annotated_at,
    )


def generate_dataset(store, layouts: list, seed: int, size: int = 640) -> dict:
    """Render scenes, slice to tiles, and persist exact ground truth.

    Returns counts: scenes, tiles, positive tiles.
    """
    now = datetime.now(timezone.utc).isoformat()
    n_tiles = n_positive = 0
    for i, layout in enumerate(layouts):
        scene, truth = synthesize_scene(layout, seed=seed + i, size=size)
        store.save_scene(scene)
        store.save_tiles(slice_scene(scene))
        labels = []
        for tile_id, (count, rects) in sorted(truth.items()):
            labels.append(truth_label_for(tile_id, count, rects, now))
            n_tiles += 1
            if count:
                n_positive += 1
        store.append_labels(labels)
    return {"scenes": len(layouts), "tiles": n_tiles, "positive_tiles": n_positive}
