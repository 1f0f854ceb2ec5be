"""Fine-tuning dataset export: deterministic splits and JSONL emission."""

from __future__ import annotations

import base64
import json
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import MissingLabel, MissingTile, TooFewLabels
from .model import (
    LocationLabel,
    PvAssessment,
    QuantityBucket,
    parse_model_response,
    serialize_assessment,
)
from .prompting import USER_INSTRUCTION, PromptTemplate


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: tuple
    test_ids: tuple
    seed: int
    ratio: float
    stratified: bool

    def to_json(self) -> dict:
        return {
            "train_ids": list(self.train_ids),
            "test_ids": list(self.test_ids),
            "seed": self.seed,
            "ratio": self.ratio,
            "stratified": self.stratified,
        }


def split_dataset(labels: list, ratio: float, seed: int, stratified: bool = True) -> DatasetSplit:
    """Deterministic train/test split over tile ids.

    Stratified mode splits each presence class separately, preserving the
    class ratio within one item per class.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0,1): {ratio}")
    if len(labels) < 2:
        raise TooFewLabels(f"need at least 2 labels, got {len(labels)}")
    rng = random.Random(seed)

    def split_ids(ids):
        ids = sorted(ids)
        rng.shuffle(ids)
        n_train = round(ratio * len(ids))
        n_train = min(max(n_train, 0), len(ids))
        return ids[:n_train], ids[n_train:]

    if stratified:
        pos = [l.tile_id for l in labels if l.present]
        neg = [l.tile_id for l in labels if not l.present]
        train_p, test_p = split_ids(pos)
        train_n, test_n = split_ids(neg)
        train, test = train_p + train_n, test_p + test_n
    else:
        train, test = split_ids([l.tile_id for l in labels])
    if not train or not test:
        # Keep both sides non-empty for extreme ratios on small sets.
        pool = train + test
        train, test = pool[:-1], pool[-1:]
    return DatasetSplit(
        train_ids=tuple(train),
        test_ids=tuple(test),
        seed=seed,
        ratio=ratio,
        stratified=stratified,
    )


def _assistant_text(label) -> str:
    assessment = PvAssessment(
        present=label.present,
        location=label.location,
        quantity=label.quantity,
        likelihood=1.0 if label.present else 0.0,
        confidence=1.0,
    )
    return serialize_assessment(assessment)


def _system_text(template: PromptTemplate) -> str:
    return "\n\n".join([template.task_text, template.steps_text, template.schema_text])


def export_jsonl(split: DatasetSplit, tiles: dict, truths: dict, template: PromptTemplate, path) -> int:
    """Write one chat-format training example per train id; returns line count.

    tiles maps tile_id -> PNG bytes; truths maps tile_id -> GroundTruthLabel.
    Output is byte-identical for identical inputs (stable field order and ids).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w") as fh:
        for tile_id in split.train_ids:
            if tile_id not in tiles:
                raise MissingTile(f"no tile raster for id {tile_id}")
            if tile_id not in truths:
                raise MissingLabel(f"no ground-truth label for id {tile_id}")
            payload = base64.b64encode(tiles[tile_id]).decode("ascii")
            line = {
                "messages": [
                    {"role": "system", "content": _system_text(template)},
                    {
                        "role": "user",
                        "content": [
                            {"type": "text", "text": USER_INSTRUCTION},
                            {"type": "image", "media_type": "image/png", "data": payload},
                        ],
                    },
                    {"role": "assistant", "content": _assistant_text(truths[tile_id])},
                ]
            }
            fh.write(json.dumps(line, sort_keys=True) + "\n")
            count += 1
    return count


def write_export_manifest(path, split: DatasetSplit, template: PromptTemplate, count: int):
    manifest = {
        "seed": split.seed,
        "ratio": split.ratio,
        "stratified": split.stratified,
        "train_count": len(split.train_ids),
        "test_count": len(split.test_ids),
        "lines_written": count,
        "template_version": template.version,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def validate_jsonl(path) -> dict:
    """Per-line validation of an exported file; never aborts on a bad line.

    Returns {"lines": n, "valid": n, "errors": {category: count}}.
    """
    lines = valid = 0
    errors: dict = {}

    def bump(category):
        errors[category] = errors.get(category, 0) + 1

    with open(path) as fh:
        for raw_line in fh:
            if not raw_line.strip():
                continue
            lines += 1
            try:
                obj = json.loads(raw_line)
            except json.JSONDecodeError:
                bump("invalid_json")
                continue
            messages = obj.get("messages")
            if not isinstance(messages, list) or len(messages) != 3:
                bump("bad_structure")
                continue
            roles = [m.get("role") for m in messages]
            if roles != ["system", "user", "assistant"]:
                bump("bad_roles")
                continue
            user_blocks = messages[1].get("content")
            image = None
            if isinstance(user_blocks, list):
                image = next((b for b in user_blocks if b.get("type") == "image"), None)
            if image is None or not image.get("data"):
                bump("missing_image")
                continue
            try:
                base64.b64decode(image["data"].encode("ascii"), validate=True)
            except Exception:
                bump("bad_image_payload")
                continue
            outcome = parse_model_response(messages[2].get("content", ""), mode="strict")
            if outcome.status != "ok":
                bump("invalid_assistant_text")
                continue
            valid += 1
    return {"lines": lines, "valid": valid, "errors": errors}
