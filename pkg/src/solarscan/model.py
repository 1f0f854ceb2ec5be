"""Domain types for panel assessments and the strict JSON output contract.

The wire format is a flat JSON object with five fields, in a fixed order,
matching the schema the model is instructed to emit. All parsing and
serialization of model responses goes through this module.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import NoSuchLabel


class LocationLabel(enum.Enum):
    TOP = "top"
    BOTTOM = "bottom"
    LEFT = "left"
    RIGHT = "right"
    CENTER = "center"
    TOP_LEFT = "top-left"
    TOP_RIGHT = "top-right"
    BOTTOM_LEFT = "bottom-left"
    BOTTOM_RIGHT = "bottom-right"
    NA = "NA"


class QuantityBucket(enum.Enum):
    ZERO_TO_ONE = "0 to 1"
    ONE_TO_FIVE = "1 to 5"
    FIVE_TO_TEN = "5 to 10"
    TEN_TO_INF = "10 to inf"
    NA = "NA"


# Field names exactly as the model is prompted to produce them, in prompt order.
FIELD_PRESENT = "solar_panels_present"
FIELD_LOCATION = "location"
FIELD_QUANTITY = "quantity"
FIELD_LIKELIHOOD = "likelihood_of_solar_panels_present"
FIELD_CONFIDENCE = "confidence_of_solar_panels_present"
FIELD_ORDER = (FIELD_PRESENT, FIELD_LOCATION, FIELD_QUANTITY, FIELD_LIKELIHOOD, FIELD_CONFIDENCE)

_LOCATION_VALUES = {m.value: m for m in LocationLabel}
_QUANTITY_VALUES = {m.value: m for m in QuantityBucket}


def canonicalize_location(raw: str) -> LocationLabel:
    """Normalize a location string (case, whitespace, separators) to its enum.

    Raises NoSuchLabel if the normalized string is not one of the 10 values.
    """
    norm = raw.strip().lower()
    norm = re.sub(r"[\s_]+", "-", norm)
    if norm == "na":
        return LocationLabel.NA
    label = _LOCATION_VALUES.get(norm)
    if label is None:
        raise NoSuchLabel(f"not a location label: {raw!r}")
    return label


def canonicalize_quantity(raw: str) -> QuantityBucket:
    """Normalize a quantity-range string to its enum value."""
    norm = re.sub(r"\s+", " ", raw.strip().lower())
    if norm == "na":
        return QuantityBucket.NA
    bucket = _QUANTITY_VALUES.get(norm)
    if bucket is None:
        raise NoSuchLabel(f"not a quantity bucket: {raw!r}")
    return bucket


def bucket_for_count(n: int) -> QuantityBucket:
    """Map a panel count to its range bucket.

    Boundary counts belong to the lower bucket (half-open, upper-inclusive
    intervals): n <= 1, 1 < n <= 5, 5 < n <= 10, n > 10.
    """
    if n < 0:
        raise ValueError(f"count must be non-negative, got {n}")
    if n <= 1:
        return QuantityBucket.ZERO_TO_ONE
    if n <= 5:
        return QuantityBucket.ONE_TO_FIVE
    if n <= 10:
        return QuantityBucket.FIVE_TO_TEN
    return QuantityBucket.TEN_TO_INF


@dataclass(frozen=True)
class PvAssessment:
    """The model's structured verdict for one tile."""

    present: bool
    location: LocationLabel
    quantity: QuantityBucket
    likelihood: float
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.likelihood <= 1.0:
            raise ValueError(f"likelihood out of [0,1]: {self.likelihood}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0,1]: {self.confidence}")
        if self.present:
            if self.location is LocationLabel.NA or self.quantity is QuantityBucket.NA:
                raise ValueError("present=true requires a concrete location and quantity")
        else:
            if self.location is not LocationLabel.NA or self.quantity is not QuantityBucket.NA:
                raise ValueError("present=false requires location=NA and quantity=NA")


@dataclass(frozen=True)
class GroundTruthLabel:
    """A human or auto annotation for one tile."""

    tile_id: str
    present: bool
    location: LocationLabel
    quantity: QuantityBucket
    annotator: str
    annotated_at: str

    def __post_init__(self):
        if self.present:
            if self.location is LocationLabel.NA or self.quantity is QuantityBucket.NA:
                raise ValueError("present=true requires a concrete location and quantity")
        else:
            if self.location is not LocationLabel.NA or self.quantity is not QuantityBucket.NA:
                raise ValueError("present=false requires location=NA and quantity=NA")

    def to_json(self) -> dict:
        return {
            "tile_id": self.tile_id,
            "present": self.present,
            "location": self.location.value,
            "quantity": self.quantity.value,
            "annotator": self.annotator,
            "annotated_at": self.annotated_at,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GroundTruthLabel":
        return cls(
            tile_id=obj["tile_id"],
            present=bool(obj["present"]),
            location=LocationLabel(obj["location"]),
            quantity=QuantityBucket(obj["quantity"]),
            annotator=obj.get("annotator", ""),
            annotated_at=obj.get("annotated_at", ""),
        )


@dataclass
class ParseOutcome:
    status: str  # "ok" | "repaired" | "rejected"
    assessment: Optional[PvAssessment] = None
    warnings: list = field(default_factory=list)
    raw_excerpt: str = ""


def serialize_assessment(a: PvAssessment) -> str:
    """Canonical JSON text: exact field names, prompt order, two-decimal reals."""
    parts = [
        f'"{FIELD_PRESENT}": {"true" if a.present else "false"}',
        f'"{FIELD_LOCATION}": {json.dumps(a.location.value)}',
        f'"{FIELD_QUANTITY}": {json.dumps(a.quantity.value)}',
        f'"{FIELD_LIKELIHOOD}": {a.likelihood:.2f}',
        f'"{FIELD_CONFIDENCE}": {a.confidence:.2f}',
    ]
    return "{" + ", ".join(parts) + "}"


def extract_first_json(text: str) -> Optional[str]:
    """Return the first balanced top-level JSON object embedded in text.

    Brace matching is string-aware inside objects, so braces in quoted values
    do not confuse the scan. Surrounding prose and code fences are ignored.
    """
    depth = 0
    start = None
    in_str = False
    escaped = False
    for i, ch in enumerate(text):
        if depth > 0 and in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"' and depth > 0:
            in_str = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None


def _excerpt(raw: str, limit: int = 200) -> str:
    return raw[:limit]


def parse_model_response(raw: str, mode: str = "lenient") -> ParseOutcome:
    """Parse arbitrary model output text into a validated PvAssessment.

    strict mode rejects any deviation from the canonical contract; lenient
    mode normalizes vocabulary spellings and repairs presence/NA consistency
    violations by coercing location and quantity toward the present flag,
    always recording a warning. Out-of-vocabulary or out-of-range values are
    rejected in both modes.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown parse mode: {mode}")
    lenient = mode == "lenient"

    def reject(msg):
        return ParseOutcome(status="rejected", warnings=[msg], raw_excerpt=_excerpt(raw))

    blob = extract_first_json(raw)
    if blob is None:
        return reject("no JSON object found in response")
    try:
        obj = json.loads(blob)
    except json.JSONDecodeError as exc:
        return reject(f"unparseable JSON object: {exc}")
    if not isinstance(obj, dict):
        return reject("top-level JSON value is not an object")

    missing = [name for name in FIELD_ORDER if name not in obj]
    if missing:
        return reject(f"missing fields: {', '.join(missing)}")

    warnings: list[str] = []

    present = obj[FIELD_PRESENT]
    if not isinstance(present, bool):
        return reject(f"{FIELD_PRESENT} must be a boolean, got {present!r}")

    raw_loc = obj[FIELD_LOCATION]
    if not isinstance(raw_loc, str):
        return reject(f"{FIELD_LOCATION} must be a string, got {raw_loc!r}")
    if lenient:
        try:
            location = canonicalize_location(raw_loc)
        except NoSuchLabel:
            return reject(f"unknown location value: {raw_loc!r}")
        if location.value != raw_loc:
            warnings.append(f"location normalized from {raw_loc!r}")
    else:
        location = _LOCATION_VALUES.get(raw_loc)
        if location is None:
            return reject(f"unknown location value: {raw_loc!r}")

    raw_qty = obj[FIELD_QUANTITY]
    if not isinstance(raw_qty, str):
        return reject(f"{FIELD_QUANTITY} must be a string, got {raw_qty!r}")
    if lenient:
        try:
            quantity = canonicalize_quantity(raw_qty)
        except NoSuchLabel:
            return reject(f"unknown quantity value: {raw_qty!r}")
        if quantity.value != raw_qty:
            warnings.append(f"quantity normalized from {raw_qty!r}")
    else:
        quantity = _QUANTITY_VALUES.get(raw_qty)
        if quantity is None:
            return reject(f"unknown quantity value: {raw_qty!r}")

    reals = {}
    for name in (FIELD_LIKELIHOOD, FIELD_CONFIDENCE):
        val = obj[name]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            return reject(f"{name} must be a number, got {val!r}")
        val = float(val)
        if not 0.0 <= val <= 1.0:
            return reject(f"{name} out of [0,1]: {val}")
        reals[name] = val

    if not present and (location is not LocationLabel.NA or quantity is not QuantityBucket.NA):
        if lenient:
            warnings.append(
                f"present=false but location={location.value!r}, quantity={quantity.value!r}; coerced to NA"
            )
            location = LocationLabel.NA
            quantity = QuantityBucket.NA
        else:
            return reject("present=false requires location=NA and quantity=NA")
    if present and (location is LocationLabel.NA or quantity is QuantityBucket.NA):
        # No defensible repair exists: a location cannot be invented.
        return reject("present=true requires a concrete location and quantity")

    assessment = PvAssessment(
        present=present,
        location=location,
        quantity=quantity,
        likelihood=reals[FIELD_LIKELIHOOD],
        confidence=reals[FIELD_CONFIDENCE],
    )
    status = "repaired" if warnings else "ok"
    return ParseOutcome(status=status, assessment=assessment, warnings=warnings, raw_excerpt=_excerpt(raw))


def assessment_to_json(a: PvAssessment) -> dict:
    """Plain-dict view with the canonical field names (full-precision reals)."""
    return {
        FIELD_PRESENT: a.present,
        FIELD_LOCATION: a.location.value,
        FIELD_QUANTITY: a.quantity.value,
        FIELD_LIKELIHOOD: a.likelihood,
        FIELD_CONFIDENCE: a.confidence,
    }


def assessment_from_json(obj: dict) -> PvAssessment:
    return PvAssessment(
        present=bool(obj[FIELD_PRESENT]),
        location=LocationLabel(obj[FIELD_LOCATION]),
        quantity=QuantityBucket(obj[FIELD_QUANTITY]),
        likelihood=float(obj[FIELD_LIKELIHOOD]),
        confidence=float(obj[FIELD_CONFIDENCE]),
    )
