"""Overpass query construction and response parsing for known PV installations.

Pure query/parse only; network execution lives in the orchestrator so this
module is fully testable offline.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable

from .errors import InsufficientSites, InvalidRegion, MalformedResponse

log = logging.getLogger(__name__)

DEFAULT_OVERPASS_URL = "https://overpass-api.de/api/interpreter"


@dataclass(frozen=True)
class RegionSpec:
    name: str
    bbox: tuple  # (min_lat, min_lon, max_lat, max_lon)
    sample_target: int = 25

    def __post_init__(self):
        if len(self.bbox) != 4:
            raise InvalidRegion(f"bbox must have 4 numbers, got {self.bbox!r}")
        min_lat, min_lon, max_lat, max_lon = self.bbox
        if not (-90 <= min_lat <= 90 and -90 <= max_lat <= 90):
            raise InvalidRegion(f"latitude out of [-90,90]: {self.bbox!r}")
        if not (-180 <= min_lon <= 180 and -180 <= max_lon <= 180):
            raise InvalidRegion(f"longitude out of [-180,180]: {self.bbox!r}")
        if not min_lat < max_lat:
            raise InvalidRegion(f"min_lat must be < max_lat: {self.bbox!r}")
        if not min_lon < max_lon:
            raise InvalidRegion(f"min_lon must be < max_lon: {self.bbox!r}")
        if self.sample_target <= 0:
            raise InvalidRegion(f"sample_target must be positive: {self.sample_target}")

    def contains(self, lat: float, lon: float) -> bool:
        min_lat, min_lon, max_lat, max_lon = self.bbox
        return min_lat <= lat <= max_lat and min_lon <= lon <= max_lon

    def to_json(self) -> dict:
        return {"name": self.name, "bbox": list(self.bbox), "sample_target": self.sample_target}

    @classmethod
    def from_json(cls, obj: dict) -> "RegionSpec":
        return cls(name=obj["name"], bbox=tuple(obj["bbox"]), sample_target=int(obj.get("sample_target", 25)))


@dataclass(frozen=True)
class InstallationSite:
    site_id: str
    point: tuple  # (lat, lon)
    source_tags: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"site_id": self.site_id, "point": list(self.point), "source_tags": self.source_tags}

    @classmethod
    def from_json(cls, obj: dict) -> "InstallationSite":
        return cls(site_id=obj["site_id"], point=tuple(obj["point"]), source_tags=obj.get("source_tags", {}))


def build_site_query(region: RegionSpec, timeout_s: int = 60) -> str:
    """Overpass QL selecting solar generators inside the region bbox.

    Uses the standard community tagging for PV (power=generator with
    generator:source=solar); ways and relations are reduced to their
    center coordinate via `out center`.
    """
    min_lat, min_lon, max_lat, max_lon = region.bbox
    bbox = f"{min_lat},{min_lon},{max_lat},{max_lon}"
    selector = '["power"="generator"]["generator:source"="solar"]'
    return (
        f"[out:json][timeout:{timeout_s}];\n"
        "(\n"
        f"  node{selector}({bbox});\n"
        f"  way{selector}({bbox});\n"
        f"  relation{selector}({bbox});\n"
        ");\n"
        "out center;\n"
    )


def parse_site_response(payload: str) -> list:
    """One InstallationSite per element; elements without coordinates skipped."""
    try:
        obj = json.loads(payload)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedResponse(f"response is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "elements" not in obj:
        raise MalformedResponse("response lacks an 'elements' collection")

    sites = []
    skipped = 0
    for el in obj["elements"]:
        lat, lon = el.get("lat"), el.get("lon")
        if lat is None or lon is None:
            center = el.get("center") or {}
            lat, lon = center.get("lat"), center.get("lon")
        if lat is None or lon is None:
            skipped += 1
            continue
        sites.append(
            InstallationSite(
                site_id=f"{el.get('type', 'node')}/{el.get('id', len(sites))}",
                point=(float(lat), float(lon)),
                source_tags=el.get("tags", {}) or {},
            )
        )
    if skipped:
        log.info("skipped %d elements without resolvable coordinates", skipped)
    return sites


def filter_sites_to_region(sites: Iterable[InstallationSite], region: RegionSpec) -> list:
    return [s for s in sites if region.contains(*s.point)]


def sample_sites(sites: list, k: int, seed: int) -> list:
    """Deterministic pseudo-random subset of size k (same seed, same subset)."""
    if k > len(sites):
        raise InsufficientSites(f"requested {k} sites but only {len(sites)} available")
    rng = random.Random(seed)
    return rng.sample(sites, k)


def load_regions(path=None) -> list:
    """Read region definitions (newline-delimited JSON); defaults to the
    six shipped regions when no path is given."""
    if path is None:
        text = resources.files("solarscan.data").joinpath("regions.jsonl").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    regions = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            regions.append(RegionSpec.from_json(json.loads(line)))
    return regions
