"""Prompt assembly: task text, output schema, few-shot examples, image payload.

Everything here is pure and deterministic; a bundle's hash covers all of
its content so replay fixtures and caches can key on it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .errors import NotEnoughExamples
from .model import PvAssessment, assessment_from_json, assessment_to_json, serialize_assessment

TASK_TEXT = (
    "Identify the presence of solar panels in images of residential rooftops, "
    "and determine their locations and quantity within the images. "
    "You will be provided with images that may contain residential rooftop solar systems. "
    "Analyze each image to detect solar panels."
)

STEPS_TEXT = (
    "Steps:\n"
    "1. **Image Analysis**: Examine the entire image to identify any objects "
    "that appear to be solar panels.\n"
    "2. **Panel Location**: Determine the coordinates or area within the image "
    "where the solar panels are located.\n"
    "3. **Panel Quantification**: Calculate or estimate the number of solar "
    "panels based on their appearance and arrangement."
)

SCHEMA_TEXT = (
    "The output should be in JSON format, structured as follows, with each field "
    "restricted to specific possible values for consistency and accuracy:\n"
    '"solar_panels_present": A boolean value indicating if solar panels are detected. '
    "Possible values: [true, false]\n"
    '"location": A description or coordinates indicating where the panels are located '
    "within the image. Possible values: [left, right, bottom, top, top-left, top-right, "
    "bottom-right, bottom-left, center, NA]\n"
    '"quantity": The number of solar panels detected in the image. '
    "Possible values: [0 to 1, 1 to 5, 5 to 10, 10 to inf, NA]\n"
    '"likelihood_of_solar_panels_present": A value indicating the probability of solar '
    "panels being present. Possible values: A decimal range from 0.00 to 1.00\n"
    '"confidence_of_solar_panels_present": A value indicating the model\'s confidence '
    "in its prediction. Possible values: A decimal range from 0.00 to 1.00"
)

USER_INSTRUCTION = "Analyze this rooftop image tile and respond with the JSON object only."


@dataclass(frozen=True)
class PromptTemplate:
    task_text: str
    steps_text: str
    schema_text: str
    version: str

    def __post_init__(self):
        if not (self.task_text and self.steps_text and self.schema_text):
            raise ValueError("template sections must be non-empty")


def _template_version(task: str, steps: str, schema: str) -> str:
    digest = hashlib.sha256("\n\n".join([task, steps, schema]).encode()).hexdigest()
    return digest[:12]


def make_template(task_text: str, steps_text: str, schema_text: str) -> PromptTemplate:
    return PromptTemplate(
        task_text=task_text,
        steps_text=steps_text,
        schema_text=schema_text,
        version=_template_version(task_text, steps_text, schema_text),
    )


def default_template() -> PromptTemplate:
    return make_template(TASK_TEXT, STEPS_TEXT, SCHEMA_TEXT)


def load_template(path) -> PromptTemplate:
    """Template override file: JSON with task_text / steps_text / schema_text."""
    with open(path) as fh:
        obj = json.load(fh)
    return make_template(obj["task_text"], obj["steps_text"], obj["schema_text"])


@dataclass(frozen=True)
class FewShotExample:
    label: str
    assessment: PvAssessment
    image_payload: Optional[str] = None  # base64 PNG, optional

    def to_json(self) -> dict:
        obj = {"label": self.label, "assessment": assessment_to_json(self.assessment)}
        if self.image_payload is not None:
            obj["image_payload"] = self.image_payload
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "FewShotExample":
        return cls(
            label=obj["label"],
            assessment=assessment_from_json(obj["assessment"]),
            image_payload=obj.get("image_payload"),
        )


def load_example_bank(path=None) -> list:
    """Few-shot bank (newline-delimited JSON); order is file order."""
    if path is None:
        text = resources.files("solarscan.data").joinpath("example_bank.jsonl").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return [FewShotExample.from_json(json.loads(line)) for line in text.splitlines() if line.strip()]


@dataclass(frozen=True)
class PromptBundle:
    template: PromptTemplate
    examples: tuple
    image_payload: str
    temperature: float
    bundle_hash: str


def _bundle_hash(template: PromptTemplate, examples, image_payload: str, temperature: float) -> str:
    h = hashlib.sha256()
    h.update(template.version.encode())
    for ex in examples:
        h.update(json.dumps(ex.to_json(), sort_keys=True).encode())
    h.update(image_payload.encode())
    h.update(f"{temperature!r}".encode())
    return h.hexdigest()[:20]


def assemble_prompt(
    template: PromptTemplate,
    examples: list,
    k: int,
    image: str,
    temperature: float = 0.0,
) -> PromptBundle:
    """Take the first k examples in given order and build a hashed bundle."""
    if k > len(examples):
        raise NotEnoughExamples(f"requested {k} examples but only {len(examples)} available")
    chosen = tuple(examples[:k])
    return PromptBundle(
        template=template,
        examples=chosen,
        image_payload=image,
        temperature=temperature,
        bundle_hash=_bundle_hash(template, chosen, image, temperature),
    )


def render_messages(bundle: PromptBundle) -> list:
    """One system message (task + steps + schema + examples), one user message."""
    system = "\n\n".join(
        [bundle.template.task_text, bundle.template.steps_text, bundle.template.schema_text]
    )
    if bundle.examples:
        blocks = []
        for ex in bundle.examples:
            blocks.append(f"# {ex.label}:\n{serialize_assessment(ex.assessment)}")
        system += "\n\n" + "\n".join(blocks)
    user_content = [
        {"type": "text", "text": USER_INSTRUCTION},
        {"type": "image", "media_type": "image/png", "data": bundle.image_payload},
    ]
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": user_content},
    ]
