import pytest

from solarscan.errors import NotEnoughExamples
from solarscan.model import LocationLabel, QuantityBucket
from solarscan.prompting import (
    FewShotExample,
    assemble_prompt,
    default_template,
    load_example_bank,
    render_messages,
)


@pytest.fixture(scope="module")
def template():
    return default_template()


@pytest.fixture(scope="module")
def bank():
    return load_example_bank()


class TestDefaultTemplate:
    def test_steps_name_all_three_subtasks(self, template):
        assert "Image Analysis" in template.steps_text
        assert "Panel Location" in template.steps_text
        assert "Panel Quantification" in template.steps_text

    def test_schema_lists_full_location_vocabulary(self, template):
        for label in LocationLabel:
            assert label.value in template.schema_text

    def test_schema_lists_quantity_vocabulary(self, template):
        for bucket in QuantityBucket:
            assert bucket.value in template.schema_text

    def test_schema_names_all_output_fields(self, template):
        for name in (
            "solar_panels_present",
            "location",
            "quantity",
            "likelihood_of_solar_panels_present",
            "confidence_of_solar_panels_present",
        ):
            assert f'"{name}"' in template.schema_text

    def test_constant_across_calls(self, template):
        again = default_template()
        assert again == template
        assert again.version == template.version


class TestExampleBank:
    def test_contains_both_printed_examples(self, bank):
        solar = bank[0].assessment
        assert bank[0].label == "Example 1 (Solar)"
        assert solar.present and solar.location is LocationLabel.TOP_LEFT
        assert solar.quantity is QuantityBucket.ZERO_TO_ONE
        assert (solar.likelihood, solar.confidence) == (0.98, 0.90)
        no_solar = bank[1].assessment
        assert bank[1].label == "Example 2 (No Solar)"
        assert not no_solar.present
        assert (no_solar.likelihood, no_solar.confidence) == (0.21, 0.87)

    def test_bank_supports_five_shot(self, bank):
        assert len(bank) >= 5
        assert any(ex.assessment.present for ex in bank)
        assert any(not ex.assessment.present for ex in bank)


class TestAssemblePrompt:
    def test_five_shot(self, template, bank):
        bundle = assemble_prompt(template, bank, 5, "cGF5bG9hZA==")
        assert len(bundle.examples) == 5
        assert bundle.temperature == 0.0

    def test_zero_shot(self, template, bank):
        bundle = assemble_prompt(template, bank, 0, "cGF5bG9hZA==")
        assert bundle.examples == ()
        system = render_messages(bundle)[0]["content"]
        assert "Example 1" not in system

    def test_not_enough_examples(self, template, bank):
        with pytest.raises(NotEnoughExamples):
            assemble_prompt(template, bank[:2], 5, "cGF5bG9hZA==")

    def test_hash_purity(self, template, bank):
        b1 = assemble_prompt(template, bank, 5, "cGF5bG9hZA==")
        b2 = assemble_prompt(template, bank, 5, "cGF5bG9hZA==")
        assert b1.bundle_hash == b2.bundle_hash
        tweaked = FewShotExample(
            label=bank[0].label,
            assessment=type(bank[0].assessment)(
                present=True,
                location=bank[0].assessment.location,
                quantity=bank[0].assessment.quantity,
                likelihood=0.97,  # one digit changed
                confidence=bank[0].assessment.confidence,
            ),
        )
        b3 = assemble_prompt(template, [tweaked] + bank[1:], 5, "cGF5bG9hZA==")
        assert b3.bundle_hash != b1.bundle_hash


class TestRenderMessages:
    def test_structure(self, template, bank):
        messages = render_messages(assemble_prompt(template, bank, 5, "cGF5bG9hZA=="))
        assert [m["role"] for m in messages] == ["system", "user"]
        blocks = messages[1]["content"]
        assert blocks[0]["type"] == "text"
        assert blocks[1] == {"type": "image", "media_type": "image/png", "data": "cGF5bG9hZA=="}

    def test_examples_after_schema(self, template, bank):
        system = render_messages(assemble_prompt(template, bank, 2, "cGF5bG9hZA=="))[0]["content"]
        assert system.index("Example 1 (Solar)") > system.index(template.schema_text[:40])
        assert "Example 2 (No Solar)" in system

    def test_deterministic(self, template, bank):
        b = assemble_prompt(template, bank, 5, "cGF5bG9hZA==")
        assert render_messages(b) == render_messages(b)

    def test_injective_on_distinct_hashes(self, template, bank):
        # Hash-collision scan over a generated bank of bundles.
        rendered = {}
        for k in range(len(bank) + 1):
            for payload in ("aW1nMQ==", "aW1nMg==", "aW1nMw=="):
                bundle = assemble_prompt(template, bank, k, payload)
                blob = repr(render_messages(bundle))
                if bundle.bundle_hash in rendered:
                    assert rendered[bundle.bundle_hash] == blob
                else:
                    assert blob not in set(rendered.values())
                    rendered[bundle.bundle_hash] = blob
