"""Acceptance suite: one test per criterion, one pass/fail line under -v."""

import json
import math
import random
import string

import numpy as np
import pytest
from click.testing import CliRunner

from solarscan.autolabel import TriageConfig, kde_unit_interval, triage, triage_batch
from solarscan.cli import main
from solarscan.evaluation import (
    ConfusionCounts,
    Prediction,
    bce_loss,
    compute_report,
    confusion,
    exact_match_accuracy,
    f1_score,
    render_report,
)
from solarscan.imagery import png_bytes, png_to_array, slice_scene
from solarscan.inference import read_journal
from solarscan.model import (
    FIELD_ORDER,
    GroundTruthLabel,
    LocationLabel,
    PvAssessment,
    QuantityBucket,
    parse_model_response,
    serialize_assessment,
)

PUBLISHED_EXAMPLE_SOLAR = """{
  "solar_panels_present": true,
  "location": "top-left",
  "quantity": "0 to 1",
  "likelihood_of_solar_panels_present": 0.98,
  "confidence_of_solar_panels_present": 0.90
}"""

PUBLISHED_EXAMPLE_NO_SOLAR = """{
  "solar_panels_present": false,
  "location": "NA",
  "quantity": "NA",
  "likelihood_of_solar_panels_present": 0.21,
  "confidence_of_solar_panels_present": 0.87
}"""


# --- Closed-loop pipeline runs (shared by several criteria) -------------------


def run_pipeline(data_dir):
    runner = CliRunner()
    spec = data_dir.parent / "spec.json"
    spec.write_text(
        json.dumps({"scenes": 13, "size": 320, "empty_tile_fraction": 0.4, "max_panels": 6})
    )
    for args in (
        ["--data-dir", str(data_dir), "synth", "--spec", str(spec), "--seed", "21"],
        ["--data-dir", str(data_dir), "predict", "--backend", "mock"],
        ["--data-dir", str(data_dir), "evaluate"],
    ):
        result = runner.invoke(main, args, catch_exceptions=False)
        assert result.exit_code == 0, result.output
    return data_dir


@pytest.fixture(scope="module")
def closed_loop(tmp_path_factory):
    first = run_pipeline(tmp_path_factory.mktemp("run1") / "d")
    second = run_pipeline(tmp_path_factory.mktemp("run2") / "d")
    return first, second


def journal_fingerprint(data_dir):
    records = read_journal(data_dir / "journal.jsonl")
    return sorted(
        (r.tile_id, r.outcome.status, r.outcome.assessment) for r in records
    )


def labels_of(data_dir):
    return [
        GroundTruthLabel.from_json(json.loads(line))
        for line in (data_dir / "labels.jsonl").read_text().strip().splitlines()
    ]


# --- Criteria -----------------------------------------------------------------


def test_metric_formula_matches_published_rows():
    assert f1_score(0.6648, 0.9098) == pytest.approx(0.7682, abs=1e-4)
    assert f1_score(0.7118, 0.9915) == pytest.approx(0.8287, abs=1e-4)


def test_oracle_equivalence_over_100_random_sets():
    rng = random.Random(1234)
    locations = [l for l in LocationLabel if l is not LocationLabel.NA]
    quantities = [q for q in QuantityBucket if q is not QuantityBucket.NA]

    def draw(present):
        if present:
            return (
                True,
                rng.choice(locations),
                rng.choice(quantities),
            )
        return False, LocationLabel.NA, QuantityBucket.NA

    for _ in range(100):
        n = rng.randint(1, 1000)
        preds, truths = [], []
        for i in range(n):
            p, t = draw(rng.random() < 0.5), draw(rng.random() < 0.5)
            preds.append(
                Prediction(f"t{i}", PvAssessment(p[0], p[1], p[2], round(rng.random(), 2), 0.9))
            )
            truths.append(GroundTruthLabel(f"t{i}", t[0], t[1], t[2], "t", ""))
        tp = sum(1 for p, t in zip(preds, truths) if p.assessment.present and t.present)
        fp = sum(1 for p, t in zip(preds, truths) if p.assessment.present and not t.present)
        fn = sum(1 for p, t in zip(preds, truths) if not p.assessment.present and t.present)
        tn = n - tp - fp - fn
        assert confusion(preds, truths) == ConfusionCounts(tp, fp, fn, tn)
        loc = sum(1 for p, t in zip(preds, truths) if p.assessment.location is t.location) / n
        qty = sum(1 for p, t in zip(preds, truths) if p.assessment.quantity is t.quantity) / n
        assert exact_match_accuracy("location", preds, truths, "all") == loc
        assert exact_match_accuracy("quantity", preds, truths, "all") == qty
        report = compute_report(preds, truths, region="all")
        s, ns = report.solar, report.no_solar
        total = s.support + ns.support
        if total:
            expected = (s.support * s.f1 + ns.support * ns.f1) / total
            assert report.weighted.f1 == pytest.approx(expected, abs=1e-12)


def test_schema_suite_published_examples_and_1000_mutations():
    for text in (PUBLISHED_EXAMPLE_SOLAR, PUBLISHED_EXAMPLE_NO_SOLAR):
        outcome = parse_model_response(text, mode="strict")
        assert outcome.status == "ok"
        canonical = serialize_assessment(outcome.assessment)
        assert json.loads(canonical) == json.loads(text)
        assert parse_model_response(canonical, mode="strict").assessment == outcome.assessment
    vocab = (
        {l.value for l in LocationLabel}
        | {q.value for q in QuantityBucket}
        | {"true", "false"}
    )
    rng = random.Random(77)
    rejected = 0
    for _ in range(1000):
        obj = json.loads(rng.choice([PUBLISHED_EXAMPLE_SOLAR, PUBLISHED_EXAMPLE_NO_SOLAR]))
        field = rng.choice(FIELD_ORDER)
        junk = "".join(rng.choices(string.ascii_letters + string.digits + " -", k=rng.randint(1, 12)))
        while junk in vocab:
            junk += "x"
        obj[field] = junk
        if parse_model_response(json.dumps(obj), mode="strict").status == "rejected":
            rejected += 1
    assert rejected == 1000


def test_slicing_reassembles_50_random_scenes_pixel_exact():
    from solarscan.imagery import SceneImage

    rng = np.random.default_rng(55)
    for i in range(50):
        width = int(rng.integers(1, 200)) * 4
        height = int(rng.integers(1, 200)) * 4
        arr = rng.integers(0, 256, (height, width, 3), dtype=np.uint8)
        scene = SceneImage(
            scene_id=f"acc{i}",
            center=(0.0, 0.0),
            zoom=20,
            width_px=width,
            height_px=height,
            pixel_data=png_bytes(arr),
            fetched_at="",
        )
        tiles = slice_scene(scene)
        assert len(tiles) == 16
        rebuilt = np.zeros_like(arr)
        th, tw = height // 4, width // 4
        for t in tiles:
            rebuilt[t.row * th : (t.row + 1) * th, t.col * tw : (t.col + 1) * tw] = png_to_array(
                t.pixel_data
            )
        assert np.array_equal(arr, rebuilt)


def test_closed_loop_end_to_end_accuracy_and_determinism(closed_loop):
    first, second = closed_loop
    labels = labels_of(first)
    assert len(labels) >= 200
    empty_fraction = sum(1 for l in labels if not l.present) / len(labels)
    assert empty_fraction >= 0.30
    report = json.loads((first / "reports" / "latest.json").read_text())
    assert report["weighted"]["f1"] >= 0.95
    assert report["location_accuracy_solar"] >= 0.90
    assert journal_fingerprint(first) == journal_fingerprint(second)
    assert report == json.loads((second / "reports" / "latest.json").read_text())


def test_calibration_ln2_and_median_separation(closed_loop):
    assert bce_loss([0.5], [1]) == pytest.approx(math.log(2), abs=1e-9)
    first, _ = closed_loop
    truth = {l.tile_id: l.present for l in labels_of(first)}
    records = read_journal(first / "journal.jsonl")
    likelihoods = [r.outcome.assessment.likelihood for r in records]
    targets = [1 if truth[r.tile_id] else 0 for r in records]
    loss = bce_loss(likelihoods, targets)
    assert math.isfinite(loss)
    like_true = [l for l, y in zip(likelihoods, targets) if y]
    like_false = [l for l, y in zip(likelihoods, targets) if not y]
    assert float(np.median(like_true)) > float(np.median(like_false))


def test_triage_partition_monotonicity_and_published_examples(closed_loop):
    first, _ = closed_loop
    records = read_journal(first / "journal.jsonl")
    accepted, queue = triage_batch(records, TriageConfig())
    accepted_ids = {l.tile_id for l in accepted}
    queue_ids = {i.tile_id for i in queue}
    assert accepted_ids.isdisjoint(queue_ids)
    assert accepted_ids | queue_ids == {r.tile_id for r in records}
    sizes = []
    for threshold in (0.0, 0.25, 0.5, 0.75, 0.9, 1.0):
        _, q = triage_batch(records, TriageConfig(confidence_threshold=threshold))
        sizes.append(len(q))
    assert sizes == sorted(sizes)
    for text in (PUBLISHED_EXAMPLE_SOLAR, PUBLISHED_EXAMPLE_NO_SOLAR):
        assessment = parse_model_response(text).assessment
        assert triage(assessment, TriageConfig()) == "AutoAccept"


def test_kde_density_integrates_to_one():
    rng = random.Random(42)
    for _ in range(20):
        samples = [round(rng.random(), 2) for _ in range(rng.randint(1, 60))]
        grid, _ = kde_unit_interval(samples)
        xs = [x for x, _ in grid]
        ys = [d for _, d in grid]
        assert np.trapezoid(ys, xs) == pytest.approx(1.0, abs=1e-3)


def test_export_validates_fully_and_reexports_byte_identical(closed_loop, tmp_path):
    first, _ = closed_loop
    runner = CliRunner()
    outputs = []
    for name in ("e1", "e2"):
        out = tmp_path / name
        result = runner.invoke(
            main,
            ["--data-dir", str(first), "export-finetune", "--seed", "9", "--out", str(out)],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output.strip().splitlines()[-1])
        assert summary["validation"]["valid"] == summary["lines"] > 0
        assert summary["validation"]["errors"] == {}
        outputs.append((out / "train.jsonl").read_bytes())
    assert outputs[0] == outputs[1]


def test_report_formatting_reproduces_published_row():
    from solarscan.evaluation import ClassMetrics, MetricsReport

    report = MetricsReport(
        region="Santa Ana, CA",
        solar=ClassMetrics(precision=0.7118, recall=0.9915, f1=0.8287, accuracy=0.9915, support=118),
        no_solar=ClassMetrics(precision=0.9986, recall=0.9391, f1=0.9679, accuracy=0.9391, support=575),
        weighted=ClassMetrics(precision=0.9608, recall=0.9460, f1=0.9496, accuracy=0.9460, support=693),
        location_accuracy_solar=0.8738,
        location_accuracy_all=0.8650,
        quantity_accuracy_solar=0.8,
        quantity_accuracy_all=0.8,
        calibration_bce=0.1,
    )
    csv_text = render_report(report, "csv")
    weighted_row = next(l for l in csv_text.splitlines() if "Weighted Average" in l)
    assert weighted_row.endswith("96.08,94.60,94.96,94.60")
