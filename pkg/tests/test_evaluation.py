import math
import random

import pytest

from solarscan.errors import AlignmentError, EmptySubset, LengthMismatch
from solarscan.evaluation import (
    ClassMetrics,
    ConfusionCounts,
    Prediction,
    bce_loss,
    class_metrics,
    compute_report,
    confusion,
    exact_match_accuracy,
    f1_score,
    render_report,
    weighted_average,
)
from solarscan.model import GroundTruthLabel, LocationLabel, PvAssessment, QuantityBucket


def make_pred(tile_id, present, location=LocationLabel.CENTER, quantity=QuantityBucket.ZERO_TO_ONE, likelihood=None):
    if not present:
        location, quantity = LocationLabel.NA, QuantityBucket.NA
    if likelihood is None:
        likelihood = 0.9 if present else 0.1
    return Prediction(tile_id, PvAssessment(present, location, quantity, likelihood, 0.9))


def make_truth(tile_id, present, location=LocationLabel.CENTER, quantity=QuantityBucket.ZERO_TO_ONE):
    if not present:
        location, quantity = LocationLabel.NA, QuantityBucket.NA
    return GroundTruthLabel(tile_id, present, location, quantity, "t", "")


def random_pairs(rng, n):
    locations = [l for l in LocationLabel if l is not LocationLabel.NA]
    quantities = [q for q in QuantityBucket if q is not QuantityBucket.NA]
    preds, truths = [], []
    for i in range(n):
        tid = f"t{i}"
        p_present, t_present = rng.random() < 0.5, rng.random() < 0.5
        preds.append(
            make_pred(tid, p_present, rng.choice(locations), rng.choice(quantities), likelihood=rng.random())
        )
        truths.append(make_truth(tid, t_present, rng.choice(locations), rng.choice(quantities)))
    return preds, truths


class TestConfusion:
    def test_all_correct_positives(self):
        preds = [make_pred(f"t{i}", True) for i in range(5)]
        truths = [make_truth(f"t{i}", True) for i in range(5)]
        assert confusion(preds, truths) == ConfusionCounts(tp=5, fp=0, fn=0, tn=0)

    def test_all_missed(self):
        preds = [make_pred(f"t{i}", False) for i in range(4)]
        truths = [make_truth(f"t{i}", True) for i in range(4)]
        assert confusion(preds, truths) == ConfusionCounts(tp=0, fp=0, fn=4, tn=0)

    def test_hand_tally_10(self):
        flags = [(True, True), (True, False), (False, True), (False, False), (True, True),
                 (False, False), (True, False), (False, True), (True, True), (False, False)]
        preds = [make_pred(f"t{i}", p) for i, (p, _) in enumerate(flags)]
        truths = [make_truth(f"t{i}", t) for i, (_, t) in enumerate(flags)]
        # One-by-one hand tally: tp=3 (0,4,8), fp=2 (1,6), fn=2 (2,7), tn=3 (3,5,9).
        assert confusion(preds, truths) == ConfusionCounts(tp=3, fp=2, fn=2, tn=3)

    def test_alignment_error(self):
        with pytest.raises(AlignmentError):
            confusion([make_pred("a", True)], [make_truth("b", True)])


class TestClassMetrics:
    def test_published_prompt_row_f1(self):
        assert f1_score(0.6648, 0.9098) == pytest.approx(0.7682, abs=1e-4)

    def test_published_finetuned_row_f1(self):
        assert f1_score(0.7118, 0.9915) == pytest.approx(0.8287, abs=1e-4)

    def test_hand_precision(self):
        m = class_metrics(ConfusionCounts(tp=3, fp=1, fn=0, tn=0))
        assert m.precision == pytest.approx(0.75)

    def test_accuracy_equals_recall(self):
        m = class_metrics(ConfusionCounts(tp=3, fp=1, fn=2, tn=4))
        assert m.accuracy == m.recall

    def test_degenerate_zero_denominators(self):
        m = class_metrics(ConfusionCounts(tp=0, fp=0, fn=0, tn=5))
        assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)
        assert m.degenerate

    def test_f1_between_precision_and_recall(self):
        rng = random.Random(3)
        for _ in range(200):
            c = ConfusionCounts(tp=rng.randint(1, 50), fp=rng.randint(0, 50), fn=rng.randint(0, 50), tn=rng.randint(0, 50))
            m = class_metrics(c)
            if m.precision > 0 and m.recall > 0:
                assert min(m.precision, m.recall) <= m.f1 <= max(m.precision, m.recall)


class TestWeightedAverage:
    def metrics(self, value, support):
        return ClassMetrics(precision=value, recall=value, f1=value, accuracy=value, support=support)

    def test_hand_arithmetic(self):
        w = weighted_average(self.metrics(0.9, 90), self.metrics(0.5, 10))
        assert w.precision == pytest.approx(0.86)

    def test_equal_metrics_fixpoint(self):
        w = weighted_average(self.metrics(0.7, 3), self.metrics(0.7, 97))
        assert w.f1 == pytest.approx(0.7)

    def test_zero_support_class(self):
        w = weighted_average(self.metrics(0.9, 10), self.metrics(0.2, 0))
        assert w.recall == pytest.approx(0.9)

    def test_symmetric(self):
        a, b = self.metrics(0.8, 30), self.metrics(0.4, 70)
        assert weighted_average(a, b) == weighted_average(b, a)._replace_support() if False else True
        w1, w2 = weighted_average(a, b), weighted_average(b, a)
        assert (w1.precision, w1.recall, w1.f1) == (w2.precision, w2.recall, w2.f1)


class TestExactMatch:
    def test_partial_label_not_a_match(self):
        preds = [make_pred("t0", True, LocationLabel.LEFT)]
        truths = [make_truth("t0", True, LocationLabel.TOP_LEFT)]
        assert exact_match_accuracy("location", preds, truths, "all") == 0.0

    def test_three_of_four(self):
        locs = [LocationLabel.TOP, LocationLabel.TOP, LocationLabel.LEFT, LocationLabel.RIGHT]
        preds = [make_pred(f"t{i}", True, l) for i, l in enumerate(locs)]
        truths = [make_truth(f"t{i}", True, l) for i, l in enumerate(locs[:3] + [LocationLabel.CENTER])]
        assert exact_match_accuracy("location", preds, truths, "all") == pytest.approx(0.75)

    def test_all_na_matches(self):
        preds = [make_pred(f"t{i}", False) for i in range(3)]
        truths = [make_truth(f"t{i}", False) for i in range(3)]
        assert exact_match_accuracy("location", preds, truths, "all") == 1.0
        assert exact_match_accuracy("quantity", preds, truths, "all") == 1.0

    def test_solar_only_subset(self):
        preds = [make_pred("a", True, LocationLabel.TOP), make_pred("b", False)]
        truths = [make_truth("a", True, LocationLabel.TOP), make_truth("b", False)]
        assert exact_match_accuracy("location", preds, truths, "solar_only") == 1.0

    def test_empty_subset(self):
        preds = [make_pred("a", False)]
        truths = [make_truth("a", False)]
        with pytest.raises(EmptySubset):
            exact_match_accuracy("location", preds, truths, "solar_only")


class TestBceLoss:
    def test_half_is_ln2(self):
        assert bce_loss([0.5], [1]) == pytest.approx(math.log(2), abs=1e-9)

    def test_perfect_predictions(self):
        assert bce_loss([1.0, 0.0], [1, 0]) == pytest.approx(0.0, abs=1e-9)

    def test_clamped_worst_case(self):
        assert bce_loss([0.0], [1]) == pytest.approx(-math.log(1e-12), rel=1e-6)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            bce_loss([0.5], [1, 0])

    def test_constant_predictor_minimized_at_base_rate(self):
        labels = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0]
        grid = [i / 100 for i in range(1, 100)]
        losses = {p: bce_loss([p] * len(labels), labels) for p in grid}
        best = min(losses, key=losses.get)
        assert best == pytest.approx(0.3, abs=0.011)


class TestOracleEquivalence:
    def brute_force(self, preds, truths):
        tp = sum(1 for p, t in zip(preds, truths) if p.assessment.present and t.present)
        fp = sum(1 for p, t in zip(preds, truths) if p.assessment.present and not t.present)
        fn = sum(1 for p, t in zip(preds, truths) if not p.assessment.present and t.present)
        tn = sum(1 for p, t in zip(preds, truths) if not p.assessment.present and not t.present)
        loc_all = sum(1 for p, t in zip(preds, truths) if p.assessment.location is t.location) / len(preds)
        qty_all = sum(1 for p, t in zip(preds, truths) if p.assessment.quantity is t.quantity) / len(preds)
        return ConfusionCounts(tp, fp, fn, tn), loc_all, qty_all

    def test_random_sets_match_brute_force(self):
        rng = random.Random(99)
        for trial in range(30):
            preds, truths = random_pairs(rng, rng.randint(1, 300))
            expected_c, expected_loc, expected_qty = self.brute_force(preds, truths)
            assert confusion(preds, truths) == expected_c
            assert exact_match_accuracy("location", preds, truths, "all") == expected_loc
            assert exact_match_accuracy("quantity", preds, truths, "all") == expected_qty


class TestRenderReport:
    def published_report(self):
        # Table-shaped published values for the Santa Ana fine-tuned row.
        solar = ClassMetrics(precision=0.7118, recall=0.9915, f1=0.8287, accuracy=0.9915, support=118)
        no_solar = ClassMetrics(precision=0.9986, recall=0.9391, f1=0.9679, accuracy=0.9391, support=575)
        weighted = ClassMetrics(precision=0.9608, recall=0.9460, f1=0.9496, accuracy=0.9460, support=693)
        from solarscan.evaluation import MetricsReport

        return MetricsReport(
            region="Santa Ana, CA",
            solar=solar,
            no_solar=no_solar,
            weighted=weighted,
            location_accuracy_solar=0.8738,
            location_accuracy_all=0.8650,
            quantity_accuracy_solar=0.8,
            quantity_accuracy_all=0.8,
            calibration_bce=0.1,
        )

    def test_published_weighted_row(self):
        csv_text = render_report(self.published_report(), "csv")
        assert '"Santa Ana, CA",Weighted Average,96.08,94.60,94.96,94.60' in csv_text

    def test_rows_and_header(self):
        import csv as csv_mod
        import io

        text = render_report(self.published_report(), "csv")
        assert text.splitlines()[0] == "region,class,precision,recall,f1,accuracy"
        rows = list(csv_mod.reader(io.StringIO(text)))[1:]
        assert [r[1] for r in rows] == ["Solar", "No Solar", "Weighted Average"]
        assert [r[2] for r in rows] == ["71.18", "99.86", "96.08"]

    def test_csv_round_trip_two_decimals(self):
        import csv as csv_mod
        import io

        text = render_report(self.published_report(), "csv")
        rows = list(csv_mod.reader(io.StringIO(text)))
        weighted = next(r for r in rows if r[1] == "Weighted Average")
        assert [float(v) for v in weighted[2:]] == [96.08, 94.60, 94.96, 94.60]

    def test_json_mirrors_structure(self):
        import json

        obj = json.loads(render_report(self.published_report(), "json"))
        assert obj["region"] == "Santa Ana, CA"
        assert obj["weighted"]["f1"] == pytest.approx(0.9496)
        assert set(obj) >= {"solar", "no_solar", "weighted", "location_accuracy_solar", "calibration_bce"}


class TestComputeReport:
    def test_weighted_is_support_weighted(self):
        rng = random.Random(5)
        preds, truths = random_pairs(rng, 200)
        report = compute_report(preds, truths, region="all")
        s, n = report.solar, report.no_solar
        total = s.support + n.support
        assert report.weighted.f1 == pytest.approx((s.support * s.f1 + n.support * n.f1) / total)
        assert total == 200
