import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plankit import oracles
from plankit.curation import (
    AnnotationBundle,
    CurationRecord,
    ThresholdPolicy,
    aggregate_plan_validity,
    binarize_likert,
    curate,
    pr_curve,
    write_pr_report,
)
from plankit.errors import ValidationError


def record(kind, score, label=None):
    return CurationRecord(kind, {"idx": id(object())}, score, label=label)


class TestCurate:
    def test_plan_above_threshold_accepted(self):
        result = curate([record("plan", 0.90)])
        assert len(result.accepted) == 1
        assert result.accepted[0].decision == "accepted"

    def test_boundary_counts_as_accept(self):
        result = curate([record("counterfactual", 0.82)])
        assert len(result.accepted) == 1

    def test_condition_just_below_rejected(self):
        result = curate([record("condition", 0.75)])
        assert len(result.rejected) == 1

    def test_missing_score_goes_pending_with_note(self):
        result = curate([record("plan", None)])
        assert len(result.pending) == 1
        assert "missing critic_score" in result.pending[0].note

    def test_partition_is_exact_and_total(self):
        records = [record("plan", s) for s in (0.1, 0.65, 0.9, None, 0.3)]
        result = curate(records)
        assert len(result.accepted) + len(result.rejected) + len(result.pending) == len(records)
        all_scores = sorted(
            (r.critic_score for r in result.all_records() if r.critic_score is not None),
        )
        assert all_scores == sorted(s for s in (0.1, 0.65, 0.9, 0.3))

    def test_custom_policy(self):
        policy = ThresholdPolicy(plan=0.5, condition=0.5, counterfactual=0.5)
        assert len(curate([record("condition", 0.6)], policy).accepted) == 1


class TestPrCurve:
    def worked_records(self):
        return [
            record("plan", 0.9, "valid"),
            record("plan", 0.8, "invalid"),
            record("plan", 0.4, "valid"),
        ]

    def test_worked_example(self):
        point = pr_curve(self.worked_records(), thresholds=[0.7])[0]
        assert point.precision == 0.5
        assert point.recall == 0.5
        assert point.accepted_count == 2

    def test_zero_threshold_has_full_recall(self):
        point = pr_curve(self.worked_records(), thresholds=[0.0])[0]
        assert point.recall == 1.0

    def test_above_max_score_precision_is_nan(self):
        point = pr_curve(self.worked_records(), thresholds=[0.95])[0]
        assert point.accepted_count == 0
        assert math.isnan(point.precision)

    def test_default_thresholds_cover_distinct_scores(self):
        points = pr_curve(self.worked_records())
        assert [p.tau for p in points] == [0.4, 0.8, 0.9]

    def test_requires_labels_and_scores(self):
        with pytest.raises(ValidationError):
            pr_curve([])
        with pytest.raises(ValidationError, match="gold label"):
            pr_curve([record("plan", 0.5)])
        with pytest.raises(ValidationError, match="critic_score"):
            pr_curve([record("plan", None, "valid")])

    def test_report_renders_nan_as_na(self, tmp_path):
        points = pr_curve(self.worked_records(), thresholds=[0.7, 0.95])
        path = write_pr_report(tmp_path / "pr.tsv", points)
        lines = path.read_text().splitlines()
        assert lines[0] == "tau\tprecision\trecall\taccepted"
        assert lines[2].split("\t")[1] == "NA"

    @settings(max_examples=60, deadline=None)
    @given(
        scores=st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=40),
        labels=st.data(),
    )
    def test_recall_and_count_monotone(self, scores, labels):
        records = [
            record("plan", s, labels.draw(st.sampled_from(["valid", "invalid"])))
            for s in scores
        ]
        points = pr_curve(records, thresholds=[i / 10 for i in range(11)])
        counts = [p.accepted_count for p in points]
        assert counts == sorted(counts, reverse=True)
        recalls = [p.recall for p in points if not math.isnan(p.recall)]
        assert recalls == sorted(recalls, reverse=True)


class TestAnnotatorAggregation:
    def test_all_positive_is_valid(self):
        bundle = AnnotationBundle((1, 1, 1), (1, 1, 1), (1, 1, 1), (1, 1, 1))
        assert aggregate_plan_validity(bundle) == "valid"

    def test_single_completeness_vote_fails(self):
        bundle = AnnotationBundle((1, 1, 1), (1, 1, 1), (1, 1, 1), (1, 0, 0))
        assert aggregate_plan_validity(bundle) == "invalid"

    def test_one_third_clears_quarter_gate(self):
        bundle = AnnotationBundle((1, 1, 1), (1, 1, 1), (1, 0, 0), (1, 1, 0))
        assert aggregate_plan_validity(bundle) == "valid"

    def test_permutation_invariant(self):
        for perm in itertools.permutations((1, 0, 0)):
            bundle = AnnotationBundle(perm, (1, 1, 1), (1, 1, 1), (1, 1, 1))
            assert aggregate_plan_validity(bundle) == "valid"

    def test_exhaustive_against_count_rule(self):
        triples = list(itertools.product((0, 1), repeat=3))
        for ach, top, order, comp in itertools.product(triples, repeat=4):
            bundle = AnnotationBundle(ach, top, order, comp)
            assert aggregate_plan_validity(bundle) == oracles.plan_validity_by_counts(
                ach, top, order, comp
            )

    def test_likert_binarization(self):
        assert [binarize_likert(v) for v in (1, 2, 3, 4, 5)] == [0, 0, 1, 1, 1]
        bundle = AnnotationBundle.from_likert(
            achievability=(5, 4, 3), topicality=(5, 5, 1), ordering=(3, 2, 2),
            completeness=(4, 4, 2),
        )
        assert bundle.completeness == (1, 1, 0)
        assert aggregate_plan_validity(bundle) == "valid"

    def test_bad_bundle_rejected(self):
        with pytest.raises(ValidationError):
            AnnotationBundle((1, 1), (1, 1, 1), (1, 1, 1), (1, 1, 1))
        with pytest.raises(ValidationError):
            AnnotationBundle((1, 1, 2), (1, 1, 1), (1, 1, 1), (1, 1, 1))
