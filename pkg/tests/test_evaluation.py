import io
import random

import pytest
from hypothesis import given, settings, strategies as st

from crystal.definition import BufferConstraints, CnDefinition
from crystal.evaluation import (
    Metrics, SplitSpec, apply_dictionary, evaluate_labels, learning_curve, run_trial, score,
    split_documents, tolerance_sweep, write_rows,
)
from crystal.induction import Dictionary, InductionConfig, filter_by_coverage, induce
from crystal.instances import CnLabel, Kind, Slot, Voice
from crystal.synthetic import SyntheticSpec, generate_synthetic

from helpers import ASTHMA, NAUSEA, db_of, hierarchy, lexicon

SOS_ABSENT = CnLabel("Sign or Symptom", "absent")
SOS = CnLabel("Sign or Symptom")
DOBJ = Slot(Kind.DIRECT_OBJECT)


def denies_definition():
    return CnDefinition(SOS_ABSENT, DOBJ, Voice.ACTIVE, (
        BufferConstraints(Slot(Kind.SUBJECT), ("PATIENT",),
                          frozenset({"Patient or Disabled Group"})),
        BufferConstraints(Slot(Kind.VERB), ("DENIES",)),
        BufferConstraints(DOBJ, head=frozenset({"Sign or Symptom"})),
    ))


class TestMetrics:
    def test_recall_example(self):
        m = Metrics(possible=5000, extracted=3000, correct=3000)
        assert m.recall == 0.6

    def test_precision_example(self):
        m = Metrics(possible=5000, extracted=4000, correct=3000)
        assert m.precision == 0.75

    def test_empty(self):
        assert Metrics().recall == 0.0 and Metrics().precision == 0.0

    def test_sum(self):
        assert Metrics(1, 2, 1) + Metrics(3, 1, 1) == Metrics(4, 3, 2)


class TestApplyAndScore:
    def setup_method(self):
        h = hierarchy()
        self.db = db_of(("D1", [NAUSEA, ASTHMA]), h=h, lex=lexicon(h))

    def test_empty_dictionary(self):
        assert apply_dictionary(Dictionary(), self.db) == set()

    def test_opening_example(self):
        got = apply_dictionary(Dictionary([denies_definition()]), self.db)
        assert len(got) == 1
        assert next(iter(got)).instance_id == "S1"
        assert score(got, self.db, SOS_ABSENT) == Metrics(1, 1, 1)

    def test_overlap_dedup(self):
        loose = CnDefinition(SOS_ABSENT, DOBJ, Voice.ACTIVE,
                             (BufferConstraints(DOBJ, head=frozenset({"Finding"})),))
        got = apply_dictionary(Dictionary([denies_definition(), loose]), self.db)
        assert len(got) == 1

    def test_wrong_extraction_counts_against_precision(self):
        anything = CnDefinition(SOS_ABSENT, DOBJ, Voice.ACTIVE)
        got = apply_dictionary(Dictionary([anything]), self.db)
        assert score(got, self.db, SOS_ABSENT) == Metrics(1, 2, 1)

    def test_type_only_scoring(self):
        other = CnLabel("Sign or Symptom", "present")
        d = CnDefinition(other, DOBJ, Voice.ACTIVE, denies_definition().constraints)
        got = apply_dictionary(Dictionary([d]), self.db)
        assert score(got, self.db, other) == Metrics(0, 1, 0)
        assert score(got, self.db, SOS) == Metrics(1, 1, 1)
        assert score(got, self.db, other, type_only=True) == Metrics(1, 1, 1)

    def test_subtypes_of_one_buffer_count_once(self):
        present = CnLabel("Sign or Symptom", "present")
        a = denies_definition()
        b = CnDefinition(present, DOBJ, Voice.ACTIVE, a.constraints)
        got = apply_dictionary(Dictionary([a, b]), self.db)
        assert len(got) == 2
        assert score(got, self.db, SOS).extracted == 1


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_score_ignores_order(seed):
    syn = generate_synthetic(SyntheticSpec(n_instances=60, seed=seed % 50, label_noise=0.2))
    lab = syn.db.labels[seed % len(syn.db.labels)]
    d = induce(syn.db, lab, InductionConfig(tolerance=0.3), syn.lexicon, syn.hierarchy)
    ex = list(apply_dictionary(d, syn.db))
    random.Random(seed).shuffle(ex)
    m = score(ex, syn.db, lab)
    assert m == score(sorted(ex), syn.db, lab)
    assert 0 <= m.recall <= 1 and 0 <= m.precision <= 1
    assert m.correct <= min(m.possible, m.extracted)


class TestSplits:
    def test_documents_are_the_unit(self):
        syn = generate_synthetic(SyntheticSpec(n_instances=200, doc_size=7, seed=2))
        train, test = split_documents(syn.db.doc_ids, 0.9, random.Random(0))
        assert not set(train) & set(test)
        assert sorted(train + test) == sorted(syn.db.doc_ids)
        tr, te = syn.db.subset(train), syn.db.subset(test)
        assert {i.doc_id for i in tr}.isdisjoint({i.doc_id for i in te})
        assert len(tr) + len(te) == len(syn.db)

    def test_split_keeps_both_sides(self):
        train, test = split_documents(["a", "b"], 0.99, random.Random(0))
        assert len(train) == 1 and len(test) == 1

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SplitSpec(train_fraction=1.0)
        with pytest.raises(ValueError):
            SplitSpec(trials=0)


@pytest.fixture(scope="module")
def noisy():
    return generate_synthetic(SyntheticSpec(n_instances=400, label_noise=0.1, seed=9))


class TestSweep:
    def test_single_row_equals_direct_run(self, noisy):
        db = noisy.db
        split = SplitSpec(0.9, 1, 5)
        (row,) = tolerance_sweep(db, SOS, [0.1], split, min_coverage=2, type_only=True)
        train_docs, test_docs = split_documents(db.doc_ids, 0.9, random.Random(5))
        direct = run_trial(db.subset(train_docs), db.subset(test_docs), SOS,
                           InductionConfig(tolerance=0.1, min_coverage=2, seed=5), True)
        assert row.mean_recall == direct.recall
        assert row.mean_precision == direct.precision
        assert row.mean_extracted == direct.extracted

    def test_row_count_and_order(self, noisy):
        rows = tolerance_sweep(noisy.db, SOS, [0.0, 0.2, 0.4], SplitSpec(0.9, 2, 0),
                               type_only=True, min_coverages=[2, 5])
        assert [(r.tolerance, r.min_coverage) for r in rows] == [
            (0.0, 2), (0.0, 5), (0.2, 2), (0.2, 5), (0.4, 2), (0.4, 5)]
        assert all(r.trials == 2 for r in rows)

    def test_recall_rises_with_tolerance(self, noisy):
        rows = tolerance_sweep(noisy.db, SOS, [0.0, 0.2], SplitSpec(0.9, 5, 1),
                               min_coverage=2, type_only=True)
        assert rows[1].mean_recall >= rows[0].mean_recall

    def test_deterministic(self, noisy):
        a = tolerance_sweep(noisy.db, SOS, [0.1], SplitSpec(0.9, 3, 7), type_only=True)
        b = tolerance_sweep(noisy.db, SOS, [0.1], SplitSpec(0.9, 3, 7), type_only=True)
        assert a == b


class TestLearningCurve:
    def test_rows_and_direct_run(self):
        syn = generate_synthetic(SyntheticSpec(n_instances=300, seed=4))
        lab = CnLabel("Diagnosis", "past")
        cfg = InductionConfig()
        (row,) = learning_curve(syn.db, lab, [0.5], 1, 3, cfg)
        order = list(syn.db.doc_ids)
        random.Random(3).shuffle(order)
        n = len(order)
        test = syn.db.subset(order[n - 3:])
        train = syn.db.subset(order[:15])
        direct = run_trial(train, test, lab, cfg)
        assert row.mean_recall == direct.recall
        assert row.mean_positive == train.count_labeled(lab)

    def test_recall_grows_with_training(self):
        syn = generate_synthetic(SyntheticSpec(n_instances=400, seed=8))
        rows = learning_curve(syn.db, SOS, [0.05, 0.3, 0.9], 5, 0, InductionConfig(),
                              type_only=True)
        assert len(rows) == 3
        assert [r.train_fraction for r in rows] == [0.05, 0.3, 0.9]
        assert rows[0].mean_positive < rows[1].mean_positive < rows[2].mean_positive
        assert rows[0].mean_recall <= rows[1].mean_recall <= rows[2].mean_recall

    def test_bad_fraction(self):
        syn = generate_synthetic(SyntheticSpec(n_instances=20))
        with pytest.raises(ValueError):
            learning_curve(syn.db, SOS, [1.0], 1, 0, InductionConfig())


def test_coverage_filter_never_adds_extractions(noisy):
    lab = CnLabel("Sign or Symptom", "absent")
    d = induce(noisy.db, lab, InductionConfig(), noisy.lexicon, noisy.hierarchy)
    counts = [len(apply_dictionary(filter_by_coverage(d, m), noisy.db)) for m in (1, 2, 5, 10)]
    assert counts == sorted(counts, reverse=True)


def test_evaluate_labels_micro_sums(noisy):
    labels = noisy.db.labels
    cfg = InductionConfig(tolerance=0.1)
    total = evaluate_labels(noisy.db, noisy.db, labels, cfg)
    parts = [run_trial(noisy.db, noisy.db, lab, cfg) for lab in labels]
    assert total == sum(parts, Metrics())


def test_write_rows():
    rows = tolerance_sweep(generate_synthetic(SyntheticSpec(n_instances=40)).db, SOS, [0.0],
                           SplitSpec(0.5, 1, 0), type_only=True)
    out = io.StringIO()
    write_rows(rows, out)
    header, line, *rest = out.getvalue().splitlines()
    assert header == ("tolerance,min_coverage,trials,mean_recall,mean_precision,"
                      "mean_extracted,mean_definitions")
    assert line.startswith("0.000000,1,1,") and not rest
