import io
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setagger.ingest import LabelCatalog
from setagger.multilabel import (
    DecisionRule,
    MultilabelError,
    evaluate,
    labels_from_decisions,
    percentage_error,
    predict_label_sets,
    predict_label_sets_cs,
    predict_labels,
    predict_labels_cs,
    train_cs_multilabel,
    train_ovr,
)
from setagger.persist import dump_classifier
from setagger.svm import CsModel, KernelSpec, TrainConfig

CLASSES = ("a", "b", "c")


def test_evaluate_worked_example():
    report = evaluate([{"a", "b"}], [{"b", "c"}])
    assert report.accuracy == 1 / 3
    assert report.precision == 1 / 2
    assert report.recall == 1 / 2
    assert report.subset_accuracy == 0.0


def test_evaluate_identity():
    truths = [{"a"}, {"a", "b"}, {"c"}]
    r = evaluate(truths, truths)
    assert (r.accuracy, r.precision, r.recall, r.subset_accuracy, r.percentage_error) == (1, 1, 1, 1, 0)


def test_empty_prediction_counts_zero_precision():
    r = evaluate([{"a"}, {"b"}], [set(), {"b"}])
    assert r.precision == 0.5 and r.accuracy == 0.5


def test_evaluate_errors():
    with pytest.raises(MultilabelError):
        evaluate([{"a"}], [])
    with pytest.raises(MultilabelError):
        evaluate([], [])
    with pytest.raises(MultilabelError):
        evaluate([set()], [{"a"}])


def test_percentage_error_exact():
    assert percentage_error(0.5475) == 45.25


def test_report_csv():
    buf = io.StringIO()
    evaluate([{"a", "b"}], [{"b", "c"}]).write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "metric,value"
    assert [ln.split(",")[0] for ln in lines[1:]] == [
        "accuracy", "precision", "recall", "percentage_error", "subset_accuracy"]


label_sets = st.sets(st.sampled_from("abcd"), min_size=1, max_size=4)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(label_sets, st.sets(st.sampled_from("abcd"), max_size=4)), min_size=1, max_size=15))
def test_metric_properties(pairs):
    truths = [t for t, _ in pairs]
    preds = [p for _, p in pairs]
    r = evaluate(truths, preds)
    assert 0 <= r.subset_accuracy <= r.accuracy <= 1
    perfect = r.accuracy == r.precision == r.recall == 1
    assert perfect == all(t == p for t, p in pairs)
    shuffled = pairs[:]
    random.Random(len(pairs)).shuffle(shuffled)
    s = evaluate([t for t, _ in shuffled], [p for _, p in shuffled])
    assert s.accuracy == pytest.approx(r.accuracy, abs=1e-12)
    assert s.precision == pytest.approx(r.precision, abs=1e-12)
    assert s.recall == pytest.approx(r.recall, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abc"), st.sampled_from("abc")), min_size=1, max_size=20))
def test_singletons_reduce_to_plain_accuracy(pairs):
    r = evaluate([{t} for t, _ in pairs], [{p} for _, p in pairs])
    plain = sum(t == p for t, p in pairs) / len(pairs)
    assert r.accuracy == r.precision == r.recall == r.subset_accuracy == pytest.approx(plain, abs=1e-12)


def test_decision_rule_examples():
    assert labels_from_decisions([2.0, -1.0, 0.5], CLASSES) == {"a", "c"}
    assert labels_from_decisions([-1.0, -2.0, -3.0], CLASSES) == {"a"}
    assert labels_from_decisions([-1.0, -2.0, -3.0], CLASSES, DecisionRule(0.0, False)) == frozenset()
    assert labels_from_decisions([-3.0, -0.5, -2.0], CLASSES) == {"b"}


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_fallback_never_empty(values):
    assert labels_from_decisions(values, CLASSES)


def test_cs_rule_examples():
    model = CsModel(np.array([[3.0], [1.0], [3.0]]), CLASSES)
    assert predict_labels_cs(np.array([1.0]), model) == {"a", "c"}
    model = CsModel(np.array([[1.0], [4.0], [3.0]]), CLASSES)
    assert predict_labels_cs(np.array([1.0]), model) == {"b"}
    assert predict_labels_cs(np.array([1.0]), model, margin=np.inf) == set(CLASSES)


def separable_two_class():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal([2, 0], 0.3, (15, 2)), rng.normal([0, 2], 0.3, (15, 2))])
    labels = [{"a"}] * 15 + [{"b"}] * 15
    return x, labels


@pytest.mark.parametrize("trainer", ["linear", "svc"])
def test_ovr_separable(trainer):
    x, labels = separable_two_class()
    model = train_ovr(x, labels, LabelCatalog(("a", "b"), (15, 15)), trainer, TrainConfig(c=10),
                      kernel=KernelSpec("linear"))
    for member, label in zip(model.members, model.classes):
        y = np.array([1.0 if label in s else -1.0 for s in labels])
        assert np.all(np.sign(member.decision_function(x)) == y)
    assert predict_label_sets(x, model) == [frozenset(s) for s in labels]
    assert predict_labels(x[0], model) == {"a"}


def test_ovr_errors():
    x, labels = separable_two_class()
    with pytest.raises(MultilabelError):
        train_ovr(x, labels, ("a",))
    with pytest.raises(MultilabelError):
        train_ovr(x, labels, ("a", "b", "z"))
    with pytest.raises(MultilabelError):
        train_ovr(x, labels, ("a", "b"), "svc")
    with pytest.raises(MultilabelError):
        train_ovr(x, labels[:-1], ("a", "b"))
    with pytest.raises(MultilabelError):
        train_ovr(x, [s | {"q"} for s in labels], ("a", "b"))


def test_ovr_deterministic_serialization():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 3))
    labels = [{"a"} if r[0] > 0 else {"b", "c"} if r[1] > 0 else {"c"} for r in x]
    one = dump_classifier(train_ovr(x, labels, CLASSES, "linear", TrainConfig(c=1, seed=2)))
    two = dump_classifier(train_ovr(x, labels, CLASSES, "linear", TrainConfig(c=1, seed=2)))
    assert one == two


def test_cs_multilabel_copy_transformation():
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    labels = [{"a"}, {"b"}, {"a", "b"}]
    model, _ = train_cs_multilabel(x, labels, ("a", "b"), TrainConfig(c=10))
    preds = predict_label_sets_cs(x[:2], model)
    assert preds == [{"a"}, {"b"}]
    # the doubly labelled row sits between the two classes
    both = predict_labels_cs(x[2], model, margin=1e-6 + abs(np.diff(model.scores(x[2:]))[0, 0]))
    assert both == {"a", "b"}
