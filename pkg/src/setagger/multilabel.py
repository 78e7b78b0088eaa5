"""One-vs-rest multi-label classification and set-based evaluation metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .svm import (
    BinarySvmModel,
    CsModel,
    GramWorkspace,
    KernelSpec,
    LinearModel,
    SvmError,
    TrainConfig,
    TrainingDiagnostics,
    train_crammer_singer,
    train_linear_dcd,
    train_svc_smo,
)

__all__ = [
    "TRAINERS",
    "DecisionRule",
    "EvalReport",
    "MultilabelError",
    "OvrModel",
    "evaluate",
    "percentage_error",
    "predict_label_sets",
    "predict_label_sets_cs",
    "predict_labels",
    "predict_labels_cs",
    "train_cs_multilabel",
    "train_ovr",
]

TRAINERS = ("svc", "linear")

LabelSet = frozenset


class MultilabelError(ValueError):
    pass


@dataclass(frozen=True)
class DecisionRule:
    threshold: float = 0.0
    fallback_top1: bool = True


@dataclass(frozen=True)
class OvrModel:
    classes: tuple[str, ...]
    members: tuple[BinarySvmModel | LinearModel, ...]
    decision_rule: DecisionRule = DecisionRule()
    diagnostics: tuple[TrainingDiagnostics, ...] = field(default=(), compare=False, repr=False)

    @property
    def n_features(self) -> int:
        return self.members[0].n_features

    @property
    def converged(self) -> bool:
        return all(d.converged for d in self.diagnostics)

    def decision_matrix(self, features) -> np.ndarray:
        """(n_samples, n_classes) decision values in catalog order."""
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise MultilabelError(f"expected {self.n_features} features, got {x.shape[1]}")
        return np.column_stack([m.decision_function(x) for m in self.members])


def _labels_of(catalog) -> tuple[str, ...]:
    return tuple(getattr(catalog, "labels", catalog))


def train_ovr(
    features,
    label_sets: Sequence[Iterable[str]],
    catalog,
    trainer: str = "linear",
    config: TrainConfig = TrainConfig(),
    *,
    kernel: KernelSpec | None = None,
    rule: DecisionRule = DecisionRule(),
    gram: GramWorkspace | None = None,
) -> OvrModel:
    """Train one binary classifier per catalog label, in catalog order.

    ``trainer`` is ``"svc"`` (kernel SMO, needs ``kernel``) or ``"linear"``
    (dual coordinate descent). For ``"svc"`` all members share one kernel
    workspace, passed in as ``gram`` or built here.
    """
    classes = _labels_of(catalog)
    if len(classes) < 2:
        raise MultilabelError("one-vs-rest needs a catalog of at least 2 labels")
    if trainer not in TRAINERS:
        raise MultilabelError(f"unknown trainer {trainer!r}; expected one of {TRAINERS}")
    x = np.asarray(features, dtype=np.float64)
    sets = [frozenset(s) for s in label_sets]
    if len(sets) != x.shape[0]:
        raise MultilabelError(f"{x.shape[0]} feature rows but {len(sets)} label sets")
    unknown = set().union(*sets) - set(classes) if sets else set()
    if unknown:
        raise MultilabelError(f"labels outside the catalog: {sorted(unknown)}")
    if trainer == "svc":
        if kernel is None and gram is None:
            raise MultilabelError("the svc trainer needs a kernel")
        if gram is None:
            gram = GramWorkspace(x, kernel)
    members = []
    diags = []
    for label in classes:
        y = np.array([1.0 if label in s else -1.0 for s in sets])
        if np.all(y > 0) or np.all(y < 0):
            side = "negative" if np.all(y > 0) else "positive"
            raise MultilabelError(f"class {label!r} has no {side} training examples")
        if trainer == "svc":
            model, diag = train_svc_smo(x, y, gram.spec, config, gram=gram)
        else:
            model, diag = train_linear_dcd(x, y, config)
        members.append(model)
        diags.append(diag)
    return OvrModel(classes, tuple(members), rule, tuple(diags))


def _rule_sets(values: np.ndarray, classes: Sequence[str], rule: DecisionRule) -> list[frozenset]:
    out = []
    for row in values:
        chosen = frozenset(classes[c] for c in np.flatnonzero(row > rule.threshold))
        if not chosen and rule.fallback_top1:
            chosen = frozenset({classes[int(np.argmax(row))]})
        out.append(chosen)
    return out


def predict_labels(x, model: OvrModel) -> frozenset:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise MultilabelError("predict_labels takes a single feature vector")
    return predict_label_sets(x[None, :], model)[0]


def predict_label_sets(features, model: OvrModel) -> list[frozenset]:
    return _rule_sets(model.decision_matrix(features), model.classes, model.decision_rule)


def labels_from_decisions(values, classes: Sequence[str], rule: DecisionRule = DecisionRule()) -> frozenset:
    """Apply the threshold/fallback rule to one row of decision values."""
    return _rule_sets(np.atleast_2d(np.asarray(values, dtype=np.float64)), classes, rule)[0]


def train_cs_multilabel(features, label_sets: Sequence[Iterable[str]], catalog,
                        config: TrainConfig = TrainConfig()) -> tuple[CsModel, TrainingDiagnostics]:
    """Crammer-Singer over multi-label data: one training row per (post, label) pair."""
    classes = _labels_of(catalog)
    index = {c: i for i, c in enumerate(classes)}
    x = np.asarray(features, dtype=np.float64)
    rows, ys = [], []
    for i, labels in enumerate(label_sets):
        for label in sorted(labels, key=index.__getitem__):
            rows.append(i)
            ys.append(index[label])
    if not rows:
        raise MultilabelError("no labelled examples")
    try:
        return train_crammer_singer(x[rows], np.array(ys), len(classes), config, classes=classes)
    except SvmError as exc:
        raise MultilabelError(str(exc)) from exc


def _cs_sets(scores: np.ndarray, classes: Sequence[str], margin: float) -> list[frozenset]:
    top = scores.max(axis=1, keepdims=True)
    return [frozenset(classes[c] for c in np.flatnonzero(row)) for row in scores >= top - margin]


def predict_labels_cs(x, model: CsModel, margin: float = 0.0) -> frozenset:
    """Every class scoring within ``margin`` of the best; ``margin=0`` is top-1 with ties."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise MultilabelError("predict_labels_cs takes a single feature vector")
    return predict_label_sets_cs(x[None, :], model, margin)[0]


def predict_label_sets_cs(features, model: CsModel, margin: float = 0.0) -> list[frozenset]:
    try:
        scores = model.scores(features)
    except SvmError as exc:
        raise MultilabelError(str(exc)) from exc
    return _cs_sets(scores, model.classes, margin)


def percentage_error(accuracy: float) -> float:
    return (1.0 - accuracy) * 100.0


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    percentage_error: float
    subset_accuracy: float
    n_examples: int

    FIELDS = ("accuracy", "precision", "recall", "percentage_error", "subset_accuracy")

    def rows(self) -> list[tuple[str, float]]:
        return [(name, getattr(self, name)) for name in self.FIELDS]

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "value"])
        for name, value in self.rows():
            writer.writerow([name, repr(float(value))])


def evaluate(truths: Sequence[Iterable[str]], predictions: Sequence[Iterable[str]]) -> EvalReport:
    """Example-based multi-label metrics.

    Per example: Jaccard overlap |Y & Z| / |Y | Z|, precision |Y & Z| / |Z|
    (0 when Z is empty), recall |Y & Z| / |Y|, and exact-match indicator; each
    averaged over the examples.
    """
    if len(truths) != len(predictions):
        raise MultilabelError(f"{len(truths)} truth sets but {len(predictions)} predictions")
    if not truths:
        raise MultilabelError("cannot evaluate zero examples")
    acc = prec = rec = exact = 0.0
    for y, z in zip(truths, predictions):
        y, z = frozenset(y), frozenset(z)
        if not y:
            raise MultilabelError("every truth label set must be nonempty")
        inter = len(y & z)
        acc += inter / len(y | z)
        prec += inter / len(z) if z else 0.0
        rec += inter / len(y)
        exact += y == z
    n = len(truths)
    accuracy = acc / n
    return EvalReport(
        accuracy=accuracy,
        precision=prec / n,
        recall=rec / n,
        percentage_error=percentage_error(accuracy),
        subset_accuracy=exact / n,
        n_examples=n,
    )
