"""Plain-text serialization of classifiers and of the full prediction bundle.

Reals are written with 17 significant digits, enough to reproduce every
IEEE double exactly, so a reloaded model gives identical decision values.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .ingest import LabelCatalog
from .multilabel import DecisionRule, OvrModel, predict_label_sets, predict_label_sets_cs
from .svd import SvdModel, project_rows
from .svm import BinarySvmModel, CsModel, KernelSpec, LinearModel
from .ingest import CleanPost
from .textpipe import PipelineConfig, TokenDoc, run_pipeline
from .vectorize import TfIdfModel, build_matrix

__all__ = [
    "ModelBundle",
    "dump_classifier",
    "load_bundle",
    "load_classifier",
    "save_bundle",
]


class FormatError(ValueError):
    pass


def _f(x: float) -> str:
    return f"{float(x):.17g}"


def _vec(values) -> str:
    return " ".join(_f(v) for v in np.ravel(values))


def _binary_lines(model: BinarySvmModel | LinearModel) -> list[str]:
    if isinstance(model, LinearModel):
        return [
            "member linear",
            f"n_features {model.n_features}",
            f"weights {_vec(model.weights)}",
            f"bias {_f(model.bias)}",
        ]
    k = model.kernel
    lines = [
        "member svc",
        f"kernel {k.kind} {_f(k.gamma)} {k.degree} {_f(k.coef0)}",
        f"c {_f(model.c)}",
        f"intercept {_f(model.intercept)}",
        f"n_support {model.alphas.shape[0]} {model.n_features}",
        "indices " + " ".join(str(int(i)) for i in model.support_indices),
        f"alphas {_vec(model.alphas)}",
        f"labels {_vec(model.support_labels)}",
    ]
    lines.extend(_vec(row) for row in model.support_vectors)
    return lines


def dump_classifier(model: OvrModel | CsModel, margin: float = 0.0) -> str:
    if isinstance(model, CsModel):
        lines = ["# setagger cs-model 1", f"classes {len(model.classes)}"]
        lines.extend(str(c) for c in model.classes)
        lines.append(f"margin {_f(margin)}")
        lines.append(f"n_features {model.n_features}")
        lines.extend(_vec(row) for row in model.class_weights)
        return "\n".join(lines) + "\n"
    lines = ["# setagger ovr-model 1", f"classes {len(model.classes)}"]
    lines.extend(model.classes)
    rule = model.decision_rule
    lines.append(f"threshold {_f(rule.threshold)}")
    lines.append(f"fallback_top1 {int(rule.fallback_top1)}")
    for member in model.members:
        lines.extend(_binary_lines(member))
    return "\n".join(lines) + "\n"


class _Lines:
    def __init__(self, text: str):
        self._it: Iterator[str] = iter(ln for ln in text.splitlines() if ln and not ln.startswith("#"))

    def next(self) -> str:
        try:
            return next(self._it)
        except StopIteration:
            raise FormatError("unexpected end of model file") from None

    def keyed(self, key: str) -> list[str]:
        parts = self.next().split(" ")
        if parts[0] != key:
            raise FormatError(f"expected {key!r}, found {parts[0]!r}")
        return [p for p in parts[1:] if p]

    def floats(self, key: str) -> np.ndarray:
        return np.array([float(v) for v in self.keyed(key)], dtype=np.float64)


def _read_member(lines: _Lines):
    kind = lines.keyed("member")[0]
    if kind == "linear":
        lines.keyed("n_features")
        w = lines.floats("weights")
        b = float(lines.keyed("bias")[0])
        return LinearModel(w, b)
    if kind != "svc":
        raise FormatError(f"unknown member type {kind!r}")
    kind, gamma, degree, coef0 = lines.keyed("kernel")
    spec = KernelSpec(kind, float(gamma), int(degree), float(coef0))
    c = float(lines.keyed("c")[0])
    intercept = float(lines.keyed("intercept")[0])
    n_sv, n_feat = (int(v) for v in lines.keyed("n_support"))
    indices = np.array([int(v) for v in lines.keyed("indices")], dtype=np.int64)
    alphas = lines.floats("alphas")
    labels = lines.floats("labels")
    vectors = np.empty((n_sv, n_feat))
    for r in range(n_sv):
        vectors[r] = [float(v) for v in lines.next().split(" ")]
    return BinarySvmModel(indices, alphas, labels, vectors, intercept, spec, c)


def load_classifier(text: str) -> tuple[OvrModel | CsModel, float]:
    """Returns the model and the Crammer-Singer margin (0 for one-vs-rest)."""
    header = text.splitlines()[0] if text else ""
    lines = _Lines(text)
    n_classes = int(lines.keyed("classes")[0])
    classes = tuple(lines.next() for _ in range(n_classes))
    if header.startswith("# setagger cs-model"):
        margin = float(lines.keyed("margin")[0])
        n_feat = int(lines.keyed("n_features")[0])
        w = np.empty((n_classes, n_feat))
        for r in range(n_classes):
            w[r] = [float(v) for v in lines.next().split(" ")]
        return CsModel(w, classes), margin
    if not header.startswith("# setagger ovr-model"):
        raise FormatError("not a setagger classifier file")
    threshold = float(lines.keyed("threshold")[0])
    fallback = lines.keyed("fallback_top1")[0] == "1"
    members = tuple(_read_member(lines) for _ in range(n_classes))
    return OvrModel(classes, members, DecisionRule(threshold, fallback)), 0.0


def _dump_pipeline(config: PipelineConfig) -> str:
    lines = [
        "# setagger pipeline 1",
        f"enable_stemming {int(config.enable_stemming)}",
        f"enable_lemmatization {int(config.enable_lemmatization)}",
        f"stopwords {len(config.stopword_list)}",
        *sorted(config.stopword_list),
        f"preserve_terms {len(config.preserve_terms)}",
        *sorted(config.preserve_terms),
    ]
    return "\n".join(lines) + "\n"


def _load_pipeline(text: str) -> PipelineConfig:
    lines = _Lines(text)
    stem = lines.keyed("enable_stemming")[0] == "1"
    lemma = lines.keyed("enable_lemmatization")[0] == "1"
    n_stop = int(lines.keyed("stopwords")[0])
    stop = frozenset(lines.next() for _ in range(n_stop))
    n_keep = int(lines.keyed("preserve_terms")[0])
    keep = frozenset(lines.next() for _ in range(n_keep))
    return PipelineConfig(stop, keep, stem, lemma)


@dataclass(frozen=True)
class ModelBundle:
    """Everything needed to tag an unseen post."""

    pipeline: PipelineConfig
    catalog: LabelCatalog
    tfidf: TfIdfModel
    svd: SvdModel
    classifier: OvrModel | CsModel
    cs_margin: float = 0.0

    def features(self, docs: Sequence[TokenDoc]) -> np.ndarray:
        if not docs:
            return np.zeros((0, self.svd.rank))
        return project_rows(build_matrix(docs, self.tfidf), self.svd)

    def tokenize(self, posts: Sequence[CleanPost]) -> list[TokenDoc]:
        return [run_pipeline(p, self.pipeline) for p in posts]

    def predict(self, docs: Sequence[TokenDoc]) -> list[frozenset]:
        x = self.features(docs)
        if not len(x):
            return []
        if isinstance(self.classifier, CsModel):
            return predict_label_sets_cs(x, self.classifier, self.cs_margin)
        return predict_label_sets(x, self.classifier)


_FILES = ("pipeline.txt", "catalog.tsv", "tfidf.txt", "svd.txt", "classifier.txt")


def save_bundle(bundle: ModelBundle, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    catalog = "".join(f"{label}\t{count}\n" for label, count in zip(bundle.catalog.labels, bundle.catalog.counts))
    contents = (
        _dump_pipeline(bundle.pipeline),
        catalog,
        bundle.tfidf.to_text(),
        bundle.svd.to_text(),
        dump_classifier(bundle.classifier, bundle.cs_margin),
    )
    for name, text in zip(_FILES, contents):
        with open(os.path.join(directory, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def load_bundle(directory: str) -> ModelBundle:
    texts = {}
    for name in _FILES:
        with open(os.path.join(directory, name), encoding="utf-8") as fh:
            texts[name] = fh.read()
    labels, counts = [], []
    for line in texts["catalog.tsv"].splitlines():
        if line:
            label, count = line.split("\t")
            labels.append(label)
            counts.append(int(count))
    classifier, margin = load_classifier(texts["classifier.txt"])
    return ModelBundle(
        pipeline=_load_pipeline(texts["pipeline.txt"]),
        catalog=LabelCatalog(tuple(labels), tuple(counts)),
        tfidf=TfIdfModel.from_text(texts["tfidf.txt"]),
        svd=SvdModel.from_text(texts["svd.txt"]),
        classifier=classifier,
        cs_margin=margin,
    )
