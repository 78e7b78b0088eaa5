"""Experiment protocol: split, cross-validate, sweep the grids, write tables.

The grid has three families of cells, one per table layout:

``iterations``
    ``sweep_kernel`` SVC, every C x every iteration budget.
``kernels``
    every kernel x every C at ``fixed_iterations``.
``linear``
    linear SVC technique (one-vs-rest or Crammer-Singer) x loss at
    ``linear_c`` and ``fixed_iterations``.

Term weights and the SVD basis are fitted on training rows only and then
applied to held-out rows.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import ingest
from .ingest import CleanPost, LabelCatalog
from .multilabel import (
    DecisionRule,
    EvalReport,
    MultilabelError,
    evaluate,
    predict_label_sets,
    predict_label_sets_cs,
    train_cs_multilabel,
    train_ovr,
)
from .svd import SvdModel, fit_lsa, project_rows
from .svm import GramWorkspace, KernelSpec, TrainConfig
from .textpipe import PipelineConfig, TokenDoc, default_preserve_terms, default_stopwords, read_term_file, run_pipeline
from .vectorize import FilterPolicy, TfIdfModel, build_matrix, fit

logger = logging.getLogger(__name__)

__all__ = [
    "CellKey",
    "CellResult",
    "ConvergenceFailure",
    "ExperimentConfig",
    "ExperimentError",
    "FeatureSet",
    "RunRecord",
    "emit_tables",
    "kfold",
    "load_documents",
    "load_posts",
    "load_config_file",
    "prepare_features",
    "run_experiment",
    "split",
]

FAMILIES = ("iterations", "kernels", "linear")
TECHNIQUES = ("ovr", "crammer_singer")


class ExperimentError(ValueError):
    pass


class ConvergenceFailure(RuntimeError):
    """A solver hit its iteration cap while running in strict mode."""


def split(n: int, ratio: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle; the first floor(ratio * n) indices train, the rest test."""
    if n < 2:
        raise ExperimentError(f"need at least 2 examples to split, got {n}")
    if not 0.0 < ratio < 1.0:
        raise ExperimentError(f"split ratio must lie in (0, 1), got {ratio}")
    n_train = int(np.floor(ratio * n))
    if n_train == 0 or n_train == n:
        raise ExperimentError(f"ratio {ratio} leaves one side of a {n}-example split empty")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def kfold(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """k (train, validation) pairs; validation folds partition ``range(n)``."""
    if k < 2:
        raise ExperimentError(f"k-fold needs k >= 2, got {k}")
    if k > n:
        raise ExperimentError(f"cannot make {k} folds from {n} examples")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i, val in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(train), np.sort(val)))
    return out


def _floats(value) -> tuple[float, ...]:
    if isinstance(value, str):
        return tuple(float(v) for v in value.split(",") if v.strip())
    return tuple(float(v) for v in value)


def _ints(value) -> tuple[int, ...]:
    if isinstance(value, str):
        return tuple(int(v) for v in value.split(",") if v.strip())
    return tuple(int(v) for v in value)


def _strs(value) -> tuple[str, ...]:
    if isinstance(value, str):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return tuple(value)


def _bool(value) -> bool:
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ExperimentError(f"not a boolean: {value!r}")
    return bool(value)


def _opt_int(value):
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
        return None
    return int(value)


def _opt_str(value):
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
        return None
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    input: str = ""
    format: str = "lines"
    tags: str | None = None
    n_posts: int | None = None
    k_top_tags: int = 10
    split_ratio: float = 0.8
    kfold_k: int = 5
    cross_validate: bool = True
    variance_target: float = 0.9
    svd_rank_cap: int = 3000
    kernels: tuple[str, ...] = ("rbf", "linear", "poly2", "poly3", "sigmoid")
    c_values: tuple[float, ...] = (1000.0, 0.001)
    iterations: tuple[int, ...] = (200, 400, 600, 800, 1000)
    sweep_kernel: str = "rbf"
    fixed_iterations: int = 10000
    techniques: tuple[str, ...] = TECHNIQUES
    losses: tuple[str, ...] = ("hinge", "squared_hinge")
    linear_c: float = 0.001
    tolerance: float = 1e-3
    min_doc_freq: int = 2
    max_doc_ratio: float = 0.95
    stemming: bool = True
    lemmatization: bool = False
    stopwords: str | None = None
    preserve_terms: str | None = None
    threshold: float = 0.0
    fallback_top1: bool = True
    cs_margin: float = 0.0
    strict: bool = False
    seed: int = 0

    _CONVERTERS = {
        "n_posts": _opt_int,
        "tags": _opt_str,
        "stopwords": _opt_str,
        "preserve_terms": _opt_str,
        "kernels": _strs,
        "c_values": _floats,
        "iterations": _ints,
        "techniques": _strs,
        "losses": _strs,
    }

    def __post_init__(self):
        if not 0.0 < self.split_ratio < 1.0:
            raise ExperimentError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        if self.kfold_k < 2:
            raise ExperimentError(f"kfold_k must be >= 2, got {self.kfold_k}")
        if not self.c_values:
            raise ExperimentError("c_values must not be empty")
        if not (self.kernels or self.iterations or (self.techniques and self.losses)):
            raise ExperimentError("every grid is empty; nothing to run")
        for label in self.kernels + (self.sweep_kernel,):
            KernelSpec.from_label(label)
        bad = set(self.techniques) - set(TECHNIQUES)
        if bad:
            raise ExperimentError(f"unknown techniques {sorted(bad)}; expected {TECHNIQUES}")
        if self.format not in ("xml", "lines", "clean"):
            raise ExperimentError(f"unknown input format {self.format!r}")
        for loss in self.losses:
            TrainConfig(loss=loss)

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> "ExperimentConfig":
        names = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for raw_key, value in values.items():
            key = raw_key.strip().replace("-", "_")
            if key not in names:
                raise ExperimentError(f"unknown config key {raw_key!r}")
            conv = cls._CONVERTERS.get(key)
            if conv is not None:
                kwargs[key] = conv(value)
            else:
                default = names[key].default
                if isinstance(default, bool):
                    kwargs[key] = _bool(value)
                elif isinstance(default, int):
                    kwargs[key] = int(value)
                elif isinstance(default, float):
                    kwargs[key] = float(value)
                else:
                    kwargs[key] = value
        return cls(**kwargs)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def snapshot(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def pipeline_config(self) -> PipelineConfig:
        stop = read_term_file(self.stopwords) if self.stopwords else default_stopwords()
        keep = read_term_file(self.preserve_terms) if self.preserve_terms else default_preserve_terms()
        return PipelineConfig(stop, keep, self.stemming, self.lemmatization)


def load_config_file(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip() if not line.lstrip().startswith("#") else ""
            if not line:
                continue
            if "=" not in line:
                raise ExperimentError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


@dataclass(frozen=True)
class CellKey:
    family: str
    kernel: str
    c: float
    iterations: int
    loss: str
    technique: str

    def as_row(self) -> list[str]:
        return [self.family, self.kernel, repr(self.c), str(self.iterations), self.loss, self.technique]


@dataclass
class CellResult:
    key: CellKey
    train_error: float | None = None
    test_error: float | None = None
    train_report: EvalReport | None = None
    test_report: EvalReport | None = None
    cv_fold_accuracies: tuple[float, ...] = ()
    cv_accuracy: float | None = None
    converged: bool | None = None
    error: str | None = None
    wall_time: float = field(default=0.0, compare=False)

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class RunRecord:
    config: dict[str, Any]
    catalog: LabelCatalog
    n_train: int
    n_test: int
    svd_rank: int
    n_terms: int
    cells: list[CellResult]
    omitted_tables: list[str] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        """Deterministic serialization; wall times are kept out on purpose."""
        def report(r: EvalReport | None):
            return None if r is None else dataclasses.asdict(r)

        payload = {
            "config": self.config,
            "catalog": {"labels": list(self.catalog.labels), "counts": list(self.catalog.counts)},
            "n_train": self.n_train,
            "n_test": self.n_test,
            "svd_rank": self.svd_rank,
            "n_terms": self.n_terms,
            "omitted_tables": self.omitted_tables,
            "cells": [
                {
                    "key": dataclasses.asdict(c.key),
                    "train_error": c.train_error,
                    "test_error": c.test_error,
                    "train_report": report(c.train_report),
                    "test_report": report(c.test_report),
                    "cv_fold_accuracies": list(c.cv_fold_accuracies),
                    "cv_accuracy": c.cv_accuracy,
                    "converged": c.converged,
                    "error": c.error,
                }
                for c in self.cells
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class FeatureSet:
    """Projected features for one (fit rows, apply rows) split."""

    tfidf: TfIdfModel
    svd: SvdModel
    train_x: np.ndarray
    train_labels: tuple[frozenset, ...]
    eval_x: np.ndarray
    eval_labels: tuple[frozenset, ...]


def prepare_features(
    docs: Sequence[TokenDoc],
    train_idx: Sequence[int],
    eval_idx: Sequence[int],
    policy: FilterPolicy,
    variance_target: float,
    rank_cap: int,
    seed: int,
) -> FeatureSet:
    """Fit tf-idf and SVD on ``train_idx`` only, then project both sides."""
    train_docs = [docs[i] for i in train_idx]
    eval_docs = [docs[i] for i in eval_idx]
    tfidf = fit(train_docs, policy)
    m_train = build_matrix(train_docs, tfidf)
    svd = fit_lsa(m_train, variance_target, rank_cap, seed)
    m_eval = build_matrix(eval_docs, tfidf)
    return FeatureSet(
        tfidf=tfidf,
        svd=svd,
        train_x=project_rows(m_train, svd),
        train_labels=tuple(frozenset(d.tags) for d in train_docs),
        eval_x=project_rows(m_eval, svd) if eval_docs else np.zeros((0, svd.rank)),
        eval_labels=tuple(frozenset(d.tags) for d in eval_docs),
    )


def enumerate_cells(config: ExperimentConfig) -> list[CellKey]:
    cells = []
    for c in config.c_values:
        for it in config.iterations:
            cells.append(CellKey("iterations", config.sweep_kernel, c, it, "hinge", "ovr"))
    for kernel in config.kernels:
        for c in config.c_values:
            cells.append(CellKey("kernels", kernel, c, config.fixed_iterations, "hinge", "ovr"))
    for technique in config.techniques:
        for loss in config.losses:
            cells.append(CellKey("linear", "linear", config.linear_c, config.fixed_iterations, loss, technique))
    return cells


class _Trainer:
    """Trains and scores one cell on a feature set, caching kernel workspaces."""

    def __init__(self, config: ExperimentConfig, catalog: LabelCatalog):
        self.config = config
        self.catalog = catalog
        self.rule = DecisionRule(config.threshold, config.fallback_top1)
        self._grams: dict[tuple[int, str], GramWorkspace] = {}

    def _gram(self, fs: FeatureSet, kernel: str) -> GramWorkspace:
        key = (id(fs), kernel)
        if key not in self._grams:
            self._grams[key] = GramWorkspace(fs.train_x, KernelSpec.from_label(kernel))
        return self._grams[key]

    def fit_predict(self, key: CellKey, fs: FeatureSet, targets: Sequence[np.ndarray]):
        tc = TrainConfig(c=key.c, max_iterations=key.iterations, tolerance=self.config.tolerance,
                         loss=key.loss, seed=self.config.seed)
        if key.family == "linear" and key.technique == "crammer_singer":
            model, diag = train_cs_multilabel(fs.train_x, fs.train_labels, self.catalog, tc)
            converged = diag.converged
            preds = [predict_label_sets_cs(x, model, self.config.cs_margin) if len(x) else [] for x in targets]
        else:
            if key.family == "linear":
                model = train_ovr(fs.train_x, fs.train_labels, self.catalog, "linear", tc, rule=self.rule)
            else:
                gram = self._gram(fs, key.kernel)
                model = train_ovr(fs.train_x, fs.train_labels, self.catalog, "svc", tc,
                                  rule=self.rule, gram=gram)
            converged = model.converged
            preds = [predict_label_sets(x, model) if len(x) else [] for x in targets]
        if self.config.strict and not converged:
            raise ConvergenceFailure(f"cell {key} did not converge within {key.iterations} iterations")
        return preds, converged

    def drop(self, fs: FeatureSet) -> None:
        for key in [k for k in self._grams if k[0] == id(fs)]:
            del self._grams[key]


def load_posts(config: ExperimentConfig) -> tuple[LabelCatalog, list[CleanPost]]:
    """Read the input, apply the post cap, keep the top-k tags."""
    if config.format == "clean":
        with open(config.input, encoding="utf-8") as fh:
            posts: list[CleanPost] = ingest.read_clean_posts(fh)
    else:
        posts = ingest.load_corpus(config.input, config.format, tags_path=config.tags, strict=config.strict)
    if config.n_posts is not None:
        posts = posts[: config.n_posts]
    return ingest.select_labels(posts, config.k_top_tags)


def load_documents(config: ExperimentConfig) -> tuple[LabelCatalog, list[TokenDoc]]:
    catalog, posts = load_posts(config)
    pipeline = config.pipeline_config()
    return catalog, [run_pipeline(p, pipeline) for p in posts]


def run_experiment(config: ExperimentConfig, output_dir: str | None = None, figures: bool = True) -> RunRecord:
    """Run every grid cell; stage errors inside a cell are recorded, not raised.

    When ``output_dir`` is given the record, the tables and (optionally) the
    figures are written there.
    """
    catalog, docs = load_documents(config)
    policy = FilterPolicy(config.min_doc_freq, config.max_doc_ratio)
    train_idx, test_idx = split(len(docs), config.split_ratio, config.seed)
    main = prepare_features(docs, train_idx, test_idx, policy, config.variance_target,
                            config.svd_rank_cap, config.seed)
    folds: list[FeatureSet] = []
    if config.cross_validate:
        for fold_train, fold_val in kfold(len(train_idx), config.kfold_k, config.seed):
            folds.append(prepare_features(docs, train_idx[fold_train], train_idx[fold_val], policy,
                                          config.variance_target, config.svd_rank_cap, config.seed))
    trainer = _Trainer(config, catalog)
    results = []
    for key in enumerate_cells(config):
        start = time.perf_counter()
        result = CellResult(key)
        try:
            (train_pred, test_pred), converged = trainer.fit_predict(key, main, (main.train_x, main.eval_x))
            result.train_report = evaluate(main.train_labels, train_pred)
            result.test_report = evaluate(main.eval_labels, test_pred)
            result.train_error = result.train_report.percentage_error
            result.test_error = result.test_report.percentage_error
            fold_acc = []
            for fs in folds:
                (val_pred,), fold_converged = trainer.fit_predict(key, fs, (fs.eval_x,))
                fold_acc.append(evaluate(fs.eval_labels, val_pred).accuracy)
                converged = converged and fold_converged
            result.cv_fold_accuracies = tuple(fold_acc)
            result.cv_accuracy = float(np.mean(fold_acc)) if fold_acc else None
            result.converged = converged
        except ConvergenceFailure:
            raise
        except (MultilabelError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.warning("cell %s failed: %s", key, exc)
            result.error = f"{type(exc).__name__}: {exc}"
        result.wall_time = time.perf_counter() - start
        results.append(result)
    record = RunRecord(
        config=config.snapshot(),
        catalog=catalog,
        n_train=len(train_idx),
        n_test=len(test_idx),
        svd_rank=main.svd.rank,
        n_terms=main.tfidf.n_features,
        cells=results,
    )
    if output_dir is not None:
        write_outputs(record, output_dir, figures=figures)
    return record


def _pct(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def _c_label(c: float) -> str:
    return f"C={c:g}"


def _table(rows: list[str], cols: list[str], lookup, row_name: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([row_name, *cols])
    for r in rows:
        writer.writerow([r, *(_pct(lookup(r, c)) for c in cols)])
    return buf.getvalue()


def build_tables(record: RunRecord) -> tuple[dict[str, str], list[str]]:
    """CSV text of every non-empty table keyed by file name, plus omitted names."""
    by_key = {c.key: c for c in record.cells}
    cfg = record.config
    tables: dict[str, str] = {}
    omitted = []
    c_values = list(cfg["c_values"])
    c_cols = [_c_label(c) for c in c_values]

    def error_of(key: CellKey, side: str):
        cell = by_key.get(key)
        if cell is None or not cell.ok:
            return None
        return cell.train_error if side == "train" else cell.test_error

    for side in ("train", "test"):
        if cfg["iterations"]:
            def iter_lookup(r, col, side=side):
                c = c_values[c_cols.index(col)]
                return error_of(CellKey("iterations", cfg["sweep_kernel"], c, int(r), "hinge", "ovr"), side)
            tables[f"iterations_{side}.csv"] = _table(
                [str(i) for i in cfg["iterations"]], c_cols, iter_lookup, "iterations")
        else:
            omitted.append(f"iterations_{side}.csv")
        if cfg["kernels"]:
            def kernel_lookup(r, col, side=side):
                c = c_values[c_cols.index(col)]
                return error_of(CellKey("kernels", r, c, cfg["fixed_iterations"], "hinge", "ovr"), side)
            tables[f"kernels_{side}.csv"] = _table(list(cfg["kernels"]), c_cols, kernel_lookup, "kernel")
        else:
            omitted.append(f"kernels_{side}.csv")
        if cfg["techniques"] and cfg["losses"]:
            def linear_lookup(r, col, side=side):
                return error_of(CellKey("linear", "linear", cfg["linear_c"], cfg["fixed_iterations"], col, r), side)
            tables[f"linear_{side}.csv"] = _table(list(cfg["techniques"]), list(cfg["losses"]),
                                                  linear_lookup, "technique")
        else:
            omitted.append(f"linear_{side}.csv")
    return tables, omitted


def _cells_csv(record: RunRecord) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["family", "kernel", "c", "iterations", "loss", "technique", "train_error", "test_error",
                     "train_accuracy", "test_accuracy", "test_precision", "test_recall", "test_subset_accuracy",
                     "cv_accuracy", "converged", "error"])
    for cell in record.cells:
        tr, te = cell.train_report, cell.test_report
        writer.writerow([
            *cell.key.as_row(),
            _pct(cell.train_error),
            _pct(cell.test_error),
            "" if tr is None else f"{tr.accuracy:.6f}",
            "" if te is None else f"{te.accuracy:.6f}",
            "" if te is None else f"{te.precision:.6f}",
            "" if te is None else f"{te.recall:.6f}",
            "" if te is None else f"{te.subset_accuracy:.6f}",
            "" if cell.cv_accuracy is None else f"{cell.cv_accuracy:.6f}",
            "" if cell.converged is None else int(cell.converged),
            cell.error or "",
        ])
    return buf.getvalue()


def emit_tables(record: RunRecord, output_dir: str) -> list[str]:
    """Write the table CSVs plus ``cells.csv``; return the written paths."""
    os.makedirs(output_dir, exist_ok=True)
    tables, omitted = build_tables(record)
    tables["cells.csv"] = _cells_csv(record)
    record.omitted_tables = omitted
    paths = []
    for name, text in tables.items():
        path = os.path.join(output_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths.append(path)
    return paths


def write_outputs(record: RunRecord, output_dir: str, figures: bool = True) -> None:
    paths = emit_tables(record, output_dir)
    timings = os.path.join(output_dir, "timings.csv")
    with open(timings, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["family", "kernel", "c", "iterations", "loss", "technique", "wall_time_s"])
        for cell in record.cells:
            writer.writerow([*cell.key.as_row(), f"{cell.wall_time:.3f}"])
    paths.append(timings)
    if figures:
        from .plotting import render_figures

        paths.extend(render_figures(record, output_dir))
    record.artifacts = [os.path.basename(p) for p in paths]
    with open(os.path.join(output_dir, "run_record.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(record.to_json())
