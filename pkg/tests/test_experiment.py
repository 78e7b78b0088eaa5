import json
import os

import numpy as np
import pytest

from setagger import experiment
from setagger.experiment import (
    ConvergenceFailure,
    ExperimentConfig,
    ExperimentError,
    build_tables,
    kfold,
    load_config_file,
    load_documents,
    prepare_features,
    run_experiment,
    split,
)
from setagger.textpipe import TokenDoc
from setagger.vectorize import FilterPolicy


def small_config(corpus, **changes):
    posts, tags = corpus
    base = dict(input=posts, tags=tags, k_top_tags=4, kernels=("rbf", "linear"), c_values=(1000.0, 0.001),
                iterations=(50,), fixed_iterations=2000, kfold_k=3)
    base.update(changes)
    return ExperimentConfig(**base)


def test_split_examples():
    tr, te = split(10, 0.8, 0)
    assert len(tr) == 8 and len(te) == 2 and not set(tr) & set(te)
    assert sorted(set(tr) | set(te)) == list(range(10))
    again = split(10, 0.8, 0)
    assert np.array_equal(tr, again[0]) and np.array_equal(te, again[1])
    assert [len(p) for p in split(2, 0.5, 3)] == [1, 1]


def test_split_errors():
    with pytest.raises(ExperimentError):
        split(1, 0.5, 0)
    with pytest.raises(ExperimentError):
        split(10, 1.0, 0)
    with pytest.raises(ExperimentError):
        split(3, 0.2, 0)


def test_kfold_examples():
    folds = kfold(10, 5, 0)
    assert [len(v) for _, v in folds] == [2] * 5
    assert sorted(len(v) for _, v in kfold(7, 3, 1)) == [2, 2, 3]
    all_val = np.concatenate([v for _, v in folds])
    assert sorted(all_val) == list(range(10))
    for tr, val in folds:
        assert not set(tr) & set(val) and len(tr) + len(val) == 10
    with pytest.raises(ExperimentError):
        kfold(3, 4, 0)
    with pytest.raises(ExperimentError):
        kfold(3, 1, 0)


def test_config_validation():
    with pytest.raises(ExperimentError):
        ExperimentConfig(split_ratio=1.2)
    with pytest.raises(ExperimentError):
        ExperimentConfig(kfold_k=1)
    with pytest.raises(ExperimentError):
        ExperimentConfig(c_values=())
    with pytest.raises(ExperimentError):
        ExperimentConfig(kernels=(), iterations=(), techniques=())
    with pytest.raises(ExperimentError):
        ExperimentConfig(techniques=("ovo",))
    with pytest.raises(Exception):
        ExperimentConfig(kernels=("cubic",))


def test_config_file_and_mapping(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\ninput = posts.tsv\nkernels = rbf, poly2\nc_values = 1, 0.5\n"
                    "cross_validate = no\nn_posts = none\nseed = 7  # trailing\n", encoding="utf-8")
    cfg = ExperimentConfig.from_mapping(load_config_file(str(path)))
    assert cfg.kernels == ("rbf", "poly2") and cfg.c_values == (1.0, 0.5)
    assert cfg.cross_validate is False and cfg.n_posts is None and cfg.seed == 7
    with pytest.raises(ExperimentError):
        ExperimentConfig.from_mapping({"colour": "blue"})
    bad = tmp_path / "bad.cfg"
    bad.write_text("just words\n", encoding="utf-8")
    with pytest.raises(ExperimentError):
        load_config_file(str(bad))


def test_single_cell_grid(small_corpus, tmp_path):
    cfg = small_config(small_corpus, kernels=("linear",), c_values=(1.0,), iterations=(), techniques=())
    record = run_experiment(cfg, str(tmp_path), figures=False)
    assert len(record.cells) == 1
    assert sorted(record.omitted_tables) == ["iterations_test.csv", "iterations_train.csv",
                                             "linear_test.csv", "linear_train.csv"]
    written = sorted(os.listdir(tmp_path))
    assert written == ["cells.csv", "kernels_test.csv", "kernels_train.csv", "run_record.json", "timings.csv"]
    assert json.loads((tmp_path / "run_record.json").read_text())["omitted_tables"] == record.omitted_tables


def test_tables_and_invariants(small_corpus):
    cfg = small_config(small_corpus)
    record = run_experiment(cfg)
    keys = [c.key for c in record.cells]
    assert len(keys) == len(set(keys)) == 2 + 4 + 4
    for cell in record.cells:
        assert cell.ok, cell.error
        assert 0 <= cell.train_error <= 100 and 0 <= cell.test_error <= 100
        assert cell.cv_accuracy == pytest.approx(sum(cell.cv_fold_accuracies) / 3, abs=1e-12)
    tables, omitted = build_tables(record)
    assert omitted == []
    kernel_rows = tables["kernels_test.csv"].splitlines()
    assert kernel_rows[0] == "kernel,C=1000,C=0.001"
    assert [r.split(",")[0] for r in kernel_rows[1:]] == ["rbf", "linear"]
    assert all(len(r.split(",")[1].split(".")[1]) == 2 for r in kernel_rows[1:])
    linear = [r.split(",") for r in tables["linear_train.csv"].splitlines()]
    assert linear[0] == ["technique", "hinge", "squared_hinge"]
    cs = dict((r[0], r[1:]) for r in linear[1:])["crammer_singer"]
    assert cs[0] == cs[1]


def test_hard_margin_fits_training_data_better(small_corpus):
    record = run_experiment(small_config(small_corpus, iterations=(), techniques=(), cross_validate=False))
    err = {(c.key.kernel, c.key.c): c.train_error for c in record.cells}
    for kernel in ("rbf", "linear"):
        assert err[(kernel, 1000.0)] <= err[(kernel, 0.001)]


def test_no_leakage(small_corpus):
    cfg = small_config(small_corpus)
    _, docs = load_documents(cfg)
    tr, te = split(len(docs), cfg.split_ratio, cfg.seed)
    policy = FilterPolicy(cfg.min_doc_freq, cfg.max_doc_ratio)
    base = prepare_features(docs, tr, te, policy, 0.9, 3000, 0)
    swapped = list(docs)
    swapped[te[0]] = TokenDoc(docs[te[0]].id, ("completely", "different", "words"), docs[te[0]].tags)
    other = prepare_features(swapped, tr, te, policy, 0.9, 3000, 0)
    assert other.tfidf.to_text() == base.tfidf.to_text()
    assert other.svd.to_text() == base.svd.to_text()
    leaked = prepare_features(swapped, np.append(tr, te[0]), te[1:], policy, 0.9, 3000, 0)
    assert leaked.tfidf.to_text() != base.tfidf.to_text()


def test_cell_failure_is_isolated(small_corpus, monkeypatch):
    real = experiment.train_ovr

    def flaky(x, labels, catalog, trainer, config, **kw):
        if trainer == "svc" and kw.get("gram") is not None and kw["gram"].spec.kind == "linear":
            raise ValueError("simulated solver failure")
        return real(x, labels, catalog, trainer, config, **kw)

    monkeypatch.setattr(experiment, "train_ovr", flaky)
    record = run_experiment(small_config(small_corpus, iterations=(), techniques=()))
    failed = [c for c in record.cells if not c.ok]
    assert {c.key.kernel for c in failed} == {"linear"}
    assert all("simulated" in c.error for c in failed)
    assert all(c.ok for c in record.cells if c.key.kernel == "rbf")
    tables, _ = build_tables(record)
    assert tables["kernels_test.csv"].splitlines()[2] == "linear,,"


def test_strict_non_convergence_raises(small_corpus):
    cfg = small_config(small_corpus, iterations=(2,), kernels=(), techniques=(), strict=True)
    with pytest.raises(ConvergenceFailure):
        run_experiment(cfg)


def test_outputs_deterministic(small_corpus, tmp_path):
    cfg = small_config(small_corpus)
    run_experiment(cfg, str(tmp_path / "a"))
    run_experiment(cfg, str(tmp_path / "b"))
    names = sorted(os.listdir(tmp_path / "a"))
    assert {"iterations.png", "kernels.png", "linear.png"} <= set(names)
    for name in names:
        if name == "timings.csv":
            continue
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
