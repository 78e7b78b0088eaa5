import os

import pytest

from setagger.cli import main

XML = """<?xml version="1.0" encoding="utf-8"?>
<posts>
  <row Id="1" PostTypeId="1" Title="Undo a commit" Body="&lt;p&gt;How do I undo &lt;code&gt;git reset&lt;/code&gt;?&lt;/p&gt;" Tags="&lt;git&gt;&lt;version-control&gt;" />
  <row Id="2" PostTypeId="2" Body="&lt;p&gt;An answer&lt;/p&gt;" />
  <row Id="3" PostTypeId="1" Title="broken Body="b" />
  <row Id="4" PostTypeId="1" Title="List files" Body="&lt;p&gt;ls output&lt;/p&gt;" Tags="&lt;bash&gt;" />
</posts>
"""


def corpus_args(corpus):
    posts, tags = corpus
    return ["--input", posts, "--tags", tags, "--k-top-tags", "4"]


@pytest.fixture(scope="module")
def model_dir(small_corpus, tmp_path_factory):
    path = str(tmp_path_factory.mktemp("model") / "m")
    assert main(["train", *corpus_args(small_corpus), "--model", path, "--c", "1"]) == 0
    return path


def test_ingest_xml(tmp_path, capsys):
    src = tmp_path / "Posts.xml"
    src.write_text(XML, encoding="utf-8")
    out = tmp_path / "clean.tsv"
    assert main(["ingest", "--input", str(src), "--format", "xml", "--output", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert "git reset" not in lines[0] and lines[0].startswith("1\t")
    assert "1 malformed" in capsys.readouterr().out
    assert main(["ingest", "--input", str(src), "--format", "xml", "--strict", "--output", str(out)]) == 2


def test_preprocess(tmp_path, small_corpus, capsys):
    out = tmp_path / "tokens.tsv"
    assert main(["preprocess", *corpus_args(small_corpus), "--output", str(out)]) == 0
    rows = [ln.split("\t") for ln in out.read_text(encoding="utf-8").splitlines()]
    assert len(rows) > 0 and all(len(r) == 3 and r[2] for r in rows)
    assert "4 labels" in capsys.readouterr().out


def test_train_evaluate_predict(model_dir, small_corpus, tmp_path, capsys):
    report = tmp_path / "metrics.csv"
    assert main(["evaluate", *corpus_args(small_corpus), "--model", model_dir, "--output", str(report)]) == 0
    metrics = dict(ln.split(",") for ln in report.read_text().splitlines()[1:])
    assert float(metrics["subset_accuracy"]) >= 0.5
    with open(os.path.join(os.path.dirname(small_corpus[0]), "posts.tsv"), encoding="utf-8") as fh:
        body = fh.readline().split("\t")[2]
    post = tmp_path / "post.html"
    post.write_text(body, encoding="utf-8")
    capsys.readouterr()
    assert main(["predict", "--model", model_dir, str(post)]) == 0
    printed = capsys.readouterr().out.split()
    assert 1 <= len(printed) <= 4


def test_train_other_techniques(small_corpus, tmp_path):
    for extra in (["--technique", "crammer_singer"], ["--trainer", "svc", "--kernel", "poly2", "--c", "10"]):
        path = str(tmp_path / extra[1])
        assert main(["train", *corpus_args(small_corpus), "--model", path, *extra]) == 0
        assert main(["evaluate", *corpus_args(small_corpus), "--model", path, "--side", "train"]) == 0


def test_experiment_with_config_and_override(small_corpus, tmp_path):
    posts, tags = small_corpus
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"input = {posts}\ntags = {tags}\nk_top_tags = 4\nkernels = linear\nc_values = 1\n"
                   "iterations = 20\ntechniques = ovr\nlosses = hinge\ncross_validate = false\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["experiment", "--config", str(cfg), "--c-values", "1, 0.01", "--output", str(out),
                 "--no-figures"]) == 0
    header = (out / "kernels_test.csv").read_text().splitlines()[0]
    assert header == "kernel,C=1,C=0.01"
    assert not any(name.endswith(".png") for name in os.listdir(out))


def test_usage_errors(small_corpus, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["experiment", *corpus_args(small_corpus)])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 1
    assert main(["experiment", "--output", str(tmp_path)]) == 1
    assert main(["experiment", *corpus_args(small_corpus), "--split-ratio", "1.5", "--output", str(tmp_path)]) == 1
    assert main(["experiment", *corpus_args(small_corpus), "--kernels", "cubic", "--output", str(tmp_path)]) == 1


def test_data_errors(small_corpus, tmp_path):
    missing = str(tmp_path / "nope.tsv")
    assert main(["preprocess", "--input", missing, "--tags", missing, "--output", str(tmp_path / "x")]) == 2
    assert main(["predict", "--model", str(tmp_path), missing]) == 2
    garbage = tmp_path / "garbage.tsv"
    garbage.write_text("not a clean file\n", encoding="utf-8")
    assert main(["preprocess", "--input", str(garbage), "--format", "clean", "--output", str(tmp_path / "y")]) == 2


def test_strict_non_convergence_exit_code(small_corpus, tmp_path):
    args = ["train", *corpus_args(small_corpus), "--model", str(tmp_path / "m"), "--trainer", "svc",
            "--c", "1000", "--max-iterations", "2"]
    assert main([*args, "--strict"]) == 3
    assert main(args) == 0
