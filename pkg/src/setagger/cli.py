"""Command line entry point.

Every verb accepts the experiment flags (``--k-top-tags``, ``--seed`` ...)
and an optional ``--config`` file of ``key = value`` lines; flags given on
the command line win over the file.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver did not
converge (strict mode).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .experiment import (
    ConvergenceFailure,
    ExperimentConfig,
    ExperimentError,
    load_config_file,
    load_posts,
    prepare_features,
    run_experiment,
    split,
)
from .ingest import IngestError, RawPost, load_corpus, strip_html_code, write_clean_posts
from .multilabel import DecisionRule, MultilabelError, evaluate, train_cs_multilabel, train_ovr
from .persist import FormatError, ModelBundle, load_bundle, save_bundle
from .svd import SvdConvergenceError, SvdError
from .svm import KernelSpec, SvmError, TrainConfig
from .textpipe import run_pipeline
from .vectorize import FilterPolicy, VectorizeError

logger = logging.getLogger("setagger")

EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE = 1, 2, 3

DATA_ERRORS = (IngestError, VectorizeError, SvdError, SvmError, MultilabelError, FormatError, OSError,
               UnicodeDecodeError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_SKIP_FLAGS = {"input", "format", "tags", "strict"}


def _config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("experiment settings")
    group.add_argument("--config", help="file of 'key = value' settings; flags override it")
    group.add_argument("--input", help="dump file (xml or lines format) or cleaned posts (clean)")
    group.add_argument("--format", choices=("xml", "lines", "clean"))
    group.add_argument("--tags", help="tag sidecar for the lines format")
    group.add_argument("--strict", action=argparse.BooleanOptionalAction,
                       help="fail on malformed records and on solver non-convergence")
    for f in dataclasses.fields(ExperimentConfig):
        if f.name in _SKIP_FLAGS or f.name.startswith("_"):
            continue
        flag = "--" + f.name.replace("_", "-")
        if isinstance(f.default, bool):
            group.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction)
        else:
            group.add_argument(flag, dest=f.name, metavar=f.name.upper())


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        values.update(load_config_file(args.config))
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    if not values.get("input"):
        raise UsageError("no input given (--input or 'input' in the config file)")
    try:
        return ExperimentConfig.from_mapping(values)
    except (ExperimentError, SvmError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _cmd_ingest(args) -> int:
    config = _build_config(args)
    errors = []
    if config.format == "clean":
        raise UsageError("ingest reads a raw dump; use --format xml or lines")
    posts = load_corpus(config.input, config.format, tags_path=config.tags, strict=config.strict, errors=errors)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        write_clean_posts(posts, fh)
    for err in errors:
        logger.warning("skipped record at line %d: %s", err.line, err.message)
    print(f"{len(posts)} posts written to {args.output}; {len(errors)} malformed records skipped")
    return 0


def _cmd_preprocess(args) -> int:
    config = _build_config(args)
    catalog, posts = load_posts(config)
    pipeline = config.pipeline_config()
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        for post in posts:
            doc = run_pipeline(post, pipeline)
            fh.write(f"{doc.id}\t{' '.join(doc.tokens)}\t{','.join(doc.tags)}\n")
    print(f"{len(posts)} documents, {len(catalog)} labels: {' '.join(catalog.labels)}")
    return 0


def _split_documents(config: ExperimentConfig, pipeline=None):
    catalog, posts = load_posts(config)
    pipeline = pipeline or config.pipeline_config()
    docs = [run_pipeline(p, pipeline) for p in posts]
    train_idx, test_idx = split(len(docs), config.split_ratio, config.seed)
    return catalog, docs, train_idx, test_idx


def _cmd_train(args) -> int:
    config = _build_config(args)
    catalog, docs, train_idx, test_idx = _split_documents(config)
    fs = prepare_features(docs, train_idx, test_idx, FilterPolicy(config.min_doc_freq, config.max_doc_ratio),
                          config.variance_target, config.svd_rank_cap, config.seed)
    iterations = args.max_iterations if args.max_iterations is not None else config.fixed_iterations
    tc = TrainConfig(c=args.c, max_iterations=iterations, tolerance=config.tolerance, loss=args.loss,
                     seed=config.seed)
    if args.technique == "crammer_singer":
        classifier, diag = train_cs_multilabel(fs.train_x, fs.train_labels, catalog, tc)
        converged = diag.converged
    else:
        rule = DecisionRule(config.threshold, config.fallback_top1)
        kernel = KernelSpec.from_label(args.kernel) if args.trainer == "svc" else None
        classifier = train_ovr(fs.train_x, fs.train_labels, catalog, args.trainer, tc, kernel=kernel, rule=rule)
        converged = classifier.converged
    if not converged:
        if config.strict:
            raise ConvergenceFailure(f"training stopped at the {iterations}-iteration cap without converging")
        logger.warning("training stopped at the iteration cap without converging")
    bundle = ModelBundle(config.pipeline_config(), catalog, fs.tfidf, fs.svd, classifier, config.cs_margin)
    save_bundle(bundle, args.model)
    print(f"trained on {len(train_idx)} posts ({fs.tfidf.n_features} terms, rank {fs.svd.rank}); "
          f"model saved to {args.model}")
    return 0


def _cmd_evaluate(args) -> int:
    config = _build_config(args)
    bundle = load_bundle(args.model)
    _, docs, train_idx, test_idx = _split_documents(config, bundle.pipeline)
    idx = test_idx if args.side == "test" else train_idx
    chosen = [docs[i] for i in idx]
    report = evaluate([d.tags for d in chosen], bundle.predict(chosen))
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            report.write_csv(fh)
    else:
        report.write_csv(sys.stdout)
    return 0


def _cmd_experiment(args) -> int:
    config = _build_config(args)
    record = run_experiment(config, args.output, figures=not args.no_figures)
    failed = [c for c in record.cells if not c.ok]
    print(f"{len(record.cells)} cells ({len(failed)} failed); outputs in {args.output}")
    for name in record.omitted_tables:
        print(f"omitted {name}: empty grid")
    return 0


def _cmd_predict(args) -> int:
    bundle = load_bundle(args.model)
    with open(args.post, encoding="utf-8") as fh:
        body = fh.read()
    clean = strip_html_code(RawPost(0, args.title or "", body, ()))
    (labels,) = bundle.predict([run_pipeline(clean, bundle.pipeline)])
    for label in bundle.catalog.labels:
        if label in labels:
            print(label)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="setagger", description="Tag StackExchange questions with SVM classifiers.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse a dump and strip HTML and code")
    _config_flags(p)
    p.add_argument("--output", required=True, help="cleaned posts file (id, text, tags)")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("preprocess", help="tokenize posts restricted to the top-k tags")
    _config_flags(p)
    p.add_argument("--output", required=True, help="token file (id, tokens, tags)")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("train", help="fit features and a classifier on the training split")
    _config_flags(p)
    p.add_argument("--model", required=True, help="output model directory")
    p.add_argument("--technique", choices=("ovr", "crammer_singer"), default="ovr")
    p.add_argument("--trainer", choices=("linear", "svc"), default="linear",
                   help="one-vs-rest members: linear dual coordinate descent or kernel SMO")
    p.add_argument("--kernel", default="rbf", help="svc kernel: linear, rbf, polyN, sigmoid")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--loss", choices=("hinge", "squared_hinge"), default="hinge")
    p.add_argument("--max-iterations", type=int)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a saved model on the test (or train) split")
    _config_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--side", choices=("test", "train"), default="test")
    p.add_argument("--output", help="metrics CSV (default: stdout)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("experiment", help="run the full grid and write tables and figures")
    _config_flags(p)
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true", help="write CSV tables only")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("predict", help="print predicted tags for one post, one per line")
    p.add_argument("--model", required=True)
    p.add_argument("--title", help="question title, prepended to the body")
    p.add_argument("post", help="file holding the post body (HTML or plain text)")
    p.set_defaults(func=_cmd_predict)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"setagger: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceFailure, SvdConvergenceError) as exc:
        print(f"setagger: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ExperimentError as exc:
        print(f"setagger: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DATA_ERRORS as exc:
        print(f"setagger: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
