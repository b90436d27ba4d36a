"""Command-line interface: prep, train, baseline, eval, predict, export-curves.

Exit codes: 0 success, 2 missing input, 64 usage, 65 corrupt artifact or bad
data, 70 internal failure (non-finite training).
"""

import argparse
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import dataio
from .baselines import CosineKNN, MultinomialNaiveBayes, SGDLinearClassifier
from .estimator import MODEL_FILE, VOCAB_FILE, BiGRUCNNClassifier
from .exceptions import (
    ConfigurationError,
    ContractViolation,
    DataError,
    ModelFileError,
    NonFiniteError,
    UndefinedMetricError,
)
from .metrics import (
    confusion,
    evaluate,
    format_history,
    format_table,
    metrics,
    read_history,
    roc_auc,
    write_history,
)
from .model import ModelConfig
from .text_pipeline import BagOfWords, TweetTokenizer

EXIT_OK, EXIT_MISSING, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 64, 65, 70

BASELINES = ("nb", "logreg", "svm", "knn")
DEFAULT_FEATURES = {"nb": "count", "logreg": "tfidf", "svm": "tfidf", "knn": "tfidf"}

log = logging.getLogger("bigrucnn")


class UsageError(Exception):
    pass


class MissingInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _data_flags(p, required=True):
    p.add_argument("--data", required=required, help="labeled CSV (id,label,tweet)")
    p.add_argument("--text-column", default="tweet")
    p.add_argument("--label-column", default="label")
    p.add_argument("--id-column", default="id")


def _split_flags(p):
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--no-stratify", action="store_true")


def _common_flags(p):
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--seed", type=int, default=1337)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="bigrucnn", description="Bi-GRU + CNN offensive tweet classifier")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prep", help="split a labeled CSV into train/test files")
    _data_flags(p)
    _split_flags(p)
    _common_flags(p)
    p.add_argument("--out", default="prep")

    p = sub.add_parser("train", help="train the Bi-GRU + CNN model")
    _data_flags(p)
    _split_flags(p)
    _common_flags(p)
    p.add_argument("--out", default="run", help="run directory for model, vocab and history")
    defaults = ModelConfig(vocab_size=2)
    for name in ("max_len", "embed_dim", "conv_filters", "kernel_size", "pool", "gru1_hidden",
                 "gru2_hidden", "dense_hidden", "batch_size", "epochs"):
        p.add_argument("--" + name.replace("_", "-"), type=int, default=getattr(defaults, name))
    for name in ("dropout_rate", "learning_rate", "pos_weight"):
        p.add_argument("--" + name.replace("_", "-"), type=float, default=getattr(defaults, name))
    p.add_argument("--min-freq", type=int, default=2)
    p.add_argument("--max-size", type=int, default=20000)
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("baseline", help="fit a classical baseline and print a metrics table")
    _data_flags(p)
    _split_flags(p)
    _common_flags(p)
    p.add_argument("--algo", choices=BASELINES, required=True)
    p.add_argument("--features", choices=("count", "tfidf"))
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1e-5)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("eval", help="evaluate a saved model on labeled data")
    _data_flags(p)
    _common_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--vocab")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("predict", help="score raw texts with a saved model")
    _common_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--vocab")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--input", help="file with one text per line ('-' for stdin)")
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("export-curves", help="re-emit the history CSV of a run directory")
    _common_flags(p)
    p.add_argument("--run", required=True)
    p.add_argument("--out", help="destination (default: stdout)")
    return parser


def _read_config(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _subparser(parser, command):
    for action in parser._subparsers._group_actions:
        if command in action.choices:
            return action.choices[command]
    raise UsageError(command)


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        if not os.path.isfile(args.config):
            raise MissingInput(f"config file not found: {args.config}")
        sub = _subparser(parser, args.command)
        known = {a.dest: a for a in sub._actions}
        overrides = {}
        for key, value in _read_config(args.config).items():
            action = known.get(key)
            if action is None or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            if isinstance(action, argparse._StoreTrueAction):
                overrides[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                overrides[key] = value
        sub.set_defaults(**overrides)
        args = parser.parse_args(argv)
    return args


def _require_file(path):
    if not os.path.isfile(path):
        raise MissingInput(f"input file not found: {path}")


def _load(args):
    _require_file(args.data)
    return dataio.load_csv(args.data, args.text_column, args.label_column, args.id_column)


def _split(args, records):
    corpus = dataio.split(records, args.test_fraction, not args.no_stratify, args.seed)
    return corpus.train, corpus.test


def cmd_prep(args):
    records = _load(args)
    train, test = _split(args, records)
    os.makedirs(args.out, exist_ok=True)
    for name, part in (("train.csv", train), ("test.csv", test)):
        dataio.write_csv(part, os.path.join(args.out, name),
                         args.text_column, args.label_column, args.id_column)
    report = dataio.class_report(records)
    print(f"records: {report['total']}  train: {len(train)}  test: {len(test)}")
    for c in (0, 1):
        print(f"label {c}: {report['counts'][c]} ({report['fractions'][c]:.4f})")
    print(f"majority fraction: {report['majority_fraction']:.4f}")
    return EXIT_OK


def _model_kwargs(args):
    names = [n for n in BiGRUCNNClassifier().get_params()]
    return {n: getattr(args, n) for n in names}


def cmd_train(args):
    records = _load(args)
    train, test = _split(args, records)
    if not train:
        raise ContractViolation("training split is empty")
    clf = BiGRUCNNClassifier(**_model_kwargs(args))
    val = ([r.text for r in test], [r.label for r in test]) if test else None
    clf.fit([r.text for r in train], [r.label for r in train], validation_data=val)
    clf.save(args.out)
    write_history(clf.history_, os.path.join(args.out, "history.csv"))
    print(f"wrote {os.path.join(args.out, MODEL_FILE)}, {VOCAB_FILE}, history.csv")
    if test:
        y = np.array([r.label for r in test])
        probs = clf.predict_proba([r.text for r in test])[:, 1]
        report = _evaluate_with_warning(probs, y, args.threshold)
        print(format_table([("Bi-GRU-CNN", report)]))
    return EXIT_OK


def _evaluate_with_warning(probs, y, threshold):
    report = evaluate(probs, y, threshold)
    if report.auc is None:
        print("warning: evaluation data has a single class; AUC omitted", file=sys.stderr)
    return report


def cmd_baseline(args):
    records = _load(args)
    train, test = _split(args, records)
    if not test:
        raise ContractViolation("test split is empty")
    features = args.features or DEFAULT_FEATURES[args.algo]
    tok = TweetTokenizer()
    bow = BagOfWords(features=features)
    X_train = bow.fit_transform(tok.transform([r.text for r in train]))
    X_test = bow.transform(tok.transform([r.text for r in test]))
    y_train = np.array([r.label for r in train])
    y_test = np.array([r.label for r in test])
    if args.algo == "nb":
        clf = MultinomialNaiveBayes(alpha=args.alpha)
    elif args.algo == "knn":
        clf = CosineKNN(k=args.k)
    else:
        kind = "logistic" if args.algo == "logreg" else "hinge"
        clf = SGDLinearClassifier(kind, lr=args.lr, l2=args.l2, epochs=args.epochs, seed=args.seed)
    clf.fit(X_train, y_train)
    preds = clf.predict(X_test)
    # KNN has no scores; its AUC is computed from the hard votes
    scores = clf.predict_proba(X_test)[:, 1] if hasattr(clf, "predict_proba") else preds
    report = metrics(confusion(preds, y_test))
    try:
        report = report.with_auc(roc_auc(scores, y_test))
    except UndefinedMetricError:
        pass
    name = f"{args.algo} ({features})"
    if args.json:
        print(json.dumps({"algorithm": name, **report.to_dict()}, sort_keys=True))
    else:
        print(format_table([(name, report)]))
    return EXIT_OK


def _load_model(args):
    path = args.model
    model_file = os.path.join(path, MODEL_FILE) if os.path.isdir(path) else path
    _require_file(model_file)
    vocab = args.vocab or os.path.join(os.path.dirname(model_file), VOCAB_FILE)
    _require_file(vocab)
    return BiGRUCNNClassifier.load(model_file, vocab)


def cmd_eval(args):
    clf = _load_model(args)
    records = _load(args)
    if not records:
        raise DataError(f"{args.data} has no data rows")
    y = np.array([r.label for r in records])
    probs = clf.predict_proba([r.text for r in records])[:, 1]
    report = _evaluate_with_warning(probs, y, args.threshold)
    if args.json:
        print(json.dumps(report.to_dict(), sort_keys=True))
    else:
        print(format_table([("Bi-GRU-CNN", report)]))
    return EXIT_OK


def cmd_predict(args):
    clf = _load_model(args)
    if args.text is not None:
        texts = [args.text]
    elif args.input == "-":
        texts = sys.stdin.read().splitlines()
    else:
        _require_file(args.input)
        with open(args.input, encoding="utf-8") as fh:
            texts = fh.read().splitlines()
    if not texts:
        return EXIT_OK
    probs = clf.predict_proba(texts)[:, 1]
    for p in probs:
        print(f"{p:.6f}\t{int(p >= args.threshold)}")
    return EXIT_OK


def cmd_export_curves(args):
    path = os.path.join(args.run, "history.csv")
    _require_file(path)
    history = read_history(path)
    if args.out:
        write_history(history, args.out)
    else:
        sys.stdout.write(format_history(history))
    return EXIT_OK


COMMANDS = {
    "prep": cmd_prep,
    "train": cmd_train,
    "baseline": cmd_baseline,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "export-curves": cmd_export_curves,
}


def main(argv=None):
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as err:
        print(f"bigrucnn: usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except MissingInput as err:
        print(f"bigrucnn: {err}", file=sys.stderr)
        return EXIT_MISSING

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    warnings.simplefilter("default")
    try:
        return COMMANDS[args.command](args)
    except MissingInput as err:
        print(f"bigrucnn: {err}", file=sys.stderr)
        return EXIT_MISSING
    except (UsageError, ConfigurationError) as err:
        print(f"bigrucnn: usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelFileError, DataError) as err:
        print(f"bigrucnn: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_DATA
    except NonFiniteError as err:
        print(f"bigrucnn: training aborted: {err}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ContractViolation, OSError) as err:
        print(f"bigrucnn: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
