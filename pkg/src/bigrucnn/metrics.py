"""Confusion-matrix metrics, ROC-AUC, per-epoch history CSV and report tables."""

import csv
import io
from dataclasses import asdict, dataclass, fields
from fractions import Fraction

import numpy as np

from .exceptions import ContractViolation, UndefinedMetricError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    auc: float = None

    def with_auc(self, auc):
        return EvalReport(**{**asdict(self), "auc": auc})

    def to_dict(self):
        return asdict(self)


def _labels(values, name):
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ContractViolation(f"{name} must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ContractViolation(f"{name} must contain only 0/1 labels")
    return arr.astype(np.int64)


def confusion(preds, truth):
    p, t = _labels(preds, "preds"), _labels(truth, "truth")
    if p.shape != t.shape:
        raise ContractViolation(f"preds has {p.size} labels, truth has {t.size}")
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (t == 1))),
        tn=int(np.sum((p == 0) & (t == 0))),
        fp=int(np.sum((p == 1) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))),
    )


def _ratio(num, den):
    return Fraction(num, den) if den else Fraction(0)


def _f1(p, r):
    return 2 * p * r / (p + r) if p + r else Fraction(0)


def metrics(cm):
    """Accuracy, precision, recall, F1 for the positive class plus support-weighted
    averages over both classes.

    Everything is computed in exact rationals and rounded once, so algebraic
    identities such as weighted recall == accuracy hold bit-for-bit.
    """
    n = cm.total
    if n <= 0:
        raise ContractViolation("cannot compute metrics on an empty confusion matrix")
    p1, r1 = _ratio(cm.tp, cm.tp + cm.fp), _ratio(cm.tp, cm.tp + cm.fn)
    p0, r0 = _ratio(cm.tn, cm.tn + cm.fn), _ratio(cm.tn, cm.tn + cm.fp)
    w1, w0 = Fraction(cm.tp + cm.fn, n), Fraction(cm.tn + cm.fp, n)
    return EvalReport(
        accuracy=float(Fraction(cm.tp + cm.tn, n)),
        precision=float(p1),
        recall=float(r1),
        f1=float(_f1(p1, r1)),
        weighted_precision=float(w1 * p1 + w0 * p0),
        weighted_recall=float(w1 * r1 + w0 * r0),
        weighted_f1=float(w1 * _f1(p1, r1) + w0 * _f1(p0, r0)),
    )


def _average_ranks(x):
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, truth):
    """Mann-Whitney AUC: P(pos > neg) + 0.5 P(pos == neg)."""
    s = np.asarray(scores, dtype=np.float64)
    t = _labels(truth, "truth")
    if s.shape != t.shape:
        raise ContractViolation(f"{s.size} scores for {t.size} labels")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC-AUC needs both classes in truth")
    ranks = _average_ranks(s)
    u = ranks[t == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate(probabilities, truth, threshold=0.5):
    """EvalReport for scores thresholded at ``threshold``; auc is None for one-class truth."""
    probs = np.asarray(probabilities, dtype=np.float64)
    report = metrics(confusion((probs >= threshold).astype(np.int64), truth))
    try:
        return report.with_auc(roc_auc(probs, truth))
    except UndefinedMetricError:
        return report


# -- training history ----------------------------------------------------------

@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float = None
    val_acc: float = None
    val_recall: float = None
    val_auc: float = None


HISTORY_COLUMNS = tuple(f.name for f in fields(EpochRecord))


def format_history(history):
    """CSV text, one row per epoch, floats at 6 decimals, missing values empty."""
    if not history:
        raise ContractViolation("history is empty")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for rec in history:
        row = [rec.epoch]
        for col in HISTORY_COLUMNS[1:]:
            value = getattr(rec, col)
            row.append("" if value is None else f"{value:.6f}")
        writer.writerow(row)
    return buf.getvalue()


def write_history(history, path):
    text = format_history(history)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_history(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != HISTORY_COLUMNS:
            raise ContractViolation(f"{path}: unexpected history header {reader.fieldnames}")
        return [
            EpochRecord(
                epoch=int(row["epoch"]),
                **{c: (float(row[c]) if row[c] != "" else None) for c in HISTORY_COLUMNS[1:]},
            )
            for row in reader
        ]


# -- plain-text report -----------------------------------------------------------

_TABLE_HEADER = ("Algorithm", "Average", "Accuracy", "Precision", "Recall", "F1-Score", "AUC")


def _pct(x):
    return "-" if x is None else f"{100 * x:.2f}"


def report_rows(name, report):
    """Binary and weighted rows, in percent."""
    return [
        (name, "binary", _pct(report.accuracy), _pct(report.precision),
         _pct(report.recall), _pct(report.f1), _pct(report.auc)),
        (name, "weighted", _pct(report.accuracy), _pct(report.weighted_precision),
         _pct(report.weighted_recall), _pct(report.weighted_f1), _pct(report.auc)),
    ]


def format_table(named_reports):
    rows = [_TABLE_HEADER]
    for name, report in named_reports:
        rows.extend(report_rows(name, report))
    widths = [max(len(r[i]) for r in rows) for i in range(len(_TABLE_HEADER))]
    lines = []
    for k, row in enumerate(rows):
        cells = [row[0].ljust(widths[0]), row[1].ljust(widths[1])]
        cells += [c.rjust(w) for c, w in zip(row[2:], widths[2:])]
        lines.append("  ".join(cells).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
