"""Labeled tweet CSV ingestion, seeded train/test splitting and class counts."""

import csv
import io
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import ConfigurationError, ContractViolation, CsvParseError, LabelError, SchemaError
from .tensor import Rng


class RawTweet(NamedTuple):
    id: str
    text: str
    label: int


def _byte_offset(text, line_num):
    # line_num is 1-based and counts physical lines consumed so far
    lines = text.splitlines(keepends=True)
    return len("".join(lines[: max(line_num - 1, 0)]).encode("utf-8"))


def load_csv(path, text_column="tweet", label_column="label", id_column="id"):
    """One RawTweet per data row, in file order.

    A missing ``id_column`` falls back to the 1-based row number.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        content = fh.read()
    reader = csv.reader(io.StringIO(content, newline=""), strict=True)
    records = []
    try:
        header = next(reader, None)
        if header is None:
            raise SchemaError(text_column)
        for column in (text_column, label_column):
            if column not in header:
                raise SchemaError(column)
        ti, li = header.index(text_column), header.index(label_column)
        ii = header.index(id_column) if id_column in header else None
        for rowno, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvParseError(
                    f"row {rowno} has {len(row)} fields, header has {len(header)}",
                    _byte_offset(content, reader.line_num),
                )
            raw_label = row[li].strip()
            if raw_label not in ("0", "1"):
                raise LabelError(rowno, row[li])
            rid = row[ii] if ii is not None else str(rowno)
            records.append(RawTweet(rid, row[ti], int(raw_label)))
    except csv.Error as err:
        raise CsvParseError(str(err), _byte_offset(content, reader.line_num)) from None
    return records


def write_csv(records, path, text_column="tweet", label_column="label", id_column="id"):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([id_column, label_column, text_column])
        for r in records:
            writer.writerow([r.id, r.label, r.text])


@dataclass(frozen=True)
class LabeledCorpus:
    records: tuple
    split_tag: tuple  # "train" / "test", aligned with records

    def part(self, tag):
        return [r for r, s in zip(self.records, self.split_tag) if s == tag]

    @property
    def train(self):
        return self.part("train")

    @property
    def test(self):
        return self.part("test")


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def _stratified_counts(class_sizes, test_fraction, total_test):
    exact = {c: test_fraction * n for c, n in class_sizes.items()}
    counts = {c: _round_half_up(v) for c, v in exact.items()}
    # reconcile to the global total, moving the classes whose rounding was most off
    diff = total_test - sum(counts.values())
    by_remainder = sorted(class_sizes, key=lambda c: (exact[c] - counts[c], -c), reverse=diff > 0)
    i = 0
    while diff != 0:
        c = by_remainder[i % len(by_remainder)]
        step = 1 if diff > 0 else -1
        if 0 <= counts[c] + step <= class_sizes[c]:
            counts[c] += step
            diff -= step
        i += 1
    return counts


def split(corpus, test_fraction=0.2, stratified=True, seed=1337):
    """Seeded partition into train/test with round(test_fraction * N) test rows.

    Stratified splitting rounds per class, then reconciles to the global count.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError(f"test_fraction must be in (0, 1), got {test_fraction}")
    records = tuple(corpus)
    n = len(records)
    n_test = _round_half_up(test_fraction * n)
    rng = Rng(seed)
    labels = np.array([r.label for r in records], dtype=np.int64)
    tags = np.array(["train"] * n, dtype=object)

    if stratified and len(set(labels.tolist())) < 2:
        warnings.warn("only one class present; falling back to an unstratified split")
        stratified = False

    if stratified:
        sizes = {c: int(np.sum(labels == c)) for c in (0, 1)}
        per_class = _stratified_counts(sizes, test_fraction, n_test)
        for c in (0, 1):
            members = np.flatnonzero(labels == c)
            chosen = members[rng.permutation(members.size)[: per_class[c]]]
            tags[chosen] = "test"
    else:
        tags[rng.permutation(n)[:n_test]] = "test"
    return LabeledCorpus(records, tuple(tags.tolist()))


def class_report(corpus):
    """Counts and fractions per label plus the majority-class fraction."""
    records = list(corpus)
    if not records:
        raise ContractViolation("class_report needs a non-empty corpus")
    counts = Counter(r.label for r in records)
    total = len(records)
    return {
        "total": total,
        "counts": {c: counts.get(c, 0) for c in (0, 1)},
        "fractions": {c: counts.get(c, 0) / total for c in (0, 1)},
        "majority_fraction": max(counts.values()) / total,
    }
