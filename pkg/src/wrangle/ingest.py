"""CSV loading and writing for sources, context data and ground truth."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .model import DEFAULT_NULL_TOKENS, ModelError, Relation, normalize_cell, normalize_name


class IngestError(Exception):
    """A source file could not be turned into a relation."""


@dataclass(frozen=True)
class CsvDialect:
    delimiter: str = ","
    quotechar: str = '"'
    header: bool = True
    encoding: str = "utf-8"

    def __post_init__(self):
        if len(self.delimiter) != 1 or len(self.quotechar) != 1:
            raise ValueError("delimiter and quote character must be single characters")
        if self.delimiter == self.quotechar:
            raise ValueError("delimiter and quote character must differ")


def load_relation(
    path: str | os.PathLike,
    dialect: CsvDialect = CsvDialect(),
    null_tokens: Iterable[str] = DEFAULT_NULL_TOKENS,
    name: str | None = None,
) -> Relation:
    path = Path(path)
    null_tokens = frozenset(null_tokens)
    try:
        with open(path, newline="", encoding=dialect.encoding) as fh:
            rows = list(csv.reader(fh, delimiter=dialect.delimiter, quotechar=dialect.quotechar))
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise IngestError(f"{path}: {exc}") from exc

    if dialect.header:
        if not rows:
            raise IngestError(f"{path}: missing header row")
        header, body, first_line = rows[0], rows[1:], 2
        attributes = [normalize_name(h) for h in header]
    else:
        body, first_line = rows, 1
        width = len(rows[0]) if rows else 0
        attributes = [f"column_{i + 1}" for i in range(width)]

    seen = set()
    for attr in attributes:
        if attr in seen:
            raise IngestError(f"{path}: duplicate attribute {attr!r} after normalization")
        seen.add(attr)

    tuples = []
    for i, raw in enumerate(body):
        if not raw:
            # csv yields [] for blank lines
            continue
        if len(raw) != len(attributes):
            raise IngestError(
                f"{path}:{first_line + i}: ragged row {i} has {len(raw)} cells, "
                f"expected {len(attributes)}"
            )
        tuples.append(tuple(normalize_cell(c, null_tokens) for c in raw))
    try:
        return Relation(name or path.stem, tuple(attributes), tuple(tuples))
    except ModelError as exc:
        raise IngestError(f"{path}: {exc}") from exc


def dumps_relation(rel: Relation, dialect: CsvDialect = CsvDialect()) -> str:
    buf = io.StringIO()
    writer = csv.writer(
        buf, delimiter=dialect.delimiter, quotechar=dialect.quotechar, lineterminator="\n"
    )
    if dialect.header:
        writer.writerow(rel.attributes)
    for row in rel.tuples:
        writer.writerow(["" if v is None else v for v in row])
    return buf.getvalue()


def write_relation(rel: Relation, path: str | os.PathLike, dialect: CsvDialect = CsvDialect()) -> None:
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding=dialect.encoding) as fh:
            fh.write(dumps_relation(rel, dialect))
    except OSError as exc:
        raise IngestError(f"{path}: {exc}") from exc
