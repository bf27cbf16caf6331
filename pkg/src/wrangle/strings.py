"""String kernels: edit distances, name tokenisation, shapes and trigram profiles."""

from __future__ import annotations

import math
import re
from collections import Counter
from typing import Iterable, Optional

ALPHA, DIGIT, SPACE, PUNCT = "A", "9", " ", "."


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def damerau_levenshtein(a: Optional[str], b: Optional[str]) -> int:
    """Unrestricted Damerau-Levenshtein distance (a metric); ``None`` counts as ''.

    Uses the Lowrance-Wagner recurrence so that transposed characters may also be
    edited in between, unlike the optimal-string-alignment variant.
    """
    a = a or ""
    b = b or ""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    inf = len(a) + len(b)
    last_row: dict[str, int] = {}
    d = [[inf] * (len(b) + 2) for _ in range(len(a) + 2)]
    for i in range(len(a) + 1):
        d[i + 1][0] = inf
        d[i + 1][1] = i
    for j in range(len(b) + 1):
        d[0][j + 1] = inf
        d[1][j + 1] = j
    for i in range(1, len(a) + 1):
        last_match_col = 0
        for j in range(1, len(b) + 1):
            i1 = last_row.get(b[j - 1], 0)
            j1 = last_match_col
            cost = 0 if a[i - 1] == b[j - 1] else 1
            if cost == 0:
                last_match_col = j
            d[i + 1][j + 1] = min(
                d[i][j] + cost,
                d[i + 1][j] + 1,
                d[i][j + 1] + 1,
                d[i1][j1] + (i - i1 - 1) + 1 + (j - j1 - 1),
            )
        last_row[a[i - 1]] = i
    return d[len(a) + 1][len(b) + 1]


def edit_similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


# A token is a letter word (camelCase aware) with any digits that directly follow
# it, or a standalone digit run. Separators are everything else.
_NAME_TOKEN = re.compile(r"[A-Z]+(?![a-z])\d*|[A-Z]?[a-z]+\d*|\d+")


def name_tokens(name: str) -> set[str]:
    return {t.lower() for t in _NAME_TOKEN.findall(name)}


def jaccard(a: Iterable, b: Iterable) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def char_class(c: str) -> str:
    if c.isalpha():
        return ALPHA
    if c.isdigit():
        return DIGIT
    if c.isspace():
        return SPACE
    return PUNCT


def runs(s: str) -> list[tuple[str, int, int]]:
    """Split ``s`` into maximal same-class runs as (class, start, end)."""
    out: list[tuple[str, int, int]] = []
    for i, c in enumerate(s):
        cls = char_class(c)
        if out and out[-1][0] == cls:
            out[-1] = (cls, out[-1][1], i + 1)
        else:
            out.append((cls, i, i + 1))
    return out


def shape(s: str) -> str:
    """Character-shape signature, e.g. ``"SE15 4UJ" -> "A9 9A"``."""
    return "".join(cls for cls, _, _ in runs(s))


def trigrams(text: str) -> Counter:
    text = text.lower()
    return Counter(text[i : i + 3] for i in range(len(text) - 2))


def cosine(p: Counter, q: Counter) -> float:
    if not p or not q:
        return 0.0
    dot = sum(v * q[k] for k, v in p.items() if k in q)
    if dot == 0:
        return 0.0
    return dot / (math.sqrt(sum(v * v for v in p.values())) * math.sqrt(sum(v * v for v in q.values())))


_INT = re.compile(r"[+-]?(\d+|\d{1,3}(,\d{3})+)")
_DEC = re.compile(r"[+-]?((\d+|\d{1,3}(,\d{3})+)\.\d*|\.\d+)([eE][+-]?\d+)?")


def basic_type(value: str) -> str:
    """Classify a value as ``integer``, ``decimal`` or ``text``."""
    if _INT.fullmatch(value):
        return "integer"
    if _DEC.fullmatch(value):
        return "decimal"
    return "text"
