"""Value-level comparison of a wrangled relation with a ground-truth relation.

Tuples are aligned on user-declared key attributes. Cells are classified as:

* TP: result value present and equal to the ground-truth value;
* FP: result value present but different, or present in a spurious tuple
  (unknown key, duplicate key, or a tuple the ground truth marks as excluded);
* FN: ground-truth value present but the result has no value for it;
* TN: value of a tuple marked as excluded that is indeed absent from the result.

Cells that are null on both sides are not counted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .model import Relation, Value

TRUTHY = frozenset({"1", "true", "yes", "y", "x", "excluded"})


class EvaluationError(ValueError):
    pass


def _ratio(num: int | float, den: int | float) -> Optional[float]:
    return num / den if den > 0 else None


@dataclass(frozen=True)
class MetricsReport:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def precision(self) -> Optional[float]:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> Optional[float]:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> Optional[float]:
        p, r = self.precision, self.recall
        if p is None or r is None:
            return None
        return _ratio(2 * p * r, p + r)

    @property
    def accuracy(self) -> Optional[float]:
        return _ratio(self.tp + self.tn, self.tp + self.fp + self.tn + self.fn)

    @property
    def npv(self) -> Optional[float]:
        return _ratio(self.tn, self.tn + self.fn)

    def as_dict(self) -> dict:
        out = {"TP": self.tp, "FP": self.fp, "FN": self.fn, "TN": self.tn}
        for name in ("precision", "recall", "f1", "accuracy", "npv"):
            v = getattr(self, name)
            if v is not None:
                out[name] = round(v, 6)
        return out


def _excluded(v: Value) -> bool:
    return v is not None and v.strip().lower() in TRUTHY


def evaluate(
    result: Relation,
    ground_truth: Relation,
    keys: Sequence[str],
    excluded_marker: str | None = None,
) -> MetricsReport:
    attrs = [a for a in ground_truth.attributes if a != excluded_marker]
    if excluded_marker is not None and not ground_truth.has(excluded_marker):
        raise EvaluationError(f"ground truth lacks the marker column {excluded_marker!r}")
    if list(result.attributes) != attrs:
        raise EvaluationError(
            f"schema mismatch: result {list(result.attributes)} vs ground truth {attrs}"
        )
    if not keys:
        raise EvaluationError("at least one key attribute is required")
    for k in keys:
        if k not in attrs:
            raise EvaluationError(f"unknown key attribute {k!r}")

    truth: dict[tuple, tuple[dict[str, Value], bool]] = {}
    for row in ground_truth.records():
        key = tuple(row[k] for k in keys)
        if None in key:
            raise EvaluationError(f"ground-truth tuple with a null key: {row}")
        if key in truth:
            raise EvaluationError(f"duplicate ground-truth key {key}")
        truth[key] = (row, _excluded(row.get(excluded_marker)) if excluded_marker else False)

    tp = fp = fn = tn = 0
    seen: set[tuple] = set()
    for row in result.records():
        key = tuple(row[k] for k in keys)
        expected = truth.get(key)
        if expected is None or key in seen or expected[1]:
            fp += sum(row[a] is not None for a in attrs)
            seen.add(key)
            continue
        seen.add(key)
        gt = expected[0]
        for a in attrs:
            got, want = row[a], gt[a]
            if got is None:
                fn += want is not None
            elif got == want:
                tp += 1
            else:
                fp += 1
    for key, (gt, excluded) in truth.items():
        if key in seen:
            continue
        n = sum(gt[a] is not None for a in attrs)
        if excluded:
            tn += n
        else:
            fn += n
    return MetricsReport(tp, fp, fn, tn)
