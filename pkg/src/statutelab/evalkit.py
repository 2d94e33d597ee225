"""Retrieval and classification metrics.

F2 weights recall: F2 = 5PR / (4P + R).  Macro scores are arithmetic means
of the per-query values, not the F-measure of averaged P and R.  Zero
denominators (empty gold or retrieved sets) score 0 by convention.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "RetrievalJudgment",
    "prf2",
    "macro_f2",
    "accuracy",
    "aggregate_human_eval",
]


@dataclass
class RetrievalJudgment:
    gold: set[str]
    retrieved: list[str]

    def __post_init__(self):
        if len(self.retrieved) != len(set(self.retrieved)):
            raise ValueError("retrieved list contains duplicates")


def prf2(gold: set, retrieved: set) -> tuple[float, float, float]:
    """Precision, recall and F2 of one retrieval."""
    hits = len(set(gold) & set(retrieved))
    p = hits / len(retrieved) if retrieved else 0.0
    r = hits / len(gold) if gold else 0.0
    f2 = 5.0 * p * r / (4.0 * p + r) if (p + r) > 0 else 0.0
    return p, r, f2


def macro_f2(judgments: list[RetrievalJudgment], k: int) -> tuple[float, float, float]:
    """Per-query prf2 at cut k, averaged arithmetically."""
    if not judgments:
        raise ValueError("macro_f2 needs at least one judgment")
    ps, rs, f2s = [], [], []
    for j in judgments:
        p, r, f2 = prf2(j.gold, set(j.retrieved[:k]))
        ps.append(p)
        rs.append(r)
        f2s.append(f2)
    n = len(judgments)
    return sum(ps) / n, sum(rs) / n, sum(f2s) / n


def accuracy(preds: list[bool], golds: list[bool]) -> float:
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions vs {len(golds)} golds")
    if not preds:
        raise ValueError("accuracy of an empty list is undefined")
    return sum(p == g for p, g in zip(preds, golds)) / len(preds)


def aggregate_human_eval(positives_per_evaluator: list[int], s: int) -> float:
    """Mean fraction of sentences judged positive across evaluators."""
    if s < 1:
        raise ValueError("total sentence count must be >= 1")
    for p in positives_per_evaluator:
        if p > s:
            raise ValueError(f"evaluator count {p} exceeds total {s}")
        if p < 0:
            raise ValueError("counts must be non-negative")
    n = len(positives_per_evaluator)
    if n == 0:
        raise ValueError("need at least one evaluator")
    return sum(p / s for p in positives_per_evaluator) / n
