"""Classification and cost-aware metrics.

Accuracy, precision, recall, F1, rank-based AUC (Mann-Whitney, ties count
one half), and CostEffort@L: the fraction of fixing commits found when
reviewing commits in descending score order until the cumulative changed
LOC reaches L% of the total changed LOC of the evaluated set.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field

from .errors import EmptySetError, NoFixingCommitsError, SingleClassError

FIXING = 1
NON_FIXING = 0


@dataclass(frozen=True)
class ScoredCommit:
    id: str
    score: float
    label: int          # 1 fixing, 0 non-fixing
    changed_loc: int


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    auc: float | None
    ce_at: dict[float, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "precision": self.precision, "recall": self.recall,
            "f1": self.f1, "accuracy": self.accuracy, "auc": self.auc,
            "ce_at": {str(level): value for level, value in self.ce_at.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        rows = [
            ("tp", self.tp), ("fp", self.fp), ("tn", self.tn), ("fn", self.fn),
            ("precision", f"{self.precision:.4f}"),
            ("recall", f"{self.recall:.4f}"),
            ("f1", f"{self.f1:.4f}"),
            ("accuracy", f"{self.accuracy:.4f}"),
            ("auc", "n/a" if self.auc is None else f"{self.auc:.4f}"),
        ]
        for level in sorted(self.ce_at):
            rows.append((f"ce@{level:g}%", f"{self.ce_at[level]:.4f}"))
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def confusion(scored: list[ScoredCommit], threshold: float) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) with 'predicted fixing' meaning score >= threshold."""
    tp = fp = tn = fn = 0
    for c in scored:
        predicted_fixing = c.score >= threshold
        if predicted_fixing and c.label == FIXING:
            tp += 1
        elif predicted_fixing:
            fp += 1
        elif c.label == FIXING:
            fn += 1
        else:
            tn += 1
    return tp, fp, tn, fn


def prf1(counts: tuple[int, int, int, int]) -> tuple[float, float, float]:
    """Precision, recall, F1; every 0/0 case is defined as 0."""
    tp, fp, _, fn = counts
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return precision, recall, f1


def accuracy(counts: tuple[int, int, int, int]) -> float:
    tp, fp, tn, fn = counts
    total = tp + fp + tn + fn
    if total == 0:
        raise EmptySetError("no commits to score")
    return (tp + tn) / total


def auc(scored: list[ScoredCommit]) -> float:
    """Probability a random fixing commit outranks a random non-fixing one.

    Mann-Whitney formulation: ties contribute one half.  Computed via sorted
    negative scores and binary search; counts are exact integers (halves
    tracked by doubling), so the result is exact up to the final division.
    """
    pos = sorted(c.score for c in scored if c.label == FIXING)
    neg = sorted(c.score for c in scored if c.label != FIXING)
    if not pos or not neg:
        raise SingleClassError("AUC needs both a fixing and a non-fixing commit")
    doubled = 0  # 2 * (#neg below) + (#neg tied), summed over positives
    for s in pos:
        below = bisect.bisect_left(neg, s)
        tied = bisect.bisect_right(neg, s) - below
        doubled += 2 * below + tied
    return doubled / (2 * len(pos) * len(neg))


def cost_effort_at(scored: list[ScoredCommit], level: float) -> float:
    """CE@L for 0 < L <= 100.

    Commits are visited by descending score (ties by ascending id); the walk
    stops at the first commit whose inclusion would push cumulative changed
    LOC past L% of the set's total changed LOC.  Returns fixing commits seen
    divided by total fixing commits.
    """
    if not 0 < level <= 100:
        raise ValueError(f"effort level must be in (0, 100], got {level}")
    total_fixing = sum(1 for c in scored if c.label == FIXING)
    if total_fixing == 0:
        raise NoFixingCommitsError("CE@L needs at least one fixing commit")
    total_loc = sum(c.changed_loc for c in scored)
    budget = level * total_loc / 100.0
    found = 0
    cumulative = 0
    for c in sorted(scored, key=lambda c: (-c.score, c.id)):
        cumulative += c.changed_loc
        if cumulative > budget:
            break
        if c.label == FIXING:
            found += 1
    return found / total_fixing


def evaluate(scored: list[ScoredCommit], threshold: float = 0.5,
             ce_levels: tuple[float, ...] = (5.0,)) -> MetricsReport:
    """Full report; AUC is None (not an error) when only one class is present."""
    counts = confusion(scored, threshold)
    precision, recall, f1 = prf1(counts)
    acc = accuracy(counts)
    try:
        auc_value: float | None = auc(scored)
    except SingleClassError:
        auc_value = None
    ce = {float(level): cost_effort_at(scored, level) for level in ce_levels}
    tp, fp, tn, fn = counts
    return MetricsReport(tp, fp, tn, fn, precision, recall, f1, acc, auc_value, ce)


# --- scores CSV --------------------------------------------------------------------


def write_scores_csv(path: str, scored: list[ScoredCommit]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "score", "label", "changed_loc"])
        for c in scored:
            writer.writerow([c.id, repr(float(c.score)), c.label, c.changed_loc])


def read_scores_csv(path: str) -> list[ScoredCommit]:
    import csv

    out: list[ScoredCommit] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(ScoredCommit(row["id"], float(row["score"]),
                                    int(row["label"]), int(row["changed_loc"])))
    return out
