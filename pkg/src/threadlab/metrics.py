"""Chance-corrected agreement scores over categorical label sequences.

Labels are plain strings: canonical thread labels (``"24"``, ``"-"``,
``"(24,-)"``), canonical code sets (``"E"``, ``"AC"``, ``""``), or the
parse-failure marker. Scores are computed per conversation and then averaged;
:func:`aggregate` reports mean and sample standard deviation across
conversations.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import CodeSet

# Distinguished class for model responses that did not parse. Kept in the
# label space so failed rows count against every metric instead of being
# silently dropped.
PARSE_ERROR_LABEL = "⟂"


class MetricsError(Exception):
    pass


class LengthMismatch(MetricsError):
    def __init__(self, n_gold: int, n_pred: int):
        super().__init__(f"gold has {n_gold} labels, prediction has {n_pred}")
        self.n_gold = n_gold
        self.n_pred = n_pred


class EmptyInput(MetricsError):
    pass


class EmptyCategory(MetricsError):
    def __init__(self, tag: str):
        super().__init__(f"no gold utterance carries subcategory {tag!r}")
        self.tag = tag


def _check_lengths(gold: Sequence[str], pred: Sequence[str]) -> None:
    if len(gold) != len(pred):
        raise LengthMismatch(len(gold), len(pred))
    if not gold:
        raise EmptyInput("label sequences must be non-empty")


def accuracy(gold: Sequence[str], pred: Sequence[str]) -> float:
    """Fraction of positions where the labels match exactly."""
    _check_lengths(gold, pred)
    return sum(1 for g, p in zip(gold, pred) if g == p) / len(gold)


def macro_f1(gold: Sequence[str], pred: Sequence[str]) -> float:
    """Unweighted mean of per-class F1.

    The class space is the union of labels observed in either sequence.
    Precision and recall with empty denominators are taken as 0, and a class
    with precision + recall = 0 contributes F1 = 0.
    """
    _check_lengths(gold, pred)
    classes = sorted(set(gold) | set(pred))
    total = 0.0
    for c in classes:
        tp = sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        n_pred = sum(1 for p in pred if p == c)
        n_gold = sum(1 for g in gold if g == c)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_gold if n_gold else 0.0
        total += 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return total / len(classes)


def cohens_kappa(gold: Sequence[str], pred: Sequence[str]) -> float:
    """Cohen's kappa with chance agreement from the two marginal distributions.

    Degenerate case: when expected agreement is exactly 1 (both raters stuck
    on one identical class), kappa is 1 if observed agreement is perfect and 0
    otherwise.
    """
    _check_lengths(gold, pred)
    n = len(gold)
    matches = sum(1 for g, p in zip(gold, pred) if g == p)
    gold_counts = Counter(gold)
    pred_counts = Counter(pred)
    # Integer arithmetic for the chance term keeps the degenerate test exact.
    expected_num = sum(gold_counts[c] * pred_counts.get(c, 0) for c in gold_counts)
    if expected_num == n * n:
        return 1.0 if matches == n else 0.0
    p_o = matches / n
    p_e = expected_num / (n * n)
    return (p_o - p_e) / (1.0 - p_e)


@dataclass(frozen=True)
class MetricReport:
    """Scores for one conversation."""

    accuracy: float
    macro_f1: float
    kappa: float
    n: int
    n_classes: int

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "kappa": self.kappa,
            "n": self.n,
            "n_classes": self.n_classes,
        }


def score(gold: Sequence[str], pred: Sequence[str]) -> MetricReport:
    """All three metrics for one gold/prediction pair."""
    return MetricReport(
        accuracy=accuracy(gold, pred),
        macro_f1=macro_f1(gold, pred),
        kappa=cohens_kappa(gold, pred),
        n=len(gold),
        n_classes=len(set(gold) | set(pred)),
    )


@dataclass(frozen=True)
class MetricSummary:
    """Mean and sample standard deviation of one metric across conversations."""

    mean: float
    std: float
    values: tuple[float, ...]

    def as_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "values": list(self.values)}


@dataclass(frozen=True)
class AggregateReport:
    accuracy: MetricSummary
    macro_f1: MetricSummary
    kappa: MetricSummary
    n_conversations: int

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy.as_dict(),
            "macro_f1": self.macro_f1.as_dict(),
            "kappa": self.kappa.as_dict(),
            "n_conversations": self.n_conversations,
        }


def _summarize(values: Sequence[float]) -> MetricSummary:
    n = len(values)
    mean = sum(values) / n
    if n > 1:
        var = sum((v - mean) ** 2 for v in values) / (n - 1)
        std = var**0.5
    else:
        std = 0.0
    return MetricSummary(mean=mean, std=std, values=tuple(values))


def aggregate(reports: Sequence[MetricReport]) -> AggregateReport:
    """Mean and sample std (n - 1 denominator) per metric; std is 0 for a single report."""
    if not reports:
        raise EmptyInput("aggregate needs at least one report")
    return AggregateReport(
        accuracy=_summarize([r.accuracy for r in reports]),
        macro_f1=_summarize([r.macro_f1 for r in reports]),
        kappa=_summarize([r.kappa for r in reports]),
        n_conversations=len(reports),
    )


def subcategory_slice(
    gold: Sequence[str],
    pred: Sequence[str],
    subcat: Mapping[int, str],
    tag: str,
) -> MetricReport:
    """Score only the positions whose gold subcategory equals ``tag``.

    Position p (0-based) corresponds to utterance index p + 1 in the subcat
    map. Raises EmptyCategory when the tag never occurs.
    """
    _check_lengths(gold, pred)
    keep = [i for i in range(len(gold)) if subcat.get(i + 1) == tag]
    if not keep:
        raise EmptyCategory(tag)
    return score([gold[i] for i in keep], [pred[i] for i in keep])


PRESENT = "present"
ABSENT = "absent"


def binary_code_metrics(
    gold_codes: Sequence[CodeSet],
    pred_codes: Sequence["CodeSet | None"],
    code: str,
) -> MetricReport:
    """Reduce code sets to present/absent for one letter and score that.

    A None prediction stands for a failed parse and keeps its own class, so it
    disagrees with any gold value.
    """
    if len(gold_codes) != len(pred_codes):
        raise LengthMismatch(len(gold_codes), len(pred_codes))
    gold = [PRESENT if code in cs else ABSENT for cs in gold_codes]
    pred = [
        PARSE_ERROR_LABEL if cs is None else (PRESENT if code in cs else ABSENT)
        for cs in pred_codes
    ]
    return score(gold, pred)
