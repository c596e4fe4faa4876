"""Dataset splitting and evaluation: ratio and district-held-out splits,
confusion metrics, ROC/AUC, and per-quadrant score histograms."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

SPLIT_ALL = "all"
SPLIT_DISTRICT = "district"


@dataclass(frozen=True)
class SplitSpec:
    """How to partition a corpus into train/val/test."""

    mode: str = SPLIT_ALL
    ratios: tuple[int, int, int] = (70, 10, 20)
    district_counts: tuple[int, int, int] = (44, 10, 17)
    rescale: bool = True
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in (SPLIT_ALL, SPLIT_DISTRICT):
            raise ValueError(f"unknown split mode: {self.mode}")
        if sum(self.ratios) != 100:
            raise ValueError(f"ratios must sum to 100, got {self.ratios}")

    @property
    def effective_seed(self) -> int:
        return self.seed if self.seed is not None else 0


@dataclass
class EvalReport:
    """Confusion counts, derived metrics, and optional ROC/density payloads."""

    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    macro_f1: float
    roc_points: list[tuple[float, float]] | None = None
    auc: float | None = None
    density_bins: dict[str, list[float]] | None = None

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "counts": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "metrics": {
                "accuracy": self.accuracy,
                "precision": self.precision,
                "recall": self.recall,
                "f1": self.f1,
                "macro_f1": self.macro_f1,
            },
        }
        if self.roc_points is not None:
            out["roc"] = {
                "points": [[x, y] for x, y in self.roc_points],
                "auc": self.auc,
            }
        if self.density_bins is not None:
            out["densities"] = {
                "bins": len(next(iter(self.density_bins.values()))),
                **self.density_bins,
            }
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "EvalReport":
        counts = raw["counts"]
        metrics = raw["metrics"]
        roc = raw.get("roc")
        densities = raw.get("densities")
        return cls(
            tp=counts["tp"],
            fp=counts["fp"],
            tn=counts["tn"],
            fn=counts["fn"],
            accuracy=metrics["accuracy"],
            precision=metrics["precision"],
            recall=metrics["recall"],
            f1=metrics["f1"],
            macro_f1=metrics["macro_f1"],
            roc_points=[(x, y) for x, y in roc["points"]] if roc else None,
            auc=roc["auc"] if roc else None,
            density_bins=(
                {k: list(v) for k, v in densities.items() if k != "bins"}
                if densities
                else None
            ),
        )


def split_all_districts(corpus: Sequence, spec: SplitSpec) -> tuple[list, list, list]:
    """Seeded shuffle, then 70:10:20 (floor/floor, remainder to test)."""
    n = len(corpus)
    if n == 0:
        raise ValueError("cannot split an empty corpus")
    order = list(range(n))
    random.Random(spec.effective_seed).shuffle(order)
    n_train = n * spec.ratios[0] // 100
    n_val = n * spec.ratios[1] // 100
    train = [corpus[i] for i in order[:n_train]]
    val = [corpus[i] for i in order[n_train : n_train + n_val]]
    test = [corpus[i] for i in order[n_train + n_val :]]
    return train, val, test


def apportion(total: int, weights: Sequence[int]) -> list[int]:
    """Largest-remainder apportionment of `total` across `weights`."""
    wsum = sum(weights)
    quotas = [total * w / wsum for w in weights]
    base = [int(q) for q in quotas]
    short = total - sum(base)
    remainders = sorted(
        range(len(weights)), key=lambda i: (-(quotas[i] - base[i]), i)
    )
    for i in remainders[:short]:
        base[i] += 1
    return base


def split_district_wise(
    corpus: Sequence,
    spec: SplitSpec,
    district_of: Callable[[Any], str] = lambda d: d.district,
) -> tuple[list, list, list]:
    """Partition whole districts (44/10/17 by default) into train/val/test."""
    if len(corpus) == 0:
        raise ValueError("cannot split an empty corpus")
    districts = sorted({district_of(d) for d in corpus})
    counts = list(spec.district_counts)
    if len(districts) != sum(counts):
        if not spec.rescale:
            raise ValueError(
                f"{len(districts)} districts, but spec asks for {sum(counts)} "
                "(pass rescale to apportion proportionally)"
            )
        counts = apportion(len(districts), counts)
    random.Random(spec.effective_seed).shuffle(districts)
    train_set = set(districts[: counts[0]])
    val_set = set(districts[counts[0] : counts[0] + counts[1]])
    train = [d for d in corpus if district_of(d) in train_set]
    val = [d for d in corpus if district_of(d) in val_set]
    test = [d for d in corpus if district_of(d) not in train_set and district_of(d) not in val_set]
    return train, val, test


def confusion_metrics(preds: Sequence[int], labels: Sequence[int]) -> EvalReport:
    """Counts plus accuracy/precision/recall/F1 (degenerate denominators -> 0)."""
    if len(preds) != len(labels):
        raise ValueError("preds and labels must have equal length")
    if len(preds) == 0:
        raise ValueError("need at least one prediction")
    tp = fp = tn = fn = 0
    for p, l in zip(preds, labels):
        if p == 1 and l == 1:
            tp += 1
        elif p == 1 and l == 0:
            fp += 1
        elif p == 0 and l == 0:
            tn += 1
        else:
            fn += 1

    def _prf(tp_, fp_, fn_):
        precision = tp_ / (tp_ + fp_) if tp_ + fp_ else 0.0
        recall = tp_ / (tp_ + fn_) if tp_ + fn_ else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        return precision, recall, f1

    precision, recall, f1 = _prf(tp, fp, fn)
    # Macro-F1: mean of the positive-class F1 and the negative-class F1.
    _, _, f1_neg = _prf(tn, fn, fp)
    n = tp + fp + tn + fn
    return EvalReport(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=(tp + tn) / n,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_f1=(f1 + f1_neg) / 2,
    )


def roc_auc(
    scores: Sequence[float], labels: Sequence[int]
) -> tuple[list[tuple[float, float]], float]:
    """ROC points at distinct-score thresholds and the trapezoidal AUC."""
    if len(scores) != len(labels):
        raise ValueError("scores and labels must have equal length")
    n_pos = sum(1 for l in labels if l == 1)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes present")
    paired = sorted(zip(scores, labels), key=lambda t: -t[0])
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(paired):
        score = paired[i][0]
        while i < len(paired) and paired[i][0] == score:
            if paired[i][1] == 1:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append((fp / n_neg, tp / n_pos))
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2
    return points, auc


QUADRANTS = ("tp", "tn", "fp", "fn")


def score_densities(
    scores: Sequence[float],
    preds: Sequence[int],
    labels: Sequence[int],
    bins: int = 50,
) -> dict[str, list[float]]:
    """Normalized score histograms over [0,1], one per confusion quadrant."""
    if bins < 2:
        raise ValueError("need at least 2 bins")
    if not (len(scores) == len(preds) == len(labels)):
        raise ValueError("scores, preds and labels must have equal length")
    buckets: dict[str, list[float]] = {q: [] for q in QUADRANTS}
    for s, p, l in zip(scores, preds, labels):
        if p == 1 and l == 1:
            buckets["tp"].append(s)
        elif p == 0 and l == 0:
            buckets["tn"].append(s)
        elif p == 1 and l == 0:
            buckets["fp"].append(s)
        else:
            buckets["fn"].append(s)
    out = {}
    for q, values in buckets.items():
        hist, _ = np.histogram(values, bins=bins, range=(0.0, 1.0))
        total = hist.sum()
        out[q] = (hist / total).tolist() if total else [0.0] * bins
    return out


def evaluate_scores(
    scores: Sequence[float],
    labels: Sequence[int],
    threshold: float = 0.5,
    bins: int = 50,
) -> EvalReport:
    """Full report: thresholded confusion metrics plus ROC/AUC and densities."""
    preds = [1 if s >= threshold else 0 for s in scores]
    report = confusion_metrics(preds, labels)
    report.roc_points, report.auc = roc_auc(scores, labels)
    report.density_bins = score_densities(scores, preds, labels, bins=bins)
    return report
