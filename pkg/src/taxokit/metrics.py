"""Self-contained ranking/classification metrics used by the task pipelines.

All functions are pure. Scores follow the "higher = more positive"
convention; rank arguments are 1-based, with ``None`` standing for "the
gold item was never retrieved" (reciprocal 0).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DataFormatError

# Tie handling in average_precision / auc_norm: items with equal scores are
# grouped and evaluated at group boundaries, so input order among ties never
# changes the result. The exact conventions, for report metadata:
AP_TIE_POLICY = "equal scores grouped; each group contributes delta_recall * precision at group end"
AUC_NORM_FORMULA = (
    "area between the piecewise-linear PR curve and the precision=0.5 line "
    "(negative parts clipped), rescaled so a random classifier scores 0 and "
    "a perfect one scores 1: (area - max(0, prevalence - 0.5)) / (0.5 - max(0, prevalence - 0.5))"
)


def mrr(ranks: Sequence[int | None]) -> float:
    """Mean reciprocal rank; a missing rank contributes 0."""
    if len(ranks) == 0:
        raise DataFormatError("mrr needs at least one query")
    total = 0.0
    for rank in ranks:
        if rank is not None:
            if rank < 1:
                raise DataFormatError(f"ranks are 1-based, got {rank}")
            total += 1.0 / rank
    return total / len(ranks)


def scaled_mrr(per_node_gold_ranks: Sequence[Sequence[int | None]]) -> float:
    """MRR scaled by 10 and averaged over each node's gold hypernyms.

    One inner sequence per query node, holding the rank of each of its
    gold hypernyms in the predicted ranking (None when unranked).
    """
    if len(per_node_gold_ranks) == 0:
        raise DataFormatError("scaled_mrr needs at least one node")
    node_values = []
    for gold_ranks in per_node_gold_ranks:
        if len(gold_ranks) == 0:
            raise DataFormatError("every node needs a non-empty gold hypernym set")
        reciprocals = [0.0 if r is None else 1.0 / r for r in gold_ranks]
        node_values.append(10.0 * sum(reciprocals) / len(reciprocals))
    return float(np.mean(node_values))


def edge_f1(pred: set[tuple[str, str]], gold: set[tuple[str, str]]) -> dict[str, float]:
    """Edge-set precision, recall and F1."""
    if not gold:
        raise DataFormatError("gold edge set is empty")
    hits = len(pred & gold)
    precision = hits / len(pred) if pred else 0.0
    recall = hits / len(gold)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def _score_groups(scores: Sequence[float], labels: Sequence[int]):
    """Descending-score tie groups as (positives_in_group, size) pairs."""
    if len(scores) != len(labels):
        raise DataFormatError("scores and labels differ in length")
    if len(scores) == 0:
        raise DataFormatError("empty input")
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    groups: list[tuple[int, int]] = []
    i = 0
    while i < len(order):
        j = i
        pos = 0
        while j < len(order) and scores[order[j]] == scores[order[i]]:
            pos += int(bool(labels[order[j]]))
            j += 1
        groups.append((pos, j - i))
        i = j
    return groups


def average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the precision-recall steps, over descending scores.

    Tied scores are grouped (see AP_TIE_POLICY).
    """
    groups = _score_groups(scores, labels)
    total_pos = sum(int(bool(l)) for l in labels)
    if total_pos == 0:
        raise DataFormatError("average_precision needs at least one positive label")
    ap = 0.0
    tp = 0
    seen = 0
    for pos, size in groups:
        tp += pos
        seen += size
        if pos:
            ap += (pos / total_pos) * (tp / seen)
    return ap


def _pr_points(scores: Sequence[float], labels: Sequence[int]):
    """Piecewise-linear PR curve vertices [(recall, precision), ...]."""
    groups = _score_groups(scores, labels)
    total_pos = sum(int(bool(l)) for l in labels)
    points = []
    tp = 0
    seen = 0
    for pos, size in groups:
        tp += pos
        seen += size
        points.append((tp / total_pos, tp / seen))
    # extend flat to recall 0 from the first operating point
    return [(0.0, points[0][1])] + points


def _area_above_half(points) -> float:
    """Integral of max(0, precision - 0.5) d(recall) over the PR polyline."""
    area = 0.0
    for (r0, p0), (r1, p1) in zip(points, points[1:]):
        if r1 == r0:
            continue
        a, b = p0 - 0.5, p1 - 0.5
        width = r1 - r0
        if a <= 0 and b <= 0:
            continue
        if a >= 0 and b >= 0:
            area += width * (a + b) / 2
        else:
            # one crossing of the 0.5 line inside the segment
            t = a / (a - b)
            if a > 0:
                area += width * t * a / 2
            else:
                area += width * (1 - t) * b / 2
    return area


def auc_norm(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Normalized area of the PR curve region above precision 0.5.

    Rescaled so a random classifier scores 0 and a perfect one scores 1
    (see AUC_NORM_FORMULA, which also ships in report metadata).
    """
    labels_bin = [int(bool(l)) for l in labels]
    total_pos = sum(labels_bin)
    if total_pos == 0 or total_pos == len(labels_bin):
        raise DataFormatError("auc_norm needs both classes present")
    points = _pr_points(scores, labels_bin)
    raw = _area_above_half(points)
    prevalence = total_pos / len(labels_bin)
    baseline = max(0.0, prevalence - 0.5)
    return (raw - baseline) / (0.5 - baseline)


def fractional_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties averaged."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="mergesort")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j < len(arr) and arr[order[j]] == arr[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2  # average of 1-based positions i+1..j
        i = j
    return ranks


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson over tie-averaged fractional ranks."""
    if len(a) != len(b):
        raise DataFormatError("spearman inputs differ in length")
    if len(a) < 3:
        raise DataFormatError("spearman needs at least 3 observations")
    ra, rb = fractional_ranks(a), fractional_ranks(b)
    da, db = ra - ra.mean(), rb - rb.mean()
    denom = float(np.sqrt((da * da).sum() * (db * db).sum()))
    if denom == 0.0:
        raise DataFormatError("spearman undefined for a constant vector")
    return float((da * db).sum() / denom)
