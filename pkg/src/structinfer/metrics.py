"""Multi-label evaluation metrics with brute-force-checkable semantics.

Everything operates on a `PredictionBatch` (N x C scores against N x C
binary truths). Rankings use a stable descending sort, so ties keep input
order and results are reproducible bit for bit. Classes or pools without
a single positive score an AP of 0 and are counted in the report flags
rather than silently skipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ValidationError

VIDEO_AP_BUCKETS = 10_000  # precision/recall threshold grid: tau_j = j / 10^4


@dataclass
class PredictionBatch:
    """Scores and ground truth for one layer of one evaluation set."""

    scores: np.ndarray
    truths: np.ndarray
    groups: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.truths = np.asarray(self.truths, dtype=np.float64)
        if self.scores.ndim != 2 or self.scores.shape != self.truths.shape:
            raise ValidationError(
                f"scores {self.scores.shape} and truths {self.truths.shape} "
                "must be equal 2-D shapes"
            )
        if not np.all(np.isfinite(self.scores)):
            raise ValidationError("scores must be finite")
        if not np.all((self.truths == 0.0) | (self.truths == 1.0)):
            raise ValidationError("truths must be binary (0/1)")

    @property
    def num_samples(self) -> int:
        return self.scores.shape[0]

    @property
    def num_classes(self) -> int:
        return self.scores.shape[1]


def _ranking(scores: np.ndarray) -> np.ndarray:
    """Indices sorted by descending score, ties in original order."""
    return np.argsort(-scores, kind="stable")


def average_precision(scores: np.ndarray, relevance: np.ndarray) -> tuple[float, bool]:
    """Area under precision-recall for one ranked binary list.

    Sum over ranks of precision-at-rank times the recall increment there.
    Returns (ap, flagged); a list with zero positives is defined as
    AP = 0 and flagged instead of raising.
    """
    scores = np.asarray(scores, dtype=np.float64)
    relevance = np.asarray(relevance, dtype=np.float64)
    if scores.shape != relevance.shape or scores.ndim != 1:
        raise ValidationError("average_precision expects two equal 1-D arrays")
    npos = relevance.sum()
    if npos == 0:
        return 0.0, True
    order = _ranking(scores)
    rel = relevance[order]
    hits = np.cumsum(rel)
    ranks = np.arange(1, rel.size + 1)
    precision = hits / ranks
    ap = float(np.sum(precision * rel) / npos)
    return ap, False


def mc_acc(batch: PredictionBatch) -> float:
    """Mean over classes of (correct argmax predictions of that class) / N.

    The decision rule is argmax, so this is meaningful for single-label
    layers only; the caller gates it on the layer's declaration.
    """
    if batch.num_samples == 0:
        raise ContractError("mc_acc needs a non-empty batch")
    predicted = np.argmax(batch.scores, axis=1)
    true_class = np.argmax(batch.truths, axis=1)
    correct = predicted == true_class
    total = batch.num_samples
    per_class = [
        np.sum(correct & (true_class == c)) / total for c in range(batch.num_classes)
    ]
    return float(np.mean(per_class))


def iou_acc(batch: PredictionBatch, threshold: float = 0.5) -> float:
    """Mean Jaccard overlap between thresholded predictions and truth.

    A sample where both sets are empty counts as 1 (nothing to get
    wrong). See also `hamming_acc` for the per-bit variant.
    """
    if not (0.0 < threshold < 1.0):
        raise ContractError(f"threshold must lie in (0, 1), got {threshold}")
    pred = batch.scores >= threshold
    truth = batch.truths == 1.0
    inter = np.sum(pred & truth, axis=1).astype(np.float64)
    union = np.sum(pred | truth, axis=1).astype(np.float64)
    per_sample = np.where(union > 0, inter / np.maximum(union, 1.0), 1.0)
    return float(per_sample.mean())


def hamming_acc(batch: PredictionBatch, threshold: float = 0.5) -> float:
    """Fraction of label bits predicted correctly after thresholding."""
    pred = batch.scores >= threshold
    truth = batch.truths == 1.0
    return float(np.mean(pred == truth))


def map_label(batch: PredictionBatch) -> tuple[float, list[float], int]:
    """Mean per-class AP across the batch; returns (mean, per-class list,
    count of zero-positive classes that contributed 0)."""
    aps: list[float] = []
    flagged = 0
    for c in range(batch.num_classes):
        ap, flag = average_precision(batch.scores[:, c], batch.truths[:, c])
        aps.append(ap)
        flagged += int(flag)
    return float(np.mean(aps)), aps, flagged


def map_image(batch: PredictionBatch) -> tuple[float, int]:
    """Mean per-sample AP across classes (ranking within each sample)."""
    aps = []
    flagged = 0
    for i in range(batch.num_samples):
        ap, flag = average_precision(batch.scores[i], batch.truths[i])
        aps.append(ap)
        flagged += int(flag)
    return float(np.mean(aps)), flagged


def hit_at_k(batch: PredictionBatch, k: int) -> float:
    """Fraction of samples whose top-k predictions contain any true label;
    a sample with no true labels counts as a miss."""
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    hits = 0
    for i in range(batch.num_samples):
        top = _ranking(batch.scores[i])[:k]
        hits += int(batch.truths[i, top].any())
    return hits / batch.num_samples


def perr(batch: PredictionBatch) -> float:
    """Precision at equal recall rate: per sample, the fraction of true
    labels inside the top-|truth| predictions, averaged over samples that
    have at least one true label."""
    npos = batch.truths.sum(axis=1).astype(int)
    keep = npos > 0
    if not keep.any():
        raise ContractError("perr: every sample has an empty truth set")
    vals = []
    for i in np.nonzero(keep)[0]:
        top = _ranking(batch.scores[i])[: npos[i]]
        vals.append(batch.truths[i, top].sum() / npos[i])
    return float(np.mean(vals))


def gap(batch: PredictionBatch, k: int = 20) -> tuple[float, bool]:
    """Global AP over the pooled per-sample top-k predictions.

    Every sample contributes its top-k (score, truth) pairs to one long
    binary ranking problem; recall is normalized by the number of
    positives inside the pool. Returns (gap, flagged-empty-pool).
    """
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    pooled_scores = []
    pooled_rel = []
    for i in range(batch.num_samples):
        top = _ranking(batch.scores[i])[:k]
        pooled_scores.append(batch.scores[i, top])
        pooled_rel.append(batch.truths[i, top])
    return average_precision(np.concatenate(pooled_scores), np.concatenate(pooled_rel))


def _bucketed_ap(scores: np.ndarray, truths: np.ndarray) -> tuple[float, bool]:
    npos = truths.sum()
    if npos == 0:
        return 0.0, True
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    # positives with score >= tau, cumulated from the top
    pos_from_top = np.concatenate([[0.0], np.cumsum(truths[order][::-1])])[::-1]
    taus = np.arange(1, VIDEO_AP_BUCKETS + 1, dtype=np.float64) / VIDEO_AP_BUCKETS
    idx = np.searchsorted(sorted_scores, taus, side="left")
    retrieved = scores.size - idx
    tp = pos_from_top[idx]
    precision = np.where(retrieved > 0, tp / np.maximum(retrieved, 1), 0.0)
    recall = tp / npos
    recall_next = np.concatenate([recall[1:], [0.0]])
    return float(np.sum(precision * (recall - recall_next))), False


def map_video(batch: PredictionBatch) -> tuple[float, list[float], int]:
    """Mean per-class AP on a fixed threshold grid of 10^-4 buckets.

    For each class, precision and recall are evaluated at tau_j = j/10^4
    and AP sums precision times the recall mass between consecutive
    thresholds (recall beyond the grid is 0). Scores below the first
    threshold are never retrieved.
    """
    aps: list[float] = []
    flagged = 0
    for c in range(batch.num_classes):
        ap, flag = _bucketed_ap(batch.scores[:, c], batch.truths[:, c])
        aps.append(ap)
        flagged += int(flag)
    return float(np.mean(aps)), aps, flagged


def precision_recall_at_k(batch: PredictionBatch, k: int = 3) -> dict[str, float]:
    """Auxiliary per-label and per-sample precision/recall at a top-k cut."""
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    n, c = batch.num_samples, batch.num_classes
    pred = np.zeros((n, c), dtype=bool)
    for i in range(n):
        pred[i, _ranking(batch.scores[i])[:k]] = True
    truth = batch.truths == 1.0
    tp_class = np.sum(pred & truth, axis=0).astype(np.float64)
    pos_class = truth.sum(axis=0)
    retr_class = pred.sum(axis=0)
    recall_l = np.where(pos_class > 0, tp_class / np.maximum(pos_class, 1), 0.0)
    prec_l = np.where(retr_class > 0, tp_class / np.maximum(retr_class, 1), 0.0)
    tp_sample = np.sum(pred & truth, axis=1).astype(np.float64)
    pos_sample = truth.sum(axis=1)
    keep = pos_sample > 0
    recall_i = float(np.mean(tp_sample[keep] / pos_sample[keep])) if keep.any() else 0.0
    prec_i = float(np.mean(tp_sample / k))
    return {
        "recall_label": float(recall_l.mean()),
        "precision_label": float(prec_l.mean()),
        "recall_sample": recall_i,
        "precision_sample": prec_i,
    }


IMAGE_METRICS = ("mc_acc", "iou_acc", "hamming_acc", "map_label", "map_image")
VIDEO_METRICS = ("hit_at_k", "perr", "gap", "map_video")


def layer_report(
    batch: PredictionBatch,
    metrics: tuple[str, ...],
    single_label: bool = False,
    iou_threshold: float = 0.5,
    k: int = 20,
    hit_k: int = 1,
) -> dict:
    """All requested metrics for one layer, with stable keys and flags."""
    out: dict = {"num_samples": batch.num_samples, "num_classes": batch.num_classes}
    flags: dict[str, int] = {}
    for name in metrics:
        if name == "mc_acc":
            if single_label:
                out["mc_acc"] = mc_acc(batch)
            continue
        if name == "iou_acc":
            out["iou_acc"] = iou_acc(batch, iou_threshold)
        elif name == "hamming_acc":
            out["hamming_acc"] = hamming_acc(batch, iou_threshold)
        elif name == "map_label":
            mean, per_class, flagged = map_label(batch)
            out["map_label"] = mean
            out["per_class_ap"] = per_class
            flags["map_label_zero_positive_classes"] = flagged
        elif name == "map_image":
            mean, flagged = map_image(batch)
            out["map_image"] = mean
            flags["map_image_zero_positive_samples"] = flagged
        elif name == "hit_at_k":
            out[f"hit_at_{hit_k}"] = hit_at_k(batch, hit_k)
        elif name == "perr":
            out["perr"] = perr(batch)
        elif name == "gap":
            value, flagged = gap(batch, k)
            out[f"gap_at_{k}"] = value
            flags["gap_empty_pool"] = int(flagged)
        elif name == "map_video":
            mean, per_class, flagged = map_video(batch)
            out["map_video"] = mean
            out["per_class_ap_bucketed"] = per_class
            flags["map_video_zero_positive_classes"] = flagged
        elif name == "precision_recall_at_k":
            out["precision_recall_at_3"] = precision_recall_at_k(batch, 3)
        else:
            raise ContractError(f"unknown metric '{name}'")
    out["flags"] = flags
    return out
