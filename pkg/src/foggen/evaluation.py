"""Segmentation scoring and paired-comparison statistics."""
from fractions import Fraction
from math import comb

import numpy as np

from .classes import FREQUENT_CLASSES, N_CLASSES, VOID

DEFAULT_BIN_EDGES = (0.0, 20.0, 50.0, 80.0, 120.0, 160.0, 230.0, 400.0, np.inf)


def confusion_accumulate(pred, gt, cm=None, n_classes=N_CLASSES, void=VOID):
    """Add per-pixel (gt, pred) counts to ``cm``; void ground truth is skipped."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"dimension mismatch: pred {pred.shape} vs gt {gt.shape}")
    if cm is None:
        cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    keep = gt != void
    g = gt[keep].astype(np.int64)
    p = pred[keep].astype(np.int64)
    if g.size and (g.min() < 0 or g.max() >= n_classes):
        raise ValueError("ground truth holds ids outside the class table")
    if p.size and (p.min() < 0 or p.max() >= n_classes):
        raise ValueError("prediction holds ids outside the class table at labeled pixels")
    cm += np.bincount(g * n_classes + p, minlength=n_classes * n_classes).reshape(
        n_classes, n_classes
    )
    return cm


def per_class_iou(cm):
    """IoU per class; NaN where the class is absent from both gt and prediction."""
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diag(cm)
    denom = cm.sum(axis=0) + cm.sum(axis=1) - tp
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, tp / denom, np.nan)


def mean_iou(cm, class_subset=None):
    ious = per_class_iou(cm)
    if class_subset is not None:
        subset = list(class_subset)
        if not subset:
            raise ValueError("class subset is empty")
        ious = ious[subset]
    present = ious[~np.isnan(ious)]
    if present.size == 0:
        raise ValueError("nothing to evaluate: no class occurs in gt or prediction")
    return float(present.mean())


def per_image_mean_iou(pred, gt, class_subset=None, n_classes=N_CLASSES, void=VOID):
    """Mean IoU of a single image, ignoring classes absent from it."""
    return mean_iou(confusion_accumulate(pred, gt, None, n_classes, void), class_subset)


def distance_binned_iou(pred, gt, distance, bins=DEFAULT_BIN_EDGES, class_subset=None,
                        n_classes=N_CLASSES, void=VOID):
    """Mean IoU restricted to pixels whose scene distance falls in each [lo, hi) bin.

    Accepts single maps or equal-length sequences of maps (aggregated over the
    whole set). Bins without labeled pixels report ``mean_iou = None``.
    """
    edges = np.asarray(bins, dtype=np.float64)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    if isinstance(pred, np.ndarray) and pred.ndim == 2:
        pred, gt, distance = [pred], [gt], [distance]
    distance = [getattr(d, "values", d) for d in distance]
    cms = [np.zeros((n_classes, n_classes), dtype=np.int64) for _ in range(len(edges) - 1)]
    for p, g, d in zip(pred, gt, distance, strict=True):
        d = np.asarray(d, dtype=np.float64)
        g = np.asarray(g)
        if d.shape != g.shape:
            raise ValueError("distance map and gt differ in shape")
        if np.any(np.isnan(d)):
            raise ValueError("distance map must be complete")
        for k, cm in enumerate(cms):
            inside = (d >= edges[k]) & (d < edges[k + 1])
            confusion_accumulate(p, np.where(inside, g, void), cm, n_classes, void)
    out = []
    for k, cm in enumerate(cms):
        pixels = int(cm.sum())
        score = mean_iou(cm, class_subset) if pixels else None
        out.append(
            {
                "lo": float(edges[k]),
                "hi": None if np.isinf(edges[k + 1]) else float(edges[k + 1]),
                "pixels": pixels,
                "mean_iou": score,
            }
        )
    return out


def frequent_mean_iou(cm):
    return mean_iou(cm, FREQUENT_CLASSES)


def agreement_coefficient(counts, m, exact=False):
    """Coefficient of agreement for paired comparisons.

    ``counts[i][j]`` is how often option i was chosen over option j by ``m``
    subjects. Returns ``2*sigma / (C(m,2) * C(t,2)) - 1`` with
    ``sigma = sum C(a_ij, 2)``; a ``Fraction`` if ``exact``.
    """
    a = np.asarray(counts)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("counts must be a square matrix")
    t = a.shape[0]
    m = int(m)
    if m < 2:
        raise ValueError("need at least 2 subjects")
    if t < 2:
        raise ValueError("need at least 2 options")
    if np.any(a < 0) or np.any(a != np.round(a)):
        raise ValueError("counts must be non-negative integers")
    if np.any(np.diag(a) != 0):
        raise ValueError("diagonal counts must be zero")
    sigma = sum(comb(int(x), 2) for x in a.ravel())
    mu = Fraction(2 * sigma, comb(m, 2) * comb(t, 2)) - 1
    return mu if exact else float(mu)


def kendall_tau(rank_a, rank_b):
    """Kendall's tau-b between two score/rank vectors over the same items."""
    x = np.asarray(rank_a, dtype=np.float64)
    y = np.asarray(rank_b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("rankings must be 1-D and of equal length")
    if len(x) < 2:
        raise ValueError("need at least 2 items")
    iu = np.triu_indices(len(x), k=1)
    sx = np.sign(x[:, None] - x[None, :])[iu]
    sy = np.sign(y[:, None] - y[None, :])[iu]
    n0 = len(sx)
    s = float((sx * sy).sum())
    n1 = float((sx == 0).sum())
    n2 = float((sy == 0).sum())
    denom = np.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0:
        raise ValueError("tau undefined for a constant ranking")
    return s / denom
