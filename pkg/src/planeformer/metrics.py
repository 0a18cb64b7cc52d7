"""Plane/pixel recall, segmentation scores (VI, RI, SC) and depth accuracy."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .geometry import plane_angle_deg

DEPTH_THRESHOLDS = tuple(round(0.05 * i, 2) for i in range(13))  # 0.00 .. 0.60 m
NORMAL_THRESHOLDS = (5.0, 30.0)
IOU_GATE = 0.5


class MetricInputError(ValueError):
    pass


@dataclass
class RecallCurve:
    thresholds: list
    plane_recall: list
    pixel_recall: list
    mode: str = "depth"
    num_gt_planes: int = 0
    num_gt_pixels: int = 0

    def at(self, threshold) -> tuple:
        i = int(np.argmin(np.abs(np.asarray(self.thresholds, dtype=float) - threshold)))
        return self.plane_recall[i], self.pixel_recall[i]


@dataclass
class SegScores:
    VI: float
    RI: float
    SC: float

    def as_dict(self):
        return asdict(self)


@dataclass
class DepthScores:
    Rel: float
    log10: float
    RMSE: float
    delta1: float
    delta2: float
    delta3: float

    def as_dict(self):
        return asdict(self)


# ------------------------------------------------------------------- recall


def greedy_iou_matching(pred_mask, gt_mask, n_pred, n_gt):
    """One-to-one matching by descending IOU; returns ({gt: pred}, iou table, intersections)."""
    table = _kernels.contingency(gt_mask.ravel(), pred_mask.ravel(), n_gt + 1, n_pred + 1)
    inter = table[1:, 1:].astype(np.float64)
    gt_area = table[1:, :].sum(1).astype(np.float64)
    pred_area = table[:, 1:].sum(0).astype(np.float64)
    union = gt_area[:, None] + pred_area[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, inter / union, 0.0)
    pairs = sorted(((iou[g, p], g, p) for g in range(n_gt) for p in range(n_pred) if iou[g, p] > 0),
                   key=lambda x: (-x[0], x[1], x[2]))
    used_g, used_p, match = set(), set(), {}
    for v, g, p in pairs:
        if g in used_g or p in used_p:
            continue
        used_g.add(g)
        used_p.add(p)
        match[g] = p
    return match, iou, inter


def optimal_iou_matching(pred_mask, gt_mask, n_pred, n_gt):
    """One-to-one matching maximizing the summed IOU; same return layout as the greedy variant."""
    _, iou, inter = greedy_iou_matching(pred_mask, gt_mask, n_pred, n_gt)
    match = {}
    if n_pred and n_gt:
        size = max(n_pred, n_gt)
        cost = np.zeros((size, size))
        cost[:n_gt, :n_pred] = -iou
        sigma = _kernels.linear_sum_assignment(cost)
        match = {g: int(sigma[g]) for g in range(n_gt) if sigma[g] < n_pred and iou[g, sigma[g]] > 0}
    return match, iou, inter


def plane_pixel_recall(pred, gt, thresholds=DEPTH_THRESHOLDS, mode: str = "depth", matching: str = "greedy",
                       pixel_denominator: str = "planes") -> RecallCurve | None:
    """Fraction of ground-truth planes (and of their pixels) recovered within each threshold.

    A ground-truth plane counts as recovered when its matched prediction has
    IOU > 0.5 and its error is below the threshold: in ``depth`` mode the mean
    |predicted - true| depth over the intersection, in ``normal`` mode the
    angle between the plane normals (degrees). Matching is one-to-one, either
    ``greedy`` by descending IOU or ``optimal`` (maximum total IOU). Pixel
    recall divides by all ground-truth plane pixels (``planes``) or by every
    image pixel (``image``). Returns None for a scene without ground-truth planes.
    """
    gt_mask = np.asarray(gt.mask)
    pred_mask = np.asarray(pred.mask)
    if gt_mask.shape != pred_mask.shape:
        raise MetricInputError(f"mask shapes differ: {pred_mask.shape} vs {gt_mask.shape}")
    n_gt = len(gt.planes)
    if n_gt == 0:
        return None
    n_pred = len(pred.kept)
    if matching == "greedy":
        match, iou, inter = greedy_iou_matching(pred_mask, gt_mask, n_pred, n_gt)
    elif matching == "optimal":
        match, iou, inter = optimal_iou_matching(pred_mask, gt_mask, n_pred, n_gt)
    else:
        raise MetricInputError(f"unknown matching {matching!r}")
    errors = np.full(n_gt, np.inf)
    covered = np.zeros(n_gt)
    for g, p in match.items():
        if iou[g, p] <= IOU_GATE:
            continue
        region = (gt_mask == g + 1) & (pred_mask == p + 1)
        if mode == "depth":
            errors[g] = float(np.mean(np.abs(pred.assembled_depth[region] - gt.depth[region])))
        elif mode == "normal":
            errors[g] = plane_angle_deg(pred.kept[p].plane.n, gt.planes[g].n)
        else:
            raise MetricInputError(f"unknown recall mode {mode!r}")
        covered[g] = inter[g, p]
    gt_pixels = np.array([(gt_mask == g + 1).sum() for g in range(n_gt)], dtype=np.float64)
    total_pixels = gt_pixels.sum()
    if pixel_denominator == "image":
        total_pixels = float(gt_mask.size)
    elif pixel_denominator != "planes":
        raise MetricInputError(f"unknown pixel denominator {pixel_denominator!r}")
    plane_rec, pixel_rec = [], []
    for t in thresholds:
        ok = errors < t
        plane_rec.append(float(ok.sum()) / n_gt)
        pixel_rec.append(float(covered[ok].sum() / total_pixels) if total_pixels else 0.0)
    return RecallCurve(list(thresholds), plane_rec, pixel_rec, mode, n_gt, int(total_pixels))


# ------------------------------------------------------------- segmentation


def _relabel(mask):
    _, inv = np.unique(np.asarray(mask).ravel(), return_inverse=True)
    return inv.astype(np.int64), int(inv.max()) + 1 if inv.size else 0


def seg_scores(pred_mask, gt_mask) -> SegScores:
    """VI (nats), Rand index and segmentation covering of ``pred_mask`` against ``gt_mask``.

    Every label, including the non-plane label, is its own segment.
    """
    pred_mask = np.asarray(pred_mask)
    gt_mask = np.asarray(gt_mask)
    if pred_mask.shape != gt_mask.shape:
        raise MetricInputError(f"mask shapes differ: {pred_mask.shape} vs {gt_mask.shape}")
    a, na = _relabel(gt_mask)
    b, nb = _relabel(pred_mask)
    N = a.size
    table = _kernels.contingency(a, b, na, nb).astype(np.float64)
    ra = table.sum(1)
    rb = table.sum(0)

    # Rand index from pair counts
    pairs = N * (N - 1) / 2.0
    same_both = (table * (table - 1)).sum() / 2.0
    same_a = (ra * (ra - 1)).sum() / 2.0
    same_b = (rb * (rb - 1)).sum() / 2.0
    ri = 1.0 if pairs == 0 else (pairs - same_a - same_b + 2 * same_both) / pairs

    # variation of information
    pj = table[table > 0] / N
    h_ab = -(pj * np.log(pj)).sum()
    pa = ra / N
    pb = rb / N
    h_a = -(pa * np.log(pa)).sum()
    h_b = -(pb * np.log(pb)).sum()
    vi = max(0.0, 2 * h_ab - h_a - h_b)  # = H(A) + H(B) - 2 I(A;B)

    # covering of ground-truth regions by predicted regions
    union = ra[:, None] + rb[None, :] - table
    best = (table / union).max(axis=1)
    sc = float((ra * best).sum() / N)
    return SegScores(float(vi), float(ri), sc)


# -------------------------------------------------------------------- depth


def depth_scores(pred_depth, gt_depth, valid_mask=None) -> DepthScores:
    pred = np.asarray(pred_depth, dtype=np.float64)
    gt = np.asarray(gt_depth, dtype=np.float64)
    valid = np.ones(gt.shape, bool) if valid_mask is None else np.asarray(valid_mask, bool)
    if not valid.any():
        raise MetricInputError("empty valid region")
    d, g = pred[valid], gt[valid]
    if not (np.all(d > 0) and np.all(g > 0)):
        raise MetricInputError("depths must be positive inside the valid region")
    ratio = np.maximum(d / g, g / d)
    return DepthScores(
        Rel=float(np.mean(np.abs(d - g) / g)),
        log10=float(np.mean(np.abs(np.log10(d) - np.log10(g)))),
        RMSE=float(math.sqrt(np.mean((d - g) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25 ** 2)),
        delta3=float(np.mean(ratio < 1.25 ** 3)),
    )


# -------------------------------------------------------------- aggregation


def aggregate_recall(curves) -> RecallCurve:
    """Dataset-level recall: pooled counts over scenes (skipped scenes are None)."""
    curves = [c for c in curves if c is not None]
    if not curves:
        raise MetricInputError("no scene with ground-truth planes")
    thr = curves[0].thresholds
    planes = sum(c.num_gt_planes for c in curves)
    pixels = sum(c.num_gt_pixels for c in curves)
    pr = [sum(c.plane_recall[i] * c.num_gt_planes for c in curves) / planes for i in range(len(thr))]
    px = [sum(c.pixel_recall[i] * c.num_gt_pixels for c in curves) / pixels for i in range(len(thr))]
    return RecallCurve(list(thr), pr, px, curves[0].mode, planes, pixels)
