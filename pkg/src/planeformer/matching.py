"""Bipartite matching between padded ground-truth plane slots and predicted instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from . import _kernels


class MatchingError(ValueError):
    pass


@dataclass
class PaddedGroundTruth:
    """K slots: the first M are real planes (label 1), the rest non-plane (label 0).

    Geometry of padded slots is zero-filled and never read: every use is gated
    on the label.
    """

    labels: torch.Tensor  # K, int64 in {0, 1}
    params: torch.Tensor  # K, 3
    centers: torch.Tensor  # K, 2
    num_planes: int

    @property
    def K(self) -> int:
        return int(self.labels.shape[0])


@dataclass
class MatchResult:
    sigma: np.ndarray  # sigma[i] = prediction slot matched to ground-truth slot i
    cost_matrix: np.ndarray  # [gt slot, prediction]
    total_cost: float

    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.sigma)
        inv[self.sigma] = np.arange(len(self.sigma))
        return inv


def pad_ground_truth(params, centers, K: int, dtype=torch.float64, device=None) -> PaddedGroundTruth:
    params = torch.as_tensor(np.asarray(params, dtype=np.float64).reshape(-1, 3), dtype=dtype, device=device)
    centers = torch.as_tensor(np.asarray(centers, dtype=np.float64).reshape(-1, 2), dtype=dtype, device=device)
    M = params.shape[0]
    if M > K:
        raise MatchingError(f"scene has {M} planes but only K={K} queries; increase the number of queries")
    if centers.shape[0] != M:
        raise MatchingError(f"{centers.shape[0]} centers for {M} planes")
    labels = torch.zeros(K, dtype=torch.int64, device=device)
    labels[:M] = 1
    pad_p = torch.zeros(K, 3, dtype=dtype, device=device)
    pad_c = torch.zeros(K, 2, dtype=dtype, device=device)
    pad_p[:M] = params
    pad_c[:M] = centers
    return PaddedGroundTruth(labels, pad_p, pad_c, M)


def matching_cost(gt_label: int, gt_param, gt_center, pred_prob_plane: float, pred_param, pred_center,
                  omega: float = 2.0, use_center: bool = True) -> float:
    """Cost of pairing one ground-truth slot with one prediction.

    The class term uses the raw probability of the ground-truth class.
    """
    p_cls = pred_prob_plane if gt_label == 1 else 1.0 - pred_prob_plane
    cost = -float(p_cls)
    if gt_label == 1:
        cost += float(np.abs(np.asarray(gt_param, float) - np.asarray(pred_param, float)).sum())
        if use_center:
            cost += omega * float(np.linalg.norm(np.asarray(gt_center, float) - np.asarray(pred_center, float)))
    return cost


@torch.no_grad()
def cost_matrix(gt: PaddedGroundTruth, logits, params, centers=None, omega: float = 2.0) -> np.ndarray:
    """Vectorized ``matching_cost`` for all (gt slot, prediction) pairs; shape K x K."""
    prob = logits.softmax(-1)  # K, 2
    cost = -prob[:, gt.labels].T  # [gt, pred]
    real = gt.labels == 1
    l1 = torch.cdist(gt.params.to(params.dtype), params, p=1)
    geo = l1
    if centers is not None:
        geo = geo + omega * torch.cdist(gt.centers.to(centers.dtype), centers, p=2,
                                          compute_mode="donot_use_mm_for_euclid_dist")
    cost = cost + torch.where(real[:, None], geo, torch.zeros_like(geo))
    return cost.double().cpu().numpy()


def solve_matching(cost) -> MatchResult:
    """Exact minimum-cost perfect matching of a square cost matrix."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise MatchingError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.isfinite(cost).all():
        raise MatchingError("cost matrix contains non-finite entries")
    sigma = _kernels.linear_sum_assignment(cost)
    total = float(cost[np.arange(len(sigma)), sigma].sum())
    return MatchResult(np.asarray(sigma, dtype=np.int64), cost, total)


def match(gt: PaddedGroundTruth, logits, params, centers=None, omega: float = 2.0) -> MatchResult:
    return solve_matching(cost_matrix(gt, logits, params, centers, omega))
