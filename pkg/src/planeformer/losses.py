"""Training objective: matched classification, plane-parameter, center, embedding and depth losses.

Per-plane sums are averaged over the real planes of a scene and per-pixel sums
over the pixels involved (``reduction="mean"``); ``reduction="sum"`` keeps the
literal sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .geometry import backproject_map
from .model.planeformer import PlaneInstanceSet
from .matching import MatchResult, PaddedGroundTruth, cost_matrix, pad_ground_truth, solve_matching

PROB_FLOOR = 1e-12
COS_EPS = 1e-8


class TrainingStepError(FloatingPointError):
    def __init__(self, component, value):
        super().__init__(f"loss component '{component}' is not finite ({value})")
        self.component = component


@dataclass(frozen=True)
class LossConfig:
    omega: float = 2.0
    beta1: float = 5.0
    beta2: float = 2.0
    delta_pull: float = 0.5
    delta_push: float = 1.5
    lam: float = 5.0
    aux_weight: float = 0.1
    plane_point_cap: int = 512
    use_center: bool = True
    reduction: str = "mean"

    def __post_init__(self):
        weights = (self.omega, self.beta1, self.beta2, self.delta_pull, self.delta_push, self.lam)
        if min(weights) <= 0 or self.aux_weight < 0:
            raise ValueError("loss weights and margins must be positive")
        if self.delta_push <= self.delta_pull:
            raise ValueError("push margin must exceed pull margin")
        if self.reduction not in ("mean", "sum"):
            raise ValueError(f"unknown reduction {self.reduction!r}")


COMPONENTS = ("cls", "param", "center_inst", "embed_pull", "embed_push", "depth", "center_pix", "aux")


@dataclass
class LossBreakdown:
    cls: torch.Tensor
    param: torch.Tensor
    center_inst: torch.Tensor
    embed_pull: torch.Tensor
    embed_push: torch.Tensor
    depth: torch.Tensor
    center_pix: torch.Tensor
    aux: torch.Tensor
    total: torch.Tensor
    matches: list = field(default_factory=list, repr=False)
    aux_matches: list = field(default_factory=list, repr=False)
    empty_depth: int = 0

    def as_dict(self) -> dict:
        return {k: float(getattr(self, k).detach()) for k in (*COMPONENTS, "total")}


@dataclass
class SceneTargets:
    """Ground truth of one scene, prepared for loss evaluation."""

    gt: PaddedGroundTruth
    mask: torch.Tensor  # H, W int64
    depth: torch.Tensor  # H, W
    points: list  # per real plane: P_i x 3 backprojected GT points (subsampled)
    pixel_index: list  # per real plane: flat pixel indices
    center_map: torch.Tensor  # 2, H, W (zero on non-plane pixels)

    @property
    def num_planes(self) -> int:
        return self.gt.num_planes


def scene_targets(scene, K: int, point_cap: int = 512, seed: int = 0, dtype=torch.float64, device=None) -> SceneTargets:
    gt = pad_ground_truth(scene.plane_array(), np.asarray(scene.centers).reshape(-1, 2), K, dtype, device)
    H, W = scene.mask.shape
    pts_map = backproject_map(scene.depth, scene.K_cam).reshape(-1, 3)
    flat_mask = scene.mask.reshape(-1)
    rng = np.random.default_rng(seed)
    points, pixel_index = [], []
    center_map = np.zeros((2, H, W))
    for i in range(1, scene.num_planes + 1):
        idx = np.flatnonzero(flat_mask == i)
        pixel_index.append(torch.as_tensor(idx, dtype=torch.int64, device=device))
        sub = idx if len(idx) <= point_cap else np.sort(rng.choice(idx, point_cap, replace=False))
        points.append(torch.as_tensor(pts_map[sub], dtype=dtype, device=device))
        sel = scene.mask == i
        center_map[0][sel], center_map[1][sel] = scene.centers[i - 1]
    return SceneTargets(
        gt=gt,
        mask=torch.as_tensor(scene.mask.astype(np.int64), device=device),
        depth=torch.as_tensor(scene.depth, dtype=dtype, device=device),
        points=points,
        pixel_index=pixel_index,
        center_map=torch.as_tensor(center_map, dtype=dtype, device=device),
    )


def _zero(ref):
    return ref.new_zeros(())


def _plane_mean(total, count, reduction):
    if reduction == "sum":
        return total
    return total / count if count else total


def classification_loss(match: MatchResult, logits, gt: PaddedGroundTruth):
    """Mean over all K slots of -log p(matched prediction = gt class)."""
    prob = logits.softmax(-1)[torch.as_tensor(match.sigma, device=logits.device)]  # K, 2 in gt order
    p = prob.gather(1, gt.labels[:, None]).squeeze(1)
    return -(p.clamp_min(PROB_FLOOR).log()).mean()


def plane_param_loss(match: MatchResult, params, targets: SceneTargets, beta1=5.0, beta2=2.0, reduction="mean"):
    M = targets.num_planes
    if M == 0:
        return _zero(params)
    pred = params[torch.as_tensor(match.sigma[:M], device=params.device)]  # M, 3
    gt = targets.gt.params[:M].to(params.dtype)
    l1 = (gt - pred).abs().sum(-1)
    cos = (gt * pred).sum(-1) / (gt.norm(dim=-1) * pred.norm(dim=-1)).clamp_min(COS_EPS)
    total = (l1 + beta1 * (1 - cos)).sum()
    for i in range(M):
        q = targets.points[i].to(params.dtype)
        if len(q):
            r = (q @ pred[i] - 1).abs()
            total = total + beta2 * (r.mean() if reduction == "mean" else r.sum())
    return _plane_mean(total, M, reduction)


def embedding_loss(match: MatchResult, embeds, embed_map, targets: SceneTargets, delta_pull=0.5, delta_push=1.5,
                   reduction="mean"):
    """Pull pixel embeddings toward their matched instance embedding; push instances apart."""
    M = targets.num_planes
    if M == 0:
        return _zero(embeds), _zero(embeds)
    inst = embeds[torch.as_tensor(match.sigma[:M], device=embeds.device)]  # M, E
    flat = embed_map.flatten(1)  # E, H*W
    pull = _zero(embeds)
    used = 0
    for i in range(M):
        idx = targets.pixel_index[i]
        if len(idx) == 0:
            continue
        g = flat[:, idx].T  # P, E
        h = ((g - inst[i]).norm(dim=-1) - delta_pull).clamp_min(0)
        pull = pull + (h.mean() if reduction == "mean" else h.sum())
        used += 1
    pull = _plane_mean(pull, used, reduction)
    push = _zero(embeds)
    if M > 1:
        dist = (inst[:, None, :] - inst[None, :, :]).norm(dim=-1)
        off = ~torch.eye(M, dtype=torch.bool, device=embeds.device)
        push = (delta_push - dist[off]).clamp_min(0).sum()
        push = _plane_mean(push, M, reduction)
    return pull, push


def depth_and_center_losses(depth_map, center_map, match: MatchResult, centers, targets: SceneTargets):
    """(depth L1, instance center L2, pixel center L2); center terms are zero when centers are None."""
    gt_depth = targets.depth.to(depth_map.dtype)
    valid = torch.isfinite(gt_depth) & (gt_depth > 0)
    empty_depth = 0
    if valid.any():
        depth = (depth_map[valid] - gt_depth[valid]).abs().mean()
    else:
        depth = _zero(depth_map)
        empty_depth = 1
    center_inst = center_instance_loss(match, centers, targets) if centers is not None else _zero(depth_map)
    center_pix = _zero(depth_map)
    if center_map is not None:
        planar = targets.mask > 0
        if planar.any():
            diff = center_map - targets.center_map.to(center_map.dtype)
            center_pix = diff.norm(dim=0)[planar].mean()
    return depth, center_inst, center_pix, empty_depth


def center_instance_loss(match: MatchResult, centers, targets: SceneTargets):
    M = targets.num_planes
    if M == 0:
        return _zero(centers)
    pred = centers[torch.as_tensor(match.sigma[:M], device=centers.device)]
    return (targets.gt.centers[:M].to(pred.dtype) - pred).norm(dim=-1).mean()


def _match_instances(inst, targets, cfg: LossConfig):
    centers = inst.centers if cfg.use_center else None
    return solve_matching(cost_matrix(targets.gt, inst.logits, inst.params, centers, cfg.omega))


def _instance_terms(match, inst, targets, cfg):
    cls = classification_loss(match, inst.logits, targets.gt)
    param = plane_param_loss(match, inst.params, targets, cfg.beta1, cfg.beta2, cfg.reduction)
    c_inst = _zero(inst.params)
    if cfg.use_center and inst.centers is not None:
        c_inst = center_instance_loss(match, inst.centers, targets)
    return cls, param, c_inst


def total_loss(output, targets_list, cfg: LossConfig, matches=None, aux_matches=None) -> LossBreakdown:
    """Full objective for a batch, averaged over images.

    ``output`` is a ModelOutput. Matchings are solved here unless given (tests
    pass them in to hold the assignment fixed while probing gradients).
    """
    inst = output.instances
    pix = output.pixels
    B = inst.logits.shape[0]
    sums = {k: _zero(inst.logits) for k in COMPONENTS}
    all_matches, all_aux = [], []
    empty = 0
    for b in range(B):
        t = targets_list[b]
        one = inst.item(b)
        m = matches[b] if matches is not None else _match_instances(_squeeze(one), t, cfg)
        all_matches.append(m)
        s = _squeeze(one)
        cls, param, c_inst = _instance_terms(m, s, t, cfg)
        pull, push = embedding_loss(m, s.embeds, pix.embed_map[b], t, cfg.delta_pull, cfg.delta_push, cfg.reduction)
        center_map = pix.center_map[b] if (cfg.use_center and pix.center_map is not None) else None
        depth, _, c_pix, e = depth_and_center_losses(pix.depth_map[b], center_map, m, None, t)
        empty += e
        aux = _zero(inst.logits)
        item_aux = []
        if cfg.aux_weight > 0:
            for j, a in enumerate(output.aux):
                if not bool(a.valid[b]):
                    item_aux.append(None)
                    continue
                ai = _squeeze(a.instances.item(b))
                am = aux_matches[b][j] if aux_matches is not None else _match_instances(ai, t, cfg)
                item_aux.append(am)
                aux = aux + sum(_instance_terms(am, ai, t, cfg))
        all_aux.append(item_aux)
        for k, v in zip(COMPONENTS, (cls, param, c_inst, pull, push, depth, c_pix, aux)):
            sums[k] = sums[k] + v
    parts = {k: v / B for k, v in sums.items()}
    total = (parts["cls"] + parts["param"] + parts["center_inst"]
             + cfg.lam * (parts["embed_pull"] + parts["embed_push"])
             + parts["depth"] + parts["center_pix"] + cfg.aux_weight * parts["aux"])
    for k, v in (*parts.items(), ("total", total)):
        if not math.isfinite(float(v.detach())):
            raise TrainingStepError(k, float(v.detach()))
    return LossBreakdown(**parts, total=total, matches=all_matches, aux_matches=all_aux, empty_depth=empty)


def _squeeze(inst):
    """Drop the batch dimension of a single-image PlaneInstanceSet."""
    return PlaneInstanceSet(inst.logits[0], inst.params[0], inst.embeds[0],
                            None if inst.centers is None else inst.centers[0])


def breakdown_record(bd: LossBreakdown, **extra) -> dict:
    rec = bd.as_dict()
    rec.update(extra)
    return rec


__all__ = [
    "LossConfig", "LossBreakdown", "SceneTargets", "TrainingStepError", "classification_loss", "plane_param_loss",
    "embedding_loss", "depth_and_center_losses", "center_instance_loss", "total_loss", "scene_targets",
    "breakdown_record",
]
