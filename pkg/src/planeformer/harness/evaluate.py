"""Evaluation driver: inference + segmentation + every metric over a split."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from ..metrics import (
    DEPTH_THRESHOLDS,
    NORMAL_THRESHOLDS,
    aggregate_recall,
    depth_scores,
    plane_pixel_recall,
    seg_scores,
)
from ..model import PlaneFormer
from ..scene_synth import load_split
from ..segmentation import SegmentationResult, ground_truth_result, segment
from .checkpoint import load_model
from .config import TrainConfig

Predictor = Callable[[list], list]  # scenes -> SegmentationResults


@dataclass
class EvalReport:
    num_scenes: int
    depth_recall: dict
    normal_recall: dict
    seg: dict
    depth: dict
    per_scene: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def recall_at(self, threshold=0.6, kind="plane"):
        thr = np.asarray(self.depth_recall["thresholds"])
        i = int(np.argmin(np.abs(thr - threshold)))
        return self.depth_recall[f"{kind}_recall"][i]

    def summary(self) -> dict:
        return {"num_scenes": self.num_scenes, "plane_recall@0.60": self.recall_at(0.6),
                "pixel_recall@0.60": self.recall_at(0.6, "pixel"), **self.seg, **self.depth, **self.meta}

    def to_dict(self) -> dict:
        return asdict(self)


def ground_truth_predictor(scenes) -> list:
    return [ground_truth_result(s) for s in scenes]


def model_predictor(model: PlaneFormer, cfg: TrainConfig, use_lines: bool = True, batch_size: int = 8) -> Predictor:
    """Wrap a model as a predictor; ``use_lines=False`` feeds empty line sequences."""

    def predict(scenes):
        out = []
        model.eval()
        for i in range(0, len(scenes), batch_size):
            chunk = scenes[i:i + batch_size]
            out.extend(run_scenes(model, chunk, cfg, use_lines))
        return out

    return predict


@torch.no_grad()
def run_scenes(model, scenes, cfg: TrainConfig, use_lines=True, with_attention=False):
    dtype = next(model.parameters()).dtype
    images = torch.as_tensor(np.stack([s.image for s in scenes]), dtype=dtype).permute(0, 3, 1, 2)
    lines = [torch.as_tensor(s.line_array() if use_lines else np.zeros((0, 4)), dtype=dtype) for s in scenes]
    output = model(images, lines, with_aux=False, with_attention=with_attention)
    results = []
    inst, pix = output.instances, output.pixels
    for b, s in enumerate(scenes):
        res = segment(inst.prob[b].double().numpy(), inst.params[b].double().numpy(),
                      inst.embeds[b].double().numpy(),
                      pix.embed_map[b].permute(1, 2, 0).double().numpy(),
                      pix.depth_map[b].double().numpy(), s.K_cam,
                      T=cfg.embed_threshold, keep_threshold=cfg.keep_threshold)
        results.append(res)
    if with_attention:
        return results, output.attention
    return results


def evaluate_predictions(scenes, results: list, meta: dict | None = None) -> EvalReport:
    depth_curves, normal_curves, segs, depths, per_scene = [], [], [], [], []
    for s, r in zip(scenes, results):
        dc = plane_pixel_recall(r, s, DEPTH_THRESHOLDS, "depth")
        nc = plane_pixel_recall(r, s, NORMAL_THRESHOLDS, "normal")
        ss = seg_scores(r.mask, s.mask)
        valid = np.isfinite(s.depth) & (s.depth > 0)
        ds = depth_scores(r.assembled_depth, s.depth, valid)
        depth_curves.append(dc)
        normal_curves.append(nc)
        segs.append(ss.as_dict())
        depths.append(ds.as_dict())
        per_scene.append({"scene": s.name, "kept": len(r.kept), "gt_planes": s.num_planes,
                          **ss.as_dict(), **{f"depth_{k}": v for k, v in ds.as_dict().items()},
                          "plane_recall@0.60": dc.at(0.6)[0] if dc else None})
    mean = lambda rows: {k: float(np.mean([r[k] for r in rows])) for k in rows[0]}  # noqa: E731
    return EvalReport(len(scenes), asdict(aggregate_recall(depth_curves)), asdict(aggregate_recall(normal_curves)),
                      mean(segs), mean(depths), per_scene, dict(meta or {}))


def evaluate(predictor: Predictor, scenes, meta=None) -> EvalReport:
    if not scenes:
        raise ValueError("evaluation split is empty")
    return evaluate_predictions(scenes, predictor(scenes), meta)


def evaluate_checkpoint(checkpoint, data_root=None, split="test", scenes=None, expect: TrainConfig | None = None,
                        use_lines: bool = True) -> EvalReport:
    """Evaluate a checkpoint; refuses when ``expect`` has a different model fingerprint."""
    model, cfg, extra = load_model(checkpoint, expect=expect)
    if scenes is None:
        scenes = load_split(data_root, split, cfg.num_queries)
    meta = {"checkpoint": str(checkpoint), "fingerprint": cfg.model_config().fingerprint(),
            "use_lines": bool(use_lines and cfg.use_lines), "num_queries": cfg.num_queries,
            "epoch": extra.get("epoch")}
    return evaluate(model_predictor(model, cfg, use_lines), scenes, meta)


def query_sweep(root, queries, data_root=None, split="test", scenes=None, use_lines=True) -> dict:
    """Evaluate ``<root>/k{K}/checkpoint.npz`` for each K in ``queries``."""
    reports = {}
    for K in queries:
        path = Path(root) / f"k{K}" / "checkpoint.npz"
        reports[K] = evaluate_checkpoint(path, data_root, split, scenes, use_lines=use_lines)
    return reports


def write_report(report: EvalReport, path, per_scene: bool = True) -> Path:
    """One JSON record per line: a summary record, the recall curves, then per-scene rows."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(json.dumps({"type": "summary", **report.summary()}, sort_keys=True) + "\n")
        fh.write(json.dumps({"type": "depth_recall", **report.depth_recall}, sort_keys=True) + "\n")
        fh.write(json.dumps({"type": "normal_recall", **report.normal_recall}, sort_keys=True) + "\n")
        fh.write(json.dumps({"type": "seg", **report.seg}, sort_keys=True) + "\n")
        fh.write(json.dumps({"type": "depth", **report.depth}, sort_keys=True) + "\n")
        if per_scene:
            for row in report.per_scene:
                fh.write(json.dumps({"type": "scene", **row}, sort_keys=True) + "\n")
    return path


def read_report(path) -> dict:
    """Group a report file's records by type (``scene`` rows become a list)."""
    out = {"scene": []}
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.pop("type", None)
            if kind == "scene":
                out["scene"].append(rec)
            else:
                out[kind] = rec
    return out


__all__ = ["EvalReport", "SegmentationResult", "evaluate", "evaluate_checkpoint", "evaluate_predictions",
           "ground_truth_predictor", "model_predictor", "query_sweep", "read_report", "run_scenes", "write_report"]
