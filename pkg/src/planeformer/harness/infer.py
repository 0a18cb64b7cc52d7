"""Single-image inference with optional cross-attention dumps."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..geometry import CameraIntrinsics
from ..model import LineValidationError
from ..segmentation import SegmentationResult, segment
from .checkpoint import load_model


@dataclass
class InferenceResult:
    segmentation: SegmentationResult
    prob: np.ndarray  # K plane probabilities (all slots)
    params: np.ndarray  # K x 3
    context_attention: np.ndarray | None = None  # kept x (H/16) x (W/16)
    line_attention: np.ndarray | None = None  # kept x n_lines


def parse_line_text(text: str, width: int | None = None, height: int | None = None, source="<lines>") -> np.ndarray:
    """Parse ``x1 y1 x2 y2`` records (blank lines and ``#`` comments skipped)."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        rec = raw.split("#", 1)[0].strip()
        if not rec:
            continue
        parts = rec.replace(",", " ").split()
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            vals = None
        if vals is None or len(vals) != 4 or not np.all(np.isfinite(vals)):
            raise LineValidationError(f"{source}:{lineno}: expected 'x1 y1 x2 y2', got {raw.strip()!r}")
        if width is not None and height is not None:
            xs, ys = vals[0::2], vals[1::2]
            if min(xs) < 0 or max(xs) >= width or min(ys) < 0 or max(ys) >= height:
                raise LineValidationError(f"{source}:{lineno}: endpoint outside {width}x{height}: {raw.strip()!r}")
        rows.append(vals)
    return np.asarray(rows, dtype=np.float64).reshape(-1, 4)


def read_line_file(path, width=None, height=None) -> np.ndarray:
    with open(path) as fh:
        return parse_line_text(fh.read(), width, height, source=str(path))


def write_line_file(lines, path):
    with open(path, "w") as fh:
        for x1, y1, x2, y2 in np.asarray(lines).reshape(-1, 4):
            fh.write(f"{x1:.3f} {y1:.3f} {x2:.3f} {y2:.3f}\n")


@torch.no_grad()
def infer(model, cfg, image, lines=None, K: CameraIntrinsics | None = None, with_attention=True) -> InferenceResult:
    """``image``: H x W x 3 float array in [0, 1]; ``lines``: n x 4 pixel endpoints or None."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 image, got shape {image.shape}")
    H, W = image.shape[:2]
    K = K or CameraIntrinsics.default(W, H)
    if (K.width, K.height) != (W, H):
        raise ValueError(f"intrinsics are for {K.width}x{K.height}, image is {W}x{H}")
    dtype = next(model.parameters()).dtype
    x = torch.as_tensor(image, dtype=dtype).permute(2, 0, 1).unsqueeze(0)
    seg_lines = np.zeros((0, 4)) if lines is None else np.asarray(lines, dtype=np.float64).reshape(-1, 4)
    model.eval()
    out = model(x, [torch.as_tensor(seg_lines, dtype=dtype)], with_aux=False, with_attention=with_attention)
    inst, pix = out.instances, out.pixels
    prob = inst.prob[0].double().numpy()
    res = segment(prob, inst.params[0].double().numpy(), inst.embeds[0].double().numpy(),
                  pix.embed_map[0].permute(1, 2, 0).double().numpy(), pix.depth_map[0].double().numpy(), K,
                  T=cfg.embed_threshold, keep_threshold=cfg.keep_threshold)
    ctx = line = None
    if with_attention:
        slots = [k.slot for k in res.kept]
        ctx = out.attention["context"][0, slots].double().numpy()
        if out.attention["line"] is not None:
            line = out.attention["line"][0, slots, :len(seg_lines)].double().numpy()
        else:
            line = np.zeros((len(slots), 0))
    return InferenceResult(res, prob, inst.params[0].double().numpy(), ctx, line)


def infer_checkpoint(checkpoint, image, lines=None, K=None, with_attention=True):
    model, cfg, _ = load_model(checkpoint)
    return infer(model, cfg, image, lines, K, with_attention)


def save_inference(result: InferenceResult, out_dir, lines=None) -> Path:
    """Write mask, depth, instance table and attention arrays to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seg = result.segmentation
    arrays = {"mask": seg.mask, "depth": seg.assembled_depth, "prob": result.prob, "params": result.params}
    if result.context_attention is not None:
        arrays["context_attention"] = result.context_attention
        arrays["line_attention"] = result.line_attention
    if lines is not None:
        arrays["lines"] = np.asarray(lines, dtype=np.float64).reshape(-1, 4)
    np.savez(out / "inference.npz", **arrays)
    table = [{"slot": k.slot, "prob": k.prob, "n": list(k.plane.n), "pixels": int((seg.mask == i + 1).sum())}
             for i, k in enumerate(seg.kept)]
    with open(out / "instances.json", "w") as fh:
        json.dump({"instances": table, **seg.diagnostics}, fh, indent=1)
    return out
