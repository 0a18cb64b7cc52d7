"""Instance-to-pixel plane segmentation and plane-based depth assembly."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import CameraIntrinsics, PlaneParam, plane_depth_map

DEFAULT_THRESHOLD = 1.0
KEEP_PROB = 0.5


@dataclass
class KeptInstance:
    prob: float
    plane: PlaneParam
    embedding: np.ndarray
    slot: int = -1


@dataclass
class SegmentationResult:
    mask: np.ndarray  # H x W, 0 = non-plane, k = kept[k - 1]
    kept: list
    assembled_depth: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def plane_array(self) -> np.ndarray:
        return np.array([k.plane.n for k in self.kept], dtype=np.float64).reshape(-1, 3)


def select_instances(prob, params, embeds, threshold: float = KEEP_PROB) -> list:
    """Keep predicted slots whose plane probability exceeds ``threshold``."""
    prob = np.asarray(prob, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    embeds = np.asarray(embeds, dtype=np.float64)
    return [KeptInstance(float(prob[k]), PlaneParam(tuple(params[k])), embeds[k].copy(), k)
            for k in range(len(prob)) if prob[k] > threshold]


def assign_pixels(embed_map, kept, T: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Label each pixel with its nearest kept instance (1-based) if closer than ``T``.

    ``embed_map`` is H x W x E. Ties go to the lowest instance index.
    """
    embed_map = np.asarray(embed_map, dtype=np.float64)
    H, W, E = embed_map.shape
    centers = np.array([k.embedding if isinstance(k, KeptInstance) else k for k in kept],
                       dtype=np.float64).reshape(-1, E)
    labels = _kernels.nearest_assign(embed_map.reshape(-1, E), centers, float(T))
    return labels.reshape(H, W).astype(np.int32)


def assemble_depth(mask, kept, depth_map, K: CameraIntrinsics):
    """Plane-rendered depth on plane pixels, decoder depth elsewhere.

    Returns (depth, number of plane pixels that fell back to ``depth_map``
    because their ray was parallel to, or behind, the assigned plane).
    """
    depth_map = np.asarray(depth_map, dtype=np.float64)
    out = depth_map.copy()
    fallback = 0
    for k, inst in enumerate(kept, start=1):
        sel = mask == k
        if not sel.any():
            continue
        plane_depth = plane_depth_map(inst.plane, K)[sel]
        ok = np.isfinite(plane_depth) & (plane_depth > 0)
        fallback += int((~ok).sum())
        vals = np.where(ok, plane_depth, depth_map[sel])
        out[sel] = vals
    return out, fallback


def segment(prob, params, embeds, embed_map, depth_map, K: CameraIntrinsics,
            T: float = DEFAULT_THRESHOLD, keep_threshold: float = KEEP_PROB) -> SegmentationResult:
    kept = select_instances(prob, params, embeds, keep_threshold)
    mask = assign_pixels(embed_map, kept, T)
    depth, fallback = assemble_depth(mask, kept, depth_map, K)
    return SegmentationResult(mask, kept, depth, {"fallback_pixels": fallback})


def ground_truth_result(scene) -> SegmentationResult:
    """A SegmentationResult that reproduces a scene's ground truth exactly."""
    kept = [KeptInstance(1.0, p, np.eye(1, max(len(scene.planes), 1), i).ravel(), i)
            for i, p in enumerate(scene.planes)]
    depth, fallback = assemble_depth(scene.mask, kept, scene.depth, scene.K_cam)
    return SegmentationResult(scene.mask.astype(np.int32).copy(), kept, depth, {"fallback_pixels": fallback})
