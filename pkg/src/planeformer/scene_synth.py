"""Synthetic piecewise-planar RGB-D scenes ("box rooms") and their on-disk format.

A scene is a camera inside a room (floor plus three walls) holding a few
axis-aligned boxes. Depth and plane masks come from exact per-pixel ray
casting; line segments are the straight boundary edges of the visible plane
regions, computed as polygons so they are independent of the raster.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from shapely.geometry import LineString, MultiLineString, Polygon, box as shapely_box
from shapely.ops import linemerge, unary_union

from .geometry import (
    CameraIntrinsics,
    LineSegment,
    PlaneParam,
    plane_center,
    plane_depth_map,
)

MIN_PLANE_OFFSET = 0.3  # meters; planes closer to the camera center are rejected
NEAR_CLIP = 0.01


class SceneGenerationError(RuntimeError):
    def __init__(self, seed, reason):
        super().__init__(f"scene generation failed for seed {seed!r}: {reason}")
        self.seed = seed


class SceneValidationError(ValueError):
    def __init__(self, invariant, detail="", scene=None):
        where = f" in scene {scene}" if scene else ""
        super().__init__(f"invariant '{invariant}' violated{where}: {detail}")
        self.invariant = invariant
        self.scene = scene


@dataclass(frozen=True)
class SceneConfig:
    width: int = 256
    height: int = 192
    layout: str = "room"  # "room" or "frontal" (one plane filling the frame)
    max_planes: int = 10
    k_queries: int = 20
    max_boxes: int = 3
    min_plane_area: float = 0.004  # fraction of the image; smaller regions become non-plane
    nonplane_fraction: float = 0.04  # target area of the non-planar bump (0 disables it)
    line_noise: float = 0.0  # pixels, Gaussian endpoint jitter
    min_line_length: float = 8.0
    texture: bool = False
    image_noise: float = 0.02
    frontal_depth: float = 2.0
    max_retries: int = 25

    def __post_init__(self):
        if not 2 <= self.max_planes <= self.k_queries and self.layout == "room":
            raise ValueError("max_planes must lie in [2, k_queries]")
        if self.width < 64 or self.height < 48:
            raise ValueError("image size must be at least 64x48")


@dataclass
class PlanarScene:
    image: np.ndarray  # H x W x 3 float32 in [0, 1]
    depth: np.ndarray  # H x W float64 meters
    mask: np.ndarray  # H x W int32, 0 = non-plane, i = planes[i - 1]
    planes: list
    centers: list
    line_segments: list
    K_cam: CameraIntrinsics
    name: str = ""

    @property
    def num_planes(self) -> int:
        return len(self.planes)

    def plane_array(self) -> np.ndarray:
        return np.array([p.n for p in self.planes], dtype=np.float64).reshape(-1, 3)

    def line_array(self) -> np.ndarray:
        return np.array([s.as_array() for s in self.line_segments], dtype=np.float64).reshape(-1, 4)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.image, self.depth, self.mask):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(json.dumps(_meta(self), sort_keys=True).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class DatasetManifest:
    root: str
    split: str
    count: int
    width: int = 256
    height: int = 192
    seed: int = 0
    config: dict = field(default_factory=dict)  # extra SceneConfig overrides

    def scene_config(self) -> SceneConfig:
        return SceneConfig(width=self.width, height=self.height, **self.config)


# ---------------------------------------------------------------- geometry helpers


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


@dataclass
class _Face:
    normal: np.ndarray  # room frame, pointing away from the camera
    offset: float  # normal @ p == offset on the face, > 0
    corners: np.ndarray  # 4 x 3 room-frame polygon
    kind: str  # "floor", "wall", "box"
    owner: int  # -1 for the room, box index otherwise
    albedo: np.ndarray


def _clip_near(poly_cam):
    """Sutherland-Hodgman clip of a camera-frame polygon against z >= NEAR_CLIP."""
    out = []
    n = len(poly_cam)
    for i in range(n):
        a, b = poly_cam[i], poly_cam[(i + 1) % n]
        ina, inb = a[2] >= NEAR_CLIP, b[2] >= NEAR_CLIP
        if ina:
            out.append(a)
        if ina != inb:
            t = (NEAR_CLIP - a[2]) / (b[2] - a[2])
            out.append(a + t * (b - a))
    return np.array(out)


def _project(points_cam, K):
    return np.stack([K.fx * points_cam[:, 0] / points_cam[:, 2] + K.cx,
                     K.fy * points_cam[:, 1] / points_cam[:, 2] + K.cy], axis=1)


class _Room:
    def __init__(self, rng, cfg: SceneConfig, K: CameraIntrinsics):
        self.K = K
        self.h = rng.uniform(1.2, 1.5)  # camera height above the floor (floor at y = +h)
        self.depth = rng.uniform(3.5, 6.0)
        self.left = rng.uniform(1.5, 3.0)
        self.right = rng.uniform(1.5, 3.0)
        yaw = np.radians(rng.uniform(-25, 25))
        pitch = np.radians(rng.uniform(5, 18))
        # camera -> room rotation; pitch tilts the view toward the floor
        self.R = _rot_y(yaw) @ _rot_x(-pitch)
        wall = rng.uniform(0.45, 0.9, size=3)
        floor = rng.uniform(0.2, 0.7, size=3)
        far, top = 50.0, -50.0
        a, b, h, d = self.left, self.right, self.h, self.depth
        self.faces = [
            _Face(np.array([0, 1.0, 0]), h, np.array([[-a, h, -far], [b, h, -far], [b, h, d], [-a, h, d]]), "floor", -1, floor),
            _Face(np.array([0, 0, 1.0]), d, np.array([[-a, top, d], [b, top, d], [b, h, d], [-a, h, d]]), "wall", -1, wall),
            _Face(np.array([-1.0, 0, 0]), a, np.array([[-a, top, -far], [-a, top, d], [-a, h, d], [-a, h, -far]]), "wall", -1, wall),
            _Face(np.array([1.0, 0, 0]), b, np.array([[b, top, -far], [b, top, d], [b, h, d], [b, h, -far]]), "wall", -1, wall),
        ]
        self.boxes = []
        n_boxes = rng.integers(0, cfg.max_boxes + 1)
        for _ in range(60):
            if len(self.boxes) >= n_boxes:
                break
            sx, sz = rng.uniform(0.5, 1.3, size=2)
            sy = rng.uniform(0.35, min(1.0, h - 0.45))
            x0 = rng.uniform(-a, b - sx)
            z0 = rng.uniform(1.6, d - sz)
            lo = np.array([x0, h - sy, z0])
            hi = np.array([x0 + sx, h, z0 + sz])
            if any(np.all(lo[[0, 2]] < bh[[0, 2]] + 0.1) and np.all(blo[[0, 2]] < hi[[0, 2]] + 0.1)
                   for blo, bh in self.boxes):
                continue
            self.boxes.append((lo, hi))
        for bi, (lo, hi) in enumerate(self.boxes):
            albedo = rng.uniform(0.1, 0.95, size=3)
            for axis in range(3):
                for side, val in ((-1.0, lo[axis]), (1.0, hi[axis])):
                    m = np.zeros(3)
                    m[axis] = side
                    # outward normal m; visible only if the camera is on the outer side
                    if side * (0.0 - val) <= 0:
                        continue
                    corners = _box_face_corners(lo, hi, axis, val)
                    normal, offset = -m, -side * val  # orient so the offset is positive
                    if offset < 0:
                        normal, offset = -normal, -offset
                    self.faces.append(_Face(normal, offset, corners, "box", bi, albedo))

    def plane_params(self):
        return [PlaneParam(tuple(self.R.T @ f.normal / f.offset)) for f in self.faces]

    def cast(self, rays_cam):
        """Ray-cast z-normalized camera rays; returns (t, face index) per ray."""
        dirs = rays_cam @ self.R.T
        n_rays = dirs.shape[0]
        best_t = np.full(n_rays, np.inf)
        best_f = np.full(n_rays, -1, dtype=np.int64)
        with np.errstate(divide="ignore", invalid="ignore"):
            for fi, f in enumerate(self.faces):
                if f.owner >= 0:
                    continue
                den = dirs @ f.normal
                t = np.where(den > 1e-12, f.offset / den, np.inf)
                upd = t < best_t
                best_t[upd], best_f[upd] = t[upd], fi
            for bi, (lo, hi) in enumerate(self.boxes):
                t1 = (lo - 0.0) / dirs
                t2 = (hi - 0.0) / dirs
                tmin = np.minimum(t1, t2)
                tmax = np.maximum(t1, t2)
                tmin = np.where(np.isnan(tmin), -np.inf, tmin)
                tmax = np.where(np.isnan(tmax), np.inf, tmax)
                t_near = tmin.max(axis=1)
                t_far = tmax.min(axis=1)
                hit = (t_near <= t_far) & (t_near > 0) & (t_near < best_t)
                if not hit.any():
                    continue
                axis = tmin.argmax(axis=1)
                face_ids = self._box_face_lookup(bi)
                for ax in range(3):
                    sel = hit & (axis == ax)
                    if sel.any():
                        side = np.where(dirs[sel, ax] > 0, -1.0, 1.0)
                        best_t[sel] = t_near[sel]
                        best_f[sel] = np.where(side < 0, face_ids.get((ax, -1.0), -1), face_ids.get((ax, 1.0), -1))
        return best_t, best_f

    def _box_face_lookup(self, bi):
        lo, hi = self.boxes[bi]
        out = {}
        for fi, f in enumerate(self.faces):
            if f.owner != bi:
                continue
            ax = int(np.argmax(np.abs(f.normal)))
            val = f.corners[0, ax]
            out[(ax, -1.0 if np.isclose(val, lo[ax]) else 1.0)] = fi
        return out

    def face_polygon(self, fi) -> Polygon | None:
        f = self.faces[fi]
        cam = f.corners @ self.R  # room -> camera (R orthonormal)
        clipped = _clip_near(cam)
        if len(clipped) < 3:
            return None
        poly = Polygon(_project(clipped, self.K))
        if not poly.is_valid:
            poly = poly.buffer(0)
        return poly if not poly.is_empty else None


def _box_face_corners(lo, hi, axis, val):
    others = [i for i in range(3) if i != axis]
    pts = []
    for a, b in ((0, 0), (1, 0), (1, 1), (0, 1)):
        p = np.zeros(3)
        p[axis] = val
        p[others[0]] = (lo, hi)[a][others[0]]
        p[others[1]] = (lo, hi)[b][others[1]]
        pts.append(p)
    return np.array(pts)


# ---------------------------------------------------------------- line extraction


def _straight_pieces(line: LineString, angle_tol=1e-3):
    coords = np.asarray(line.coords)
    if len(coords) < 2:
        return []
    pieces, start = [], 0
    for i in range(1, len(coords) - 1):
        d0 = coords[i] - coords[i - 1]
        d1 = coords[i + 1] - coords[i]
        cross = d0[0] * d1[1] - d0[1] * d1[0]
        if abs(cross) > angle_tol * np.linalg.norm(d0) * np.linalg.norm(d1) or d0 @ d1 < 0:
            pieces.append((coords[start], coords[i]))
            start = i
    pieces.append((coords[start], coords[-1]))
    return pieces


def boundary_segments(regions, width, height, min_length):
    """Straight boundary edges of a set of image-space region polygons."""
    boundaries = [r.boundary for r in regions if r is not None and not r.is_empty]
    if not boundaries:
        return []
    lines = unary_union(boundaries)
    merged = linemerge(lines) if not isinstance(lines, LineString) else lines
    parts = merged.geoms if isinstance(merged, MultiLineString) else [merged]
    out = []
    for part in parts:
        for p, q in _straight_pieces(part):
            if np.hypot(*(q - p)) >= min_length:
                p = np.clip(p, 0, [width - 1, height - 1])
                q = np.clip(q, 0, [width - 1, height - 1])
                out.append(LineSegment(tuple(p), tuple(q)))
    out.sort(key=lambda s: (round(s.x1[1], 6), round(s.x1[0], 6), round(s.x2[1], 6), round(s.x2[0], 6)))
    return out


def jitter_segments(segments, sigma, width, height, rng):
    if sigma <= 0:
        return list(segments)
    out = []
    hi = np.array([width - 1, height - 1], dtype=np.float64)
    for s in segments:
        a = np.clip(np.array(s.x1) + rng.normal(0, sigma, 2), 0, hi)
        b = np.clip(np.array(s.x2) + rng.normal(0, sigma, 2), 0, hi)
        if np.allclose(a, b):
            continue
        out.append(LineSegment(tuple(a), tuple(b)))
    return out


# ---------------------------------------------------------------- generation


# direction toward the light in room coordinates (y points down): above and behind the camera,
# so the floor, the far wall and one side wall all receive direct light
LIGHT = np.array([-0.4, -0.8, -0.45]) / np.linalg.norm([-0.4, -0.8, -0.45])


def _shade(normal_cam, albedo, light):
    """Lambertian shading; ``normal_cam`` points away from the camera, so the lit side faces ``-normal_cam``."""
    lam = max(0.0, float(-normal_cam @ light))
    return albedo * (0.35 + 0.65 * lam)


def _frontal_scene(cfg: SceneConfig, rng, K) -> PlanarScene:
    plane = PlaneParam((0.0, 0.0, 1.0 / cfg.frontal_depth))
    depth = plane_depth_map(plane, K)
    mask = np.ones((cfg.height, cfg.width), dtype=np.int32)
    albedo = rng.uniform(0.2, 0.9, size=3)
    image = np.broadcast_to(albedo, (cfg.height, cfg.width, 3)).astype(np.float64)
    image = image + rng.normal(0, cfg.image_noise, image.shape)
    rect = shapely_box(0, 0, cfg.width - 1, cfg.height - 1)
    segs = boundary_segments([rect], cfg.width, cfg.height, cfg.min_line_length)
    segs = jitter_segments(segs, cfg.line_noise, cfg.width, cfg.height, rng)
    return PlanarScene(np.clip(image, 0, 1).astype(np.float32), depth, mask, [plane],
                       [plane_center(mask == 1, cfg.width, cfg.height)], segs, K)


def _room_scene(cfg: SceneConfig, rng, K, seed) -> PlanarScene:
    W, H = cfg.width, cfg.height
    room = _Room(rng, cfg, K)
    planes = room.plane_params()
    if any(p.offset < MIN_PLANE_OFFSET for p in planes):
        raise _Retry("plane closer than the minimum offset")

    rays = K.rays().reshape(-1, 3)
    t, face = room.cast(rays)
    if (face < 0).any() or not np.isfinite(t).all():
        raise _Retry("rays escaped the room")
    face = face.reshape(H, W)

    # non-planar bump: an elliptical bulge toward the camera, labelled non-plane
    bump = np.zeros((H, W), dtype=bool)
    bump_profile = None
    bump_poly = None
    if cfg.nonplane_fraction > 0:
        wall_ids = [i for i, f in enumerate(room.faces) if f.kind == "wall"]
        counts = {i: int((face == i).sum()) for i in wall_ids}
        host = max(counts, key=counts.get)
        vs, us = np.nonzero(face == host)
        area = cfg.nonplane_fraction * W * H
        ry = np.sqrt(area / np.pi / 1.5) * rng.uniform(0.8, 1.2)
        rx = area / (np.pi * ry)
        pick = rng.integers(len(us))
        cu = float(np.clip(us[pick], rx, W - 1 - rx))
        cv = float(np.clip(vs[pick], ry, H - 1 - ry))
        uu, vv = np.meshgrid(np.arange(W), np.arange(H))
        rho2 = ((uu - cu) / rx) ** 2 + ((vv - cv) / ry) ** 2
        bump = rho2 < 1.0
        bump_profile = np.where(bump, 1.0 - rho2, 0.0)
        ang = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        bump_poly = Polygon(np.stack([cu + rx * np.cos(ang), cv + ry * np.sin(ang)], axis=1))

    # keep the largest planes that are big enough
    min_area = cfg.min_plane_area * W * H
    areas = [(int(((face == i) & ~bump).sum()), i) for i in range(len(room.faces))]
    kept = [i for a, i in sorted(areas, reverse=True) if a >= min_area][: cfg.max_planes]
    if len(kept) < 2:
        raise _Retry("fewer than two visible planes")

    mask = np.zeros((H, W), dtype=np.int32)
    depth = np.empty((H, W), dtype=np.float64)
    for fi in range(len(room.faces)):
        sel = face == fi
        if sel.any():
            depth[sel] = plane_depth_map(planes[fi], K)[sel]
    for new_id, fi in enumerate(kept, start=1):
        mask[(face == fi) & ~bump] = new_id
    if bump_profile is not None:
        depth = np.where(bump, depth * (1.0 - 0.12 * bump_profile), depth)
    if not (np.isfinite(depth).all() and (depth > 0).all()):
        raise _Retry("non-finite depth")

    # appearance
    light_cam = room.R.T @ LIGHT
    image = np.zeros((H, W, 3))
    for fi, f in enumerate(room.faces):
        sel = face == fi
        if sel.any():
            image[sel] = _shade(room.R.T @ f.normal, f.albedo, light_cam)
    if cfg.texture:
        pts = K.rays() * depth[..., None] @ room.R.T
        image *= (1.0 + 0.08 * np.sin(6.0 * pts[..., :1]) * np.sin(6.0 * pts[..., 2:3]))
    if bump_profile is not None:
        image[bump] *= (0.75 + 0.5 * bump_profile[bump])[:, None]
    image = image + rng.normal(0, cfg.image_noise, image.shape)
    image = np.clip(image, 0, 1).astype(np.float32)

    # visible region polygons for kept planes, then their straight boundary edges
    rect = shapely_box(0, 0, W - 1, H - 1)
    silhouettes = {}
    for fi, f in enumerate(room.faces):
        if f.owner >= 0:
            poly = room.face_polygon(fi)
            if poly is not None:
                silhouettes.setdefault(f.owner, []).append(poly)
    silhouettes = {b: unary_union(p) for b, p in silhouettes.items()}
    regions = []
    for fi in kept:
        f = room.faces[fi]
        poly = room.face_polygon(fi)
        if poly is None:
            continue
        poly = poly.intersection(rect)
        for b, sil in silhouettes.items():
            if b == f.owner or not poly.intersects(sil):
                continue
            if f.owner < 0 or _in_front(room, b, f.owner, silhouettes):
                poly = poly.difference(sil)
        if bump_poly is not None:
            poly = poly.difference(bump_poly)
        regions.append(poly)
    segs = boundary_segments(regions, W, H, cfg.min_line_length)
    segs = jitter_segments(segs, cfg.line_noise, W, H, rng)

    kept_planes = [planes[fi] for fi in kept]
    centers = [plane_center(mask == i, W, H) for i in range(1, len(kept) + 1)]
    return PlanarScene(image, depth, mask, kept_planes, centers, segs, K)


def _in_front(room, a, b, silhouettes):
    """True if box ``a`` occludes box ``b`` where their silhouettes overlap."""
    overlap = silhouettes[a].intersection(silhouettes[b])
    if overlap.is_empty or overlap.area < 1e-9:
        return False
    p = overlap.representative_point()
    ray = np.array([[(p.x - room.K.cx) / room.K.fx, (p.y - room.K.cy) / room.K.fy, 1.0]])
    dirs = ray @ room.R.T

    def entry(lo, hi):
        with np.errstate(divide="ignore", invalid="ignore"):
            t1, t2 = lo / dirs[0], hi / dirs[0]
        return np.nanmax(np.minimum(t1, t2))

    return entry(*room.boxes[a]) < entry(*room.boxes[b])


class _Retry(Exception):
    pass


def _rng_for(seed):
    if isinstance(seed, (tuple, list)):
        return np.random.default_rng([int(s) for s in seed])
    return np.random.default_rng(int(seed))


def generate_scene(seed, config: SceneConfig | None = None) -> PlanarScene:
    """Deterministically generate one scene from ``seed`` (int or tuple of ints)."""
    cfg = config or SceneConfig()
    K = CameraIntrinsics.default(cfg.width, cfg.height)
    rng = _rng_for(seed)
    if cfg.layout == "frontal":
        return _frontal_scene(cfg, rng, K)
    if cfg.layout != "room":
        raise ValueError(f"unknown layout {cfg.layout!r}")
    reasons = []
    for _ in range(cfg.max_retries):
        try:
            return _room_scene(cfg, rng, K, seed)
        except _Retry as exc:
            reasons.append(str(exc))
    raise SceneGenerationError(seed, "; ".join(sorted(set(reasons))))


# ---------------------------------------------------------------- validation


def validate_scene(scene: PlanarScene, k_queries: int = 20, depth_tol: float = 1e-5):
    """Re-check every PlanarScene invariant; raises SceneValidationError."""
    H, W = scene.mask.shape
    K = scene.K_cam
    name = scene.name or None
    if scene.image.shape != (H, W, 3) or scene.depth.shape != (H, W):
        raise SceneValidationError("shapes", f"image {scene.image.shape}, depth {scene.depth.shape}, mask {(H, W)}", name)
    if (K.width, K.height) != (W, H):
        raise SceneValidationError("intrinsics-size", f"{K.width}x{K.height} vs {W}x{H}", name)
    if not (np.all(scene.image >= 0) and np.all(scene.image <= 1)):
        raise SceneValidationError("image-range", "image values outside [0, 1]", name)
    M = len(scene.planes)
    if M > k_queries:
        raise SceneValidationError("plane-count", f"{M} planes > K={k_queries}", name)
    if scene.mask.min() < 0 or scene.mask.max() > M:
        raise SceneValidationError("mask-range", f"mask values outside 0..{M}", name)
    if len(scene.centers) != M:
        raise SceneValidationError("centers-count", f"{len(scene.centers)} centers for {M} planes", name)
    for i, plane in enumerate(scene.planes, start=1):
        sel = scene.mask == i
        if not sel.any():
            continue
        ref = plane_depth_map(plane, K)[sel]
        err = np.abs(scene.depth[sel] - ref)
        if not np.all(err <= depth_tol):
            raise SceneValidationError("planar-depth", f"plane {i} depth residual {np.nanmax(err):.3g} m", name)
        c = plane_center(sel, W, H)
        if not np.allclose(c, scene.centers[i - 1], atol=1e-9):
            raise SceneValidationError("plane-center", f"plane {i} center {scene.centers[i - 1]} != {c}", name)
    for s in scene.line_segments:
        if not s.inside(W, H):
            raise SceneValidationError("segment-bounds", f"segment {s} leaves the image", name)
    return scene


# ---------------------------------------------------------------- on-disk format


def _meta(scene: PlanarScene) -> dict:
    return {
        "planes": [list(p.n) for p in scene.planes],
        "centers": [list(c) for c in scene.centers],
        "line_segments": [list(s.as_array()) for s in scene.line_segments],
        "intrinsics": scene.K_cam.to_dict(),
    }


_DTYPES = {"image": "<f4", "depth": "<f8", "mask": "<i4"}


def save_scene(scene: PlanarScene, path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        for key, dt in _DTYPES.items():
            np.save(path / f"{key}.npy", np.ascontiguousarray(getattr(scene, key), dtype=dt))
        with open(path / "meta.json", "w") as fh:
            json.dump(_meta(scene), fh, indent=1)
    except OSError as exc:
        raise OSError(f"cannot write scene to {path}: {exc}") from exc
    return path


def load_scene(path, k_queries: int = 20) -> PlanarScene:
    path = Path(path)
    name = path.name
    try:
        arrays = {key: np.load(path / f"{key}.npy", allow_pickle=False) for key in _DTYPES}
        with open(path / "meta.json") as fh:
            meta = json.load(fh)
        planes = [PlaneParam(tuple(p)) for p in meta["planes"]]
        centers = [tuple(float(x) for x in c) for c in meta["centers"]]
        segs = [LineSegment(tuple(s[:2]), tuple(s[2:])) for s in meta["line_segments"]]
        K = CameraIntrinsics.from_dict(meta["intrinsics"])
    except (OSError, ValueError, KeyError, TypeError, IndexError) as exc:
        raise SceneValidationError("readable", f"{type(exc).__name__}: {exc}", name) from exc
    scene = PlanarScene(
        arrays["image"].astype(np.float32),
        arrays["depth"].astype(np.float64),
        arrays["mask"].astype(np.int32),
        planes, centers, segs, K, name=name,
    )
    return validate_scene(scene, k_queries)


def scene_seed(seed: int, index: int) -> tuple:
    return (int(seed), int(index))


def write_dataset(manifest: DatasetManifest) -> Path:
    """Generate ``manifest.count`` scenes under ``<root>/<split>/`` and record the manifest."""
    root = Path(manifest.root)
    cfg = manifest.scene_config()
    split_dir = root / manifest.split
    try:
        split_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {split_dir}: {exc}") from exc
    names = []
    for idx in range(manifest.count):
        scene = generate_scene(scene_seed(manifest.seed, idx), cfg)
        name = f"{idx:05d}"
        save_scene(scene, split_dir / name)
        names.append(name)
    mpath = root / "manifest.json"
    data = {"splits": {}}
    if mpath.exists():
        with open(mpath) as fh:
            data = json.load(fh)
    data["splits"][manifest.split] = {**asdict(manifest), "root": str(root), "scenes": names,
                                      "scene_config": asdict(cfg)}
    tmp = mpath.with_suffix(".tmp")
    with open(tmp, "w") as fh:
        json.dump(data, fh, indent=1)
    os.replace(tmp, mpath)
    return split_dir


def read_manifest(root) -> dict:
    with open(Path(root) / "manifest.json") as fh:
        return json.load(fh)


def list_scenes(root, split) -> list:
    root = Path(root)
    mpath = root / "manifest.json"
    if mpath.exists():
        names = read_manifest(root)["splits"].get(split, {}).get("scenes")
        if names is not None:
            return [root / split / n for n in names]
    return sorted(p for p in (root / split).iterdir() if (p / "meta.json").exists())


def load_split(root, split, k_queries: int = 20) -> list:
    return [load_scene(p, k_queries) for p in list_scenes(root, split)]


def with_config(cfg: SceneConfig, **overrides) -> SceneConfig:
    return replace(cfg, **overrides)
