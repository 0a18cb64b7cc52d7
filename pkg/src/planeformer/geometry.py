"""Camera and plane math.

Conventions used everywhere in the package:

* camera frame: x right, y down, z forward; pixel ``(u, v)`` samples the ray
  ``((u - cx) / fx, (v - cy) / fy, 1)`` with no half-pixel offset;
* a plane is stored as the scaled normal ``n = unit_normal / distance`` so that
  every point ``q`` on it satisfies ``n @ q == 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RAY_EPS = 1e-6
INVALID_DEPTH = np.nan  # sentinel; callers test with np.isfinite


class GeometryError(ValueError):
    """Invalid geometric input (non-positive depth, degenerate fit, empty mask)."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError("principal point must lie inside the image")

    @classmethod
    def default(cls, width: int, height: int) -> "CameraIntrinsics":
        f = 0.8 * width
        return cls(f, f, width / 2.0, height / 2.0, width, height)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("fx", "fy", "cx", "cy", "width", "height")}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d["width"]), int(d["height"]))

    def rays(self) -> np.ndarray:
        """H x W x 3 array of z-normalized rays for every pixel."""
        u, v = np.meshgrid(np.arange(self.width, dtype=np.float64),
                           np.arange(self.height, dtype=np.float64))
        return np.stack([(u - self.cx) / self.fx, (v - self.cy) / self.fy, np.ones_like(u)], axis=-1)


@dataclass(frozen=True)
class PlaneParam:
    n: tuple

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(float(x) for x in self.n))
        if len(self.n) != 3:
            raise GeometryError("plane parameter must be a 3-vector")

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.n, dtype=np.float64)

    @property
    def offset(self) -> float:
        """Distance from the camera center to the plane (meters)."""
        return 1.0 / float(np.linalg.norm(self.vector))

    @property
    def normal(self) -> np.ndarray:
        v = self.vector
        return v / np.linalg.norm(v)

    @classmethod
    def from_normal_offset(cls, normal, offset: float) -> "PlaneParam":
        normal = np.asarray(normal, dtype=np.float64)
        if offset <= 0:
            raise GeometryError("plane offset must be positive")
        return cls(tuple(normal / np.linalg.norm(normal) / offset))


@dataclass(frozen=True)
class LineSegment:
    x1: tuple
    x2: tuple

    def __post_init__(self):
        object.__setattr__(self, "x1", (float(self.x1[0]), float(self.x1[1])))
        object.__setattr__(self, "x2", (float(self.x2[0]), float(self.x2[1])))
        if self.x1 == self.x2:
            raise GeometryError("line segment endpoints coincide")

    @property
    def length(self) -> float:
        return float(np.hypot(self.x2[0] - self.x1[0], self.x2[1] - self.x1[1]))

    def as_array(self) -> np.ndarray:
        return np.array([*self.x1, *self.x2], dtype=np.float64)

    def inside(self, width: int, height: int) -> bool:
        return all(0 <= x < width and 0 <= y < height for x, y in (self.x1, self.x2))


def _pixel_ray(pixel, K: CameraIntrinsics) -> np.ndarray:
    u, v = float(pixel[0]), float(pixel[1])
    return np.array([(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0])


def backproject(pixel, depth: float, K: CameraIntrinsics) -> np.ndarray:
    """3D point seen at ``pixel`` with z-depth ``depth``."""
    if not depth > 0:
        raise GeometryError(f"depth must be positive, got {depth}")
    u, v = float(pixel[0]), float(pixel[1])
    if not (0 <= u < K.width and 0 <= v < K.height):
        raise GeometryError(f"pixel {pixel} outside a {K.width}x{K.height} image")
    return depth * _pixel_ray(pixel, K)


def backproject_map(depth: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    """Vectorized backprojection of a whole H x W depth map to H x W x 3 points."""
    return K.rays() * depth[..., None]


def depth_from_plane(pixel, plane: PlaneParam, K: CameraIntrinsics) -> float:
    """Z-depth where the ray through ``pixel`` meets ``plane``.

    Returns ``INVALID_DEPTH`` when the ray is (nearly) parallel to the plane.
    """
    denom = float(plane.vector @ _pixel_ray(pixel, K))
    if abs(denom) <= RAY_EPS:
        return INVALID_DEPTH
    return 1.0 / denom


def plane_depth_map(plane, K: CameraIntrinsics) -> np.ndarray:
    """Depth of ``plane`` for every pixel; invalid rays hold ``INVALID_DEPTH``."""
    n = plane.vector if isinstance(plane, PlaneParam) else np.asarray(plane, dtype=np.float64)
    denom = K.rays() @ n
    out = np.full(denom.shape, INVALID_DEPTH)
    ok = np.abs(denom) > RAY_EPS
    out[ok] = 1.0 / denom[ok]
    return out


def fit_plane(points) -> PlaneParam:
    """Least-squares plane through ``points`` minimizing sum (n @ q - 1)^2."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 3:
        raise GeometryError("need at least 3 points to fit a plane")
    # column scaling keeps the conditioning sane for far-away points
    scale = np.abs(pts).max(axis=0)
    scale[scale == 0] = 1.0
    a = pts / scale
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise GeometryError("degenerate point set (collinear, or plane through the camera center)")
    sol, *_ = np.linalg.lstsq(a, np.ones(len(pts)), rcond=None)
    return PlaneParam(tuple(sol / scale))


def plane_center(mask: np.ndarray, width: int, height: int) -> tuple:
    """Normalized mean pixel coordinate of a binary mask."""
    vs, us = np.nonzero(np.asarray(mask))
    if len(us) == 0:
        raise GeometryError("plane center of an empty mask")
    return (float(us.mean()) / width, float(vs.mean()) / height)


def plane_angle_deg(n1, n2) -> float:
    """Angle between the unit normals of two plane parameters (degrees)."""
    a = np.asarray(n1, dtype=np.float64)
    b = np.asarray(n2, dtype=np.float64)
    c = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
