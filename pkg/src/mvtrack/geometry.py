"""Ground-plane homographies, camera-to-site rotation and installation factors."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateConfiguration, HorizonPoint, NoFeetVisible
from .model import LEFT_ANKLE, RIGHT_ANKLE, Pose2D

_COLLINEAR_TOL = 1e-9
_HORIZON_TOL = 1e-12
_MAX_COND = 1e12


@dataclass(frozen=True, eq=False)
class Homography:
    """Projective map between two planes, stored with ``m[2, 2] == 1``."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float).reshape(3, 3)
        if m[2, 2] == 0.0:
            raise DegenerateConfiguration("homography has m33 == 0 and cannot be normalized")
        m = m / m[2, 2]
        # condition number is the same for a map and its inverse, so any
        # accepted homography can also be inverted
        if not np.all(np.isfinite(m)) or np.linalg.cond(m) > _MAX_COND:
            raise DegenerateConfiguration("homography is singular")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def __eq__(self, other):
        return isinstance(other, Homography) and np.array_equal(self.m, other.m)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))


def _check_not_collinear(points: np.ndarray, label: str) -> None:
    scale = max(float(np.ptp(points, axis=0).max()), 1e-300)
    for a, b, c in itertools.combinations(range(len(points)), 3):
        ab = (points[b] - points[a]) / scale
        ac = (points[c] - points[a]) / scale
        if abs(ab[0] * ac[1] - ab[1] * ac[0]) <= _COLLINEAR_TOL:
            raise DegenerateConfiguration(f"{label} points {a}, {b}, {c} are collinear")


def fit_homography(pixel_points, world_points) -> Homography:
    """Exact homography through four pixel -> world correspondences.

    Solves the 8x8 linear system with ``m33`` pinned to 1.
    """
    src = np.asarray(pixel_points, dtype=float).reshape(-1, 2)
    dst = np.asarray(world_points, dtype=float).reshape(-1, 2)
    if src.shape != (4, 2) or dst.shape != (4, 2):
        raise DegenerateConfiguration("exactly four point correspondences are required")
    _check_not_collinear(src, "pixel")
    _check_not_collinear(dst, "world")

    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((u, v), (x, y)) in enumerate(zip(src, dst)):
        a[2 * i] = [u, v, 1, 0, 0, 0, -u * x, -v * x]
        a[2 * i + 1] = [0, 0, 0, u, v, 1, -u * y, -v * y]
        b[2 * i] = x
        b[2 * i + 1] = y
    try:
        sol = np.linalg.solve(a, b)  # LU with partial pivoting
    except np.linalg.LinAlgError as exc:
        raise DegenerateConfiguration(f"calibration system is singular: {exc}") from exc
    return Homography(np.append(sol, 1.0).reshape(3, 3))


def apply_homography(h: Homography, p: Sequence[float]) -> tuple[float, float]:
    m = h.m
    u, v = float(p[0]), float(p[1])
    w = m[2, 0] * u + m[2, 1] * v + m[2, 2]
    if abs(w) <= _HORIZON_TOL:
        raise HorizonPoint(f"pixel ({u}, {v}) maps to infinity")
    x = m[0, 0] * u + m[0, 1] * v + m[0, 2]
    y = m[1, 0] * u + m[1, 1] * v + m[1, 2]
    return (x / w, y / w)


def foot_point(pose: Pose2D) -> tuple[float, float]:
    """Midpoint of the visible ankles; a single visible ankle is used as-is."""
    ankles = [pose.keypoints[i] for i in (LEFT_ANKLE, RIGHT_ANKLE) if pose.keypoints[i].visible]
    if not ankles:
        raise NoFeetVisible("neither ankle is visible")
    if len(ankles) == 1:
        return (ankles[0].u, ankles[0].v)
    return (0.5 * (ankles[0].u + ankles[1].u), 0.5 * (ankles[0].v + ankles[1].v))


@dataclass(frozen=True)
class CameraModel:
    camera_id: str
    position: tuple[float, float]
    mount_height: float
    yaw_deg: float
    hfov_deg: float
    vfov_deg: float
    homography: Homography
    image_size: tuple[int, int]
    max_range: float

    def __post_init__(self):
        for name in ("hfov_deg", "vfov_deg"):
            val = getattr(self, name)
            if not 0.0 < val < 180.0:
                raise ValueError(f"{name}={val} outside (0, 180)")


def rotate_clockwise(v: Sequence[float], deg: float) -> tuple[float, float]:
    """Rotate a site-frame vector clockwise (compass sense) by ``deg``."""
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return (v[0] * c + v[1] * s, -v[0] * s + v[1] * c)


def rotate_to_world(cam: CameraModel, v_cam: Sequence[float]) -> tuple[float, float]:
    """Camera-frame facing vector to site frame.

    In the camera frame ``(0, 1)`` is the camera's viewing direction and
    ``(1, 0)`` points to image right, so a person facing the camera has
    ``v_cam = (0, -1)``.
    """
    x, y = rotate_clockwise(v_cam, cam.yaw_deg)
    n = math.hypot(x, y)
    return (x / n, y / n)


def image_to_camera_vector(d_uv: Sequence[float]) -> tuple[float, float]:
    """Image-plane direction (u right, v down) to the camera frame.

    Upward in the image is taken as away from the camera along the floor.
    """
    return (float(d_uv[0]), -float(d_uv[1]))


@dataclass(frozen=True)
class GeometryFactors:
    distance: float
    facing_angle_deg: float
    h_norm: float
    v_norm: float


def _angle_between(a: Sequence[float], b: Sequence[float]) -> float:
    na = math.hypot(*a)
    nb = math.hypot(*b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    c = (a[0] * b[0] + a[1] * b[1]) / (na * nb)
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def geometry_factors(cam: CameraModel, world_pos, facing, pixel_foot) -> GeometryFactors:
    dx = cam.position[0] - world_pos[0]
    dy = cam.position[1] - world_pos[1]
    distance = math.hypot(dx, dy)
    facing_angle = _angle_between(facing, (dx, dy))

    w, h = cam.image_size
    half_h = math.radians(cam.hfov_deg) / 2
    half_v = math.radians(cam.vfov_deg) / 2
    fx = (w / 2) / math.tan(half_h)
    fy = (h / 2) / math.tan(half_v)
    theta_h = math.atan(abs(pixel_foot[0] - w / 2) / fx)
    theta_v = math.atan(abs(pixel_foot[1] - h / 2) / fy)
    return GeometryFactors(distance, facing_angle, theta_h / half_h, theta_v / half_v)
