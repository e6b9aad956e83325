"""Core value types shared by every pipeline stage.

Conventions
-----------
* Site frame: x points east, y points north, units are meters.
* Orientation angles are degrees clockwise from north, so north is 0, east
  is 90. Internally orientations are unit vectors ``(sin a, cos a)``.
* Timestamps are integer frame indices at 1 Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

COCO_KEYPOINTS = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)
NUM_KEYPOINTS = 17
NOSE = 0
LEFT_EYE, RIGHT_EYE = 1, 2
LEFT_EAR, RIGHT_EAR = 3, 4
LEFT_ANKLE, RIGHT_ANKLE = 15, 16

# (left, right) index pairs; swapping these mirrors a pose.
LR_PAIRS = ((1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12), (13, 14), (15, 16))
FLIP_PERMUTATION = np.arange(NUM_KEYPOINTS)
for _l, _r in LR_PAIRS:
    FLIP_PERMUTATION[_l], FLIP_PERMUTATION[_r] = _r, _l
del _l, _r


def deg_to_vec(deg: float) -> tuple[float, float]:
    """Compass degrees (clockwise from north) to a site-frame unit vector."""
    a = math.radians(deg)
    return (math.sin(a), math.cos(a))


def vec_to_deg(v: Sequence[float]) -> float:
    """Inverse of :func:`deg_to_vec`; result in [0, 360)."""
    d = math.degrees(math.atan2(v[0], v[1])) % 360.0
    # -0.0 % 360 and tiny negatives can round to 360.0
    return 0.0 if d >= 360.0 else d


def normalize(v: Sequence[float]) -> tuple[float, float]:
    n = math.hypot(v[0], v[1])
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return (v[0] / n, v[1] / n)


@dataclass(frozen=True)
class Keypoint:
    u: float
    v: float
    confidence: float = 1.0
    visible: bool = True


@dataclass(frozen=True)
class Pose2D:
    """17 keypoints in COCO order (see ``COCO_KEYPOINTS``).

    Construction does not enforce the length so that malformed inputs can be
    represented and rejected by :func:`validate_pose`.
    """

    keypoints: tuple[Keypoint, ...]

    @classmethod
    def from_arrays(cls, xy, confidence=None, visible=None) -> "Pose2D":
        xy = np.asarray(xy, dtype=float)
        n = len(xy)
        conf = np.ones(n) if confidence is None else np.asarray(confidence, dtype=float)
        vis = np.ones(n, dtype=bool) if visible is None else np.asarray(visible, dtype=bool)
        return cls(
            tuple(
                Keypoint(float(xy[i, 0]), float(xy[i, 1]), float(conf[i]), bool(vis[i]))
                for i in range(n)
            )
        )

    def xy(self) -> np.ndarray:
        return np.array([[k.u, k.v] for k in self.keypoints], dtype=float).reshape(-1, 2)

    def confidence(self) -> np.ndarray:
        return np.array([k.confidence for k in self.keypoints], dtype=float)

    def visible(self) -> np.ndarray:
        return np.array([k.visible for k in self.keypoints], dtype=bool)

    def flipped(self) -> "Pose2D":
        """Left/right mirrored copy."""
        return Pose2D(tuple(self.keypoints[i] for i in FLIP_PERMUTATION))


def validate_pose(pose: Pose2D) -> bool:
    if len(pose.keypoints) != NUM_KEYPOINTS:
        return False
    return all(0.0 <= k.confidence <= 1.0 for k in pose.keypoints)


def tight_bbox(pose: Pose2D, inflate: float = 0.0) -> tuple[float, float, float]:
    """Smallest square (u_min, v_min, side) containing all visible keypoints.

    ``inflate`` grows the side by that fraction around the square's centre.
    """
    pts = [(k.u, k.v) for k in pose.keypoints if k.visible]
    if not pts:
        return (0.0, 0.0, 0.0)
    us = [p[0] for p in pts]
    vs = [p[1] for p in pts]
    side = max(max(us) - min(us), max(vs) - min(vs)) * (1.0 + inflate)
    cu = 0.5 * (max(us) + min(us))
    cv = 0.5 * (max(vs) + min(vs))
    return (cu - side / 2, cv - side / 2, side)


@dataclass(frozen=True)
class PoseDetection:
    camera_id: str
    t: int
    pose: Pose2D
    bbox: tuple[float, float, float]
    # chest facing relative to the camera's viewing direction, degrees;
    # 0 = facing away from the camera, 180 = facing it
    orientation_cam: Optional[float] = None
    track_id: Optional[int] = None

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"negative timestamp {self.t}")


@dataclass(frozen=True)
class WorldObservation:
    t: int
    location: tuple[float, float]
    orientation: Optional[tuple[float, float]] = None
    source_cameras: frozenset = frozenset()
    weight_mass: float = 1.0

    def __post_init__(self):
        if self.orientation is not None:
            object.__setattr__(self, "orientation", normalize(self.orientation))


@dataclass(frozen=True, eq=False)
class TrackState:
    t: int
    L: tuple[float, float]
    L_dot: tuple[float, float]
    O: tuple[float, float]
    O_dot: tuple[float, float] = (0.0, 0.0)
    covariance: np.ndarray = field(default_factory=lambda: np.zeros((4, 4)))
    observed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "O", normalize(self.O))
        cov = np.array(self.covariance, dtype=float)
        cov = 0.5 * (cov + cov.T)
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)

    def __eq__(self, other):
        if not isinstance(other, TrackState):
            return NotImplemented
        return (
            self.t == other.t
            and self.L == other.L
            and self.L_dot == other.L_dot
            and self.O == other.O
            and self.O_dot == other.O_dot
            and self.observed == other.observed
            and np.array_equal(self.covariance, other.covariance)
        )

    @property
    def orientation_deg(self) -> float:
        return vec_to_deg(self.O)


@dataclass(frozen=True)
class Track:
    track_id: int
    states: tuple[TrackState, ...]
    status: str = "finished"  # active | coasting | finished

    def __post_init__(self):
        ts = [s.t for s in self.states]
        if any(b - a != 1 for a, b in zip(ts, ts[1:])):
            raise ValueError(f"track {self.track_id}: timestamps must advance by 1")

    @property
    def start(self) -> int:
        return self.states[0].t

    @property
    def end(self) -> int:
        return self.states[-1].t


@dataclass(frozen=True)
class GroundTruthRecord:
    t: int
    person_id: str
    location: tuple[float, float]
    orientation_deg: float
    area_id: Optional[str] = None

    def __post_init__(self):
        if not 0.0 <= self.orientation_deg < 360.0:
            raise ValueError(f"orientation_deg {self.orientation_deg} outside [0, 360)")
