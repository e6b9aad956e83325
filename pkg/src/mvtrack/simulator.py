"""Synthetic scenarios: walking paths, pinhole cameras and detector noise.

Every acceptance check runs against data from this module, because the
simulator knows the truth (identities, dropped frames, flips, ghosts).

Body model (meters, person frame: lateral is to the person's left,
forward is the chest direction, height above the floor):

==============  =======  =======  ======
keypoint        lateral  forward  height
==============  =======  =======  ======
nose             0.00     0.10     1.60
eye (l/r)       +-0.035   0.07     1.65
ear (l/r)       +-0.08    0.00     1.62
shoulder (l/r)  +-0.20    0.00     1.40
elbow (l/r)     +-0.25    0.00     1.10
wrist (l/r)     +-0.27    0.03     0.85
hip (l/r)       +-0.12    0.00     0.95
knee (l/r)      +-0.11    0.02     0.50
ankle (l/r)     +-0.10    0.00     0.08
==============  =======  =======  ======

After projection the two ankles are shifted together so that their pixel
midpoint is exactly the projected floor point.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import WaypointOutsideSite
from .geometry import CameraModel, Homography, apply_homography, foot_point
from .model import (
    LEFT_ANKLE,
    NUM_KEYPOINTS,
    RIGHT_ANKLE,
    GroundTruthRecord,
    Keypoint,
    Pose2D,
    PoseDetection,
    WorldObservation,
    deg_to_vec,
    tight_bbox,
    vec_to_deg,
)

MAX_WALK_SPEED = 1.42  # m/s
_T_EPS = 1e-9

# (lateral, forward, height) for each COCO keypoint
BODY_TEMPLATE = np.array([
    (0.00, 0.10, 1.60),
    (0.035, 0.07, 1.65), (-0.035, 0.07, 1.65),
    (0.08, 0.00, 1.62), (-0.08, 0.00, 1.62),
    (0.20, 0.00, 1.40), (-0.20, 0.00, 1.40),
    (0.25, 0.00, 1.10), (-0.25, 0.00, 1.10),
    (0.27, 0.03, 0.85), (-0.27, 0.03, 0.85),
    (0.12, 0.00, 0.95), (-0.12, 0.00, 0.95),
    (0.11, 0.02, 0.50), (-0.11, 0.02, 0.50),
    (0.10, 0.00, 0.08), (-0.10, 0.00, 0.08),
])
KEYPOINT_CONFIDENCE = 0.9


@dataclass(frozen=True)
class PersonSpec:
    person_id: str
    waypoints: tuple
    speed: float = 1.0
    start_t: int = 0
    # waypoint index -> orientation script (degrees); the person stands at
    # that waypoint for one frame per entry
    holds: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.speed <= MAX_WALK_SPEED + 1e-12:
            raise ValueError(f"speed {self.speed} outside (0, {MAX_WALK_SPEED}]")
        if not self.waypoints:
            raise ValueError("a person needs at least one waypoint")


@dataclass(frozen=True)
class CameraSpec:
    """Pinhole camera looking down at the floor.

    ``yaw_deg`` is the compass heading of the optical axis, ``pitch_deg``
    its depression below the horizon.
    """

    camera_id: str
    position: tuple
    mount_height: float = 3.0
    yaw_deg: float = 0.0
    pitch_deg: float = 30.0
    focal_px: float = 640.0
    image_size: tuple = (1280, 720)
    max_range: float = 30.0

    @property
    def hfov_deg(self) -> float:
        return math.degrees(2 * math.atan(self.image_size[0] / 2 / self.focal_px))

    @property
    def vfov_deg(self) -> float:
        return math.degrees(2 * math.atan(self.image_size[1] / 2 / self.focal_px))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.position[0], self.position[1], self.mount_height], dtype=float)

    @property
    def rotation(self) -> np.ndarray:
        """Rows are the camera's right, down and forward axes in site coordinates."""
        yaw, pitch = math.radians(self.yaw_deg), math.radians(self.pitch_deg)
        fwd = np.array([math.sin(yaw) * math.cos(pitch), math.cos(yaw) * math.cos(pitch), -math.sin(pitch)])
        right = np.array([math.cos(yaw), -math.sin(yaw), 0.0])
        down = np.cross(fwd, right)
        return np.vstack([right, down, fwd])

    @property
    def intrinsics(self) -> np.ndarray:
        w, h = self.image_size
        return np.array([[self.focal_px, 0, w / 2], [0, self.focal_px, h / 2], [0, 0, 1.0]])

    def project(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Site points (N, 3) to pixels (N, 2) and camera depths (N,)."""
        cam = (np.atleast_2d(pts) - self.center) @ self.rotation.T
        depth = cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            uv = (cam @ self.intrinsics.T)[:, :2] / depth[:, None]
        return uv, depth

    def ground_to_pixel(self) -> np.ndarray:
        r = self.rotation
        m = np.column_stack([r[:, 0], r[:, 1], -r @ self.center])
        return self.intrinsics @ m

    def calibration(self) -> CameraModel:
        """Ground-truth pixel -> site model for this camera."""
        return CameraModel(
            camera_id=self.camera_id,
            position=(float(self.position[0]), float(self.position[1])),
            mount_height=float(self.mount_height),
            yaw_deg=float(self.yaw_deg),
            hfov_deg=self.hfov_deg,
            vfov_deg=self.vfov_deg,
            homography=Homography(np.linalg.inv(self.ground_to_pixel())),
            image_size=(int(self.image_size[0]), int(self.image_size[1])),
            max_range=float(self.max_range),
        )

    def calibration_points(self) -> tuple[list, list]:
        """Four pixel/site correspondences in the lower part of the image."""
        w, h = self.image_size
        pix = [(0.2 * w, 0.7 * h), (0.8 * w, 0.7 * h), (0.8 * w, 0.95 * h), (0.2 * w, 0.95 * h)]
        hom = self.calibration().homography
        return pix, [apply_homography(hom, p) for p in pix]

    def in_image(self, uv) -> bool:
        w, h = self.image_size
        return 0.0 <= uv[0] <= w and 0.0 <= uv[1] <= h


@dataclass(frozen=True)
class NoiseSpec:
    keypoint_sigma_px: float = 0.0
    fn_base_prob: float = 0.0
    fn_distance_slope: float = 0.0  # added drop probability per meter
    flip_prob: float = 0.0
    ghost_count: int = 0  # per camera
    orientation_sigma_deg: float = 0.0
    localization_bias: dict = field(default_factory=dict)  # camera_id -> (dx, dy) m
    range_scale_error: float = 0.0  # localized point pushed away from camera by this fraction of range
    location_jitter_m: float = 0.0  # isotropic floor-plane error, independent of distance

    def __post_init__(self):
        for name in ("fn_base_prob", "flip_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")

    @property
    def is_noiseless(self) -> bool:
        return self == NoiseSpec()


@dataclass(frozen=True)
class Scenario:
    site: tuple
    persons: tuple
    cameras: tuple
    noise: NoiseSpec = NoiseSpec()
    duration: int = 60
    seed: int = 0


@dataclass(frozen=True)
class SimDetection:
    detection: PoseDetection
    person_id: Optional[str]
    distance: float


def _inside(site, p) -> bool:
    return -_T_EPS <= p[0] <= site[0] + _T_EPS and -_T_EPS <= p[1] <= site[1] + _T_EPS


def _segments(person: PersonSpec):
    """Timeline of ("hold", t0, t1, point, script) and ("walk", t0, t1, a, b)."""
    segs = []
    t = float(person.start_t)
    pts = [tuple(map(float, p)) for p in person.waypoints]
    for i, p in enumerate(pts):
        script = person.holds.get(i) or person.holds.get(str(i))
        if script:
            segs.append(("hold", t, t + len(script), p, list(script)))
            t += len(script)
        if i + 1 < len(pts):
            q = pts[i + 1]
            length = math.dist(p, q)
            if length > 0:
                dur = length / person.speed
                segs.append(("walk", t, t + dur, p, q))
                t += dur
    return segs


def synthesize_trajectories(s: Scenario) -> list[GroundTruthRecord]:
    """1 Hz ground truth along each person's waypoint path."""
    records = []
    for person in s.persons:
        for p in person.waypoints:
            if not _inside(s.site, p):
                raise WaypointOutsideSite(f"{person.person_id}: waypoint {p} outside site {s.site}")
        segs = _segments(person)
        if not segs:
            # single waypoint, no script: present for one frame facing north
            p = tuple(map(float, person.waypoints[0]))
            if person.start_t < s.duration:
                records.append(GroundTruthRecord(person.start_t, person.person_id, p, 0.0))
            continue
        end = max(seg[2] for seg in segs)
        t = person.start_t
        while t <= end + _T_EPS and t < s.duration:
            rec = _sample(person, segs, t)
            if rec is not None:
                records.append(rec)
            t += 1
    records.sort(key=lambda r: (r.t, r.person_id))
    return records


def _sample(person: PersonSpec, segs, t: int) -> Optional[GroundTruthRecord]:
    for kind, t0, t1, a, b in segs:
        if kind == "hold" and t0 - _T_EPS <= t < t1 - _T_EPS:
            ori = float(b[int(math.floor(t - t0 + _T_EPS))]) % 360.0
            return GroundTruthRecord(t, person.person_id, a, ori)
    for kind, t0, t1, a, b in segs:
        if kind == "walk" and t0 - _T_EPS <= t <= t1 + _T_EPS:
            length = math.dist(a, b)
            s = min(max((t - t0) * person.speed, 0.0), length)
            f = s / length
            loc = (a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]))
            return GroundTruthRecord(t, person.person_id, loc, vec_to_deg((b[0] - a[0], b[1] - a[1])))
    return None


def body_points(location, orientation_deg: float) -> np.ndarray:
    fx, fy = deg_to_vec(orientation_deg)
    lx, ly = -fy, fx
    lat, fwd, hgt = BODY_TEMPLATE[:, 0], BODY_TEMPLATE[:, 1], BODY_TEMPLATE[:, 2]
    x = location[0] + lat * lx + fwd * fx
    y = location[1] + lat * ly + fwd * fy
    return np.column_stack([x, y, hgt])


def project_to_camera(cam: CameraSpec, rec: GroundTruthRecord,
                      displaced: Optional[tuple] = None) -> Optional[PoseDetection]:
    """Noiseless detection of one person, or ``None`` when not visible.

    ``displaced`` optionally moves the floor point the detector reports,
    which models a systematic localization error.
    """
    ground = np.array([rec.location[0], rec.location[1], 0.0])
    if math.dist(rec.location, cam.position) > cam.max_range:
        return None
    uv, depth = cam.project(ground)
    if depth[0] <= 0 or not cam.in_image(uv[0]):
        return None
    loc = rec.location if displaced is None else displaced
    foot_uv, foot_depth = cam.project(np.array([loc[0], loc[1], 0.0]))
    if foot_depth[0] <= 0:
        return None
    foot = foot_uv[0]

    kp_uv, kp_depth = cam.project(body_points(loc, rec.orientation_deg))
    ankles = kp_uv[[LEFT_ANKLE, RIGHT_ANKLE]]
    kp_uv[[LEFT_ANKLE, RIGHT_ANKLE]] = ankles + (foot - ankles.mean(axis=0))
    keypoints = []
    for i in range(NUM_KEYPOINTS):
        if i in (LEFT_ANKLE, RIGHT_ANKLE):
            vis = True
        else:
            vis = bool(kp_depth[i] > 0 and np.all(np.isfinite(kp_uv[i])) and cam.in_image(kp_uv[i]))
        if vis:
            keypoints.append(Keypoint(float(kp_uv[i, 0]), float(kp_uv[i, 1]), KEYPOINT_CONFIDENCE, True))
        else:
            keypoints.append(Keypoint(0.0, 0.0, 0.0, False))
    pose = Pose2D(tuple(keypoints))
    return PoseDetection(
        camera_id=cam.camera_id,
        t=rec.t,
        pose=pose,
        bbox=tight_bbox(pose),
        orientation_cam=(rec.orientation_deg - cam.yaw_deg) % 360.0,
    )


def simulate_clean(s: Scenario, gt: Optional[Sequence[GroundTruthRecord]] = None) -> list[SimDetection]:
    """Project every ground-truth record into every camera."""
    gt = synthesize_trajectories(s) if gt is None else gt
    out = []
    for rec in gt:
        for cam in s.cameras:
            displaced = None
            bias = s.noise.localization_bias.get(cam.camera_id)
            k = s.noise.range_scale_error
            if bias is not None or k:
                x, y = rec.location
                if k:
                    x = cam.position[0] + (1 + k) * (x - cam.position[0])
                    y = cam.position[1] + (1 + k) * (y - cam.position[1])
                if bias is not None:
                    x, y = x + bias[0], y + bias[1]
                displaced = (x, y)
            det = project_to_camera(cam, rec, displaced)
            if det is not None:
                out.append(SimDetection(det, rec.person_id, math.dist(rec.location, cam.position)))
    out.sort(key=lambda d: (d.detection.t, d.detection.camera_id, d.person_id))
    return out


def _perturb(det: PoseDetection, rng: np.random.Generator, sigma: float) -> PoseDetection:
    kps = []
    noise = rng.normal(0.0, sigma, size=(NUM_KEYPOINTS, 2))
    for k, n in zip(det.pose.keypoints, noise):
        kps.append(replace(k, u=k.u + float(n[0]), v=k.v + float(n[1])) if k.visible else k)
    pose = Pose2D(tuple(kps))
    return replace(det, pose=pose, bbox=tight_bbox(pose))


@functools.lru_cache(maxsize=64)
def _floor_maps(cam: CameraSpec) -> tuple[Homography, Homography]:
    """(pixel -> floor, floor -> pixel) homographies of a camera."""
    return cam.calibration().homography, Homography(cam.ground_to_pixel())


def _jitter_floor(det: PoseDetection, cam: CameraSpec, rng: np.random.Generator, sigma: float) -> PoseDetection:
    """Translate the whole pose so its floor point moves by a Gaussian step in meters."""
    calib, forward = _floor_maps(cam)
    foot = foot_point(det.pose)
    x, y = apply_homography(calib, foot)
    dx, dy = rng.normal(0.0, sigma, 2)
    target = apply_homography(forward, (x + dx, y + dy))
    du, dv = target[0] - foot[0], target[1] - foot[1]
    kps = tuple(replace(k, u=k.u + du, v=k.v + dv) if k.visible else k for k in det.pose.keypoints)
    pose = Pose2D(kps)
    return replace(det, pose=pose, bbox=tight_bbox(pose))


def _ghost_detections(cam: CameraSpec, ghost_idx: int, rng: np.random.Generator, duration: int) -> list[PoseDetection]:
    """A stationary person-shaped false positive visible for the whole run."""
    for _ in range(1000):
        w, h = cam.image_size
        uv = (rng.uniform(0.1 * w, 0.9 * w), rng.uniform(0.55 * h, 0.95 * h))
        loc = apply_homography(cam.calibration().homography, uv)
        rec = GroundTruthRecord(0, "ghost", loc, float(rng.uniform(0, 360)))
        det = project_to_camera(cam, rec)
        if det is not None:
            break
    else:
        return []
    return [replace(det, t=t) for t in range(duration)]


def inject_noise(detections: Sequence[SimDetection], spec: NoiseSpec, seed: int,
                 cameras: Sequence[CameraSpec] = (), duration: int = 0) -> tuple[list[PoseDetection], list[dict]]:
    """Apply detector artifacts. Returns the noisy detections and an event ledger.

    Ledger entries are ``{"t", "camera_id", "kind", "id"}`` with kind one
    of ``drop``, ``flip`` or ``ghost``.
    """
    rng = np.random.default_rng(seed)
    cams = {c.camera_id: c for c in cameras}
    if spec.location_jitter_m > 0 and not cams:
        raise ValueError("location jitter needs the camera specs")
    out, ledger = [], []
    for sd in sorted(detections, key=lambda d: (d.detection.t, d.detection.camera_id, str(d.person_id))):
        det = sd.detection
        p_drop = min(1.0, max(0.0, spec.fn_base_prob + spec.fn_distance_slope * sd.distance))
        if rng.random() < p_drop:
            ledger.append({"t": det.t, "camera_id": det.camera_id, "kind": "drop", "id": sd.person_id})
            continue
        if spec.location_jitter_m > 0:
            det = _jitter_floor(det, cams[det.camera_id], rng, spec.location_jitter_m)
        if spec.keypoint_sigma_px > 0:
            det = _perturb(det, rng, spec.keypoint_sigma_px)
        if rng.random() < spec.flip_prob:
            pose = det.pose.flipped()
            det = replace(det, pose=pose)
            ledger.append({"t": det.t, "camera_id": det.camera_id, "kind": "flip", "id": sd.person_id})
        if spec.orientation_sigma_deg > 0 and det.orientation_cam is not None:
            ori = (det.orientation_cam + rng.normal(0.0, spec.orientation_sigma_deg)) % 360.0
            det = replace(det, orientation_cam=ori)
        out.append(det)
    for cam in sorted(cameras, key=lambda c: c.camera_id):
        for g in range(spec.ghost_count):
            gid = f"ghost-{cam.camera_id}-{g}"
            for det in _ghost_detections(cam, g, rng, duration):
                out.append(det)
                ledger.append({"t": det.t, "camera_id": cam.camera_id, "kind": "ghost", "id": gid})
    out.sort(key=lambda d: (d.t, d.camera_id, d.bbox))
    return out, ledger


def simulate(s: Scenario):
    """Full synthesis: ground truth, noisy detections, ledger and calibrations."""
    gt = synthesize_trajectories(s)
    clean = simulate_clean(s, gt)
    dets, ledger = inject_noise(clean, s.noise, s.seed, s.cameras, s.duration)
    cams = {c.camera_id: c.calibration() for c in s.cameras}
    return gt, dets, ledger, cams


def observations_from_gt(gt: Sequence[GroundTruthRecord], sigma: float = 0.0, fn_prob: float = 0.0,
                         seed: int = 0, orientation_sigma_deg: float = 0.0) -> tuple[dict, list[dict]]:
    """World-level observations straight from ground truth, for tracker studies.

    Returns frames ``{t: [WorldObservation]}`` and a drop ledger.
    """
    rng = np.random.default_rng(seed)
    frames: dict = {}
    ledger = []
    for rec in sorted(gt, key=lambda r: (r.t, r.person_id)):
        frames.setdefault(rec.t, [])
        if rng.random() < fn_prob:
            ledger.append({"t": rec.t, "kind": "drop", "id": rec.person_id})
            continue
        dx, dy = rng.normal(0.0, sigma, 2) if sigma > 0 else (0.0, 0.0)
        ori = rec.orientation_deg
        if orientation_sigma_deg > 0:
            ori = (ori + rng.normal(0.0, orientation_sigma_deg)) % 360.0
        frames[rec.t].append(
            WorldObservation(rec.t, (rec.location[0] + dx, rec.location[1] + dy), deg_to_vec(ori), frozenset({"sim"}))
        )
    return frames, ledger


# -- bundled scenarios -------------------------------------------------------

def _loop(cx, cy, rx, ry, sides=24, laps=2):
    """Closed polygonal loop around an ellipse, walked counterclockwise."""
    pts = []
    for k in range(sides * laps + 1):
        a = 2 * math.pi * k / sides
        pts.append((round(cx + rx * math.cos(a), 6), round(cy + ry * math.sin(a), 6)))
    return tuple(pts)


def four_walkers(noise: NoiseSpec = NoiseSpec(), seed: int = 0, duration: int = 40) -> Scenario:
    """Four people looping in separate quadrants of a 30 x 20 m hall.

    Four corner cameras plus one central camera give every person at least
    one view at all times, usually several.
    """
    persons = (
        PersonSpec("p1", _loop(8, 6, 3.5, 2.5), 1.0),
        PersonSpec("p2", _loop(22, 6, 3.5, 2.5), 1.1),
        PersonSpec("p3", _loop(8, 14, 3.5, 2.5), 0.9),
        PersonSpec("p4", _loop(22, 14, 3.5, 2.5), 1.2),
    )
    cameras = (
        CameraSpec("cam-sw", (0.0, 0.0), 4.0, 45.0, 20.0, 640.0, (1280, 720), 40.0),
        CameraSpec("cam-se", (30.0, 0.0), 4.0, 315.0, 20.0, 640.0, (1280, 720), 40.0),
        CameraSpec("cam-nw", (0.0, 20.0), 4.0, 135.0, 20.0, 640.0, (1280, 720), 40.0),
        CameraSpec("cam-ne", (30.0, 20.0), 4.0, 225.0, 20.0, 640.0, (1280, 720), 40.0),
        CameraSpec("cam-c", (15.0, 0.0), 4.0, 0.0, 20.0, 640.0, (1280, 720), 40.0),
    )
    return Scenario((30.0, 20.0), persons, cameras, noise, duration, seed)


def crossing_walkers(noise: NoiseSpec = NoiseSpec(), seed: int = 0, speed: float = 1.0) -> Scenario:
    """Two people crossing at right angles in the middle of a 20 x 20 m area."""
    persons = (
        PersonSpec("east", ((0.0, 10.0), (20.0, 10.0)), speed),
        PersonSpec("north", ((10.0, 0.0), (10.0, 20.0)), speed),
    )
    cameras = (
        CameraSpec("cam-s", (10.0, -8.0), 5.0, 0.0, 25.0, 640.0, (1280, 720), 45.0),
        CameraSpec("cam-w", (-8.0, 10.0), 5.0, 90.0, 25.0, 640.0, (1280, 720), 45.0),
    )
    duration = int(math.floor(20.0 / speed + 1e-9)) + 1
    return Scenario((20.0, 20.0), persons, cameras, noise, duration, seed)


PRESETS = {"four-walkers": four_walkers, "crossing": crossing_walkers}
