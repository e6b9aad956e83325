"""Per-camera cleaning of 2D pose detections.

Each camera stream is tracked in pixel space with a 34-position
constant-velocity Kalman filter and Hungarian association. Finished tracks
are RTS-smoothed, stationary tracks (wall and floor patterns) are dropped,
and the remaining tracks are written back out as detections, with short
gaps filled.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

from . import kernels
from .assignment import INFEASIBLE, solve
from .filtering import PIXEL_ACCEL_SIGMA, PIXEL_MEAS_SIGMA, LinearCVModel, TrackFilter
from .model import (
    FLIP_PERMUTATION,
    LEFT_EAR,
    LEFT_EYE,
    NOSE,
    NUM_KEYPOINTS,
    RIGHT_EAR,
    RIGHT_EYE,
    Keypoint,
    Pose2D,
    PoseDetection,
    tight_bbox,
)

DEFAULT_IMAGE_WIDTH = 1280


@dataclass(frozen=True)
class PreprocConfig:
    window: int = 10
    eps: float = 2.0
    pixel_gate: Optional[float] = None  # None: image_width / 8
    max_coast: int = 10
    flip_correction: bool = True
    flip_margin: float = 1.0
    min_shared: int = 3
    accel_sigma: float = PIXEL_ACCEL_SIGMA
    measurement_sigma: float = PIXEL_MEAS_SIGMA
    bbox_inflate: float = 0.1

    def gate_for(self, image_width: float) -> float:
        return self.pixel_gate if self.pixel_gate is not None else image_width / 8.0


def pose_distance(a: Pose2D, b: Pose2D, min_shared: int = 1) -> float:
    """Mean keypoint L2 distance over keypoints visible in both poses."""
    c = kernels.pose_cost_matrix(a.xy()[None], a.visible()[None], b.xy()[None], b.visible()[None], min_shared)
    return float(c[0, 0])


def shape_distance(pred_xy, pred_vis, det_xy, det_vis, min_shared: int = 3) -> np.ndarray:
    """Pose distance after removing the mean offset over shared keypoints.

    A left/right flip keeps the centroid, so comparing shapes isolates the
    flip from whole-body motion the prediction did not anticipate.
    Arrays are ``(P, 17, 2)``, ``(P, 17)``, ``(D, 17, 2)``, ``(D, 17)``.
    """
    pred_xy, det_xy = np.asarray(pred_xy, dtype=float), np.asarray(det_xy, dtype=float)
    shared = np.asarray(pred_vis, dtype=bool)[:, None] & np.asarray(det_vis, dtype=bool)[None]
    n = shared.sum(axis=-1)
    diff = det_xy[None] - pred_xy[:, None]
    w = shared[..., None]
    with np.errstate(invalid="ignore", divide="ignore"):
        offset = (diff * w).sum(axis=2) / n[..., None]
        err = np.linalg.norm(diff - offset[:, :, None], axis=-1)
        cost = (err * shared).sum(axis=-1) / n
    return np.where(n >= max(min_shared, 1), cost, INFEASIBLE)


def correct_lr_flip(prediction: Pose2D, detection: Pose2D, margin: float = 1.0) -> Pose2D:
    """Return ``detection`` or its mirror, whichever has the shape closer to ``prediction``.

    The mirror wins only when it is closer by more than ``margin`` pixels.
    """
    mirrored = detection.flipped()
    p_xy, p_vis = prediction.xy()[None], prediction.visible()[None]
    direct = shape_distance(p_xy, p_vis, detection.xy()[None], detection.visible()[None], 1)[0, 0]
    swapped = shape_distance(p_xy, p_vis, mirrored.xy()[None], mirrored.visible()[None], 1)[0, 0]
    if math.isfinite(swapped) and swapped < direct - margin:
        return mirrored
    return detection


def heuristic_orientation(pose: Pose2D) -> Optional[tuple[float, float]]:
    """Image-plane unit vector from the mean of visible eyes/ears to the nose."""
    kp = pose.keypoints
    if not kp[NOSE].visible:
        return None
    refs = [kp[i] for i in (LEFT_EYE, RIGHT_EYE, LEFT_EAR, RIGHT_EAR) if kp[i].visible]
    if not refs:
        return None
    mu = sum(k.u for k in refs) / len(refs)
    mv = sum(k.v for k in refs) / len(refs)
    du, dv = kp[NOSE].u - mu, kp[NOSE].v - mv
    n = math.hypot(du, dv)
    if n == 0.0:
        return None
    return (du / n, dv / n)


def _pose_arrays(pose: Pose2D) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return pose.xy(), pose.visible(), pose.confidence()


@dataclass
class PixelTrack:
    track_id: int
    camera_id: str
    start_t: int
    filter: TrackFilter
    raw: dict = field(default_factory=dict)  # t -> detection used for the update
    flipped: dict = field(default_factory=dict)  # t -> bool
    coasts: int = 0
    status: str = "active"
    smoothed: list = field(default_factory=list)  # PoseDetection per frame after finish

    @property
    def last_observed(self) -> int:
        return max(self.raw)

    @property
    def first_observed(self) -> int:
        return min(self.raw)

    def predicted_pose(self) -> tuple[np.ndarray, np.ndarray]:
        mean = self.filter.peek().mean
        xy = mean[: 2 * NUM_KEYPOINTS].reshape(NUM_KEYPOINTS, 2)
        vis = (self.filter.initialized >= 0).reshape(NUM_KEYPOINTS, 2).all(axis=1)
        return xy, vis

    def displacements(self) -> list[float]:
        """Mean keypoint motion between consecutive observed detections."""
        ts = sorted(self.raw)
        out = []
        for a, b in zip(ts, ts[1:]):
            out.append(pose_distance(self.raw[a].pose, self.raw[b].pose))
        return out

    def is_stationary(self, window: int, eps: float) -> bool:
        span = self.last_observed - self.first_observed + 1
        if span < window:
            return False
        return all(d < eps for d in self.displacements() if math.isfinite(d))

    def finish(self, inflate: float) -> None:
        last = self.last_observed - self.start_t
        self.filter.trim(last)
        beliefs = self.filter.smooth()
        first_seen = self.filter.initialized.reshape(NUM_KEYPOINTS, 2).max(axis=1)
        conf = np.zeros(NUM_KEYPOINTS)
        self.smoothed = []
        for k, b in enumerate(beliefs):
            t = self.start_t + k
            det = self.raw.get(t)
            if det is not None:
                _, vis, c = _pose_arrays(det.pose)
                conf = np.where(vis, c, conf)
            xy = b.mean[: 2 * NUM_KEYPOINTS].reshape(NUM_KEYPOINTS, 2)
            visible = (first_seen >= 0) & (first_seen <= k)
            pose = Pose2D(
                tuple(
                    Keypoint(float(xy[i, 0]), float(xy[i, 1]), float(conf[i]), bool(visible[i]))
                    for i in range(NUM_KEYPOINTS)
                )
            )
            self.smoothed.append(
                PoseDetection(
                    camera_id=self.camera_id,
                    t=t,
                    pose=pose,
                    bbox=tight_bbox(pose, inflate),
                    orientation_cam=None if det is None else det.orientation_cam,
                    track_id=self.track_id,
                )
            )
        if 2 * sum(self.flipped.values()) > len(self.flipped):
            # most frames disagreed with the first one, so the first was the mirrored one
            self.smoothed = [replace(d, pose=d.pose.flipped()) for d in self.smoothed]
            self.raw = {t: replace(d, pose=d.pose.flipped()) for t, d in self.raw.items()}
            self.flipped = {t: not f for t, f in self.flipped.items()}
        self.status = "finished"


def _group_by_frame(detections: Iterable[PoseDetection]) -> dict[int, list[PoseDetection]]:
    frames = defaultdict(list)
    for d in detections:
        frames[d.t].append(d)
    return frames


def track_poses(detections: Iterable[PoseDetection], config: PreprocConfig = PreprocConfig(),
                image_width: float = DEFAULT_IMAGE_WIDTH) -> list[PixelTrack]:
    """Associate one camera's detections into pixel tracks.

    Predict, match by gated Hungarian on mean keypoint distance, update;
    unmatched detections start tracks immediately; unmatched tracks coast
    and finish after ``max_coast`` consecutive misses. Every returned track
    is finished and smoothed.
    """
    frames = _group_by_frame(detections)
    if not frames:
        return []
    cams = {d.camera_id for dets in frames.values() for d in dets}
    if len(cams) > 1:
        raise ValueError(f"track_poses expects one camera, got {sorted(cams)}")
    camera_id = cams.pop()
    model = LinearCVModel(2 * NUM_KEYPOINTS, 1.0, config.accel_sigma, config.measurement_sigma)
    vel_sigma = image_width / 4.0
    gate = config.gate_for(image_width)

    live: list[PixelTrack] = []
    done: list[PixelTrack] = []
    next_id = 0
    for t in range(min(frames), max(frames) + 1):
        dets = sorted(frames.get(t, []), key=lambda d: (d.bbox, d.pose.xy().tolist()))
        det_xy = np.array([d.pose.xy() for d in dets]).reshape(len(dets), NUM_KEYPOINTS, 2)
        det_vis = np.array([d.pose.visible() for d in dets]).reshape(len(dets), NUM_KEYPOINTS)

        use_flip = np.zeros((len(live), len(dets)), dtype=bool)
        if live and dets:
            preds = [trk.predicted_pose() for trk in live]
            p_xy = np.array([p[0] for p in preds])
            p_vis = np.array([p[1] for p in preds])
            cost = kernels.pose_cost_matrix(p_xy, p_vis, det_xy, det_vis, config.min_shared)
            if config.flip_correction:
                m_xy, m_vis = det_xy[:, FLIP_PERMUTATION], det_vis[:, FLIP_PERMUTATION]
                mirrored = kernels.pose_cost_matrix(p_xy, p_vis, m_xy, m_vis, config.min_shared)
                shape_m = shape_distance(p_xy, p_vis, m_xy, m_vis, config.min_shared)
                shape_d = shape_distance(p_xy, p_vis, det_xy, det_vis, 1)
                use_flip = np.isfinite(shape_m) & (shape_m < shape_d - config.flip_margin)
                cost = np.where(use_flip, mirrored, cost)
            cost = np.where(cost > gate, INFEASIBLE, cost)
            result = solve(cost)
            pairs, lost, fresh = result.pairs, result.unmatched_rows, result.unmatched_cols
        else:
            pairs, lost, fresh = (), tuple(range(len(live))), tuple(range(len(dets)))

        for i, j in pairs:
            trk = live[i]
            det = dets[j]
            flip = bool(use_flip[i, j])
            if flip:
                det = PoseDetection(det.camera_id, det.t, det.pose.flipped(), det.bbox, det.orientation_cam)
            xy, vis = det_xy[j], det_vis[j]
            if flip:
                xy, vis = xy[FLIP_PERMUTATION], vis[FLIP_PERMUTATION]
            trk.filter.measure(xy.reshape(-1), np.repeat(vis, 2))
            trk.raw[t] = det
            trk.flipped[t] = flip
            trk.coasts = 0
            trk.status = "active"

        survivors = []
        lost_set = set(lost)
        for i, trk in enumerate(live):
            if i not in lost_set:
                survivors.append(trk)
            elif trk.coasts < config.max_coast:
                trk.filter.coast()
                trk.coasts += 1
                trk.status = "coasting"
                survivors.append(trk)
            else:
                trk.finish(config.bbox_inflate)
                done.append(trk)
        live = survivors

        for j in fresh:
            det = dets[j]
            tf = TrackFilter.start(model, det_xy[j].reshape(-1), vel_sigma, np.repeat(det_vis[j], 2))
            trk = PixelTrack(next_id, camera_id, t, tf)
            trk.raw[t] = det
            trk.flipped[t] = False
            next_id += 1
            live.append(trk)

    for trk in live:
        trk.finish(config.bbox_inflate)
        done.append(trk)
    done.sort(key=lambda trk: trk.track_id)
    return done


def split_by_camera(detections: Iterable[PoseDetection]) -> dict[str, list[PoseDetection]]:
    out = defaultdict(list)
    for d in detections:
        out[d.camera_id].append(d)
    return dict(sorted(out.items()))


def remove_stationary_ghosts(detections: Iterable[PoseDetection], window: int = 10, eps: float = 2.0,
                             config: PreprocConfig = PreprocConfig(),
                             image_width: float = DEFAULT_IMAGE_WIDTH) -> list[PoseDetection]:
    """Drop every detection that belongs to a track that never moves.

    A track is stationary when it spans at least ``window`` frames and its
    mean keypoint displacement between consecutive detections stays below
    ``eps`` pixels throughout. Tracks that move at any point are kept whole.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    kept = []
    for dets in split_by_camera(detections).values():
        for trk in track_poses(dets, config, image_width):
            if not trk.is_stationary(window, eps):
                kept.extend(trk.raw[t] for t in sorted(trk.raw))
    kept.sort(key=lambda d: (d.t, d.camera_id))
    return kept


def preprocess_camera(detections: Iterable[PoseDetection], config: PreprocConfig = PreprocConfig(),
                      image_width: float = DEFAULT_IMAGE_WIDTH) -> tuple[list[PoseDetection], list[PixelTrack]]:
    """Track, drop stationary tracks, and emit smoothed detections."""
    tracks = [
        trk for trk in track_poses(detections, config, image_width)
        if not trk.is_stationary(config.window, config.eps)
    ]
    out = [d for trk in tracks for d in trk.smoothed]
    out.sort(key=lambda d: (d.t, d.track_id))
    return out, tracks


def preprocess(detections: Iterable[PoseDetection], config: PreprocConfig = PreprocConfig(),
               image_widths: Optional[dict] = None) -> list[PoseDetection]:
    """Run :func:`preprocess_camera` over every camera in a mixed stream."""
    out = []
    for cam, dets in split_by_camera(detections).items():
        width = (image_widths or {}).get(cam, DEFAULT_IMAGE_WIDTH)
        out.extend(preprocess_camera(dets, config, width)[0])
    out.sort(key=lambda d: (d.t, d.camera_id, d.track_id))
    return out
