"""Multi-view integration of per-camera samples into one sample per person."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .errors import EmptyComponent, HorizonPoint, NoFeetVisible
from .geometry import (
    CameraModel,
    apply_homography,
    foot_point,
    rotate_to_world,
)
from .model import NOSE, PoseDetection, WorldObservation, deg_to_vec, normalize
from .pose_preproc import heuristic_orientation

MERGE_RADIUS = 1.5  # m
DIST_SQ_FLOOR = 0.25  # m^2


@dataclass(frozen=True)
class ViewSample:
    camera_id: str
    t: int
    location: tuple[float, float]
    orientation: Optional[tuple[float, float]]
    camera_distance_sq: float

    def __post_init__(self):
        if self.camera_distance_sq < 0:
            raise ValueError("camera_distance_sq must be non-negative")


@dataclass(frozen=True)
class ProximityGraph:
    vertices: tuple[ViewSample, ...]
    edges: tuple[tuple[int, int], ...]


def heuristic_orientation_world(det: PoseDetection, cam: CameraModel) -> Optional[tuple[float, float]]:
    """Eyes/ears-to-nose direction pushed through the ground homography."""
    d = heuristic_orientation(det.pose)
    if d is None:
        return None
    nose = det.pose.keypoints[NOSE]
    try:
        a = apply_homography(cam.homography, (nose.u - d[0], nose.v - d[1]))
        b = apply_homography(cam.homography, (nose.u, nose.v))
    except HorizonPoint:
        return None
    try:
        return normalize((b[0] - a[0], b[1] - a[1]))
    except ValueError:
        return None


def localize(det: PoseDetection, cam: CameraModel, orientation_source: str = "detector") -> Optional[ViewSample]:
    """Foot point to site coordinates plus site-frame facing vector.

    Returns ``None`` when no ankle is visible or the foot maps to infinity.
    ``orientation_source`` is ``"detector"`` (use ``orientation_cam``) or
    ``"heuristic"`` (2D face keypoints).
    """
    try:
        loc = apply_homography(cam.homography, foot_point(det.pose))
    except (NoFeetVisible, HorizonPoint):
        return None
    orientation = None
    if orientation_source == "detector":
        if det.orientation_cam is not None:
            orientation = rotate_to_world(cam, deg_to_vec(det.orientation_cam))
    elif orientation_source == "heuristic":
        orientation = heuristic_orientation_world(det, cam)
    else:
        raise ValueError(f"unknown orientation source {orientation_source!r}")
    d2 = (loc[0] - cam.position[0]) ** 2 + (loc[1] - cam.position[1]) ** 2
    return ViewSample(cam.camera_id, det.t, loc, orientation, d2)


def build_graph(samples: Sequence[ViewSample], radius: float = MERGE_RADIUS) -> ProximityGraph:
    samples = tuple(samples)
    if len({s.t for s in samples}) > 1:
        raise ValueError("all samples must share one timestep")
    edges = []
    for a in range(len(samples)):
        for b in range(a + 1, len(samples)):
            sa, sb = samples[a], samples[b]
            if sa.camera_id == sb.camera_id:
                continue
            if math.dist(sa.location, sb.location) <= radius:
                edges.append((a, b))
    return ProximityGraph(samples, tuple(edges))


def connected_components(g: ProximityGraph) -> list[list[int]]:
    """Vertex index groups, each sorted, ordered by smallest member."""
    parent = list(range(len(g.vertices)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in g.edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups = defaultdict(list)
    for v in range(len(g.vertices)):
        groups[find(v)].append(v)
    return sorted(groups.values(), key=lambda grp: grp[0])


def integrate(cc: Sequence[ViewSample], dist_sq_floor: float = DIST_SQ_FLOOR) -> WorldObservation:
    """Inverse squared camera distance weighted mean of a component."""
    cc = list(cc)
    if not cc:
        raise EmptyComponent("cannot integrate an empty component")
    weights = [1.0 / max(s.camera_distance_sq, dist_sq_floor) for s in cc]
    total = sum(weights)
    x = sum(w * s.location[0] for w, s in zip(weights, cc)) / total
    y = sum(w * s.location[1] for w, s in zip(weights, cc)) / total

    orientation = None
    oriented = [(w, s) for w, s in zip(weights, cc) if s.orientation is not None]
    if oriented:
        ox = sum(w * s.orientation[0] for w, s in oriented)
        oy = sum(w * s.orientation[1] for w, s in oriented)
        if math.hypot(ox, oy) < 1e-6:
            closest = min(oriented, key=lambda ws: ws[1].camera_distance_sq)
            orientation = closest[1].orientation
        else:
            orientation = (ox, oy)
    return WorldObservation(
        t=cc[0].t,
        location=(x, y),
        orientation=orientation,
        source_cameras=frozenset(s.camera_id for s in cc),
        weight_mass=total,
    )


def fuse_frame(samples: Sequence[ViewSample], radius: float = MERGE_RADIUS,
               dist_sq_floor: float = DIST_SQ_FLOOR) -> list[WorldObservation]:
    # canonical order so output does not depend on input order
    samples = sorted(samples, key=lambda s: (s.camera_id, s.location))
    g = build_graph(samples, radius)
    return [integrate([g.vertices[i] for i in grp], dist_sq_floor) for grp in connected_components(g)]


def fuse_stream(detections: Iterable[PoseDetection], cameras: Mapping[str, CameraModel],
                radius: float = MERGE_RADIUS, dist_sq_floor: float = DIST_SQ_FLOOR,
                orientation_source: str = "detector") -> dict[int, list[WorldObservation]]:
    """Localize every detection and fuse per frame."""
    by_t = defaultdict(list)
    for det in detections:
        cam = cameras.get(det.camera_id)
        if cam is None:
            raise KeyError(f"no calibration for camera {det.camera_id!r}")
        s = localize(det, cam, orientation_source)
        if s is not None:
            by_t[det.t].append(s)
    return {t: fuse_frame(by_t[t], radius, dist_sq_floor) for t in sorted(by_t)}
