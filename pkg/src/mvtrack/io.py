"""File formats: JSONL streams and JSON documents.

Every writer emits fields in a fixed order with ``repr`` floats, so a file
read and written again is byte-identical.

=============  ==================================================================
stream         record
=============  ==================================================================
detections     camera_id, t, keypoints [[u, v, conf, vis] x 17], bbox [u, v, side],
               orientation_cam_deg?, track_id?
gt             t, person_id, x, y, orientation_deg, area_id?
tracks         track_id, t, x, y, o_deg, observed
ledger         t, camera_id?, kind, id
=============  ==================================================================
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional

import numpy as np

from .errors import DegenerateConfiguration, FormatError
from .geometry import CameraModel, Homography, fit_homography
from .model import (
    NUM_KEYPOINTS,
    GroundTruthRecord,
    Keypoint,
    Pose2D,
    PoseDetection,
    Track,
    TrackState,
    deg_to_vec,
)
from .simulator import CameraSpec, NoiseSpec, PersonSpec, Scenario


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(", ", ": "), allow_nan=False)


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(_dumps(rec) + "\n")


def iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, object)``; blank lines are skipped."""
    path = str(path)
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot open: {exc.strerror}", path) from exc
    with fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", path, n) from exc
            if not isinstance(obj, dict):
                raise FormatError("record must be a JSON object", path, n)
            yield n, obj


def read_json(path):
    path = str(path)
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot open: {exc.strerror}", path) from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from exc


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(obj, ensure_ascii=False, indent=2, allow_nan=False) + "\n")


class _Fields:
    """Typed field access on one record with line-aware errors."""

    def __init__(self, obj: dict, path, line: Optional[int]):
        self.obj, self.path, self.line = obj, str(path), line

    def fail(self, msg: str):
        raise FormatError(msg, self.path, self.line)

    def has(self, key: str) -> bool:
        return key in self.obj and self.obj[key] is not None

    def get(self, key: str):
        if key not in self.obj:
            self.fail(f"missing field {key!r}")
        return self.obj[key]

    def num(self, key: str) -> float:
        v = self.get(key)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(f"field {key!r} must be a finite number")
        return v

    def int_(self, key: str) -> int:
        v = self.get(key)
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(f"field {key!r} must be an integer")
        return v

    def str_(self, key: str) -> str:
        v = self.get(key)
        if not isinstance(v, str):
            self.fail(f"field {key!r} must be a string")
        return v

    def bool_(self, key: str) -> bool:
        v = self.get(key)
        if not isinstance(v, bool):
            self.fail(f"field {key!r} must be true or false")
        return v

    def vec(self, key: str, n: int) -> list:
        v = self.get(key)
        if not isinstance(v, list) or len(v) != n or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in v
        ):
            self.fail(f"field {key!r} must be a list of {n} finite numbers")
        return v


# -- detections --------------------------------------------------------------

def detection_to_record(d: PoseDetection) -> dict:
    rec = {
        "camera_id": d.camera_id,
        "t": d.t,
        "keypoints": [[k.u, k.v, k.confidence, int(k.visible)] for k in d.pose.keypoints],
        "bbox": list(d.bbox),
    }
    if d.orientation_cam is not None:
        rec["orientation_cam_deg"] = d.orientation_cam
    if d.track_id is not None:
        rec["track_id"] = d.track_id
    return rec


def detection_from_record(obj: dict, path="<memory>", line: Optional[int] = None) -> PoseDetection:
    f = _Fields(obj, path, line)
    kps = f.get("keypoints")
    if not isinstance(kps, list) or len(kps) != NUM_KEYPOINTS:
        f.fail(f"'keypoints' must hold {NUM_KEYPOINTS} entries")
    keypoints = []
    for i, kp in enumerate(kps):
        if (not isinstance(kp, list) or len(kp) != 4
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in kp)
                or not all(math.isfinite(x) for x in kp) or kp[3] not in (0, 1)):
            f.fail(f"keypoint {i} must be [u, v, conf, vis] with vis 0 or 1")
        keypoints.append(Keypoint(kp[0], kp[1], kp[2], bool(kp[3])))
    t = f.int_("t")
    if t < 0:
        f.fail("'t' must be >= 0")
    ori = f.num("orientation_cam_deg") if f.has("orientation_cam_deg") else None
    tid = f.int_("track_id") if f.has("track_id") else None
    return PoseDetection(f.str_("camera_id"), t, Pose2D(tuple(keypoints)), tuple(f.vec("bbox", 3)), ori, tid)


def write_detections(path, detections: Iterable[PoseDetection]) -> None:
    write_jsonl(path, (detection_to_record(d) for d in detections))


def read_detections(path) -> list[PoseDetection]:
    return [detection_from_record(obj, path, n) for n, obj in iter_jsonl(path)]


# -- ground truth ------------------------------------------------------------

def gt_to_record(r: GroundTruthRecord) -> dict:
    rec = {"t": r.t, "person_id": r.person_id, "x": r.location[0], "y": r.location[1],
           "orientation_deg": r.orientation_deg}
    if r.area_id is not None:
        rec["area_id"] = r.area_id
    return rec


def gt_from_record(obj: dict, path="<memory>", line: Optional[int] = None) -> GroundTruthRecord:
    f = _Fields(obj, path, line)
    ori = f.num("orientation_deg")
    if not 0.0 <= ori < 360.0:
        f.fail("'orientation_deg' must lie in [0, 360)")
    area = f.str_("area_id") if f.has("area_id") else None
    return GroundTruthRecord(f.int_("t"), f.str_("person_id"), (f.num("x"), f.num("y")), ori, area)


def write_gt(path, records: Iterable[GroundTruthRecord]) -> None:
    write_jsonl(path, (gt_to_record(r) for r in records))


def read_gt(path) -> list[GroundTruthRecord]:
    return [gt_from_record(obj, path, n) for n, obj in iter_jsonl(path)]


# -- tracks ------------------------------------------------------------------

@dataclass(frozen=True)
class TrackRow:
    track_id: int
    t: int
    x: float
    y: float
    o_deg: float
    observed: bool


def track_rows(tracks: Iterable[Track]) -> list[TrackRow]:
    return [
        TrackRow(tr.track_id, s.t, s.L[0], s.L[1], s.orientation_deg, s.observed)
        for tr in tracks for s in tr.states
    ]


def tracks_from_rows(rows: Iterable[TrackRow]) -> list[Track]:
    """Rebuild tracks for evaluation. Velocities and covariances are not stored."""
    by_id: dict = {}
    for r in rows:
        by_id.setdefault(r.track_id, []).append(r)
    out = []
    for tid in sorted(by_id):
        states = tuple(
            TrackState(r.t, (r.x, r.y), (0.0, 0.0), deg_to_vec(r.o_deg), observed=r.observed)
            for r in sorted(by_id[tid], key=lambda r: r.t)
        )
        out.append(Track(tid, states))
    return out


def write_track_rows(path, rows: Iterable[TrackRow]) -> None:
    write_jsonl(path, (
        {"track_id": r.track_id, "t": r.t, "x": r.x, "y": r.y, "o_deg": r.o_deg, "observed": r.observed}
        for r in rows
    ))


def write_tracks(path, tracks: Iterable[Track]) -> None:
    write_track_rows(path, track_rows(tracks))


def read_track_rows(path) -> list[TrackRow]:
    rows = []
    for n, obj in iter_jsonl(path):
        f = _Fields(obj, path, n)
        rows.append(TrackRow(f.int_("track_id"), f.int_("t"), f.num("x"), f.num("y"), f.num("o_deg"),
                             f.bool_("observed")))
    return rows


def read_tracks(path) -> list[Track]:
    rows = read_track_rows(path)
    try:
        return tracks_from_rows(rows)
    except ValueError as exc:
        raise FormatError(str(exc), str(path)) from exc


# -- noise ledger ------------------------------------------------------------

_LEDGER_KEYS = ("t", "camera_id", "kind", "id")


def write_ledger(path, events: Iterable[dict]) -> None:
    write_jsonl(path, ({k: e[k] for k in _LEDGER_KEYS if k in e} for e in events))


def read_ledger(path) -> list[dict]:
    out = []
    for n, obj in iter_jsonl(path):
        f = _Fields(obj, path, n)
        f.int_("t")
        f.str_("kind")
        out.append({k: obj[k] for k in _LEDGER_KEYS if k in obj})
    return out


# -- calibration -------------------------------------------------------------

def camera_to_record(cam: CameraModel) -> dict:
    return {
        "camera_id": cam.camera_id,
        "position": list(cam.position),
        "mount_height": cam.mount_height,
        "yaw_deg": cam.yaw_deg,
        "hfov_deg": cam.hfov_deg,
        "vfov_deg": cam.vfov_deg,
        "image_size": list(cam.image_size),
        "max_range": cam.max_range,
        "homography": cam.homography.m.tolist(),
    }


def camera_from_record(obj: dict, path="<memory>") -> CameraModel:
    """Accepts an explicit ``homography`` or 4 ``pixel_points``/``world_points`` pairs."""
    if not isinstance(obj, dict):
        raise FormatError("camera entry must be an object", str(path))
    f = _Fields(obj, path, None)
    cid = f.str_("camera_id")
    try:
        if f.has("homography"):
            m = np.array(f.get("homography"), dtype=float)
            if m.shape != (3, 3) or not np.all(np.isfinite(m)):
                f.fail(f"camera {cid}: 'homography' must be a finite 3x3 matrix")
            hom = Homography(m)
        elif f.has("pixel_points") and f.has("world_points"):
            hom = fit_homography(f.get("pixel_points"), f.get("world_points"))
        else:
            f.fail(f"camera {cid}: needs 'homography' or 'pixel_points' and 'world_points'")
    except DegenerateConfiguration as exc:
        raise DegenerateConfiguration(f"camera {cid}: {exc}", cid) from exc
    except (TypeError, ValueError) as exc:
        raise FormatError(f"camera {cid}: {exc}", str(path)) from exc
    size = f.vec("image_size", 2)
    try:
        return CameraModel(
            camera_id=cid,
            position=tuple(f.vec("position", 2)),
            mount_height=f.num("mount_height"),
            yaw_deg=f.num("yaw_deg"),
            hfov_deg=f.num("hfov_deg"),
            vfov_deg=f.num("vfov_deg"),
            homography=hom,
            image_size=(int(size[0]), int(size[1])),
            max_range=f.num("max_range"),
        )
    except ValueError as exc:
        raise FormatError(f"camera {cid}: {exc}", str(path)) from exc


def write_calibration(path, cameras: Iterable[CameraModel]) -> None:
    write_json(path, {"cameras": [camera_to_record(c) for c in sorted(cameras, key=lambda c: c.camera_id)]})


def read_calibration(path) -> dict[str, CameraModel]:
    doc = read_json(path)
    entries = doc.get("cameras") if isinstance(doc, dict) else None
    if not isinstance(entries, list):
        raise FormatError("calibration must be an object with a 'cameras' list", str(path))
    out = {}
    for obj in entries:
        cam = camera_from_record(obj, path)
        if cam.camera_id in out:
            raise FormatError(f"duplicate camera {cam.camera_id!r}", str(path))
        out[cam.camera_id] = cam
    return out


def points_record(spec: CameraSpec) -> dict:
    """Calibration input entry for a simulated camera (4 correspondences)."""
    pix, world = spec.calibration_points()
    cam = spec.calibration()
    rec = camera_to_record(cam)
    del rec["homography"]
    rec["pixel_points"] = [list(p) for p in pix]
    rec["world_points"] = [list(w) for w in world]
    return rec


# -- scenarios ---------------------------------------------------------------

def scenario_to_dict(s: Scenario) -> dict:
    n = s.noise
    return {
        "site": list(s.site),
        "duration": s.duration,
        "seed": s.seed,
        "persons": [
            {"person_id": p.person_id, "waypoints": [list(w) for w in p.waypoints], "speed": p.speed,
             "start_t": p.start_t, "holds": {str(k): list(v) for k, v in sorted(p.holds.items())}}
            for p in s.persons
        ],
        "cameras": [
            {"camera_id": c.camera_id, "position": list(c.position), "mount_height": c.mount_height,
             "yaw_deg": c.yaw_deg, "pitch_deg": c.pitch_deg, "focal_px": c.focal_px,
             "image_size": list(c.image_size), "max_range": c.max_range}
            for c in s.cameras
        ],
        "noise": {
            "keypoint_sigma_px": n.keypoint_sigma_px,
            "fn_base_prob": n.fn_base_prob,
            "fn_distance_slope": n.fn_distance_slope,
            "flip_prob": n.flip_prob,
            "ghost_count": n.ghost_count,
            "orientation_sigma_deg": n.orientation_sigma_deg,
            "localization_bias": {k: list(v) for k, v in sorted(n.localization_bias.items())},
            "range_scale_error": n.range_scale_error,
            "location_jitter_m": n.location_jitter_m,
        },
    }


def scenario_from_dict(d: Mapping, path="<memory>") -> Scenario:
    try:
        noise = dict(d.get("noise", {}))
        noise["localization_bias"] = {k: tuple(v) for k, v in noise.get("localization_bias", {}).items()}
        persons = tuple(
            PersonSpec(p["person_id"], tuple(tuple(w) for w in p["waypoints"]), p.get("speed", 1.0),
                       p.get("start_t", 0), {int(k): list(v) for k, v in p.get("holds", {}).items()})
            for p in d["persons"]
        )
        cameras = tuple(
            CameraSpec(c["camera_id"], tuple(c["position"]), c.get("mount_height", 3.0), c.get("yaw_deg", 0.0),
                       c.get("pitch_deg", 30.0), c.get("focal_px", 640.0), tuple(c.get("image_size", (1280, 720))),
                       c.get("max_range", 30.0))
            for c in d["cameras"]
        )
        return Scenario(tuple(d["site"]), persons, cameras, NoiseSpec(**noise), int(d.get("duration", 60)),
                        int(d.get("seed", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid scenario: {exc!r}", str(path)) from exc


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
