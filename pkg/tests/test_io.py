from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvtrack import io
from mvtrack import simulator as sim
from mvtrack.errors import DegenerateConfiguration, FormatError
from mvtrack.geometry import Homography
from mvtrack.model import GroundTruthRecord, Keypoint, Pose2D, PoseDetection
from mvtrack.tracker import run
from helpers import camera, detection

finite = st.floats(-1e4, 1e4, allow_nan=False)


def roundtrip_bytes(tmp_path, write, read, items, name="f.jsonl"):
    a, b = tmp_path / ("a_" + name), tmp_path / ("b_" + name)
    write(a, items)
    back = read(a)
    write(b, back)
    assert a.read_bytes() == b.read_bytes()
    return back


def test_detections_roundtrip(tmp_path):
    dets = [detection(t, 100 + t, 200, orientation=33.5 if t % 2 else None) for t in range(5)]
    dets.append(PoseDetection("cam", 9, dets[0].pose, dets[0].bbox, 10.0, track_id=4))
    back = roundtrip_bytes(tmp_path, io.write_detections, io.read_detections, dets)
    assert back == dets


def test_gt_roundtrip(tmp_path):
    gt = [GroundTruthRecord(t, "p", (1.5 * t, 2.0), 90.0, "a" if t else None) for t in range(4)]
    assert roundtrip_bytes(tmp_path, io.write_gt, io.read_gt, gt) == gt


def test_tracks_roundtrip(tmp_path):
    gt = sim.synthesize_trajectories(sim.four_walkers(duration=8))
    frames, _ = sim.observations_from_gt(gt)
    tracks = run(frames)
    io.write_tracks(tmp_path / "t.jsonl", tracks)
    rows = roundtrip_bytes(tmp_path, io.write_track_rows, io.read_track_rows, io.track_rows(tracks))
    assert rows == io.track_rows(tracks)
    # orientation is stored in degrees, so rebuilt unit vectors agree to rounding
    back = io.read_tracks(tmp_path / "t.jsonl")
    for a, b in zip(back, tracks):
        for sa, sb in zip(a.states, b.states):
            assert (sa.t, sa.L, sa.observed) == (sb.t, sb.L, sb.observed)
            assert sa.O == pytest.approx(sb.O, abs=1e-12)


def test_ledger_roundtrip(tmp_path):
    led = [{"t": 1, "camera_id": "a", "kind": "flip", "id": "p"}, {"t": 2, "camera_id": "b", "kind": "drop", "id": None}]
    assert roundtrip_bytes(tmp_path, io.write_ledger, io.read_ledger, led) == led


def test_calibration_roundtrip(tmp_path):
    cams = [sim.four_walkers().cameras[0].calibration(), camera("x")]
    back = roundtrip_bytes(tmp_path, io.write_calibration,
                           lambda p: list(io.read_calibration(p).values()), cams, "cal.json")
    for a, b in zip(back, cams):
        np.testing.assert_array_equal(a.homography.m, b.homography.m)
        assert a.camera_id == b.camera_id and a.position == b.position


def test_scenario_roundtrip():
    noise = sim.NoiseSpec(2.0, 0.1, 0.01, 0.2, 1, 15.0, {"cam-sw": (0.1, -0.2)}, 0.02, 0.1)
    s = sim.four_walkers(noise, 3)
    s = sim.Scenario(s.site, s.persons + (sim.PersonSpec("h", ((1, 1),), 1.0, 2, {0: [0, 90]}),), s.cameras,
                     s.noise, s.duration, s.seed)
    d = io.scenario_to_dict(s)
    back = io.scenario_from_dict(json.loads(json.dumps(d)))
    assert io.scenario_to_dict(back) == d
    assert sim.synthesize_trajectories(back) == sim.synthesize_trajectories(s)


kp_st = st.builds(lambda u, v, c, vis: [u, v, c, vis], finite, finite, st.floats(0, 1), st.sampled_from([0, 1]))


@settings(max_examples=100, deadline=None)
@given(st.lists(kp_st, min_size=17, max_size=17), st.integers(0, 10**6), st.text(min_size=1, max_size=8),
       st.one_of(st.none(), st.floats(0, 360, exclude_max=True)), st.tuples(finite, finite, st.floats(0, 1e3)))
def test_detection_record_roundtrip(kps, t, cid, ori, bbox):
    rec = {"camera_id": cid, "t": t, "keypoints": kps, "bbox": list(bbox)}
    if ori is not None:
        rec["orientation_cam_deg"] = ori
    det = io.detection_from_record(json.loads(json.dumps(rec)))
    assert io.detection_to_record(det) == rec


@pytest.mark.parametrize("line, fragment", [
    ("{not json", "invalid JSON"),
    ("[1, 2]", "object"),
    ('{"camera_id": "a", "t": 0, "keypoints": [], "bbox": [0, 0, 1]}', "keypoints"),
    ('{"camera_id": "a", "t": -1, "keypoints": ' + json.dumps([[0, 0, 1, 1]] * 17) + ', "bbox": [0, 0, 1]}', "t"),
])
def test_malformed_detection_line_reports_line_number(tmp_path, line, fragment):
    good = json.dumps(io.detection_to_record(detection(0, 1, 2)))
    p = tmp_path / "d.jsonl"
    p.write_text(good + "\n" + line + "\n", encoding="utf-8")
    with pytest.raises(FormatError) as exc:
        io.read_detections(p)
    assert exc.value.line == 2
    assert fragment in str(exc.value)


def test_missing_file_is_format_error(tmp_path):
    with pytest.raises(FormatError):
        io.read_gt(tmp_path / "nope.jsonl")


def test_camera_from_points():
    rec = io.camera_to_record(camera("a"))
    del rec["homography"]
    rec["pixel_points"] = [[0, 0], [1, 0], [1, 1], [0, 1]]
    rec["world_points"] = [[0, 0], [1, 0], [1, 1], [0, 1]]
    cam = io.camera_from_record(rec)
    m = cam.homography.m / cam.homography.m[2, 2]
    np.testing.assert_allclose(m, np.eye(3), atol=1e-12)
    rec["pixel_points"] = [[0, 0], [1, 1], [2, 2], [3, 3]]
    with pytest.raises(DegenerateConfiguration) as exc:
        io.camera_from_record(rec)
    assert "camera a" in str(exc.value)


def test_simulated_points_recover_ground_truth_homography():
    for spec in sim.four_walkers().cameras:
        cam = io.camera_from_record(io.points_record(spec))
        a = cam.homography.m / cam.homography.m[2, 2]
        ref = spec.calibration().homography.m
        np.testing.assert_allclose(a, ref / ref[2, 2], rtol=1e-8, atol=1e-10)


def test_keypoint_roundtrip_preserves_invisible_entries():
    kps = tuple(Keypoint(float(i), 2.0 * i, 0.5, i % 2 == 0) for i in range(17))
    det = PoseDetection("a", 0, Pose2D(kps), (0.0, 0.0, 1.0))
    assert io.detection_from_record(io.detection_to_record(det)) == det
    assert Homography.identity().m.shape == (3, 3)
