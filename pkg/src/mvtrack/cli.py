"""Command-line driver: ``mvtrack <stage> [options]``.

Stages read and write the documented file formats (see :mod:`mvtrack.io`).
Exit codes: 0 success, 2 invalid input, 3 runtime failure. Failures print
one JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import io
from .config import PipelineConfig, config_from_dict, matched_config
from .errors import DegenerateConfiguration, FormatError, MvtrackError, ValidationError
from .fusion import fuse_stream
from .geometry import fit_homography
from .metrics import FACTORS, collect_factor_samples, evaluate, factor_analysis, format_table
from .pose_preproc import preprocess
from .simulator import PRESETS, simulate
from .tracker import baseline_hungarian_run, run

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


def _require(path: Optional[Path], what: str) -> Path:
    if path is None:
        raise ValidationError(f"no {what} given (flag or config paths.{what})")
    if not Path(path).exists():
        raise ValidationError(f"{what} not found: {path}")
    return Path(path)


def cmd_calibrate(points: Path, out: Path) -> Path:
    """Fit one homography per camera from 4 pixel/site correspondences."""
    doc = io.read_json(points)
    entries = doc.get("cameras") if isinstance(doc, dict) else None
    if not isinstance(entries, list):
        raise FormatError("points file must be an object with a 'cameras' list", str(points))
    cams = []
    for entry in entries:
        if not isinstance(entry, dict) or "pixel_points" not in entry or "world_points" not in entry:
            raise FormatError("every camera needs 'pixel_points' and 'world_points'", str(points))
        cid = entry.get("camera_id")
        try:
            fit_homography(entry["pixel_points"], entry["world_points"])
        except DegenerateConfiguration as exc:
            raise DegenerateConfiguration(f"camera {cid}: {exc}", cid) from exc
        cams.append(io.camera_from_record(entry, points))
    dest = io.ensure_dir(out) / "calibration.json"
    io.write_calibration(dest, cams)
    return dest


def _scenario(cfg: PipelineConfig, name: Optional[str], seed: Optional[int]):
    spec = name if name is not None else cfg.scenario
    if spec is None:
        spec = "four-walkers"
    if isinstance(spec, str):
        if spec in PRESETS:
            scn = PRESETS[spec]()
        else:
            scn = io.scenario_from_dict(io.read_json(_require(Path(spec), "scenario")), spec)
    else:
        scn = io.scenario_from_dict(spec)
    if seed is not None:
        scn = replace(scn, seed=seed)
    return scn


def cmd_simulate(cfg: PipelineConfig, out: Path, scenario: Optional[str] = None,
                 seed: Optional[int] = None) -> dict:
    """Write ground truth, detections, calibration, noise ledger and a matched config."""
    scn = _scenario(cfg, scenario, seed)
    gt, dets, ledger, cams = simulate(scn)
    out = io.ensure_dir(out)
    files = {
        "scenario": out / "scenario.json",
        "gt": out / "gt.jsonl",
        "detections": out / "detections.jsonl",
        "calibration": out / "calibration.json",
        "points": out / "points.json",
        "ledger": out / "ledger.jsonl",
        "config": out / "config.json",
    }
    io.write_json(files["scenario"], io.scenario_to_dict(scn))
    io.write_gt(files["gt"], gt)
    io.write_detections(files["detections"], dets)
    io.write_calibration(files["calibration"], cams.values())
    io.write_json(files["points"], {"cameras": [io.points_record(c) for c in scn.cameras]})
    io.write_ledger(files["ledger"], ledger)
    paths = {k: files[k].name for k in ("points", "calibration", "detections", "gt")}
    paths["out"] = "."
    io.write_json(files["config"], matched_config(scn.noise, paths).to_dict())
    return files


def cmd_preprocess(cfg: PipelineConfig, detections: Path, calibration: Path, out: Path) -> Path:
    cams = io.read_calibration(calibration)
    dets = io.read_detections(detections)
    missing = sorted({d.camera_id for d in dets} - set(cams))
    if missing:
        raise ValidationError(f"detections reference uncalibrated cameras {missing}")
    widths = {cid: c.image_size[0] for cid, c in cams.items()}
    cleaned = preprocess(dets, cfg.preproc, widths)
    dest = io.ensure_dir(out) / "preprocessed.jsonl"
    io.write_detections(dest, cleaned)
    return dest


def cmd_track(cfg: PipelineConfig, detections: Path, calibration: Path, out: Path,
              tracker: str = "kalman") -> Path:
    cams = io.read_calibration(calibration)
    dets = io.read_detections(detections)
    missing = sorted({d.camera_id for d in dets} - set(cams))
    if missing:
        raise ValidationError(f"detections reference uncalibrated cameras {missing}")
    f = cfg.fusion
    obs = fuse_stream(dets, cams, f.radius, f.dist_sq_floor, f.orientation_source)
    if tracker == "kalman":
        tracks = run(obs, cfg.tracker)
    elif tracker == "hungarian-baseline":
        tracks = baseline_hungarian_run(obs, cfg.tracker.gate)
    else:
        raise ValidationError(f"unknown tracker {tracker!r}")
    dest = io.ensure_dir(out) / "tracks.jsonl"
    io.write_tracks(dest, tracks)
    return dest


def cmd_evaluate(cfg: PipelineConfig, gt: Path, tracks: Path, out: Path) -> tuple[Path, Path]:
    m = cfg.metrics
    results = evaluate(io.read_gt(gt), io.read_tracks(tracks), m.gate, m.count_coasted, m.x_list, m.areas)
    out = io.ensure_dir(out)
    report = {
        "overall": results["overall"].to_dict(),
        "areas": {aid: rep.to_dict() for aid, rep in results["areas"].items()},
    }
    io.write_json(out / "report.json", report)
    table = format_table(results)
    (out / "report.txt").write_text(table, encoding="utf-8")
    return out / "report.json", out / "report.txt"


def _rp(pair):
    if pair is None:
        return None
    r, p = pair
    return {"r": r if math.isfinite(r) else None, "p": p if math.isfinite(p) else None}


def cmd_analyze(cfg: PipelineConfig, detections: Path, calibration: Path, gt: Path, out: Path) -> tuple[Path, Path]:
    cams = io.read_calibration(calibration)
    samples = collect_factor_samples(io.read_detections(detections), cams, io.read_gt(gt), cfg.metrics.gate)
    out = io.ensure_dir(out)
    with open(out / "factors.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["camera_id", "t", *FACTORS, "loc_err", "ori_err"])
        for s in samples:
            w.writerow([s.camera_id, s.t, *(repr(getattr(s.factors, k)) for k in FACTORS), repr(s.loc_err),
                        "" if s.ori_err is None else repr(s.ori_err)])
    corr = factor_analysis(samples)
    doc = {"samples": len(samples),
           "factors": {k: {"loc": _rp(v["loc"]), "ori": _rp(v["ori"])} for k, v in corr.items()}}
    io.write_json(out / "correlation.json", doc)
    return out / "factors.csv", out / "correlation.json"


# -- argument parsing --------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (only the simulator draws randomness)")
    p.add_argument("--config", type=Path, default=None, help="pipeline config JSON")
    p.add_argument("--out", type=Path, default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvtrack", description="Multi-camera pose tracking pipeline.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit per-camera homographies from 4 point pairs")
    p.add_argument("--points", type=Path)
    _common(p)

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    p.add_argument("--scenario", help=f"preset ({', '.join(PRESETS)}) or scenario JSON path")
    _common(p)

    p = sub.add_parser("preprocess", help="clean per-camera pose detections")
    p.add_argument("--detections", type=Path)
    p.add_argument("--calibration", type=Path)
    _common(p)

    p = sub.add_parser("track", help="localize, fuse and track")
    p.add_argument("--detections", type=Path)
    p.add_argument("--calibration", type=Path)
    p.add_argument("--tracker", choices=("kalman", "hungarian-baseline"), default="kalman")
    _common(p)

    p = sub.add_parser("evaluate", help="CLEAR MOT, identity and orientation metrics")
    p.add_argument("--gt", type=Path)
    p.add_argument("--tracks", type=Path)
    _common(p)

    p = sub.add_parser("analyze", help="correlate geometry factors with single-view errors")
    p.add_argument("--detections", type=Path)
    p.add_argument("--calibration", type=Path)
    p.add_argument("--gt", type=Path)
    _common(p)
    return ap


def _load_config(path: Optional[Path]) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    path = _require(path, "config")
    return config_from_dict(io.read_json(path), path.parent)


def _dispatch(args) -> list[str]:
    cfg = _load_config(args.config)

    def pick(name: str) -> Optional[Path]:
        v = getattr(args, name, None)
        return v if v is not None else cfg.path(name)

    out = args.out if args.out is not None else (cfg.path("out") or Path("."))
    cmd = args.command
    if cmd == "calibrate":
        written = [cmd_calibrate(_require(pick("points"), "points"), out)]
    elif cmd == "simulate":
        written = list(cmd_simulate(cfg, out, args.scenario, args.seed).values())
    elif cmd == "preprocess":
        written = [cmd_preprocess(cfg, _require(pick("detections"), "detections"),
                                  _require(pick("calibration"), "calibration"), out)]
    elif cmd == "track":
        written = [cmd_track(cfg, _require(pick("detections"), "detections"),
                             _require(pick("calibration"), "calibration"), out, args.tracker)]
    elif cmd == "evaluate":
        written = list(cmd_evaluate(cfg, _require(pick("gt"), "gt"), _require(pick("tracks"), "tracks"), out))
        sys.stdout.write(Path(written[1]).read_text(encoding="utf-8"))
    elif cmd == "analyze":
        written = list(cmd_analyze(cfg, _require(pick("detections"), "detections"),
                                   _require(pick("calibration"), "calibration"), _require(pick("gt"), "gt"), out))
    else:  # pragma: no cover - argparse rejects unknown commands
        raise ValidationError(f"unknown command {cmd!r}")
    return [str(p) for p in written]


def error_record(exc: BaseException) -> dict:
    rec = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("path", "line", "camera_id"):
        val = getattr(exc, attr, None)
        if val is not None:
            rec[attr] = val
    return rec


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        written = _dispatch(args)
    except ValidationError as exc:
        sys.stderr.write(json.dumps(error_record(exc)) + "\n")
        return EXIT_VALIDATION
    except (MvtrackError, ValueError, KeyError, OSError) as exc:
        sys.stderr.write(json.dumps(error_record(exc)) + "\n")
        return EXIT_RUNTIME
    for p in written:
        print(f"wrote {p}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
