"""Tracking, localization and orientation evaluation."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .assignment import INFEASIBLE, solve
from .errors import DegenerateVariance, DuplicateId, EmptyAccumulator, EmptyInput
from .geometry import CameraModel, GeometryFactors, foot_point, geometry_factors
from .model import GroundTruthRecord, PoseDetection, Track, deg_to_vec, vec_to_deg

DEFAULT_GATE = 1.5
DEFAULT_X_LIST = (5.0, 15.0, 22.5, 30.0, 45.0, 90.0)


def angular_error(pred_deg: float, gt_deg: float) -> float:
    d = abs(pred_deg - gt_deg) % 360.0
    return min(d, 360.0 - d)


def accuracy_at(errors: Sequence[float], x: float) -> float:
    if not 0.0 <= x <= 180.0:
        raise ValueError("x must lie in [0, 180]")
    if len(errors) == 0:
        raise EmptyInput("accuracy of an empty error list is undefined")
    return sum(1 for e in errors if e <= x) / len(errors)


@dataclass
class MotAccumulator:
    """CLEAR-MOT event log plus the counts needed for identity metrics.

    Events are tuples ``(t, kind, gt_id, hyp_id, dist)``; an ID switch is
    logged as an extra ``IDS`` event next to its ``MATCH``.
    """

    gate: float = DEFAULT_GATE
    events: list = field(default_factory=list)
    frames: int = 0
    prev_pairs: dict = field(default_factory=dict)  # gt -> hyp at t-1
    last_match: dict = field(default_factory=dict)  # gt -> most recent hyp
    gt_frames: Counter = field(default_factory=Counter)
    gt_matched: Counter = field(default_factory=Counter)
    hyp_frames: Counter = field(default_factory=Counter)
    pair_frames: Counter = field(default_factory=Counter)  # (gt, hyp) within gate
    frag: Counter = field(default_factory=Counter)
    # per gt: None never tracked, True tracked, False lost after tracking
    _state: dict = field(default_factory=dict)
    orientation_errors: list = field(default_factory=list)
    totals: Counter = field(default_factory=Counter)

    def update(self, t: int, gt: Mapping, hyp: Mapping,
               gt_orientation: Optional[Mapping] = None, hyp_orientation: Optional[Mapping] = None) -> None:
        """Add one frame. ``gt`` and ``hyp`` map ids to (x, y) locations."""
        gate = self.gate
        g_ids = sorted(gt, key=str)
        h_ids = sorted(hyp, key=str)
        gt_xy = {g: tuple(map(float, gt[g])) for g in g_ids}
        hyp_xy = {h: tuple(map(float, hyp[h])) for h in h_ids}

        matches: dict = {}
        for g, h in sorted(self.prev_pairs.items(), key=lambda kv: str(kv[0])):
            if g in gt_xy and h in hyp_xy and math.dist(gt_xy[g], hyp_xy[h]) <= gate:
                matches[g] = h
        rest_g = [g for g in g_ids if g not in matches]
        taken = set(matches.values())
        rest_h = [h for h in h_ids if h not in taken]
        if rest_g and rest_h:
            c = np.array([[math.dist(gt_xy[g], hyp_xy[h]) for h in rest_h] for g in rest_g])
            c = np.where(c > gate, INFEASIBLE, c)
            for i, j in solve(c).pairs:
                matches[rest_g[i]] = rest_h[j]

        for g in g_ids:
            self.gt_frames[g] += 1
            h = matches.get(g)
            if h is None:
                self.events.append((t, "FN", g, None, None))
                self.totals["FN"] += 1
                self._mark(g, False)
                continue
            d = math.dist(gt_xy[g], hyp_xy[h])
            self.events.append((t, "MATCH", g, h, d))
            self.totals["MATCH"] += 1
            self.totals["DIST"] += d
            self.gt_matched[g] += 1
            old = self.last_match.get(g)
            if old is not None and old != h:
                self.events.append((t, "IDS", g, (old, h), None))
                self.totals["IDS"] += 1
            self.last_match[g] = h
            self._mark(g, True)
            if gt_orientation is not None and hyp_orientation is not None:
                go, ho = gt_orientation.get(g), hyp_orientation.get(h)
                if go is not None and ho is not None:
                    self.orientation_errors.append(angular_error(ho, go))
        matched_h = set(matches.values())
        for h in h_ids:
            self.hyp_frames[h] += 1
            if h not in matched_h:
                self.events.append((t, "FP", None, h, None))
                self.totals["FP"] += 1
        for g in g_ids:
            for h in h_ids:
                if math.dist(gt_xy[g], hyp_xy[h]) <= gate:
                    self.pair_frames[(g, h)] += 1

        self.totals["GT"] += len(g_ids)
        self.prev_pairs = matches
        self.frames += 1

    def _mark(self, g, tracked: bool) -> None:
        state = self._state.get(g)
        if tracked:
            if state is False:
                self.frag[g] += 1
            self._state[g] = True
        elif state is True:
            self._state[g] = False


def _id_global_match(acc: MotAccumulator) -> int:
    """Maximum total identity-consistent frames over one-to-one gt/hyp pairings."""
    g_ids = sorted(acc.gt_frames, key=str)
    h_ids = sorted(acc.hyp_frames, key=str)
    if not g_ids or not h_ids:
        return 0
    counts = np.array([[acc.pair_frames.get((g, h), 0) for h in h_ids] for g in g_ids], dtype=float)
    res = solve(counts.max() - counts)
    return int(sum(counts[i, j] for i, j in res.pairs))


@dataclass
class OrientationReport:
    mae_deg: Optional[float]
    acc_at: dict
    count: int


@dataclass
class EvalReport:
    frames: int
    gt: int
    matches: int
    fn: int
    fp: int
    ids: int
    motp: Optional[float]
    mota: float
    idf1: float
    idtp: int
    idfp: int
    idfn: int
    mt: int
    mt_ratio: float
    ml: int
    ml_ratio: float
    fpr: float
    fnr: float
    recall: float
    precision: float
    idsr: Optional[float]
    frag: int
    num_gt_ids: int
    orientation: Optional[OrientationReport] = None
    factor_samples: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("factor_samples")
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None
        if d["orientation"] is not None:
            d["orientation"]["acc_at"] = {_fmt_x(x): r for x, r in self.orientation.acc_at.items()}
        return d


def _fmt_x(x: float) -> str:
    return f"{x:g}"


def orientation_summary(errors: Sequence[float], x_list: Sequence[float] = DEFAULT_X_LIST) -> OrientationReport:
    if not errors:
        return OrientationReport(None, {}, 0)
    return OrientationReport(
        float(np.mean(errors)), {float(x): accuracy_at(errors, x) for x in x_list}, len(errors)
    )


def finalize(acc: MotAccumulator, x_list: Sequence[float] = DEFAULT_X_LIST) -> EvalReport:
    if acc.frames == 0:
        raise EmptyAccumulator("no frames accumulated")
    tot = acc.totals
    gt, fn, fp, ids, m = tot["GT"], tot["FN"], tot["FP"], tot["IDS"], tot["MATCH"]
    mota = 1.0 - (fn + fp + ids) / gt if gt else float("nan")
    motp = tot["DIST"] / m if m else None
    recall = m / gt if gt else float("nan")
    precision = m / (m + fp) if (m + fp) else float("nan")
    if ids == 0:
        idsr = 0.0
    else:
        idsr = ids / recall if recall else float("inf")

    idtp = _id_global_match(acc)
    n_gt_dets = sum(acc.gt_frames.values())
    n_hyp_dets = sum(acc.hyp_frames.values())
    idfn, idfp = n_gt_dets - idtp, n_hyp_dets - idtp
    idf1 = 2 * idtp / (2 * idtp + idfp + idfn) if (idtp + idfp + idfn) else float("nan")

    n_ids = len(acc.gt_frames)
    cover = {g: acc.gt_matched[g] / acc.gt_frames[g] for g in acc.gt_frames}
    mt = sum(1 for r in cover.values() if r >= 0.8)
    ml = sum(1 for r in cover.values() if r <= 0.2)
    return EvalReport(
        frames=acc.frames,
        gt=gt,
        matches=m,
        fn=fn,
        fp=fp,
        ids=ids,
        motp=motp,
        mota=mota,
        idf1=idf1,
        idtp=idtp,
        idfp=idfp,
        idfn=idfn,
        mt=mt,
        mt_ratio=mt / n_ids if n_ids else float("nan"),
        ml=ml,
        ml_ratio=ml / n_ids if n_ids else float("nan"),
        fpr=fp / acc.frames,
        fnr=fn / acc.frames,
        recall=recall,
        precision=precision,
        idsr=idsr,
        frag=sum(acc.frag.values()),
        num_gt_ids=n_ids,
        orientation=orientation_summary(acc.orientation_errors, x_list),
    )


def _check_unique(ids: Iterable, side: str, t: int) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise DuplicateId(f"duplicate {side} id {i!r} at frame {t}")
        seen.add(i)


def accumulate_frame(acc: MotAccumulator, gt: Sequence[GroundTruthRecord], hyp: Sequence, t: Optional[int] = None,
                     gate: Optional[float] = None) -> MotAccumulator:
    """Add one frame of ground truth records and hypothesis ``(track_id, TrackState)`` pairs."""
    if gate is not None:
        acc.gate = gate
    if t is None:
        ts = {r.t for r in gt} | {s.t for _, s in hyp}
        if len(ts) > 1:
            raise ValueError("records span several frames")
        t = ts.pop() if ts else acc.frames
    _check_unique([r.person_id for r in gt], "gt", t)
    _check_unique([h for h, _ in hyp], "hypothesis", t)
    acc.update(
        t,
        {r.person_id: r.location for r in gt},
        {h: s.L for h, s in hyp},
        {r.person_id: r.orientation_deg for r in gt},
        {h: s.orientation_deg for h, s in hyp},
    )
    return acc


def hypotheses_by_frame(tracks: Iterable[Track], count_coasted: bool = True) -> dict[int, list]:
    out = defaultdict(list)
    for tr in tracks:
        for s in tr.states:
            if s.observed or count_coasted:
                out[s.t].append((tr.track_id, s))
    return out


def area_of(location, areas: Optional[Mapping[str, Sequence[float]]]) -> Optional[str]:
    """First area id (lexicographic) whose [xmin, ymin, xmax, ymax] contains the point."""
    if not areas:
        return None
    for aid in sorted(areas):
        x0, y0, x1, y1 = areas[aid]
        if x0 <= location[0] <= x1 and y0 <= location[1] <= y1:
            return aid
    return None


def evaluate_tracks(gt_records: Iterable[GroundTruthRecord], tracks: Iterable[Track], gate: float = DEFAULT_GATE,
                    count_coasted: bool = True, x_list: Sequence[float] = DEFAULT_X_LIST,
                    area_filter: Optional[str] = None,
                    areas: Optional[Mapping[str, Sequence[float]]] = None) -> EvalReport:
    gt_by_t = defaultdict(list)
    for r in gt_records:
        if area_filter is None or area_of(r.location, areas) == area_filter:
            gt_by_t[r.t].append(r)
    hyp_by_t = hypotheses_by_frame(tracks, count_coasted)
    if area_filter is not None:
        hyp_by_t = {
            t: [(h, s) for h, s in hs if area_of(s.L, areas) == area_filter] for t, hs in hyp_by_t.items()
        }
    frames = set(gt_by_t) | {t for t, hs in hyp_by_t.items() if hs}
    acc = MotAccumulator(gate)
    if frames:
        for t in range(min(frames), max(frames) + 1):
            accumulate_frame(acc, gt_by_t.get(t, []), hyp_by_t.get(t, []), t)
    return finalize(acc, x_list)


def evaluate(gt_records: Sequence[GroundTruthRecord], tracks: Sequence[Track], gate: float = DEFAULT_GATE,
             count_coasted: bool = True, x_list: Sequence[float] = DEFAULT_X_LIST,
             areas: Optional[Mapping[str, Sequence[float]]] = None) -> dict:
    """Overall report plus one report per configured area."""
    gt_records, tracks = list(gt_records), list(tracks)
    out = {"overall": evaluate_tracks(gt_records, tracks, gate, count_coasted, x_list), "areas": {}}
    for aid in sorted(areas or {}):
        try:
            out["areas"][aid] = evaluate_tracks(gt_records, tracks, gate, count_coasted, x_list, aid, areas)
        except EmptyAccumulator:
            continue
    return out


TABLE_COLUMNS = (
    ("MOTA", "mota", "{:.3f}"), ("MOTP", "motp", "{:.3f}"), ("IDF1", "idf1", "{:.3f}"),
    ("MT", "mt", "{:d}"), ("ML", "ml", "{:d}"), ("FPR", "fpr", "{:.3f}"), ("FNR", "fnr", "{:.3f}"),
    ("Rcll", "recall", "{:.3f}"), ("Prcn", "precision", "{:.3f}"), ("IDS", "ids", "{:d}"),
    ("IDSR", "idsr", "{:.3f}"), ("Frag", "frag", "{:d}"),
)


def format_table(results: Mapping) -> str:
    """Aligned plain-text table, one row per area and one overall row."""
    rows = [(aid, rep) for aid, rep in sorted(results.get("areas", {}).items())]
    rows.append(("overall", results["overall"]))
    header = ["area"] + [c[0] for c in TABLE_COLUMNS] + ["MAE"]
    body = []
    for name, rep in rows:
        cells = [name]
        for _, attr, fmt in TABLE_COLUMNS:
            v = getattr(rep, attr)
            cells.append("-" if v is None or (isinstance(v, float) and not math.isfinite(v)) else fmt.format(v))
        ori = rep.orientation
        cells.append("-" if ori is None or ori.mae_deg is None else f"{ori.mae_deg:.2f}")
        body.append(cells)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in [header] + body]
    return "\n".join(lines) + "\n"


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Sample correlation and two-sided p-value (t distribution, n-2 dof)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D and equally long")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 samples")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx <= 0.0 or syy <= 0.0:
        raise DegenerateVariance("one of the inputs has zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    tstat = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(stats.t.sf(abs(tstat), n - 2))
    return r, p


@dataclass(frozen=True)
class FactorSample:
    camera_id: str
    t: int
    factors: GeometryFactors
    loc_err: float
    ori_err: Optional[float]


FACTORS = ("distance", "facing_angle_deg", "h_norm", "v_norm")


def collect_factor_samples(detections: Iterable[PoseDetection], cameras: Mapping[str, CameraModel],
                           gt_records: Iterable[GroundTruthRecord], gate: float = DEFAULT_GATE) -> list[FactorSample]:
    """Match every single-camera sample to ground truth and record its geometry.

    Matching is gated Hungarian per (camera, frame).
    """
    from .fusion import localize

    gt_by_t = defaultdict(list)
    for r in gt_records:
        gt_by_t[r.t].append(r)
    per = defaultdict(list)
    for det in detections:
        per[(det.camera_id, det.t)].append(det)
    out = []
    for (cam_id, t) in sorted(per):
        cam = cameras[cam_id]
        views = [(d, localize(d, cam)) for d in per[(cam_id, t)]]
        views = [(d, s) for d, s in views if s is not None]
        gts = gt_by_t.get(t, [])
        if not views or not gts:
            continue
        c = np.array([[math.dist(s.location, g.location) for g in gts] for _, s in views])
        c = np.where(c > gate, INFEASIBLE, c)
        for i, j in solve(c).pairs:
            det, s = views[i]
            g = gts[j]
            f = geometry_factors(cam, g.location, deg_to_vec(g.orientation_deg), foot_point(det.pose))
            ori = None if s.orientation is None else angular_error(vec_to_deg(s.orientation), g.orientation_deg)
            out.append(FactorSample(cam_id, t, f, float(c[i, j]), ori))
    return out


def factor_analysis(samples: Sequence[FactorSample]) -> dict:
    """Pearson (r, p) of each geometry factor against localization and orientation error."""
    if len(samples) < 3:
        raise ValueError("need at least 3 matched samples")
    out = {}
    loc = [s.loc_err for s in samples]
    with_ori = [s for s in samples if s.ori_err is not None]
    for name in FACTORS:
        xs = [getattr(s.factors, name) for s in samples]
        entry = {"loc": pearson_r(xs, loc)}
        if len(with_ori) >= 3:
            entry["ori"] = pearson_r([getattr(s.factors, name) for s in with_ori], [s.ori_err for s in with_ori])
        else:
            entry["ori"] = None
        out[name] = entry
    return out
