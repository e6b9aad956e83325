from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mvtrack.errors import DegenerateVariance, DuplicateId, EmptyAccumulator, EmptyInput
from mvtrack.metrics import (
    MotAccumulator,
    accumulate_frame,
    accuracy_at,
    angular_error,
    evaluate,
    evaluate_tracks,
    finalize,
    format_table,
    pearson_r,
)
from mvtrack.model import GroundTruthRecord, Track, TrackState
from oracles import brute_idtp


def run_frames(frames, gate=1.5):
    """frames: list of (gt dict, hyp dict)."""
    acc = MotAccumulator(gate)
    for t, (g, h) in enumerate(frames):
        acc.update(t, g, h)
    return acc


def kinds(acc):
    return [(e[0], e[1]) for e in acc.events]


# -- gating and persistence -------------------------------------------------

def test_gate_boundary():
    rep = finalize(run_frames([({"a": (0, 0)}, {1: (1.4, 0)})]))
    assert (rep.matches, rep.fn, rep.fp) == (1, 0, 0)
    rep = finalize(run_frames([({"a": (0, 0)}, {1: (1.6, 0)})]))
    assert (rep.matches, rep.fn, rep.fp) == (0, 1, 1)


def test_existing_pair_persists_within_gate():
    frames = [({"a": (0, 0)}, {1: (x, 0)}) for x in (0.0, 0.5, 1.0)]
    frames.append(({"a": (0, 0)}, {1: (1.45, 0), 2: (0.2, 0)}))
    acc = run_frames(frames)
    assert acc.events[-2][:4] == (3, "MATCH", "a", 1)
    assert acc.events[-1][:4] == (3, "FP", None, 2)
    assert finalize(acc).ids == 0


def _hand_scenario():
    A, B, far = (0, 0), (10, 0), (50, 50)
    return [
        ({"A": A, "B": B}, {1: A, 2: B}),
        ({"A": A, "B": B}, {1: A, 2: B}),
        ({"A": A, "B": B}, {1: A}),
        ({"A": A, "B": B}, {1: A, 3: B}),
        ({"A": A, "B": B}, {3: B, 4: far}),
    ]


def test_hand_scenario_counts():
    acc = run_frames(_hand_scenario())
    rep = finalize(acc)
    assert (rep.gt, rep.fn, rep.fp, rep.ids, rep.matches) == (10, 2, 1, 1, 8)
    assert rep.mota == pytest.approx(0.6)
    assert rep.motp == pytest.approx(0.0)
    assert rep.frag == 1
    assert rep.mt == 2 and rep.ml == 0  # both covered 4 of 5 frames
    assert rep.recall == pytest.approx(0.8)
    assert rep.precision == pytest.approx(8 / 9)
    assert rep.idtp == brute_idtp(acc.pair_frames, acc.gt_frames, acc.hyp_frames) == 6
    assert rep.idf1 == pytest.approx(12 / 19)
    assert rep.fpr == pytest.approx(1 / 5) and rep.fnr == pytest.approx(2 / 5)
    assert rep.idsr == pytest.approx(1 / 0.8)


def test_identity_swap_counts_two_switches():
    A, B = (0, 0), (5, 0)
    frames = [({"A": A, "B": B}, {1: A, 2: B})] * 3 + [({"A": A, "B": B}, {1: B, 2: A})] * 3
    acc = run_frames(frames)
    rep = finalize(acc)
    assert rep.ids == 2
    assert rep.idtp == brute_idtp(acc.pair_frames, acc.gt_frames, acc.hyp_frames) == 6
    assert rep.idf1 == pytest.approx(0.5)


def test_empty_accumulator():
    with pytest.raises(EmptyAccumulator):
        finalize(MotAccumulator())


def test_duplicate_ids_rejected():
    g = GroundTruthRecord(0, "a", (0, 0), 0.0)
    with pytest.raises(DuplicateId):
        accumulate_frame(MotAccumulator(), [g, g], [], 0)
    s = TrackState(0, (0, 0), (0, 0), (0, 1))
    with pytest.raises(DuplicateId):
        accumulate_frame(MotAccumulator(), [], [(1, s), (1, s)], 0)


# -- properties --------------------------------------------------------------

pt = st.tuples(st.integers(0, 6).map(float), st.integers(0, 3).map(float))
frame_st = st.tuples(
    st.dictionaries(st.sampled_from("abcd"), pt, max_size=4),
    st.dictionaries(st.integers(0, 5), pt, max_size=4),
)


@settings(max_examples=300, deadline=None)
@given(st.lists(frame_st, min_size=1, max_size=8))
def test_metric_identities(frames):
    acc = run_frames(frames)
    rep = finalize(acc)
    assert rep.matches + rep.fn == rep.gt
    assert rep.matches + rep.fp == sum(len(h) for _, h in frames)
    if rep.gt:
        assert rep.mota + (rep.fn + rep.fp + rep.ids) / rep.gt == pytest.approx(1.0)
        assert rep.recall == pytest.approx(rep.matches / rep.gt)
    if rep.matches + rep.fp:
        assert rep.precision == pytest.approx(rep.matches / (rep.matches + rep.fp))
    assert rep.ids <= rep.matches
    assert 0 <= rep.idtp <= min(sum(acc.gt_frames.values()), sum(acc.hyp_frames.values()))
    assert rep.idtp == brute_idtp(acc.pair_frames, acc.gt_frames, acc.hyp_frames)
    if rep.motp is not None:
        assert 0 <= rep.motp <= acc.gate


@settings(max_examples=200, deadline=None)
@given(st.lists(frame_st, min_size=1, max_size=8), st.permutations(range(6)))
def test_renaming_hypotheses_changes_nothing(frames, perm):
    # renaming must keep the same sort order so tie-breaks are unchanged
    rename = {h: 100 + h for h in range(6)}
    renamed = [(g, {rename[h]: p for h, p in hs.items()}) for g, hs in frames]
    a, b = finalize(run_frames(frames)), finalize(run_frames(renamed))
    for k in ("mota", "motp", "ids", "fn", "fp", "frag", "idtp", "mt", "ml"):
        va, vb = getattr(a, k), getattr(b, k)
        assert va == vb or (isinstance(va, float) and math.isnan(va) and math.isnan(vb))


# -- orientation ---------------------------------------------------------------

@pytest.mark.parametrize("p, g, e", [(350, 10, 20), (90, 90, 0), (0, 180, 180), (10, 350, 20), (720, 0, 0)])
def test_angular_error(p, g, e):
    assert angular_error(p, g) == pytest.approx(e)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 360, exclude_max=True), st.floats(0, 360, exclude_max=True))
def test_angular_error_range_and_symmetry(a, b):
    e = angular_error(a, b)
    assert 0 <= e <= 180
    assert e == pytest.approx(angular_error(b, a))


def test_accuracy_examples():
    assert accuracy_at([10, 50, 100], 45) == pytest.approx(1 / 3)
    assert accuracy_at([10, 50, 100], 180) == 1.0
    assert accuracy_at([10, 50, 100], 50) == pytest.approx(2 / 3)
    with pytest.raises(EmptyInput):
        accuracy_at([], 10)
    with pytest.raises(ValueError):
        accuracy_at([1.0], 181)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 180), min_size=1, max_size=30), st.floats(0, 180), st.floats(0, 180))
def test_accuracy_monotone(errs, x1, x2):
    lo, hi = sorted((x1, x2))
    assert accuracy_at(errs, lo) <= accuracy_at(errs, hi)


# -- correlation -------------------------------------------------------------

def test_pearson_examples():
    assert pearson_r([1, 2, 3, 4], [2, 4, 6, 8])[0] == pytest.approx(1.0)
    assert pearson_r([1, 2, 3, 4], [8, 6, 4, 2])[0] == pytest.approx(-1.0)
    # by hand: Sxy = 5.5, Sxx = 5, Syy = 8.75
    assert pearson_r([1, 2, 3, 4], [1, 3, 2, 5])[0] == pytest.approx(5.5 / math.sqrt(5 * 8.75))
    with pytest.raises(DegenerateVariance):
        pearson_r([1, 1, 1], [1, 2, 3])


def test_pearson_matches_scipy():
    rng = np.random.default_rng(0)
    for n in (5, 20, 200):
        x = rng.normal(size=n)
        y = 0.3 * x + rng.normal(size=n)
        r, p = pearson_r(x, y)
        ref = stats.pearsonr(x, y)
        assert r == pytest.approx(ref[0], abs=1e-12)
        assert p == pytest.approx(ref[1], rel=1e-6)


# -- track level ---------------------------------------------------------------

def _track(tid, points, observed=None):
    observed = observed or [True] * len(points)
    return Track(tid, tuple(TrackState(t, p, (0, 0), (0, 1), observed=o)
                            for (t, p), o in zip(points, observed)))


def test_coasted_states_optional():
    gt = [GroundTruthRecord(t, "a", (0, 0), 0.0) for t in range(3)]
    trk = _track(0, [(t, (0, 0)) for t in range(3)], [True, False, True])
    assert evaluate_tracks(gt, [trk]).fn == 0
    assert evaluate_tracks(gt, [trk], count_coasted=False).fn == 1


def test_per_area_reports():
    gt = [GroundTruthRecord(t, "a", (1, 1), 0.0) for t in range(3)] + \
         [GroundTruthRecord(t, "b", (11, 1), 90.0) for t in range(3)]
    tracks = [_track(0, [(t, (1, 1)) for t in range(3)])]
    res = evaluate(gt, tracks, areas={"west": [0, 0, 5, 5], "east": [10, 0, 15, 5]})
    assert res["overall"].mota == pytest.approx(0.5)
    assert res["areas"]["west"].mota == 1.0
    assert res["areas"]["east"].mota == 0.0
    # orientation error: north-facing track vs gt at 0 degrees
    assert res["areas"]["west"].orientation.mae_deg == pytest.approx(0.0)
    table = format_table(res)
    assert table.splitlines()[0].split()[:2] == ["area", "MOTA"]
    assert len(table.splitlines()) == 4
