"""World-space multi-person tracking.

:class:`KalmanTracker` is the proposed tracker. It keeps a constant-velocity
Kalman filter on location, advances orientation with the walking direction,
and RTS-smooths finished tracks. :func:`baseline_hungarian_run` is the
frame-to-frame Hungarian linker it is compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .assignment import INFEASIBLE, solve
from .errors import NonMonotonicTime
from .filtering import (
    WORLD_ACCEL_SIGMA,
    WORLD_INIT_VEL_SIGMA,
    WORLD_MEAS_SIGMA,
    LinearCVModel,
    TrackFilter,
)
from .model import Track, TrackState, WorldObservation

NORTH = (0.0, 1.0)


@dataclass(frozen=True)
class TrackerConfig:
    gate: float = 1.5
    max_coast: int = 10
    w_motion: float = 0.1
    dt: float = 1.0
    process_accel_sigma: float = WORLD_ACCEL_SIGMA
    measurement_sigma: float = WORLD_MEAS_SIGMA
    init_velocity_sigma: float = WORLD_INIT_VEL_SIGMA
    # "normalized": motion term uses the unit walking direction, dropped
    # below min_speed; "literal": raw velocity vector
    orientation_mode: str = "normalized"
    min_speed: float = 0.05
    orientation_blend: float = 0.7

    def __post_init__(self):
        if self.gate <= 0:
            raise ValueError("gate must be positive")
        if self.max_coast < 0:
            raise ValueError("max_coast must be >= 0")
        if self.w_motion < 0:
            raise ValueError("w_motion must be >= 0")
        if self.orientation_mode not in ("normalized", "literal"):
            raise ValueError(f"unknown orientation_mode {self.orientation_mode!r}")

    @property
    def kalman(self) -> LinearCVModel:
        return LinearCVModel(2, self.dt, self.process_accel_sigma, self.measurement_sigma)


def advance_orientation(o, l_dot, o_dot, w: float = 0.1, dt: float = 1.0,
                        mode: str = "normalized", min_speed: float = 0.05) -> tuple[float, float]:
    """One-step orientation prediction ``O + w * motion + dt * O_dot``, renormalized."""
    if mode == "literal":
        mx, my = l_dot[0], l_dot[1]
    else:
        speed = math.hypot(l_dot[0], l_dot[1])
        if speed > min_speed:
            mx, my = l_dot[0] / speed, l_dot[1] / speed
        else:
            mx = my = 0.0
    x = o[0] + w * mx + dt * o_dot[0]
    y = o[1] + w * my + dt * o_dot[1]
    n = math.hypot(x, y)
    if n < 1e-12:
        return (o[0], o[1])
    return (x / n, y / n)


def slerp2(a, b, frac: float) -> tuple[float, float]:
    """Rotate unit vector ``a`` toward ``b`` by ``frac`` of the angle between them."""
    ang = math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1])
    if ang == -math.pi:
        ang = math.pi
    r = frac * ang
    c, s = math.cos(r), math.sin(r)
    x, y = a[0] * c - a[1] * s, a[0] * s + a[1] * c
    n = math.hypot(x, y)
    return (x / n, y / n)


@dataclass
class _LiveTrack:
    track_id: int
    start_t: int
    filter: TrackFilter
    orientations: list  # (O, O_dot) per step
    has_orientation: bool
    coasts: int = 0

    @property
    def velocity(self) -> tuple[float, float]:
        m = self.filter.current.mean
        return (float(m[2]), float(m[3]))

    def finish(self) -> Track:
        observed = self.filter.observed
        last = max(i for i, o in enumerate(observed) if o)
        self.filter.trim(last)
        beliefs = self.filter.smooth()
        states = []
        for k, b in enumerate(beliefs):
            o, o_dot = self.orientations[k]
            states.append(
                TrackState(
                    t=self.start_t + k,
                    L=(float(b.mean[0]), float(b.mean[1])),
                    L_dot=(float(b.mean[2]), float(b.mean[3])),
                    O=o,
                    O_dot=o_dot,
                    covariance=b.cov,
                    observed=bool(self.filter.observed[k]),
                )
            )
        return Track(self.track_id, tuple(states), "finished")


ObsStream = Union[Mapping[int, Sequence[WorldObservation]], Iterable[WorldObservation]]


def frames_of(stream: ObsStream) -> dict[int, list[WorldObservation]]:
    if isinstance(stream, Mapping):
        frames = {int(t): list(v) for t, v in stream.items()}
    else:
        frames = {}
        for ob in stream:
            frames.setdefault(ob.t, []).append(ob)
    for t in frames:
        frames[t].sort(key=lambda ob: (ob.location, sorted(ob.source_cameras)))
    return frames


class KalmanTracker:
    """Sequential tracker state machine. Feed one frame at a time to :meth:`step`."""

    def __init__(self, config: TrackerConfig = TrackerConfig()):
        self.config = config
        self.model = config.kalman
        self.live: list[_LiveTrack] = []
        self.finished: list[Track] = []
        self.t: Optional[int] = None
        self._next_id = 0

    def _predict_orientation(self, trk: _LiveTrack) -> tuple[float, float]:
        cfg = self.config
        o, o_dot = trk.orientations[-1]
        return advance_orientation(o, trk.velocity, o_dot, cfg.w_motion, cfg.dt, cfg.orientation_mode, cfg.min_speed)

    def step(self, t: int, observations: Sequence[WorldObservation]) -> None:
        if self.t is not None and t != self.t + 1:
            raise NonMonotonicTime(f"expected frame {self.t + 1}, got {t}")
        self.t = t
        cfg = self.config
        obs = list(observations)

        preds = [trk.filter.peek().mean[:2] for trk in self.live]
        if preds and obs:
            p = np.array(preds)
            q = np.array([ob.location for ob in obs], dtype=float)
            cost = np.linalg.norm(p[:, None] - q[None], axis=-1)
            cost = np.where(cost > cfg.gate, INFEASIBLE, cost)
            res = solve(cost)
            pairs, lost, fresh = res.pairs, res.unmatched_rows, res.unmatched_cols
        else:
            pairs, lost, fresh = (), tuple(range(len(self.live))), tuple(range(len(obs)))

        for i, j in pairs:
            trk, ob = self.live[i], obs[j]
            o_prev = trk.orientations[-1][0]
            o_pred = self._predict_orientation(trk)
            trk.filter.measure(ob.location)
            if ob.orientation is None:
                o_new, o_dot = o_pred, (0.0, 0.0)
            else:
                if trk.has_orientation:
                    o_new = slerp2(o_pred, ob.orientation, cfg.orientation_blend)
                else:
                    o_new = ob.orientation
                    trk.has_orientation = True
                o_dot = (o_new[0] - o_prev[0], o_new[1] - o_prev[1])
            trk.orientations.append((o_new, o_dot))
            trk.coasts = 0

        lost_set = set(lost)
        survivors = []
        for i, trk in enumerate(self.live):
            if i not in lost_set:
                survivors.append(trk)
            elif trk.coasts < cfg.max_coast:
                o_pred = self._predict_orientation(trk)
                trk.filter.coast()
                trk.orientations.append((o_pred, (0.0, 0.0)))
                trk.coasts += 1
                survivors.append(trk)
            else:
                self.finished.append(trk.finish())
        self.live = survivors

        for j in fresh:
            ob = obs[j]
            tf = TrackFilter.start(self.model, ob.location, cfg.init_velocity_sigma)
            o = ob.orientation if ob.orientation is not None else NORTH
            self.live.append(
                _LiveTrack(self._next_id, t, tf, [(o, (0.0, 0.0))], ob.orientation is not None)
            )
            self._next_id += 1

    def close(self) -> list[Track]:
        """Finish every live track and return all tracks by id."""
        for trk in self.live:
            self.finished.append(trk.finish())
        self.live = []
        return sorted(self.finished, key=lambda tr: tr.track_id)


def run(obs_stream: ObsStream, config: TrackerConfig = TrackerConfig()) -> list[Track]:
    frames = frames_of(obs_stream)
    tracker = KalmanTracker(config)
    if not frames:
        return []
    for t in range(min(frames), max(frames) + 1):
        tracker.step(t, frames.get(t, []))
    return tracker.close()


@dataclass
class _Chain:
    track_id: int
    points: dict = field(default_factory=dict)  # t -> (loc, orientation or None, observed)

    @property
    def last_t(self) -> int:
        return max(self.points)

    def last_loc(self):
        return self.points[self.last_t][0]


def baseline_hungarian_run(obs_stream: ObsStream, gate: float = 1.5) -> list[Track]:
    """Frame-to-frame gated Hungarian linking without motion modelling.

    A chain missing exactly one frame is re-linked at the next frame (with
    the gate scaled to the two-frame span) and the gap is linearly
    interpolated. Chains missing two frames end.
    """
    frames = frames_of(obs_stream)
    chains: list[_Chain] = []
    done: list[_Chain] = []
    next_id = 0
    if frames:
        for t in range(min(frames), max(frames) + 1):
            obs = frames.get(t, [])
            free = list(range(len(obs)))
            for lag in (1, 2):
                cands = [c for c in chains if c.last_t == t - lag]
                if not cands or not free:
                    continue
                p = np.array([c.last_loc() for c in cands], dtype=float)
                q = np.array([obs[j].location for j in free], dtype=float)
                cost = np.linalg.norm(p[:, None] - q[None], axis=-1)
                cost = np.where(cost > lag * gate, INFEASIBLE, cost)
                res = solve(cost)
                taken = set()
                for i, jj in res.pairs:
                    c, ob = cands[i], obs[free[jj]]
                    if lag == 2:
                        a = c.last_loc()
                        mid = ((a[0] + ob.location[0]) / 2, (a[1] + ob.location[1]) / 2)
                        c.points[t - 1] = (mid, None, False)
                    c.points[t] = (ob.location, ob.orientation, True)
                    taken.add(jj)
                free = [j for k, j in enumerate(free) if k not in taken]
            still = []
            for c in chains:
                (still if c.last_t >= t - 1 else done).append(c)
            chains = still
            for j in free:
                ob = obs[j]
                chains.append(_Chain(next_id, {t: (ob.location, ob.orientation, True)}))
                next_id += 1
    done.extend(chains)
    return [_chain_to_track(c) for c in sorted(done, key=lambda c: c.track_id)]


def _chain_to_track(c: _Chain) -> Track:
    states = []
    prev_loc = None
    o = NORTH
    for t in sorted(c.points):
        loc, ori, observed = c.points[t]
        vel = (0.0, 0.0) if prev_loc is None else (loc[0] - prev_loc[0], loc[1] - prev_loc[1])
        o_prev = o
        if ori is not None:
            o = ori
        o_dot = (o[0] - o_prev[0], o[1] - o_prev[1])
        states.append(TrackState(t, loc, vel, o, o_dot, np.zeros((4, 4)), observed))
        prev_loc = loc
    return Track(c.track_id, tuple(states), "finished")
