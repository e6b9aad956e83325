"""Linear constant-velocity Kalman filter and Rauch-Tung-Striebel smoother.

The state of a model with ``dim`` positions is ``[p_1..p_d, v_1..v_d]``.
Axes are independent: F, Q, H and R are all block-structured per axis, so a
diagonal initial covariance stays separable across axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import NumericalBreakdown

WORLD_ACCEL_SIGMA = 0.5  # m/s^2
WORLD_MEAS_SIGMA = 0.5  # m
WORLD_INIT_VEL_SIGMA = 1.42  # m/s, brisk walking pace
PIXEL_ACCEL_SIGMA = 50.0  # px/s^2
PIXEL_MEAS_SIGMA = 5.0  # px


@dataclass(frozen=True)
class LinearCVModel:
    dim: int
    dt: float = 1.0
    process_accel_sigma: float = WORLD_ACCEL_SIGMA
    measurement_sigma: float = WORLD_MEAS_SIGMA

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.dt <= 0 or self.process_accel_sigma <= 0 or self.measurement_sigma <= 0:
            raise ValueError("dt and sigmas must be positive")

    @cached_property
    def F(self) -> np.ndarray:
        d = self.dim
        f = np.eye(2 * d)
        f[:d, d:] = self.dt * np.eye(d)
        return f

    @cached_property
    def Q(self) -> np.ndarray:
        # discrete white-noise acceleration, per axis
        d, dt = self.dim, self.dt
        s2 = self.process_accel_sigma**2
        q = np.zeros((2 * d, 2 * d))
        eye = np.eye(d)
        q[:d, :d] = dt**4 / 4 * eye
        q[:d, d:] = q[d:, :d] = dt**3 / 2 * eye
        q[d:, d:] = dt**2 * eye
        return s2 * q

    @property
    def R_var(self) -> float:
        return self.measurement_sigma**2

    def transition(self, steps: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """F and Q for ``steps`` consecutive predictions."""
        f, q = np.eye(2 * self.dim), np.zeros((2 * self.dim, 2 * self.dim))
        for _ in range(steps):
            f = self.F @ f
            q = self.F @ q @ self.F.T + self.Q
        return f, q


@dataclass(frozen=True, eq=False)
class BeliefState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float))


def _sym(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def initial_belief(model: LinearCVModel, z, velocity_sigma: float) -> BeliefState:
    """Position at ``z``, zero velocity, diagonal covariance."""
    d = model.dim
    z = np.asarray(z, dtype=float).reshape(d)
    mean = np.concatenate([z, np.zeros(d)])
    cov = np.diag(np.concatenate([np.full(d, model.R_var), np.full(d, velocity_sigma**2)]))
    return BeliefState(mean, cov)


def predict(model: LinearCVModel, b: BeliefState) -> BeliefState:
    f = model.F
    return BeliefState(f @ b.mean, _sym(f @ b.cov @ f.T + model.Q))


def update(model: LinearCVModel, b: BeliefState, z, mask: Optional[Sequence[bool]] = None) -> BeliefState:
    """Kalman update with ``H = [I, 0]``.

    ``mask`` restricts the update to the observed position components.
    """
    d = model.dim
    z = np.asarray(z, dtype=float).reshape(d)
    idx = np.arange(d) if mask is None else np.flatnonzero(np.asarray(mask, dtype=bool))
    if idx.size == 0:
        return b
    if not np.all(np.isfinite(z[idx])):
        raise ValueError("measurement must be finite")
    p = b.cov
    ph = p[:, idx]  # P H^T
    s = p[np.ix_(idx, idx)] + model.R_var * np.eye(idx.size)
    try:
        k = np.linalg.solve(s, ph.T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown("innovation covariance is singular") from exc
    innov = z[idx] - b.mean[idx]
    mean = b.mean + k @ innov
    # Joseph form keeps the covariance PSD
    i_kh = np.eye(2 * d)
    i_kh[:, idx] -= k
    cov = i_kh @ p @ i_kh.T + model.R_var * (k @ k.T)
    return BeliefState(mean, _sym(cov))


def rts_smooth(model: LinearCVModel, filtered: Sequence[BeliefState], predicted: Sequence[BeliefState],
               transitions: Optional[Sequence[np.ndarray]] = None) -> list[BeliefState]:
    """Backward RTS pass.

    ``predicted[k]`` must be the prediction into step ``k`` from
    ``filtered[k-1]``; ``predicted[0]`` is unused. ``transitions[k]``
    optionally overrides the F used between ``k-1`` and ``k``.
    """
    n = len(filtered)
    if len(predicted) != n:
        raise ValueError("filtered and predicted must be aligned")
    if n == 0:
        return []
    out = [None] * n
    out[-1] = filtered[-1]
    for k in range(n - 2, -1, -1):
        f = model.F if transitions is None else transitions[k + 1]
        p_pred = predicted[k + 1].cov
        try:
            c = np.linalg.solve(p_pred.T, (filtered[k].cov @ f.T).T).T
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("predicted covariance is singular") from exc
        mean = filtered[k].mean + c @ (out[k + 1].mean - predicted[k + 1].mean)
        cov = filtered[k].cov + c @ (out[k + 1].cov - p_pred) @ c.T
        out[k] = BeliefState(mean, _sym(cov))
    return out


@dataclass
class TrackFilter:
    """Filtering history of one track, ready for smoothing.

    The track is born with zero velocity. On the first later measurement of
    a position component, that component's velocity is re-estimated by
    two-point differencing and the birth state is rewritten to match, so the
    filter is exact on noiseless constant-velocity data from the second
    measurement on.
    """

    model: LinearCVModel
    velocity_sigma: float
    filtered: list = field(default_factory=list)
    predicted: list = field(default_factory=list)
    observed: list = field(default_factory=list)
    # per component: index of the step of its first measurement, and that value
    _first_idx: np.ndarray = None
    _first_z: np.ndarray = None
    _boot: np.ndarray = None

    @classmethod
    def start(cls, model: LinearCVModel, z, velocity_sigma: float, mask=None) -> "TrackFilter":
        d = model.dim
        z = np.asarray(z, dtype=float).reshape(d)
        m = np.ones(d, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        z0 = np.where(m, z, 0.0)
        b = initial_belief(model, z0, velocity_sigma)
        tf = cls(model, velocity_sigma)
        tf.filtered.append(b)
        tf.predicted.append(b)
        tf.observed.append(True)
        tf._first_idx = np.where(m, 0, -1)
        tf._first_z = z0.copy()
        tf._boot = np.zeros(d, dtype=bool)
        return tf

    @property
    def current(self) -> BeliefState:
        return self.filtered[-1]

    def peek(self) -> BeliefState:
        return predict(self.model, self.current)

    def coast(self) -> BeliefState:
        b = self.peek()
        self.predicted.append(b)
        self.filtered.append(b)
        self.observed.append(False)
        return b

    def measure(self, z, mask=None) -> BeliefState:
        d = self.model.dim
        z = np.asarray(z, dtype=float).reshape(d)
        m = np.ones(d, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        k_now = len(self.filtered)
        self.predicted.append(self.peek())
        self.observed.append(True)

        unseen = m & (self._first_idx < 0)
        boot = m & (self._first_idx >= 0) & ~self._boot
        regular = m & ~unseen & ~boot

        post = update(self.model, self.predicted[k_now], z, regular)
        mean, cov = post.mean.copy(), post.cov.copy()
        r = self.model.R_var
        for i in np.flatnonzero(unseen):
            # first sight of a component: start it at the measurement
            self._set_component(mean, cov, i, z[i], 0.0, r, self.velocity_sigma**2, 0.0)
        self._first_idx[unseen] = k_now
        self._first_z[unseen] = z[unseen]
        for i in np.flatnonzero(boot):
            k0 = int(self._first_idx[i])
            gap = (k_now - k0) * self.model.dt
            vel = (z[i] - self._first_z[i]) / gap
            self._set_component(mean, cov, i, z[i], vel, r, 2 * r / gap**2, r / gap)
            old = self.filtered[k0]
            m0, c0 = old.mean.copy(), old.cov.copy()
            self._set_component(m0, c0, i, self._first_z[i], vel, r, 2 * r / gap**2, -r / gap)
            self.filtered[k0] = BeliefState(m0, c0)
            # the component was unmeasured in between: re-predict it
            for k in range(k0 + 1, k_now + 1):
                p = predict(self.model, self.filtered[k - 1])
                self.predicted[k] = self._with_component(self.predicted[k], p, i)
                if k < k_now:
                    self.filtered[k] = self._with_component(self.filtered[k], p, i)
        self._boot |= boot
        b = BeliefState(mean, _sym(cov))
        self.filtered.append(b)
        return b

    def _set_component(self, mean, cov, i, pos, vel, p_var, v_var, pv_cov) -> None:
        j = self.model.dim + i
        cov[i, :] = cov[:, i] = 0.0
        cov[j, :] = cov[:, j] = 0.0
        cov[i, i], cov[j, j] = p_var, v_var
        cov[i, j] = cov[j, i] = pv_cov
        mean[i], mean[j] = pos, vel

    def _with_component(self, dst: BeliefState, src: BeliefState, i: int) -> BeliefState:
        mean, cov = dst.mean.copy(), dst.cov.copy()
        for a in (i, self.model.dim + i):
            mean[a] = src.mean[a]
            cov[a, :] = src.cov[a, :]
            cov[:, a] = src.cov[:, a]
        return BeliefState(mean, cov)

    @property
    def initialized(self) -> np.ndarray:
        """Step index of each component's first measurement (-1 if never)."""
        return self._first_idx.copy()

    def trim(self, last: int) -> None:
        """Drop steps after index ``last``."""
        del self.filtered[last + 1:]
        del self.predicted[last + 1:]
        del self.observed[last + 1:]

    def smooth(self) -> list[BeliefState]:
        return rts_smooth(self.model, self.filtered, self.predicted)


def run_filter(model: LinearCVModel, zs: Sequence, velocity_sigma: float) -> TrackFilter:
    """Filter a sequence of measurements; ``None`` entries are coasted."""
    it = iter(zs)
    first = next(it)
    tf = TrackFilter.start(model, first, velocity_sigma)
    for z in it:
        if z is None:
            tf.coast()
        else:
            tf.measure(z)
    return tf
