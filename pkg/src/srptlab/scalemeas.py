"""Scaled observables of SRPT runs.

Time is scaled by ``r^2``, sizes by ``1/c_r`` and mass by ``c_r/r``. The
truncated workload ``W_a`` and mass ``Z_a`` of a run, and the reflected
netput ``Y_a`` of its arrival stream, are all exposed as exact
piecewise-linear paths so that pathwise inequalities can be checked at every
breakpoint instead of on a sampled grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .srpt_core import ARRIVAL, COMPLETION, INITIAL, QueueState, Trajectory


@dataclass(frozen=True)
class MeasureSnapshot:
    time: float
    locations: np.ndarray
    masses: np.ndarray
    r: float = 1.0
    c_r: float = 1.0

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["location", "mass"])
            for x, m in zip(self.locations, self.masses):
                w.writerow([repr(float(x)), repr(float(m))])


def scaled_state(raw: QueueState, r: float, c_r: float) -> MeasureSnapshot:
    """Put mass ``c_r/r`` at ``v/c_r`` for each remaining size ``v > 0``."""
    if not c_r > 0:
        raise ValueError("c_r must be positive")
    sizes = raw.sizes
    sizes = np.sort(sizes[sizes > 0])
    return MeasureSnapshot(raw.time / r**2, sizes / c_r, np.full(sizes.size, c_r / r), r, c_r)


def workload_and_mass(snap: MeasureSnapshot, a: float) -> tuple[float, float]:
    """(W_a, Z_a): work and mass of atoms located in [0, a]."""
    sel = snap.locations <= a
    return float(np.dot(snap.locations[sel], snap.masses[sel])), float(snap.masses[sel].sum())


# ------------------------------------------------------------ piecewise paths

@dataclass(frozen=True)
class PiecewisePath:
    """Right-continuous path: value ``right[k] + slope[k] * (t - knots[k])``
    on ``[knots[k], knots[k+1])``, floored at ``floor`` if given.
    """

    knots: np.ndarray
    right: np.ndarray
    slope: np.ndarray
    floor: float | None = None

    def _eval(self, t, side):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.knots, t, side=side) - 1
        before = k < 0
        k = np.maximum(k, 0)
        v = self.right[k] + self.slope[k] * (t - self.knots[k])
        if self.floor is not None:
            v = np.maximum(v, self.floor)
        return np.where(before, 0.0, v)

    def __call__(self, t):
        return self._eval(t, "right")

    def left(self, t):
        """Left limits; equal to the value at 0 for t = 0."""
        t = np.asarray(t, dtype=float)
        return np.where(t <= self.knots[0], self._eval(t, "right"), self._eval(t, "left"))

    def scaled(self, time_scale: float, value_scale: float) -> "PiecewisePath":
        """Path of ``value_scale * f(time_scale * s)`` in the variable s."""
        fl = None if self.floor is None else self.floor * value_scale
        return PiecewisePath(self.knots / time_scale, self.right * value_scale,
                             self.slope * value_scale * time_scale, fl)


def step_path(knots: np.ndarray, values: np.ndarray) -> PiecewisePath:
    return PiecewisePath(np.asarray(knots, float), np.asarray(values, float), np.zeros(len(knots)))


def truncated_paths(traj: Trajectory, level: float) -> tuple[PiecewisePath, PiecewisePath, np.ndarray]:
    """Raw truncated work ``sum v 1{v <= level}`` and count ``#{v <= level}``.

    Also returns the times at which the served job's size drops to ``level``
    (the truncated work jumps up there although no event is logged).
    Between knots the work falls at rate 1 iff the served job is counted;
    when the served job exceeds ``level`` every job does, so both are 0.
    """
    import heapq

    knots = [0.0]
    w_right = [0.0]
    z_right = [0.0]
    slopes = [0.0]
    crossings = []
    heap: list[list] = []
    w = 0.0
    z = 0
    clock = 0.0
    n = len(traj.times)
    t_ev, k_ev, j_ev, d_ev = traj.times, traj.kinds, traj.job_ids, traj.size_deltas

    def push(t):
        s = -1.0 if heap and heap[0][0] <= level and z > 0 else 0.0
        if knots[-1] == t:
            w_right[-1], z_right[-1], slopes[-1] = w, z, s
        else:
            knots.append(t); w_right.append(w); z_right.append(z); slopes.append(s)

    for i in range(n):
        te = float(t_ev[i])
        if te > clock and heap:
            rem = heap[0][0]
            dt = te - clock
            if rem <= level:
                w = max(w - dt, 0.0)
            elif rem - dt <= level:
                tc = clock + (rem - level)
                crossings.append(tc)
                # the served job enters the window with size exactly `level`
                z, w = 1, level
                heap[0][0] = level
                clock = tc
                push(tc)
                w = max(w - (te - tc), 0.0)
                dt = te - tc
            heap[0][0] -= dt
        clock = max(clock, te)
        kind = k_ev[i]
        if kind == ARRIVAL or kind == INITIAL:
            v = float(d_ev[i])
            heapq.heappush(heap, [v, int(j_ev[i])])
            if v <= level:
                w += v
                z += 1
        elif kind == COMPLETION:
            heapq.heappop(heap)
            z = max(z - 1, 0)
            if z == 0:
                w = 0.0
        else:
            continue
        push(te)
    work = PiecewisePath(np.array(knots), np.array(w_right), np.array(slopes), floor=0.0)
    count = step_path(np.array(knots), np.array(z_right))
    return work, count, np.array(crossings)


def reflected_netput_path(traj: Trajectory, level: float) -> PiecewisePath:
    """Raw ``Gamma[x]`` for ``x(s) = initial work + arrived work - s`` over
    jobs of size <= level: a Lindley recursion on the admitted arrivals.
    """
    t, v, _ = traj.admitted()
    sel = v <= level
    t, v = t[sel], v[sel]
    if len(t) == 0 or t[0] > 0:
        t = np.concatenate([[0.0], t])
        v = np.concatenate([[0.0], v])
    # merge simultaneous jumps
    ut, inv = np.unique(t, return_inverse=True)
    uv = np.zeros(len(ut))
    np.add.at(uv, inv, v)
    y = np.empty(len(ut))
    prev = 0.0
    for k in range(len(ut)):
        gap = ut[k] - ut[k - 1] if k else 0.0
        prev = max(prev - gap, 0.0) + uv[k]
        y[k] = prev
    return PiecewisePath(ut, y, -np.ones(len(ut)), floor=0.0)


def netput_path(traj: Trajectory, level: float) -> PiecewisePath:
    """Raw netput ``x(s)`` (unreflected) over jobs of size <= level."""
    t, v, _ = traj.admitted()
    sel = v <= level
    t, v = t[sel], v[sel]
    if len(t) == 0 or t[0] > 0:
        t = np.concatenate([[0.0], t])
        v = np.concatenate([[0.0], v])
    ut, inv = np.unique(t, return_inverse=True)
    uv = np.zeros(len(ut))
    np.add.at(uv, inv, v)
    return PiecewisePath(ut, np.cumsum(uv) - ut, -np.ones(len(ut)))


@dataclass
class ScaledPathBundle:
    level: float
    grid: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    W: np.ndarray
    Z: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "X", "Y", "W", "Z"])
            for row in zip(self.grid, self.X, self.Y, self.W, self.Z):
                w.writerow([repr(float(x)) for x in row])


def netput_and_reflection(traj: Trajectory, r: float, c_r: float, a: float,
                          grid: Sequence[float]) -> ScaledPathBundle:
    """Scaled netput ``X_a``, its reflection ``Y_a = Gamma[X_a]``, and the
    run's ``W_a``, ``Z_a`` on ``grid`` augmented with every jump time of
    ``X_a`` inside it.

    The reflection takes the running infimum over the left limits at jumps,
    where the piecewise-linear netput attains its local minima.
    """
    grid = np.asarray(grid, dtype=float)
    if len(grid) and grid[-1] > traj.horizon / r**2 * (1 + 1e-12):
        raise ValueError("grid exceeds the run horizon")
    level = a * c_r if not math.isinf(a) else math.inf
    x = netput_path(traj, level)
    jumps = x.knots[x.knots > 0] / r**2
    if len(grid):
        jumps = jumps[(jumps >= grid[0]) & (jumps <= grid[-1])]
    tt = np.unique(np.concatenate([grid, jumps]))
    raw_t = tt * r**2
    X = x(raw_t) / r
    # left limits at every jump up to each time; x decreases between jumps
    jt = x.knots[1:]
    jl = x.left(jt)
    run_left = np.minimum.accumulate(np.concatenate([[0.0], jl]))
    k = np.searchsorted(jt, raw_t, side="right")
    inf_raw = np.minimum(run_left[k], x(raw_t))
    Y = X - np.minimum(0.0, inf_raw / r)
    if a == 0:
        W = np.zeros_like(tt)
        Z = np.zeros_like(tt)
    else:
        wpath, zpath, _ = truncated_paths(traj, level)
        W = wpath(raw_t) / r
        Z = zpath(raw_t) * c_r / r
    return ScaledPathBundle(a, tt, X, Y, W, Z)


# ------------------------------------------------------ integration by parts

def integration_by_parts(snap: MeasureSnapshot, f: Callable, delta: float, M: float) -> tuple[float, float]:
    """Both sides of the integration-by-parts identity on (delta, M].

    lhs is ``sum f(x) m`` over atoms in (delta, M]; rhs is
    ``-int g'(x) W_x dx + g(M) W_M - g(delta+) W_delta`` with ``g = f/x``.
    ``W_x`` is a right-continuous step in x, so the integral over each gap
    between atoms is ``W * (g(right) - g(left))`` exactly.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not M > delta:
        raise ValueError("M must exceed delta")
    loc, mass = snap.locations, snap.masses
    inside = (loc > delta) & (loc <= M)
    lhs = float(np.sum(f(loc[inside]) * mass[inside])) if inside.any() else 0.0

    def g(x):
        return np.asarray(f(x), dtype=float) / x

    # W just after each breakpoint in [delta, M)
    cuts = np.unique(np.concatenate([[delta], loc[inside], [M]]))
    work = loc * mass
    order = np.argsort(loc)
    cum = np.concatenate([[0.0], np.cumsum(work[order])])
    W_at = cum[np.searchsorted(loc[order], cuts, side="right")]
    gc = g(cuts)
    integral = float(np.sum(W_at[:-1] * (gc[1:] - gc[:-1])))
    rhs = -integral + float(gc[-1] * W_at[-1]) - float(gc[0] * W_at[0])
    return lhs, rhs


# ------------------------------------------------------------ pathwise checks

def _zero_hits(path: PiecewisePath) -> np.ndarray:
    """Times where a floored, decreasing piece reaches the floor."""
    hit = path.knots + path.right / np.where(path.slope < 0, -path.slope, np.inf)
    nxt = np.concatenate([path.knots[1:], [np.inf]])
    return hit[(path.slope < 0) & (hit < nxt)]


def _eval_both(path: PiecewisePath, t: np.ndarray) -> np.ndarray:
    return np.concatenate([path(t), path.left(t)])


def sandwich_violations(upper_run: Trajectory, trunc_run: Trajectory, a: float, r: float,
                        c_r: float, slack: float = 1e-9, perturb: float = 0.0) -> dict[str, float]:
    """Largest violation of the four comparison inequalities at level ``a``.

    ``upper_run`` is the y-truncated run (y >= a, the full run for y = inf)
    and ``trunc_run`` the a-truncated run on the same stream. Checked are
    ``Y_a <= <x 1[0,a], Q_y> <= Y_a + a c_r / r`` and
    ``Q_a <= <1[0,a], Q_y> <= Q_a + c_r / r`` at every breakpoint of every
    path involved, from both sides. All four are piecewise linear between
    those breakpoints, so this covers the whole horizon. ``perturb`` is added
    to the scaled work (negative control). Returns positive numbers for
    violations beyond ``slack``, 0 otherwise.
    """
    level = a * c_r
    w_up, z_up, crossings = truncated_paths(upper_run, level)
    y_a = reflected_netput_path(upper_run, level)
    q_a = step_path(*trunc_run.queue_length_path())
    t = np.unique(np.concatenate([w_up.knots, crossings, y_a.knots, _zero_hits(y_a),
                                  _zero_hits(w_up), q_a.knots, [upper_run.horizon]]))
    t = t[t <= upper_run.horizon]
    W = _eval_both(w_up, t) / r + perturb
    Y = _eval_both(y_a, t) / r
    Z = _eval_both(z_up, t) * c_r / r
    Q = _eval_both(q_a, t) * c_r / r
    bound_w = level / r
    bound_z = c_r / r
    out = {
        "work_lower": float(np.max(Y - W, initial=0.0)),
        "work_upper": float(np.max(W - Y - bound_w, initial=0.0)),
        "mass_lower": float(np.max(Q - Z, initial=0.0)),
        "mass_upper": float(np.max(Z - Q - bound_z, initial=0.0)),
    }
    out = {k: (v if v > slack else 0.0) for k, v in out.items()}
    out["n_times"] = int(len(t))
    return out


def qlxy_violations(run_x: Trajectory, run_y: Trajectory, x: float, y: float, r: float,
                    c_r: float, slack: float = 1e-9) -> dict[str, float]:
    """Violations of ``0 <= Q_y - Q_x <= c_r/r + Y_y / x`` for x <= y."""
    qx = step_path(*run_x.queue_length_path())
    qy = step_path(*run_y.queue_length_path())
    yy = reflected_netput_path(run_y, y * c_r if not math.isinf(y) else math.inf)
    t = np.unique(np.concatenate([qx.knots, qy.knots, yy.knots, _zero_hits(yy), [run_y.horizon]]))
    t = t[t <= run_y.horizon]
    dq = (_eval_both(qy, t) - _eval_both(qx, t)) * c_r / r
    bound = c_r / r + _eval_both(yy, t) / r / x
    lower = float(np.max(-dq, initial=0.0))
    upper = float(np.max(dq - bound, initial=0.0))
    return {"lower": lower if lower > slack else 0.0, "upper": upper if upper > slack else 0.0,
            "n_times": int(len(t))}
