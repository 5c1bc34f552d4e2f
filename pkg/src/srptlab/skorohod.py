"""One-dimensional Skorohod reflection on sampled paths."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

LINEAR = "piecewise-linear"
STEP = "piecewise-constant"


@dataclass(frozen=True)
class SampledPath:
    times: np.ndarray
    values: np.ndarray
    interpretation: str = LINEAR

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.shape != v.shape or t.ndim != 1 or t.size == 0:
            raise ValueError("times and values must be equal-length 1-d arrays")
        if t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        if self.interpretation not in (LINEAR, STEP):
            raise ValueError(f"unknown interpretation {self.interpretation!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.interpretation == LINEAR:
            return np.interp(t, self.times, self.values)
        k = np.searchsorted(self.times, t, side="right") - 1
        return self.values[np.clip(k, 0, None)]

    def __add__(self, other: "SampledPath") -> "SampledPath":
        if not np.array_equal(self.times, other.times):
            raise ValueError("paths must share knots")
        return SampledPath(self.times, self.values + other.values, self.interpretation)

    def with_drift(self, eps: float) -> "SampledPath":
        return SampledPath(self.times, self.values + eps * self.times, self.interpretation)


def reflect(f: SampledPath) -> SampledPath:
    """``Gamma[f](t) = f(t) - min(0, inf_{s<=t} f(s))``.

    For linear paths the output gains a knot wherever ``f`` falls through its
    previous running minimum inside a segment, so the result is exact between
    knots as well. For step paths the left limits are earlier knot values, so
    the knot-wise running minimum is already exact.
    """
    if f.values[0] < 0:
        raise ValueError("reflection needs f(0) >= 0")
    t, v = f.times, f.values
    if f.interpretation == STEP:
        return SampledPath(t, v - np.minimum(0.0, np.minimum.accumulate(v)), STEP)
    level = np.minimum(0.0, np.minimum.accumulate(v))
    prev = np.concatenate([[0.0], level[:-1]])
    # segment k goes from v[k-1] above prev[k] to v[k] below it
    drop = np.zeros(len(t), dtype=bool)
    drop[1:] = (v[:-1] > prev[1:]) & (v[1:] < prev[1:])
    if drop.any():
        k = np.nonzero(drop)[0]
        frac = (v[k - 1] - prev[k]) / (v[k - 1] - v[k])
        tc = t[k - 1] + frac * (t[k] - t[k - 1])
        # a crossing that rounds onto a knot needs no extra knot
        inside = (tc > t[k - 1]) & (tc < t[k])
        tt = np.concatenate([t, tc[inside]])
        vv = np.concatenate([v, prev[k][inside]])
        order = np.argsort(tt, kind="stable")
        t, v = tt[order], vv[order]
        level = np.minimum(0.0, np.minimum.accumulate(v))
    return SampledPath(t, v - level, LINEAR)


def reflect_at(f: SampledPath, t: float) -> float:
    """``Gamma[f](t)`` at an arbitrary time, without building the output path."""
    ft = float(f(t))
    inside = f.times <= t
    run = min(0.0, float(np.min(f.values[inside])), ft)
    return ft - run


def last_zero(w: SampledPath, t: float, eps_zero: float = 0.0) -> float | None:
    """``sup{s <= t : w(s) <= eps_zero}``, or None if that set is empty."""
    if float(w(t)) <= eps_zero:
        return float(t)
    idx = np.nonzero((w.times <= t) & (w.values <= eps_zero))[0]
    if idx.size == 0:
        return None
    j = idx[-1]
    if w.interpretation == STEP:
        # w stays <= eps_zero until the next knot, where it rises
        return float(w.times[j + 1]) if j + 1 < len(w.times) and w.times[j + 1] <= t else float(t)
    if j + 1 < len(w.times):
        a, b = w.values[j], w.values[j + 1]
        if b > a and a < eps_zero:
            # linear segment leaves the zero band between knots
            return float(w.times[j] + (eps_zero - a) / (b - a) * (w.times[j + 1] - w.times[j]))
    return float(w.times[j])


def last_zero_derivative(w: SampledPath, t: float, eps_zero: float = 0.0) -> float:
    """Age of the current busy period, ``t - sup{s <= t : w(s) <= eps_zero}``.

    An empty zero set counts as a zero at time 0 (so the result is ``t``);
    such calls are logged because the limit statement does not cover them.
    """
    s = last_zero(w, t, eps_zero)
    if s is None:
        log.debug("no zero of w on [0, %g]; using sup of empty set = 0", t)
        return float(t)
    return float(t) - s


def drift_perturbation_derivative(f: SampledPath, t: float, eps: float) -> float:
    """Finite difference ``(Gamma[f + eps*id](t) - Gamma[f](t)) / eps``."""
    if eps == 0:
        raise ValueError("eps must be nonzero")
    if f.values[0] < 0:
        raise ValueError("reflection needs f(0) >= 0")
    return (reflect_at(f.with_drift(eps), t) - reflect_at(f, t)) / eps


def pushing_term(f: SampledPath) -> np.ndarray:
    """Regulator ``-min(0, running min of f)`` at the knots of ``f``."""
    return -np.minimum(0.0, np.minimum.accumulate(f.values))
