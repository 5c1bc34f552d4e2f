"""Limiting random field ``W_a = Gamma[xi(a) + sigma B + (kappa - lambda a^-p) t]``.

All levels share one Brownian sample ``B``. Integrals over the level variable
``x`` against ``x^-2 dx`` are taken as trapezoid sums in ``u = 1/x``, which is
exact whenever ``W_x`` is constant between levels.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .skorohod import SampledPath, last_zero_derivative

DEFAULT_LEVELS = 2.0 ** (np.arange(-24, 25) / 4.0)  # 2^-6 .. 2^6, ratio 2^(1/4)


def geometric_levels(lo: float = 2.0 ** -6, hi: float = 2.0 ** 6, per_octave: int = 4) -> np.ndarray:
    k0 = round(math.log2(lo) * per_octave)
    k1 = round(math.log2(hi) * per_octave)
    return 2.0 ** (np.arange(k0, k1 + 1) / per_octave)


@dataclass(frozen=True)
class LimitInitialProfile:
    """Nondecreasing initial profile ``xi`` with ``xi(0) = 0``.

    kind "zero", "piecewise-linear" (knots/values, constant past the last
    knot) or "scaled" (``q_star * E[v 1{v <= a}]`` for a size law).
    """

    kind: str = "zero"
    knots: tuple = ()
    values: tuple = ()
    q_star: float = 0.0
    size_law: object = None

    def __post_init__(self):
        if self.kind == "piecewise-linear":
            k = np.asarray(self.knots, float)
            v = np.asarray(self.values, float)
            if k.shape != v.shape or k.size == 0:
                raise ValueError("knots and values must match")
            if np.any(np.diff(k) <= 0) or np.any(np.diff(v) < 0) or k[0] < 0:
                raise ValueError("profile must be nondecreasing on increasing knots")
            if k[0] == 0 and v[0] != 0:
                raise ValueError("profile must vanish at 0")
        elif self.kind == "scaled":
            if self.size_law is None or self.q_star < 0:
                raise ValueError("scaled profile needs q_star >= 0 and a size law")
        elif self.kind != "zero":
            raise ValueError(f"unknown profile kind {self.kind!r}")

    def __call__(self, a) -> np.ndarray:
        a = np.asarray(a, float)
        if self.kind == "zero":
            return np.zeros_like(a)
        if self.kind == "piecewise-linear":
            k = np.concatenate([[0.0], self.knots]) if self.knots[0] > 0 else np.asarray(self.knots, float)
            v = np.concatenate([[0.0], self.values]) if self.knots[0] > 0 else np.asarray(self.values, float)
            return np.interp(a, k, v)
        tm = np.vectorize(self.size_law.truncated_mean, otypes=[float])
        return self.q_star * tm(a)

    @property
    def at_infinity(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "piecewise-linear":
            return float(self.values[-1])
        return self.q_star * self.size_law.mean


@dataclass(frozen=True)
class LimitSpec:
    kappa: float
    lam: float
    sigma: float
    p: float
    xi: LimitInitialProfile = field(default_factory=LimitInitialProfile)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    def drift(self, a) -> np.ndarray:
        a = np.asarray(a, float)
        with np.errstate(divide="ignore", over="ignore"):
            return self.kappa - self.lam * a ** (-self.p)


def brownian_increments(seed, n_steps: int, dt: float, n_paths: int | None = None) -> np.ndarray:
    """Gaussian increments from a counter-based (Philox) stream keyed by ``seed``."""
    rng = np.random.Generator(np.random.Philox(seed))
    shape = n_steps if n_paths is None else (n_paths, n_steps)
    return rng.standard_normal(shape) * math.sqrt(dt)


def _reflect_rows(x: np.ndarray) -> np.ndarray:
    # running minimum at grid points is exact for linear interpolation
    return x - np.minimum(0.0, np.minimum.accumulate(x, axis=-1))


@dataclass(frozen=True)
class RandomField:
    spec: LimitSpec
    times: np.ndarray
    levels: np.ndarray  # finite levels a_1 < ... < a_K
    B: np.ndarray
    W: np.ndarray  # shape (K + 1, n_times); last row is level infinity
    seed: object = None

    @property
    def W_inf(self) -> np.ndarray:
        return self.W[-1]

    def time_index(self, t: float) -> int:
        k = int(round(t / (self.times[1] - self.times[0]))) if len(self.times) > 1 else 0
        if k < 0 or k >= len(self.times) or not math.isclose(self.times[k], t, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"t={t} is not on the time grid")
        return k

    def level_index(self, a: float) -> int:
        if math.isinf(a):
            return len(self.levels)
        k = int(np.searchsorted(self.levels, a))
        if k < len(self.levels) and math.isclose(self.levels[k], a, rel_tol=1e-12):
            return k
        if k > 0 and math.isclose(self.levels[k - 1], a, rel_tol=1e-12):
            return k - 1
        raise ValueError(f"level {a} is not on the level grid")

    def netput(self, a: float) -> np.ndarray:
        """Unreflected ``X_a`` on the time grid."""
        xi = self.spec.xi.at_infinity if math.isinf(a) else float(self.spec.xi(a))
        mu = self.spec.kappa if math.isinf(a) else float(self.spec.drift(a))
        return xi + self.spec.sigma * self.B + mu * self.times

    def path(self, a: float) -> SampledPath:
        return SampledPath(self.times, self.W[self.level_index(a)])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [repr(float(a)) for a in self.levels] + ["inf"])
            for j, t in enumerate(self.times):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in self.W[:, j]])


def sample_field(spec: LimitSpec, T: float = 1.0, dt: float = 1e-3,
                 levels: Sequence[float] | None = None, seed=0) -> RandomField:
    levels = DEFAULT_LEVELS if levels is None else np.asarray(levels, float)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if np.any(levels <= 0) or np.any(np.diff(levels) <= 0):
        raise ValueError("levels must be positive and strictly increasing")
    n = int(round(T / dt))
    times = np.arange(n + 1) * dt
    B = np.concatenate([[0.0], np.cumsum(brownian_increments(seed, n, dt))])
    xi = np.append(spec.xi(levels), spec.xi.at_infinity)
    mu = np.append(spec.drift(levels), spec.kappa)
    X = xi[:, None] + spec.sigma * B[None, :] + mu[:, None] * times[None, :]
    return RandomField(spec, times, levels, B, _reflect_rows(X), seed)


def sample_marginal(spec: LimitSpec, a: float, t: float, n_draws: int, dt: float = 1e-3,
                    seed=0, chunk: int = 1000) -> np.ndarray:
    """``n_draws`` independent grid values of ``W_a(t)``, each from its own Brownian path."""
    n = int(round(t / dt))
    xi = spec.xi.at_infinity if math.isinf(a) else float(spec.xi(a))
    mu = spec.kappa if math.isinf(a) else float(spec.drift(a))
    rng = np.random.Generator(np.random.Philox(seed))
    out = np.empty(n_draws)
    drift = mu * dt * np.arange(1, n + 1)
    for s in range(0, n_draws, chunk):
        m = min(chunk, n_draws - s)
        x = xi + spec.sigma * np.cumsum(rng.standard_normal((m, n)) * math.sqrt(dt), axis=1) + drift
        runmin = np.minimum(0.0, np.minimum(x.min(axis=1), xi))
        out[s:s + m] = x[:, -1] - runmin
    return out


def exact_marginal_draws(mu: float, sigma: float, t: float, n_draws: int, seed=0) -> np.ndarray:
    """Exact draws of ``Gamma[sigma B + mu t](t)`` for a zero start.

    By time reversal this is the running maximum of the drifted motion, drawn
    jointly with its endpoint via the Brownian-bridge maximum law.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(mu * t, sigma * math.sqrt(t), n_draws)
    u = 1.0 - rng.random(n_draws)
    return 0.5 * (x + np.sqrt(x * x - 2.0 * sigma * sigma * t * np.log(u)))


def _u_trapezoid(levels: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Trapezoid in ``u = 1/x`` of ``W_x``: approximates ``int x^-2 W_x dx``."""
    du = 1.0 / levels[:-1] - 1.0 / levels[1:]
    return np.tensordot(du, 0.5 * (W[:-1] + W[1:]), axes=(0, 0))


@dataclass(frozen=True)
class QueueLengthEstimate:
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def width(self):
        return self.upper - self.lower


def queue_length_bracket(field_: RandomField) -> QueueLengthEstimate:
    """``Q = int_0^inf x^-2 W_x dx`` along the whole time grid.

    Interior by trapezoid on ``[a_1, a_K]``. The tail ``(a_K, inf)`` lies in
    ``[W_{a_K}/a_K, W_inf/a_K]`` by level monotonicity. The head ``(0, a_1)``
    gets the bracket ``[0, W_{a_1}/a_1]``.
    """
    lv, W = field_.levels, field_.W
    interior = _u_trapezoid(lv, W[:-1])
    lower = interior + W[-2] / lv[-1]
    upper = interior + W[-1] / lv[-1] + W[0] / lv[0]
    return QueueLengthEstimate(0.5 * (lower + upper), lower, upper)


def limit_queue_length(field_: RandomField, t: float) -> tuple[float, float, float]:
    k = field_.time_index(t)
    q = queue_length_bracket(field_)
    return float(q.estimate[k]), float(q.lower[k]), float(q.upper[k])


def _w_at_level(field_: RandomField, k: int, a: float) -> float:
    # linear in u = 1/x between grid levels, so the u-trapezoid is unchanged by the split
    lv = field_.levels
    return float(np.interp(-1.0 / a, -1.0 / lv, field_.W[:-1, k]))


def _interior_integral(field_: RandomField, k: int, a: float, b: float) -> float:
    lv = field_.levels
    inside = (lv > a) & (lv < b)
    xs = np.concatenate([[a], lv[inside], [b]])
    ws = np.array([_w_at_level(field_, k, x) for x in xs])
    return float(_u_trapezoid(xs, ws))


def limit_measure(field_: RandomField, t: float, a: float, b: float) -> float:
    """Limit-measure mass of the level interval between ``a`` and ``b``."""
    lv = field_.levels
    if not (lv[0] <= a < b <= lv[-1]):
        raise ValueError(f"need {lv[0]} <= a < b <= {lv[-1]}")
    k = field_.time_index(t)
    return (_interior_integral(field_, k, a, b)
            + _w_at_level(field_, k, b) / b - _w_at_level(field_, k, a) / a)


def _gauss_integral(f: Callable, lo: float, hi: float, n: int = 32) -> float:
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return half * float(np.sum(w * np.asarray([f(mid + half * xi) for xi in x], float)))


def limit_Zf(field_: RandomField, f: Callable, slope_at_infinity: float,
             include_ends: bool = True) -> np.ndarray:
    """``Z_f = int (f/x^2 - f'/x) W_x dx + L W_inf`` along the time grid.

    With ``h = f/x`` the integrand weight is ``-h'``, so the interior uses the
    trapezoid rule against ``dh`` and needs no derivative of ``f``. The tail
    term takes the midpoint of ``W_{a_K}`` and ``W_inf`` and the head term
    uses the same midpoint rule as the queue-length estimate, which reduces to
    it for ``f = 1`` and vanishes for ``f(x) = x``.
    """
    lv, W = field_.levels, field_.W
    h = np.array([f(x) / x for x in lv], float)
    Zf = -np.tensordot(np.diff(h), 0.5 * (W[:-2] + W[1:-1]), axes=(0, 0))
    if not include_ends:
        return Zf
    tail = (h[-1] - slope_at_infinity) * 0.5 * (W[-2] + W[-1])
    a1 = lv[0]
    head_weight = (2.0 * _gauss_integral(f, 0.0, a1) - a1 * f(a1)) / (a1 * a1)
    head = 0.5 * head_weight * W[0]
    return Zf + tail + head + slope_at_infinity * W[-1]


def tail_ratios(field_: RandomField, t: float, a: float) -> tuple[float, float, float]:
    """Scaled work and mass above level ``a`` against the busy-period age."""
    spec, lv = field_.spec, field_.levels
    k = field_.time_index(t)
    j = field_.level_index(a)
    if j >= len(lv):
        raise ValueError("a must be a finite grid level")
    W = field_.W[:, k]
    work = a ** spec.p / spec.lam * (W[-1] - W[j])
    interior = float(_u_trapezoid(lv[j:], W[j:-1]))
    tail_mass = interior + 0.5 * (W[-2] + W[-1]) / lv[-1] - W[j] / a
    mass = (spec.p + 1) * a ** (spec.p + 1) / (spec.p * spec.lam) * tail_mass
    w_prime = last_zero_derivative(SampledPath(field_.times[:k + 1], field_.W_inf[:k + 1]), t)
    return float(work), float(mass), float(w_prime)


def lomax_collapse_sigma(p: float, lam: float = 1.0, sigma_A: float | None = None) -> float:
    """Diffusion std-dev for the Lomax family with mean ``1/lam``."""
    var_v = (p + 1) / ((p - 1) * lam * lam)
    sA = 1.0 / lam if sigma_A is None else sigma_A
    return math.sqrt(lam * var_v + lam * sA * sA)


def collapse_gap(p_list: Sequence[float], kappa: float = 0.0, lam: float = 1.0,
                 sigma_of_p: Callable[[float], float] | None = None, T: float = 1.0,
                 dt: float = 1e-3, seed=0, levels: Sequence[float] | None = None,
                 xi: LimitInitialProfile | None = None) -> dict[float, float]:
    """``sup_t |Q^(p)(t) - W_inf^(p)(t)|`` for each ``p`` on one Brownian sample."""
    sigma_of_p = sigma_of_p or (lambda p: lomax_collapse_sigma(p, lam))
    xi = xi or LimitInitialProfile()
    out = {}
    for p in p_list:
        if p < 2:
            raise ValueError("collapse sweep needs p >= 2")
        spec = LimitSpec(kappa, lam, sigma_of_p(p), p, xi)
        fld = sample_field(spec, T, dt, levels, seed)
        q = queue_length_bracket(fld).estimate
        out[p] = float(np.max(np.abs(q - fld.W_inf)))
    return out


def mass_below(field_: RandomField, a: float) -> np.ndarray:
    """Limit mass of ``[0, a]`` along the time grid.

    ``int_0^a x^-2 W_x dx + W_a / a`` with the head midpoint rule on
    ``(0, a_1)``; ``a = inf`` gives the queue-length estimate and ``a = 0``
    gives zero.
    """
    if a == 0:
        return np.zeros_like(field_.times)
    if math.isinf(a):
        return queue_length_bracket(field_).estimate
    j = field_.level_index(a)
    lv, W = field_.levels, field_.W
    head = 0.5 * W[0] / lv[0]
    return _u_trapezoid(lv[:j + 1], W[:j + 1]) + head + W[j] / a
