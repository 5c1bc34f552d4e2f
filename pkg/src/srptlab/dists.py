"""Processing-time and inter-arrival laws, plus the regular-variation helpers
used to scale SRPT queues in heavy traffic.

The central quantity is ``S(x) = 1 / E[v 1{v > x}]``; its inverse evaluated at
``r`` gives the space-scaling constant ``c_r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class ParameterError(ValueError):
    """Parameters that leave the model undefined (e.g. negative rates)."""


@dataclass(frozen=True)
class ServiceDist:
    """Base class for processing-time laws.

    Subclasses provide the tail ``ccdf``, inverse sampling and closed-form
    moments where they exist.
    """

    def ccdf(self, x: float) -> float:
        raise NotImplementedError

    def inverse_ccdf(self, u):
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def second_moment(self) -> float:
        raise NotImplementedError

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean**2

    @property
    def support_min(self) -> float:
        return 0.0

    def truncated_first_moment(self, x: float) -> float:
        raise NotImplementedError

    def S(self, x: float) -> float:
        tail = self.truncated_first_moment(x)
        return math.inf if tail <= 0.0 else 1.0 / tail

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # 1 - U lies in (0, 1], the domain of inverse_ccdf
        u = 1.0 - rng.random(n)
        return self.inverse_ccdf(u)

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class ParetoTypeI(ServiceDist):
    """Pareto type I with tail ``min(m^(p+1) x^-(p+1), 1)``.

    Note the shape convention: the tail index is ``p + 1``, so ``p`` is the
    regular-variation index of ``E[v 1{v > x}]``.
    """

    m: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if not self.m > 0:
            raise ParameterError(f"Pareto scale must be positive, got m={self.m}")
        if not self.p > 1:
            raise ParameterError(f"Pareto index must exceed 1, got p={self.p}")

    def ccdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        above = x > self.m
        out[above] = (self.m / x[above]) ** (self.p + 1)
        return out if out.ndim else float(out)

    def inverse_ccdf(self, u):
        return self.m * np.power(u, -1.0 / (self.p + 1))

    @property
    def mean(self):
        return self.m * (self.p + 1) / self.p

    @property
    def second_moment(self):
        # finite for p > 1
        return self.m**2 * (self.p + 1) / (self.p - 1)

    @property
    def support_min(self):
        return self.m

    @property
    def c_p(self) -> float:
        return self.m ** (self.p + 1) * (self.p + 1) / self.p

    def truncated_first_moment(self, x):
        if x < self.m:
            return self.mean
        return self.c_p / x**self.p

    def to_dict(self):
        return {"kind": "pareto", "m": self.m, "p": self.p}


@dataclass(frozen=True)
class Lomax(ServiceDist):
    """Lomax law with tail ``(1 + lam x / p)^-(p+1)``; mean ``1/lam`` for all p."""

    lam: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ParameterError(f"Lomax rate must be positive, got lam={self.lam}")
        if not self.p >= 2:
            raise ParameterError(f"Lomax index must be at least 2, got p={self.p}")

    def ccdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        out = (1.0 + self.lam * x / self.p) ** (-(self.p + 1))
        return out if out.ndim else float(out)

    def inverse_ccdf(self, u):
        return (self.p / self.lam) * (np.power(u, -1.0 / (self.p + 1)) - 1.0)

    @property
    def mean(self):
        return 1.0 / self.lam

    @property
    def second_moment(self):
        return 2.0 * self.p / (self.lam**2 * (self.p - 1))

    @property
    def variance(self):
        return (self.p + 1) / ((self.p - 1) * self.lam**2)

    def truncated_first_moment(self, x):
        x = max(x, 0.0)
        base = 1.0 + self.lam * x / self.p
        return x * base ** (-(self.p + 1)) + base ** (-self.p) / self.lam

    def to_dict(self):
        return {"kind": "lomax", "lam": self.lam, "p": self.p}


@dataclass(frozen=True)
class Empirical(ServiceDist):
    """Uniform law on a finite sample; every tail moment is an exact finite sum."""

    values: tuple = ()
    _sorted: np.ndarray = field(init=False, repr=False, compare=False)
    _suffix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float))
        if v.size == 0 or v[0] <= 0:
            raise ParameterError("empirical sample must be nonempty and strictly positive")
        object.__setattr__(self, "_sorted", v)
        # _suffix[k] = sum of v[k:]
        suffix = np.concatenate([np.cumsum(v[::-1])[::-1], [0.0]])
        object.__setattr__(self, "_suffix", suffix)

    def ccdf(self, x):
        k = np.searchsorted(self._sorted, x, side="right")
        return (self._sorted.size - k) / self._sorted.size

    def inverse_ccdf(self, u):
        n = self._sorted.size
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.ceil(n * (1.0 - u)).astype(int) - 1, 0, n - 1)
        idx = np.where(u >= 1.0, 0, idx)
        return self._sorted[idx]

    @property
    def mean(self):
        return float(self._sorted.mean())

    @property
    def second_moment(self):
        return float(np.mean(self._sorted**2))

    @property
    def support_min(self):
        return float(self._sorted[0])

    def truncated_first_moment(self, x):
        k = np.searchsorted(self._sorted, x, side="right")
        return float(self._suffix[k] / self._sorted.size)

    def to_dict(self):
        return {"kind": "empirical", "values": [float(v) for v in self._sorted]}


def dist_from_dict(spec: dict[str, Any]) -> ServiceDist:
    kind = spec.get("kind", "").lower()
    if kind == "pareto":
        return ParetoTypeI(m=float(spec.get("m", 1.0)), p=float(spec["p"]))
    if kind == "lomax":
        return Lomax(lam=float(spec.get("lam", spec.get("lambda", 1.0))), p=float(spec["p"]))
    if kind == "empirical":
        return Empirical(values=tuple(spec["values"]))
    raise ValueError(f"unknown service distribution kind {spec.get('kind')!r}")


def inverse_cdf_sample(dist: ServiceDist, u):
    """Map ``u`` in (0, 1] to a job size whose tail is ``dist.ccdf``."""
    arr = np.asarray(u, dtype=float)
    if np.any(~((arr > 0.0) & (arr <= 1.0))):
        raise DomainError("u must lie in (0, 1]")
    out = dist.inverse_ccdf(arr)
    return float(out) if np.ndim(out) == 0 else out


def truncated_first_moment(dist: ServiceDist, x: float) -> float:
    """``E[v 1{v > x}]``."""
    if x < 0:
        raise DomainError("x must be nonnegative")
    return float(dist.truncated_first_moment(x))


def scale_parameter(dist: ServiceDist, r: float) -> float:
    """Space scale ``c_r = inf{u > 0 : S(u) > r}``.

    Pareto uses the closed form ``(c_p r)^(1/p)``; empirical laws scan their
    support; anything else is solved numerically on the monotone ``S``.
    """
    s0 = 1.0 / dist.mean
    if not r > s0:
        raise DomainError(f"c_r undefined for r={r} <= S(0)={s0}")
    if isinstance(dist, ParetoTypeI):
        return (dist.c_p * r) ** (1.0 / dist.p)
    if isinstance(dist, Empirical):
        v, suffix, n = dist._sorted, dist._suffix, dist._sorted.size
        # S is constant on [v[k-1], v[k]) and jumps at sample points
        s_at = np.where(suffix[1:] > 0, n / np.where(suffix[1:] > 0, suffix[1:], 1.0), np.inf)
        k = int(np.argmax(s_at > r))
        return float(v[k])

    lo = dist.support_min
    hi = max(2.0 * lo, dist.mean, 1.0)
    while dist.S(hi) <= r:
        hi *= 2.0
    return brentq(lambda x: dist.truncated_first_moment(x) - 1.0 / r, lo, hi,
                  xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def heavy_traffic_arrival_rate(dist: ServiceDist, r: float, kappa: float) -> float:
    """Arrival rate with ``r (lambda_r E[v] - 1) = kappa``."""
    rate = (1.0 + kappa / r) / dist.mean
    if not rate > 0:
        raise ParameterError(f"arrival rate {rate} not positive for r={r}, kappa={kappa}")
    return rate


def diffusion_variance(dist: ServiceDist, sigma_A: float) -> float:
    """``lambda Var(v) + lambda sigma_A^2`` with ``lambda = 1/E[v]``."""
    if sigma_A < 0:
        raise DomainError("sigma_A must be nonnegative")
    lam = 1.0 / dist.mean
    return lam * dist.variance + lam * sigma_A**2


@dataclass(frozen=True)
class Interarrival:
    """One inter-arrival law: exponential(rate), deterministic(gap) or uniform(lo, hi)."""

    kind: str = "exponential"
    rate: float | None = None
    gap: float | None = None
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.kind == "exponential":
            if not (self.rate and self.rate > 0):
                raise ParameterError("exponential inter-arrival needs rate > 0")
        elif self.kind == "deterministic":
            if not (self.gap and self.gap > 0):
                raise ParameterError("deterministic inter-arrival needs gap > 0")
        elif self.kind == "uniform":
            if self.lo is None or self.hi is None or not (0 <= self.lo < self.hi):
                raise ParameterError("uniform inter-arrival needs 0 <= lo < hi")
        else:
            raise ValueError(f"unknown inter-arrival kind {self.kind!r}")

    @property
    def mean(self) -> float:
        if self.kind == "exponential":
            return 1.0 / self.rate
        if self.kind == "deterministic":
            return self.gap
        return 0.5 * (self.lo + self.hi)

    @property
    def std(self) -> float:
        if self.kind == "exponential":
            return 1.0 / self.rate
        if self.kind == "deterministic":
            return 0.0
        return (self.hi - self.lo) / math.sqrt(12.0)

    def with_mean(self, mean: float) -> "Interarrival":
        """Same shape, rescaled to the given mean."""
        if self.kind == "exponential":
            return Interarrival("exponential", rate=1.0 / mean)
        if self.kind == "deterministic":
            return Interarrival("deterministic", gap=mean)
        f = mean / self.mean
        return Interarrival("uniform", lo=self.lo * f, hi=self.hi * f)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.rate, n)
        if self.kind == "deterministic":
            return np.full(n, float(self.gap))
        return rng.uniform(self.lo, self.hi, n)

    def to_dict(self):
        return {k: v for k, v in (("kind", self.kind), ("rate", self.rate), ("gap", self.gap),
                                  ("lo", self.lo), ("hi", self.hi)) if v is not None}


@dataclass(frozen=True)
class ArrivalSpec:
    """Delayed renewal arrivals.

    ``initial_delay`` defaults to one ordinary inter-arrival draw.
    """

    inter_arrival: Interarrival = field(default_factory=lambda: Interarrival("exponential", rate=1.0))
    initial_delay: Interarrival | None = None

    @property
    def rate(self) -> float:
        return 1.0 / self.inter_arrival.mean

    @property
    def sigma_A(self) -> float:
        return self.inter_arrival.std

    def at_rate(self, rate: float) -> "ArrivalSpec":
        if not rate > 0:
            raise ParameterError("arrival rate must be positive")
        delay = None
        if self.initial_delay is not None:
            delay = self.initial_delay.with_mean(self.initial_delay.mean * self.rate / rate)
        return ArrivalSpec(self.inter_arrival.with_mean(1.0 / rate), delay)

    def first_gap(self) -> Interarrival:
        return self.initial_delay if self.initial_delay is not None else self.inter_arrival

    def to_dict(self):
        d = {"inter_arrival": self.inter_arrival.to_dict()}
        if self.initial_delay is not None:
            d["initial_delay"] = self.initial_delay.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ArrivalSpec":
        ia = Interarrival(**d["inter_arrival"]) if "inter_arrival" in d else Interarrival(**d)
        delay = Interarrival(**d["initial_delay"]) if d.get("initial_delay") else None
        return cls(ia, delay)


def poisson_arrivals(rate: float = 1.0) -> ArrivalSpec:
    return ArrivalSpec(Interarrival("exponential", rate=rate))


@dataclass(frozen=True)
class HeavyTrafficParams:
    """Arrival rate and space scale of the r-th system."""

    dist: ServiceDist
    kappa: float
    r: float

    @property
    def lambda_r(self) -> float:
        return heavy_traffic_arrival_rate(self.dist, self.r, self.kappa)

    @property
    def c_r(self) -> float:
        return scale_parameter(self.dist, self.r)
