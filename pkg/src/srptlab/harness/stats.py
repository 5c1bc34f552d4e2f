"""Kolmogorov-Smirnov distances and the reflected Brownian marginal law."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.special import log_ndtr, ndtr

from ..dists import DomainError


def ecdf(samples) -> tuple[np.ndarray, np.ndarray]:
    """Sorted sample points and the empirical CDF just after each one."""
    x = np.sort(np.asarray(samples, dtype=float))
    return x, np.arange(1, len(x) + 1) / len(x)


def empirical_cdf_and_ks(samples, reference: Callable | np.ndarray | list) -> float:
    """One-sample KS against a CDF handle, or two-sample KS against a sample list.

    The supremum is taken exactly over the jump points, from both sides.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("samples must be nonempty")
    if callable(reference):
        F = np.asarray(reference(x), dtype=float)
        i = np.arange(1, n + 1)
        d = max(np.max(i / n - F), np.max(F - (i - 1) / n))
        return float(min(max(d, 0.0), 1.0))
    y = np.sort(np.asarray(reference, dtype=float))
    if len(y) == 0:
        raise ValueError("reference sample must be nonempty")
    pts = np.concatenate([x, y])
    fx = np.searchsorted(x, pts, side="right") / n
    fy = np.searchsorted(y, pts, side="right") / len(y)
    return float(np.max(np.abs(fx - fy)))


def reflected_bm_marginal_cdf(w, t: float, mu: float, sigma: float):
    """``P(Gamma[sigma B + mu id](t) <= w)`` for a zero start.

    ``Phi((w - mu t)/(sigma sqrt t)) - exp(2 mu w / sigma^2) Phi((-w - mu t)/(sigma sqrt t))``,
    with the second term formed in log space so large ``w`` cannot overflow.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr < 0) or np.any(np.isnan(w_arr)):
        raise DomainError("w must be nonnegative")
    s = sigma * np.sqrt(t)
    first = ndtr((w_arr - mu * t) / s)
    second = np.exp(2.0 * mu * w_arr / sigma**2 + log_ndtr((-w_arr - mu * t) / s))
    out = np.where(w_arr == 0, 0.0, np.clip(first - second, 0.0, 1.0))
    return float(out) if np.ndim(out) == 0 else out
