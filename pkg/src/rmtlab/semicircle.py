"""The semicircle law on [-2, 2]: density, CDF, quantiles, Catalan moments and
the Kolmogorov distance of an empirical spectrum to it."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import OddOrder, OrderTooLarge

SUPPORT = (-2.0, 2.0)
MAX_ORDER = 40


def density(x):
    """f(x) = sqrt(4 - x^2) / (2 pi) on [-2, 2], zero outside."""
    x = np.asarray(x, dtype=float)
    out = np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def cdf(x):
    x = np.asarray(x, dtype=float)
    y = np.clip(x, -2.0, 2.0)
    out = 0.5 + y * np.sqrt(4.0 - y * y) / (4.0 * math.pi) + np.arcsin(y / 2.0) / math.pi
    out = np.where(x <= -2.0, 0.0, np.where(x >= 2.0, 1.0, out))
    return float(out) if out.ndim == 0 else out


def quantile(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if p in (0.0, 1.0):
        return 2.0 * (2 * p - 1)
    return optimize.brentq(lambda t: cdf(t) - p, -2.0, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def moment(order: int) -> int:
    """Catalan number C_{order/2}; odd moments vanish but are not served here."""
    if order % 2:
        raise OddOrder(f"order must be even, got {order}")
    if order < 0 or order > MAX_ORDER:
        raise OrderTooLarge(f"order must lie in [0, {MAX_ORDER}], got {order}")
    k = order // 2
    return math.comb(2 * k, k) // (k + 1)


def ks_distance(spectrum) -> float:
    """sup_x |F_n(x) - F(x)|, checked at both one-sided limits of every atom."""
    lam = np.sort(np.asarray(getattr(spectrum, "eigenvalues", spectrum), dtype=float))
    n = lam.size
    if n == 0:
        raise ValueError("empty spectrum")
    # F_n jumps at distinct values only; use side counts to handle ties
    left = np.searchsorted(lam, lam, side="left") / n
    right = np.searchsorted(lam, lam, side="right") / n
    f = cdf(lam)
    return float(max(np.max(np.abs(left - f)), np.max(np.abs(right - f))))


@dataclass(frozen=True)
class SemicircleLaw:
    support: tuple[float, float] = SUPPORT

    density = staticmethod(density)
    cdf = staticmethod(cdf)
    quantile = staticmethod(quantile)
    moment = staticmethod(moment)
