"""Weighted inverse cumulative distributions and log-scale least-squares fits."""

from __future__ import annotations

from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np


class WeightedSample(NamedTuple):
    value: float
    weight: float = 1.0


def _as_arrays(values, weights) -> Tuple[np.ndarray, np.ndarray]:
    v = np.asarray(values, dtype=float)
    if weights is None:
        w = np.ones_like(v)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != v.shape:
            raise ValueError("values and weights differ in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
    if v.size == 0:
        raise ValueError("icdf needs at least one sample")
    return v, w


def icdf(values, query_points, weights=None) -> np.ndarray:
    """Weight fraction of samples strictly greater than each query point.

    ``I(x) = sum(w_i for v_i > x) / sum(w_i)``. Unweighted when *weights* is None.
    """
    v, w = _as_arrays(values, weights)
    total = w.sum()
    if not total > 0:
        raise ValueError("total weight is zero")
    order = np.argsort(v, kind="stable")
    v_sorted = v[order]
    # exceed[k] = weight of samples from index k onward
    exceed = np.concatenate([np.cumsum(w[order][::-1])[::-1], [0.0]])
    x = np.asarray(query_points, dtype=float)
    idx = np.searchsorted(v_sorted, x, side="right")
    return exceed[idx] / total


def icdf_samples(samples: Sequence[WeightedSample], query_points) -> list:
    """``icdf`` over ``WeightedSample`` tuples; returns ``[(x, I(x)), ...]``."""
    values = [s.value for s in samples]
    weights = [s.weight for s in samples]
    xs = np.asarray(query_points, dtype=float)
    return list(zip(xs.tolist(), icdf(values, xs, weights).tolist()))


def icdf_table(values, weights=None) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate the icdf at every distinct sample value."""
    xs = np.unique(np.asarray(values, dtype=float))
    return xs, icdf(values, xs, weights)


def fit_power_law_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 2 or np.var(lx) == 0:
        raise ValueError("degenerate range: log x has zero variance")
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def fit_power_tail(values, x_lo: float, x_hi: float, weights=None) -> float:
    """Density exponent of a power-law tail fitted to the empirical icdf.

    The icdf is evaluated at the distinct sample values in ``[x_lo, x_hi]``
    where it is positive. If ``I(x) ~ x**s`` the density goes as
    ``x**(s - 1)``; the returned exponent is ``1 - s`` (positive for a
    decaying tail), so ``I(x) = x**-1.4`` gives 2.4.
    """
    v = np.asarray(values, dtype=float)
    inside = np.unique(v[(v >= x_lo) & (v <= x_hi)])
    if inside.size < 10:
        raise ValueError(f"need >= 10 distinct values in [{x_lo}, {x_hi}], got {inside.size}")
    levels = icdf(v, inside, weights)
    keep = (levels > 0) & (inside > 0)
    return 1.0 - fit_power_law_slope(inside[keep], levels[keep])


class ExpFit(NamedTuple):
    """``y = amplitude * exp(slope * l)``; ``scale = 1/|slope|``."""

    amplitude: float
    scale: float
    slope: float
    r_squared: float

    @property
    def growing(self) -> bool:
        return self.slope > 0


def fit_exponential_loglinear(levels, y) -> ExpFit:
    """Straight-line least squares on ``(l, ln y)``, which minimises relative errors."""
    l = np.asarray(levels, dtype=float)
    yv = np.asarray(y, dtype=float)
    if l.size < 3:
        raise ValueError("need at least 3 points")
    if np.any(yv <= 0):
        raise ValueError("all y must be positive")
    lc = l - l.mean()
    sxx = float(np.dot(lc, lc))
    if sxx == 0:
        raise ValueError("levels have zero variance")
    ly = np.log(yv)
    slope = float(np.dot(lc, ly - ly.mean()) / sxx)
    intercept = float(ly.mean() - slope * l.mean())
    resid = ly - (intercept + slope * l)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.dot(resid, resid)) / ss_tot if ss_tot > 0 else 1.0
    scale = 1.0 / abs(slope) if slope != 0 else float("inf")
    return ExpFit(float(np.exp(intercept)), scale, slope, r2)


def excess_kurtosis(x) -> float:
    a = np.asarray(x, dtype=float)
    d = a - a.mean()
    m2 = np.mean(d**2)
    if m2 == 0:
        return 0.0
    return float(np.mean(d**4) / m2**2 - 3.0)


def spearman(x, y) -> float:
    from scipy.stats import spearmanr

    return float(spearmanr(x, y).statistic)
