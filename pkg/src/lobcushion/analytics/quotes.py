"""Statistics of the quote series: spread distribution, returns, time averages."""

from __future__ import annotations

import math
from bisect import bisect_right
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..book import QuoteSnapshot


def _valid_spans(quotes: Sequence[QuoteSnapshot], start_ms: int, end_ms: int) -> Iterator[Tuple[QuoteSnapshot, int]]:
    """Yield ``(quote, duration)`` for each valid quote's share of ``[start_ms, end_ms)``."""
    n = len(quotes)
    for i, q in enumerate(quotes):
        t0 = q.timestamp_ms
        t1 = quotes[i + 1].timestamp_ms if i + 1 < n else end_ms
        a = max(t0, start_ms)
        b = min(t1, end_ms)
        if b > a and q.valid:
            yield q, b - a


def spread_histogram(quotes: Sequence[QuoteSnapshot], start_ms: int, end_ms: int) -> Dict[int, float]:
    """Fraction of quote-valid time spent at each spread (ticks)."""
    acc: Dict[int, int] = {}
    total = 0
    for q, dt in _valid_spans(quotes, start_ms, end_ms):
        s = q.spread_ticks
        acc[s] = acc.get(s, 0) + dt
        total += dt
    if total == 0:
        raise ValueError("no quote-valid time in window")
    return {s: acc[s] / total for s in sorted(acc)}


def time_averages(quotes: Sequence[QuoteSnapshot], start_ms: int, end_ms: int) -> Tuple[float, float, int]:
    """``(mean spread ticks, mean midpoint half-ticks, quote-valid ms)`` over the window."""
    s_acc = 0.0
    m_acc = 0.0
    total = 0
    for q, dt in _valid_spans(quotes, start_ms, end_ms):
        s_acc += q.spread_ticks * dt
        m_acc += q.midpoint_half_ticks * dt
        total += dt
    if total == 0:
        raise ValueError("no quote-valid time in window")
    return s_acc / total, m_acc / total, total


def count_quote_changes(quotes: Sequence[QuoteSnapshot], start_ms: int, end_ms: int) -> int:
    """Changes of the (bid, ask) pair inside the window; establishing the first quote does not count."""
    n = 0
    prev = None
    for q in quotes:
        if q.timestamp_ms >= end_ms:
            break
        cur = (q.best_bid_ticks, q.best_ask_ticks)
        if q.timestamp_ms >= start_ms and prev is not None and q.valid and cur != prev:
            n += 1
        if q.valid:
            prev = cur
    return n


def midpoint_at(quotes: Sequence[QuoteSnapshot], times: Sequence[int]) -> np.ndarray:
    """Midpoint (half-ticks) of the latest quote at or before each time; NaN where none is valid."""
    stamps = [q.timestamp_ms for q in quotes]
    mids = np.array([np.nan if not q.valid else q.midpoint_half_ticks for q in quotes] + [np.nan])
    idx = np.array([bisect_right(stamps, t) - 1 for t in times], dtype=np.int64)
    idx[idx < 0] = len(quotes)
    return mids[idx]


def returns_series(
    quotes: Sequence[QuoteSnapshot],
    delta_t_ms: int,
    sample_ms: Optional[int] = None,
    start_ms: Optional[int] = None,
    end_ms: Optional[int] = None,
) -> np.ndarray:
    """Log midpoint returns ``ln(m(t+dt)/m(t))`` on the grid ``t = start + k*sample_ms``.

    Grid points where either end lacks a valid quote are skipped. The grid
    stops where ``t + dt`` would pass *end_ms*.
    """
    if delta_t_ms <= 0:
        raise ValueError("delta_t_ms must be positive")
    if not quotes:
        return np.empty(0)
    sample_ms = delta_t_ms if sample_ms is None else sample_ms
    start = quotes[0].timestamp_ms if start_ms is None else start_ms
    end = quotes[-1].timestamp_ms if end_ms is None else end_ms
    if end - start < delta_t_ms:
        return np.empty(0)
    t = np.arange(start, end - delta_t_ms + 1, sample_ms, dtype=np.int64)
    m0 = midpoint_at(quotes, t)
    m1 = midpoint_at(quotes, t + delta_t_ms)
    ok = ~(np.isnan(m0) | np.isnan(m1))
    return np.log(m1[ok] / m0[ok])


def volatility(quotes: Sequence[QuoteSnapshot], start_ms: int, end_ms: int, interval_ms: int = 60_000) -> float:
    """Standard deviation of midpoint log returns over consecutive *interval_ms* steps."""
    r = returns_series(quotes, interval_ms, interval_ms, start_ms, end_ms)
    return float(np.std(r)) if r.size > 1 else 0.0


def gaussian_tail_share(k_sigma: float) -> float:
    """``P(|Z| > k)`` for a standard normal ``Z``."""
    return math.erfc(k_sigma / math.sqrt(2.0))
