"""Per-level insertion statistics, model parameter fits and per-dataset summaries."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..book import quote_series
from ..events import EventKind, EventStream, OrderEvent
from .distributions import ExpFit, fit_exponential_loglinear
from .occupation import cushion_width, occupation_profile
from .quotes import count_quote_changes, time_averages, volatility
from .records import OrderRecord, build_order_records


@dataclass
class LevelStats:
    counts: np.ndarray
    mean_lifetime_ms: np.ndarray  # NaN where a level saw no insertion
    excluded: int = 0  # no opposite quote at insertion
    beyond: int = 0  # level >= n_levels

    @property
    def frequencies(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total else self.counts.astype(float)


def level_statistics(
    records: Sequence[OrderRecord],
    n_levels: int,
    min_insertion_ms: Optional[int] = None,
    max_insertion_ms: Optional[int] = None,
) -> LevelStats:
    """Insertion counts and mean lifetimes per level ``0..n_levels-1``.

    The level is measured from the opposite best quote at insertion. Records
    with no opposite quote are counted in ``excluded``.
    """
    counts = np.zeros(n_levels, dtype=np.int64)
    life = np.zeros(n_levels)
    excluded = beyond = 0
    for rec in records:
        t = rec.insertion_time_ms
        if min_insertion_ms is not None and t < min_insertion_ms:
            continue
        if max_insertion_ms is not None and t >= max_insertion_ms:
            continue
        level = rec.insertion_level
        if level is None:
            excluded += 1
            continue
        if level >= n_levels:
            beyond += 1
            continue
        counts[level] += 1
        life[level] += rec.lifetime_ms
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(counts > 0, life / np.maximum(counts, 1), np.nan)
    return LevelStats(counts, mean, excluded, beyond)


def count_market_orders(events: Sequence[OrderEvent]) -> int:
    """Reconstruct market orders as runs of consecutive executions sharing timestamp and side."""
    n = 0
    prev = None
    for ev in events:
        if ev.kind is EventKind.EXECUTE or ev.kind is EventKind.EXECUTE_PARTIAL:
            key = (ev.timestamp_ms, ev.side)
            if key != prev:
                n += 1
            prev = key
        elif ev.kind is not EventKind.HIDDEN_TRADE:
            prev = None
    return n


@dataclass
class ModelFit:
    l0: float
    t_lt_ms: float
    l_lt: float
    market_share: float
    n_market_orders: int
    n_limit_orders: int
    level_fit: Optional[ExpFit] = None
    lifetime_fit: Optional[ExpFit] = None
    levels: Optional[LevelStats] = None


def fit_model_parameters(
    stream: EventStream,
    n_levels: int,
    warmup_ms: int = 0,
    records: Optional[List[OrderRecord]] = None,
) -> ModelFit:
    """Recover ``l0``, ``t_lt``, ``l_lt`` and the market-order share from a stream.

    Orders inserted before ``open + warmup_ms`` are ignored. Level frequency
    and mean lifetime are fitted with log-linear least squares over the
    levels that saw insertions.
    """
    lo, hi = stream.window
    start = lo + warmup_ms
    records = build_order_records(stream) if records is None else records
    stats = level_statistics(records, n_levels, min_insertion_ms=start, max_insertion_ms=hi)
    seen = np.flatnonzero(stats.counts > 0)
    level_fit = lifetime_fit = None
    l0 = t_lt = l_lt = float("nan")
    if seen.size >= 3:
        level_fit = fit_exponential_loglinear(seen, stats.counts[seen])
        l0 = level_fit.scale
        pos = seen[stats.mean_lifetime_ms[seen] > 0]
        if pos.size >= 3:
            lifetime_fit = fit_exponential_loglinear(pos, stats.mean_lifetime_ms[pos])
            t_lt = lifetime_fit.amplitude
            l_lt = lifetime_fit.scale
    in_window = [ev for ev in stream.events if start <= ev.timestamp_ms < hi]
    n_market = count_market_orders(in_window)
    n_limit = sum(1 for ev in in_window if ev.kind is EventKind.ADD)
    total = n_market + n_limit
    share = n_market / total if total else float("nan")
    return ModelFit(l0, t_lt, l_lt, share, n_market, n_limit, level_fit, lifetime_fit, stats)


@dataclass
class DatasetSummary:
    mean_spread_ticks: float
    mean_midpoint_half_ticks: float
    n_quote_changes: int
    n_trades: int
    n_limit_orders: int
    traded_capital_cents: int
    width_ticks: Optional[float]
    o_max: float
    volatility: float = float("nan")
    quote_valid_ms: int = 0
    tick_size_cents: int = 1

    @property
    def large_tick(self) -> bool:
        return self.mean_spread_ticks * self.tick_size_cents <= 3

    COLUMNS = (
        "mean_spread_ticks",
        "mean_midpoint_half_ticks",
        "n_quote_changes",
        "n_trades",
        "n_limit_orders",
        "traded_capital_cents",
        "width_ticks",
        "o_max",
        "large_tick",
        "volatility",
    )

    def row(self) -> list:
        return [getattr(self, c) if c != "large_tick" else int(self.large_tick) for c in self.COLUMNS]


def summarize_dataset(stream: EventStream, range_half_ticks: int = 200) -> DatasetSummary:
    """All per-day characteristics over the market-hours window.

    Trades are EXECUTE, EXECUTE_PARTIAL and HIDDEN_TRADE events; traded
    capital sums price times volume over them (ticks times shares, converted
    to cents with the stream's tick size).
    """
    lo, hi = stream.window
    quotes = quote_series(stream.events)
    s_bar, m_bar, valid = time_averages(quotes, lo, hi)
    n_trades = 0
    capital = 0
    n_lim = 0
    for ev in stream.events:
        if not lo <= ev.timestamp_ms < hi:
            continue
        if ev.kind.is_trade:
            n_trades += 1
            capital += ev.price_ticks * ev.volume_shares
        elif ev.kind is EventKind.ADD:
            n_lim += 1
    profile = occupation_profile(stream, (lo, hi), range_half_ticks)
    width, o_max = cushion_width(profile)
    return DatasetSummary(
        mean_spread_ticks=s_bar,
        mean_midpoint_half_ticks=m_bar,
        n_quote_changes=count_quote_changes(quotes, lo, hi),
        n_trades=n_trades,
        n_limit_orders=n_lim,
        traded_capital_cents=capital * stream.tick_size_cents,
        width_ticks=width,
        o_max=o_max,
        volatility=volatility(quotes, lo, hi),
        quote_valid_ms=valid,
        tick_size_cents=stream.tick_size_cents,
    )
