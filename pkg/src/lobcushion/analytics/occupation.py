"""Time-averaged occupation of relative price levels, cushion width and order-count grids.

Relative prices are measured in half-ticks, ``2*price - (bid + ask)``, so
every level lands on an integer no matter whether the spread is odd or even.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..book import BookState, iter_segments
from ..events import EventKind, EventStream, Side


@dataclass
class OccupationProfile:
    occupation: Dict[int, float]
    o_max: float
    observed_time_ms: int
    excluded_time_ms: int = 0
    width_ticks: Optional[float] = None

    @property
    def excluded_fraction(self) -> float:
        total = self.observed_time_ms + self.excluded_time_ms
        return self.excluded_time_ms / total if total else 0.0

    def levels(self) -> List[int]:
        return sorted(self.occupation)


def _clip(t0: int, t1: int, lo: int, hi: int) -> int:
    a = t0 if t0 > lo else lo
    b = t1 if t1 < hi else hi
    return b - a if b > a else 0


def occupation_profile(
    stream: EventStream,
    window: Optional[Tuple[int, int]] = None,
    range_half_ticks: int = 100,
) -> OccupationProfile:
    """Fraction of quote-valid window time each relative level holds visible volume.

    Intervals with a one-sided or empty book are left out of the average and
    reported as ``excluded_time_ms``.
    """
    lo, hi = window if window is not None else stream.window
    end = stream.session_end_ms
    R = range_half_ticks
    acc = np.zeros(2 * R + 1)
    observed = 0
    excluded = 0
    pending = 0
    key = None
    cur_levels: List[int] = []

    def flush():
        if pending:
            for rel in cur_levels:
                acc[rel + R] += pending

    for t, t_next, book in iter_segments(stream.events):
        dt = _clip(t, end if t_next is None else t_next, lo, hi)
        if dt == 0:
            continue
        bid = book.best_bid_ticks
        ask = book.best_ask_ticks
        if bid is None or ask is None:
            excluded += dt
            continue
        observed += dt
        m2 = bid + ask
        new_key = (m2, book.level_version)
        if new_key != key:
            flush()
            pending = 0
            key = new_key
            bids, asks = book.bids, book.asks
            cur_levels = []
            for p in range(-((R - m2) // 2), (m2 + R) // 2 + 1):
                if p in bids or p in asks:
                    cur_levels.append(2 * p - m2)
        pending += dt
    flush()
    # window time before the first event has an empty book
    first = stream.events[0].timestamp_ms if stream.events else hi
    excluded += _clip(lo, first, lo, hi)
    if observed == 0:
        raise ValueError("no quote-valid time inside the analysis window")
    occ = {rel: float(acc[rel + R] / observed) for rel in range(-R, R + 1)}
    return OccupationProfile(occ, max(occ.values()), observed, excluded)


def cushion_width(profile: OccupationProfile | Dict[int, float], max_gap_half_ticks: int = 2) -> Tuple[float, float]:
    """Full width at two-thirds of the maximum occupation, in ticks.

    Starting from the maximum, the super-threshold region grows outwards and
    may jump over at most ``max_gap_half_ticks`` consecutive sub-threshold
    levels (the empty midpoint level, odd/even spread alternation). Returns
    ``(width_ticks, o_max)``.
    """
    occ = profile.occupation if isinstance(profile, OccupationProfile) else profile
    if not occ:
        raise ValueError("empty occupation profile")
    o_max = max(occ.values())
    if not o_max > 0:
        raise ValueError("occupation maximum must be positive")
    # relative slack so a level sitting exactly on the threshold is not lost to rounding
    threshold = 2.0 * o_max / 3.0 * (1.0 - 1e-12)
    # ties broken toward the midpoint, then toward the buy side
    peak = min((rel for rel, v in occ.items() if v == o_max), key=lambda r: (abs(r), r))

    first, last = min(occ), max(occ)

    def reach(direction: int) -> int:
        edge = pos = peak
        gap = 0
        while True:
            pos += direction
            if pos < first or pos > last:
                return edge
            if occ.get(pos, 0.0) >= threshold:
                edge = pos
                gap = 0
            else:
                gap += 1
                if gap > max_gap_half_ticks:
                    return edge

    lo_edge = reach(-1)
    hi_edge = reach(+1)
    width = (hi_edge - lo_edge) / 2
    if isinstance(profile, OccupationProfile):
        profile.width_ticks = width
    return width, o_max


@dataclass
class CountGrid:
    """Sampled book around the midpoint; arrays indexed ``[sample, bin]``."""

    times_ms: np.ndarray
    bins: np.ndarray  # lower edge of each relative-price bin, half-ticks
    buy_count: np.ndarray
    sell_count: np.ndarray
    buy_volume: np.ndarray
    sell_volume: np.ndarray
    midpoint_half_ticks: np.ndarray  # centre used per sample, -1 when none
    bin_ticks: int = 1

    def rows(self):
        """Non-zero cells as ``(t, bin, side, order_count, volume_per_level)``."""
        per_level = float(self.bin_ticks)
        for i, t in enumerate(self.times_ms.tolist()):
            for j, b in enumerate(self.bins.tolist()):
                if self.buy_count[i, j]:
                    yield t, b, "B", int(self.buy_count[i, j]), self.buy_volume[i, j] / per_level
                if self.sell_count[i, j]:
                    yield t, b, "S", int(self.sell_count[i, j]), self.sell_volume[i, j] / per_level


def order_count_grid(
    stream: EventStream,
    window: Optional[Tuple[int, int]] = None,
    range_half_ticks: int = 100,
    sample_ms: int = 1000,
    bin_ticks: int = 1,
) -> CountGrid:
    """Order counts and volumes per relative price bin, sampled every *sample_ms*.

    A sample at ``t`` sees every event stamped ``<= t``. While the book is
    one-sided the last valid midpoint is used as centre. With ``bin_ticks > 1``
    levels are grouped in bins of that many ticks and volumes are reported
    per price level (bin volume divided by ``bin_ticks``).
    """
    if sample_ms <= 0 or bin_ticks < 1:
        raise ValueError("sample_ms and bin_ticks must be positive")
    lo, hi = window if window is not None else stream.window
    R = range_half_ticks
    width = 1 if bin_ticks == 1 else 2 * bin_ticks
    first_bin = (-R) // width
    last_bin = R // width
    bins = np.arange(first_bin, last_bin + 1) * width
    times = np.arange(lo, hi, sample_ms, dtype=np.int64)
    shape = (len(times), len(bins))
    bc = np.zeros(shape, dtype=np.int64)
    sc = np.zeros(shape, dtype=np.int64)
    bv = np.zeros(shape, dtype=np.int64)
    sv = np.zeros(shape, dtype=np.int64)
    mids = np.full(len(times), -1, dtype=np.int64)

    events = stream.events
    last_mid = None
    k = 0
    n = len(times)

    def fill(i, book, m2):
        for levels, counts, vols, volmap in (
            (book.bids, bc, bv, book.bid_volume),
            (book.asks, sc, sv, book.ask_volume),
        ):
            for p, q in levels.items():
                rel = 2 * p - m2
                if -R <= rel <= R:
                    j = rel // width - first_bin
                    counts[i, j] += len(q)
                    vols[i, j] += volmap[p]

    book = BookState()
    idx = 0
    while k < n:
        t = int(times[k])
        while idx < len(events) and events[idx].timestamp_ms <= t:
            book.apply(events[idx], idx)
            idx += 1
        bid, ask = book.best_bid_ticks, book.best_ask_ticks
        if bid is not None and ask is not None:
            last_mid = bid + ask
        if last_mid is not None:
            mids[k] = last_mid
            fill(k, book, last_mid)
        k += 1
    return CountGrid(times, bins, bc, sc, bv, sv, mids, bin_ticks)


@dataclass
class Filling:
    """Time-averaged order count per side and level, counted outward from the midpoint."""

    buy: np.ndarray
    sell: np.ndarray
    observed_time_ms: int

    @property
    def mean(self) -> np.ndarray:
        return (self.buy + self.sell) / 2


def average_filling(stream: EventStream, n_levels: int, window: Optional[Tuple[int, int]] = None) -> Filling:
    """Mean number of resting orders at each distance from the midpoint.

    Level ``k`` holds prices ``2k+1`` or ``2k+2`` half-ticks from the
    midpoint, so level 0 is the best quote whenever the spread is one or two
    ticks. Per-level counts are updated per event and rebuilt only when the
    midpoint moves.
    """
    lo, hi = window if window is not None else stream.window
    end = stream.session_end_ms
    n = n_levels
    buy_acc = [0.0] * n
    sell_acc = [0.0] * n
    buy_now = [0] * n
    sell_now = [0] * n
    observed = 0
    m2 = None
    book = BookState()
    events = stream.events
    ADD = EventKind.ADD
    BUY = Side.BUY
    i = 0
    while i < len(events):
        t = events[i].timestamp_ms
        while i < len(events) and events[i].timestamp_ms == t:
            ev = events[i]
            book.apply(ev, i)
            i += 1
            if m2 is None or not (ev.kind is ADD or ev.kind.is_removal):
                continue
            delta = 1 if ev.kind is ADD else -1
            if ev.side is BUY:
                k = (m2 - 2 * ev.price_ticks - 1) // 2
                if 0 <= k < n:
                    buy_now[k] += delta
            else:
                k = (2 * ev.price_ticks - m2 - 1) // 2
                if 0 <= k < n:
                    sell_now[k] += delta
        bid = book.best_bid_ticks
        ask = book.best_ask_ticks
        new_m2 = bid + ask if bid is not None and ask is not None else None
        if new_m2 != m2:
            m2 = new_m2
            buy_now = [0] * n
            sell_now = [0] * n
            if m2 is not None:
                for p, q in book.bids.items():
                    k = (m2 - 2 * p - 1) // 2
                    if k < n:
                        buy_now[k] += len(q)
                for p, q in book.asks.items():
                    k = (2 * p - m2 - 1) // 2
                    if k < n:
                        sell_now[k] += len(q)
        if m2 is None:
            continue
        dt = _clip(t, events[i].timestamp_ms if i < len(events) else end, lo, hi)
        if dt:
            observed += dt
            for k in range(n):
                if buy_now[k]:
                    buy_acc[k] += dt * buy_now[k]
                if sell_now[k]:
                    sell_acc[k] += dt * sell_now[k]
    if observed == 0:
        raise ValueError("no quote-valid time inside the analysis window")
    return Filling(np.array(buy_acc) / observed, np.array(sell_acc) / observed, observed)
