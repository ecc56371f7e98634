"""Visible limit order book reconstructed from order events.

Each side keeps a map ``price -> FIFO queue``; a queue is a plain dict
``order_id -> remaining_volume`` (dicts keep insertion order and allow O(1)
removal from the middle). Best prices come from per-side heaps with lazy
deletion of emptied levels.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .events import EventKind, EventStream, OrderEvent, Side

BUY = Side.BUY
SELL = Side.SELL
ADD = EventKind.ADD
HIDDEN = EventKind.HIDDEN_TRADE


class IntegrityError(ValueError):
    """An event that cannot be applied to the current book."""

    def __init__(self, kind: str, message: str, event: Optional[OrderEvent] = None, index: Optional[int] = None):
        self.kind = kind
        self.event = event
        self.index = index
        loc = f"event {index}: " if index is not None else ""
        super().__init__(f"{loc}{kind}: {message}")


@dataclass(frozen=True, slots=True)
class QuoteSnapshot:
    """Best quotes at a point in time; bid/ask are None while a side is empty."""

    timestamp_ms: int
    best_bid_ticks: Optional[int]
    best_ask_ticks: Optional[int]

    @property
    def valid(self) -> bool:
        return self.best_bid_ticks is not None and self.best_ask_ticks is not None

    @property
    def spread_ticks(self) -> Optional[int]:
        if not self.valid:
            return None
        return self.best_ask_ticks - self.best_bid_ticks

    @property
    def midpoint_half_ticks(self) -> Optional[int]:
        if not self.valid:
            return None
        return self.best_ask_ticks + self.best_bid_ticks

    @property
    def midpoint_ticks(self) -> Optional[float]:
        m2 = self.midpoint_half_ticks
        return None if m2 is None else m2 / 2


class BookState:
    def __init__(self):
        self.bids: Dict[int, Dict[int, int]] = {}
        self.asks: Dict[int, Dict[int, int]] = {}
        self.bid_volume: Dict[int, int] = {}
        self.ask_volume: Dict[int, int] = {}
        # order_id -> (side, price_ticks, insertion_time_ms)
        self.live_orders: Dict[int, Tuple[Side, int, int]] = {}
        self._bid_heap: List[int] = []  # negated prices
        self._ask_heap: List[int] = []
        # bumped whenever a price level is created or emptied
        self.level_version = 0

    # -- quotes ---------------------------------------------------------

    @property
    def best_bid_ticks(self) -> Optional[int]:
        heap = self._bid_heap
        bids = self.bids
        while heap and -heap[0] not in bids:
            heapq.heappop(heap)
        return -heap[0] if heap else None

    @property
    def best_ask_ticks(self) -> Optional[int]:
        heap = self._ask_heap
        asks = self.asks
        while heap and heap[0] not in asks:
            heapq.heappop(heap)
        return heap[0] if heap else None

    def best(self, side: Side) -> Optional[int]:
        return self.best_bid_ticks if side is BUY else self.best_ask_ticks

    def remaining(self, order_id: int) -> int:
        side, price, _ = self.live_orders[order_id]
        levels = self.bids if side is BUY else self.asks
        return levels[price][order_id]

    def __len__(self) -> int:
        return len(self.live_orders)

    def copy(self) -> "BookState":
        other = BookState()
        other.bids = {p: dict(q) for p, q in self.bids.items()}
        other.asks = {p: dict(q) for p, q in self.asks.items()}
        other.bid_volume = dict(self.bid_volume)
        other.ask_volume = dict(self.ask_volume)
        other.live_orders = dict(self.live_orders)
        other._bid_heap = list(self._bid_heap)
        other._ask_heap = list(self._ask_heap)
        other.level_version = self.level_version
        return other

    # -- event application ----------------------------------------------

    def check(self, event: OrderEvent) -> Optional[Tuple[str, str]]:
        """Return ``(kind, message)`` if *event* cannot be applied, else None."""
        kind = event.kind
        if kind is HIDDEN:
            return None
        oid = event.order_id
        if kind is ADD:
            if oid in self.live_orders:
                return "duplicate add", f"order_id {oid} is live"
            if event.side is BUY:
                ask = self.best_ask_ticks
                if ask is not None and event.price_ticks >= ask:
                    return "crossed book", f"buy at {event.price_ticks} >= best ask {ask}"
            else:
                bid = self.best_bid_ticks
                if bid is not None and event.price_ticks <= bid:
                    return "crossed book", f"sell at {event.price_ticks} <= best bid {bid}"
            return None
        rec = self.live_orders.get(oid)
        if rec is None:
            return "unknown order_id", f"order_id {oid} is not live"
        side, price, _ = rec
        if side is not event.side or price != event.price_ticks:
            return (
                "side/price mismatch",
                f"order_id {oid} rests {side.value}@{price}, event says {event.side.value}@{event.price_ticks}",
            )
        remaining = (self.bids if side is BUY else self.asks)[price][oid]
        if kind.is_partial:
            if event.volume_shares >= remaining:
                return "partial volume >= remaining", f"order_id {oid}: {event.volume_shares} >= {remaining}"
        elif event.volume_shares != remaining:
            return "removal volume != remaining", f"order_id {oid}: {event.volume_shares} != {remaining}"
        return None

    def apply(self, event: OrderEvent, index: Optional[int] = None) -> int:
        """Apply *event* in place; returns the order's remaining volume afterwards (0 once removed)."""
        kind = event.kind
        if kind is HIDDEN:
            return 0
        problem = self.check(event)
        if problem is not None:
            raise IntegrityError(problem[0], problem[1], event, index)
        oid = event.order_id
        price = event.price_ticks
        if event.side is BUY:
            levels, volumes, heap, key = self.bids, self.bid_volume, self._bid_heap, -price
        else:
            levels, volumes, heap, key = self.asks, self.ask_volume, self._ask_heap, price
        vol = event.volume_shares
        if kind is ADD:
            queue = levels.get(price)
            if queue is None:
                levels[price] = {oid: vol}
                volumes[price] = vol
                heapq.heappush(heap, key)
                self.level_version += 1
            else:
                queue[oid] = vol
                volumes[price] += vol
            self.live_orders[oid] = (event.side, price, event.timestamp_ms)
            return vol
        queue = levels[price]
        if kind.is_partial:
            left = queue[oid] - vol
            queue[oid] = left
            volumes[price] -= vol
            return left
        del queue[oid]
        del self.live_orders[oid]
        if queue:
            volumes[price] -= vol
        else:
            del levels[price]
            del volumes[price]
            self.level_version += 1
        return 0

    # -- inspection -----------------------------------------------------

    def quote(self, timestamp_ms: int = 0) -> Optional[QuoteSnapshot]:
        """Current quote, or None when either side is empty."""
        bid = self.best_bid_ticks
        ask = self.best_ask_ticks
        if bid is None or ask is None:
            return None
        return QuoteSnapshot(timestamp_ms, bid, ask)

    def volume_at(self, price_ticks: int) -> int:
        return self.bid_volume.get(price_ticks, 0) + self.ask_volume.get(price_ticks, 0)

    def count_at(self, price_ticks: int) -> int:
        q = self.bids.get(price_ticks) or self.asks.get(price_ticks)
        return len(q) if q else 0

    def occupied_levels(self) -> Iterator[Tuple[int, Side, int, int]]:
        """Yield ``(price, side, volume, order_count)`` for every occupied level."""
        for price, q in self.bids.items():
            yield price, BUY, self.bid_volume[price], len(q)
        for price, q in self.asks.items():
            yield price, SELL, self.ask_volume[price], len(q)

    def depth_snapshot(self, center_half_ticks: int, half_window_ticks: int) -> List[Tuple[int, Side, int]]:
        """Occupied levels within the window as ``(price*2 - center, side, volume)`` in half-ticks."""
        lim = 2 * half_window_ticks
        out = []
        for price, side, volume, _ in self.occupied_levels():
            rel = 2 * price - center_half_ticks
            if -lim <= rel <= lim:
                out.append((rel, side, volume))
        out.sort(key=lambda t: t[0])
        return out


def apply_event(book: BookState, event: OrderEvent) -> BookState:
    book.apply(event)
    return book


def quote(book: BookState, timestamp_ms: int = 0) -> Optional[QuoteSnapshot]:
    return book.quote(timestamp_ms)


def volume_at(book: BookState, price_ticks: int) -> int:
    return book.volume_at(price_ticks)


def depth_snapshot(book: BookState, center_half_ticks: int, half_window_ticks: int) -> List[Tuple[int, Side, int]]:
    return book.depth_snapshot(center_half_ticks, half_window_ticks)


def replay(events: Iterable[OrderEvent], book: Optional[BookState] = None) -> BookState:
    book = BookState() if book is None else book
    for i, ev in enumerate(events):
        book.apply(ev, i)
    return book


def iter_segments(events: Sequence[OrderEvent], book: Optional[BookState] = None):
    """Yield ``(t, t_next, book)`` for each distinct timestamp.

    The book reflects every event stamped ``<= t`` and stays constant on
    ``[t, t_next)``; ``t_next`` is None after the last timestamp. The same
    book object is yielded each time and must not be kept across iterations.
    """
    book = BookState() if book is None else book
    n = len(events)
    i = 0
    apply = book.apply
    while i < n:
        t = events[i].timestamp_ms
        while i < n and events[i].timestamp_ms == t:
            apply(events[i], i)
            i += 1
        yield t, (events[i].timestamp_ms if i < n else None), book


def quote_series(events: Sequence[OrderEvent]) -> List[QuoteSnapshot]:
    """Quote after each timestamp at which (best bid, best ask) changed.

    The first entry is the state after the first timestamp; entries with a
    missing side mark the start of a no-quote period.
    """
    out: List[QuoteSnapshot] = []
    prev = ("init",)
    for t, _, book in iter_segments(events):
        cur = (book.best_bid_ticks, book.best_ask_ticks)
        if cur != prev:
            out.append(QuoteSnapshot(t, cur[0], cur[1]))
            prev = cur
    return out


def stream_quotes(stream: EventStream) -> List[QuoteSnapshot]:
    return quote_series(stream.events)
