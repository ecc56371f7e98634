"""Per-order facts (lifetime, insertion price relative to the midpoint) and regime labels."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, List, Optional

from ..book import BookState
from ..events import EventKind, EventStream, Side


@dataclass(slots=True)
class OrderRecord:
    order_id: int
    side: Side
    price_ticks: int
    insertion_time_ms: int
    initial_volume: int
    removal_time_ms: Optional[int] = None
    lifetime_ms: Optional[int] = None
    censored: bool = False
    executed: bool = False
    midpoint_at_insertion_half_ticks: Optional[int] = None
    opposite_best_ticks: Optional[int] = None

    @property
    def relative_insertion_price(self) -> Optional[float]:
        """Signed distance from the pre-insertion midpoint, in units of the midpoint.

        Positive away from the midpoint on the order's own side, negative
        when the order crosses it.
        """
        m2 = self.midpoint_at_insertion_half_ticks
        if m2 is None:
            return None
        if self.side is Side.SELL:
            return (2 * self.price_ticks - m2) / m2
        return (m2 - 2 * self.price_ticks) / m2

    @property
    def insertion_level(self) -> Optional[int]:
        """Ticks inside the opposite best at insertion, minus one, clamped at 0."""
        ref = self.opposite_best_ticks
        if ref is None:
            return None
        dist = ref - self.price_ticks if self.side is Side.BUY else self.price_ticks - ref
        return max(dist - 1, 0)


def build_order_records(stream: EventStream) -> List[OrderRecord]:
    """One record per ADD, in insertion order.

    Life ends when the remaining volume first reaches zero; orders still
    live at session end are censored at ``session_end_ms``.
    """
    book = BookState()
    records: List[OrderRecord] = []
    by_id: Dict[int, OrderRecord] = {}
    ADD = EventKind.ADD
    HIDDEN = EventKind.HIDDEN_TRADE
    EXECUTE = EventKind.EXECUTE
    for i, ev in enumerate(stream.events):
        kind = ev.kind
        if kind is HIDDEN:
            continue
        if kind is ADD:
            bid = book.best_bid_ticks
            ask = book.best_ask_ticks
            rec = OrderRecord(
                ev.order_id,
                ev.side,
                ev.price_ticks,
                ev.timestamp_ms,
                ev.volume_shares,
                midpoint_at_insertion_half_ticks=(bid + ask) if bid is not None and ask is not None else None,
                opposite_best_ticks=ask if ev.side is Side.BUY else bid,
            )
            records.append(rec)
            by_id[ev.order_id] = rec
            book.apply(ev, i)
            continue
        left = book.apply(ev, i)
        if left == 0:
            rec = by_id.pop(ev.order_id)
            rec.removal_time_ms = ev.timestamp_ms
            rec.lifetime_ms = ev.timestamp_ms - rec.insertion_time_ms
            rec.executed = kind is EXECUTE
    end = stream.session_end_ms
    for rec in by_id.values():
        rec.censored = True
        rec.lifetime_ms = max(end - rec.insertion_time_ms, 0)
    return records


class Regime(enum.Enum):
    CUSHION = "cushion"
    DISTANT_FIELD = "distant"
    UNCLASSIFIED = "unclassified"


def classify_regime(record: OrderRecord, width_ticks: float) -> Regime:
    """Cushion iff the signed insertion distance from the midpoint is at most half the width."""
    p_rel = record.relative_insertion_price
    if p_rel is None:
        return Regime.UNCLASSIFIED
    return classify_distance(p_rel, record.midpoint_at_insertion_half_ticks / 2, width_ticks)


def classify_distance(p_rel: float, midpoint_ticks: float, width_ticks: float) -> Regime:
    # p_rel * m is the signed distance in ticks; tolerance absorbs float rounding of exact ties
    distance = p_rel * midpoint_ticks
    if distance <= width_ticks / 2 + 1e-9:
        return Regime.CUSHION
    return Regime.DISTANT_FIELD
