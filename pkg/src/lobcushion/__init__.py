"""Limit order book reconstruction, liquidity-cushion statistics and a zero-intelligence cushion model."""

from .book import BookState, IntegrityError, QuoteSnapshot, apply_event, depth_snapshot, quote, volume_at
from .events import (
    EventKind,
    EventStream,
    OrderEvent,
    ParseError,
    Side,
    parse_event_line,
    read_events,
    serialize_event_line,
    validate_stream,
    write_events,
)
from .simulator import SimParams, Variant, run_simulation

__version__ = "0.1.0"
