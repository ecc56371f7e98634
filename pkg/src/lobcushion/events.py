"""Canonical order-event stream: types, line codec, event files and validation.

An event file is UTF-8 text. The first line is a header::

    # lob-events v1 tick_cents=1 open_ms=0 close_ms=23400000

optionally followed by ``start_ms=<n>`` and ``end_ms=<n>`` when the session
bounds differ from ``0`` and ``close_ms``. Every further line is one event::

    timestamp_ms,kind,order_id,side,price_ticks,volume_shares

with kind in ``A`` (add), ``C`` (cancel), ``X`` (partial cancel),
``E`` (execute), ``P`` (partial execute), ``H`` (hidden trade) and side in
``B``/``S``.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

HEADER_MAGIC = "# lob-events v1"


class Side(enum.Enum):
    BUY = "B"
    SELL = "S"

    @property
    def opposite(self) -> "Side":
        return Side.SELL if self is Side.BUY else Side.BUY


class EventKind(enum.Enum):
    ADD = "A"
    CANCEL = "C"
    CANCEL_PARTIAL = "X"
    EXECUTE = "E"
    EXECUTE_PARTIAL = "P"
    HIDDEN_TRADE = "H"

    @property
    def is_removal(self) -> bool:
        return self in (EventKind.CANCEL, EventKind.EXECUTE)

    @property
    def is_partial(self) -> bool:
        return self in (EventKind.CANCEL_PARTIAL, EventKind.EXECUTE_PARTIAL)

    @property
    def is_trade(self) -> bool:
        return self in (EventKind.EXECUTE, EventKind.EXECUTE_PARTIAL, EventKind.HIDDEN_TRADE)


_KIND_BY_CODE = {k.value: k for k in EventKind}
_SIDE_BY_CODE = {s.value: s for s in Side}
_FIELDS = ("timestamp_ms", "kind", "order_id", "side", "price_ticks", "volume_shares")
_MAX_ID = 2**64 - 1


class ParseError(ValueError):
    """A malformed event line or header."""

    def __init__(self, message: str, line_no: Optional[int] = None, field_name: Optional[str] = None):
        self.line_no = line_no
        self.field_name = field_name
        where = []
        if line_no is not None:
            where.append(f"line {line_no}")
        if field_name is not None:
            where.append(f"field {field_name!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass(frozen=True, slots=True)
class OrderEvent:
    timestamp_ms: int
    kind: EventKind
    order_id: int
    side: Side
    price_ticks: int
    volume_shares: int


@dataclass
class EventStream:
    events: List[OrderEvent]
    market_open_ms: int
    market_close_ms: int
    session_start_ms: int = 0
    session_end_ms: Optional[int] = None
    tick_size_cents: int = 1

    def __post_init__(self):
        if self.session_end_ms is None:
            last = self.events[-1].timestamp_ms if self.events else 0
            self.session_end_ms = max(self.market_close_ms, last)
        if not (self.session_start_ms <= self.market_open_ms < self.market_close_ms <= self.session_end_ms):
            raise ValueError(
                "session bounds must satisfy start <= open < close <= end, got "
                f"{self.session_start_ms}, {self.market_open_ms}, {self.market_close_ms}, {self.session_end_ms}"
            )
        if self.tick_size_cents < 1:
            raise ValueError("tick_size_cents must be >= 1")

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[OrderEvent]:
        return iter(self.events)

    @property
    def window(self) -> Tuple[int, int]:
        return self.market_open_ms, self.market_close_ms


def _parse_int(text: str, line_no: Optional[int], name: str) -> int:
    text = text.strip()
    # int() accepts "+5" and "1_000"; the format does not
    if not text or not (text.isdigit() or (text[0] == "-" and text[1:].isdigit())):
        raise ParseError(f"not an integer: {text!r}", line_no, name)
    return int(text)


def parse_event_line(line: str, line_no: Optional[int] = None) -> OrderEvent:
    """Decode one ``timestamp_ms,kind,order_id,side,price_ticks,volume_shares`` record."""
    parts = line.strip().split(",")
    if len(parts) != len(_FIELDS):
        raise ParseError(f"expected {len(_FIELDS)} fields, got {len(parts)}", line_no)
    ts = _parse_int(parts[0], line_no, "timestamp_ms")
    if ts < 0:
        raise ParseError("timestamp must be >= 0", line_no, "timestamp_ms")
    kind = _KIND_BY_CODE.get(parts[1].strip())
    if kind is None:
        raise ParseError(f"unknown kind code {parts[1].strip()!r}", line_no, "kind")
    oid = _parse_int(parts[2], line_no, "order_id")
    if not 0 <= oid <= _MAX_ID:
        raise ParseError("order_id out of unsigned 64-bit range", line_no, "order_id")
    if (kind is EventKind.HIDDEN_TRADE) != (oid == 0):
        raise ParseError("order_id 0 is reserved for hidden trades", line_no, "order_id")
    side = _SIDE_BY_CODE.get(parts[3].strip())
    if side is None:
        raise ParseError(f"unknown side code {parts[3].strip()!r}", line_no, "side")
    price = _parse_int(parts[4], line_no, "price_ticks")
    if price <= 0:
        raise ParseError("price must be positive", line_no, "price_ticks")
    volume = _parse_int(parts[5], line_no, "volume_shares")
    if volume <= 0:
        raise ParseError("volume must be positive", line_no, "volume_shares")
    return OrderEvent(ts, kind, oid, side, price, volume)


def serialize_event_line(event: OrderEvent) -> str:
    return (
        f"{event.timestamp_ms},{event.kind.value},{event.order_id},"
        f"{event.side.value},{event.price_ticks},{event.volume_shares}"
    )


def format_header(stream: EventStream) -> str:
    header = (
        f"{HEADER_MAGIC} tick_cents={stream.tick_size_cents} "
        f"open_ms={stream.market_open_ms} close_ms={stream.market_close_ms}"
    )
    if stream.session_start_ms != 0:
        header += f" start_ms={stream.session_start_ms}"
    if stream.session_end_ms != stream.market_close_ms:
        header += f" end_ms={stream.session_end_ms}"
    return header


def parse_header(line: str) -> dict:
    line = line.rstrip("\r\n")
    if not line.startswith(HEADER_MAGIC):
        raise ParseError(f"missing header {HEADER_MAGIC!r}", 1)
    values = {}
    for token in line[len(HEADER_MAGIC):].split():
        key, sep, value = token.partition("=")
        if not sep or key not in ("tick_cents", "open_ms", "close_ms", "start_ms", "end_ms"):
            raise ParseError(f"bad header token {token!r}", 1)
        values[key] = _parse_int(value, 1, key)
    for required in ("tick_cents", "open_ms", "close_ms"):
        if required not in values:
            raise ParseError(f"header lacks {required}", 1)
    return values


def parse_stream(lines: Iterable[str]) -> EventStream:
    it = iter(lines)
    try:
        first = next(it)
    except StopIteration:
        raise ParseError("empty event file", 1) from None
    hdr = parse_header(first)
    events = []
    for line_no, line in enumerate(it, start=2):
        if not line.strip():
            continue
        events.append(parse_event_line(line, line_no))
    try:
        return EventStream(
            events,
            market_open_ms=hdr["open_ms"],
            market_close_ms=hdr["close_ms"],
            session_start_ms=hdr.get("start_ms", 0),
            session_end_ms=hdr.get("end_ms", hdr["close_ms"]),
            tick_size_cents=hdr["tick_cents"],
        )
    except ValueError as exc:
        raise ParseError(str(exc), 1) from exc


def read_events(path: str | os.PathLike) -> EventStream:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_stream(fh)


def iter_stream_lines(stream: EventStream) -> Iterator[str]:
    yield format_header(stream)
    for ev in stream.events:
        yield serialize_event_line(ev)


def stream_to_text(stream: EventStream) -> str:
    return "\n".join(iter_stream_lines(stream)) + "\n"


def write_events(stream: EventStream, path: str | os.PathLike) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, stream_to_text(stream))


@dataclass(frozen=True)
class Violation:
    index: int
    kind: str
    message: str

    def __str__(self) -> str:
        return f"event {self.index}: {self.kind}: {self.message}"


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)
    n_events: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def format(self, limit: int = 50) -> str:
        if self.ok:
            return f"OK ({self.n_events} events)"
        lines = [f"{len(self.violations)} violation(s) in {self.n_events} events"]
        lines += [str(v) for v in self.violations[:limit]]
        if len(self.violations) > limit:
            lines.append(f"... {len(self.violations) - limit} more")
        return "\n".join(lines)


def validate_events(events: Sequence[OrderEvent]) -> ValidationReport:
    """Check stream integrity; violations are collected in event order, never raised.

    Each event is checked against a book built from the events accepted so
    far; a rejected event is reported and skipped.
    """
    from .book import BookState

    report = ValidationReport(n_events=len(events))
    out = report.violations
    book = BookState()
    seen = set()
    last_ts = None
    for i, ev in enumerate(events):
        if last_ts is not None and ev.timestamp_ms < last_ts:
            out.append(Violation(i, "timestamp regression", f"{ev.timestamp_ms} < {last_ts}"))
        else:
            last_ts = ev.timestamp_ms
        if ev.kind is EventKind.ADD:
            if ev.order_id in seen:
                out.append(Violation(i, "duplicate add", f"order_id {ev.order_id} already used"))
                continue
        elif ev.kind is not EventKind.HIDDEN_TRADE and ev.order_id in seen and ev.order_id not in book.live_orders:
            out.append(Violation(i, "dead order_id", f"order_id {ev.order_id} was already removed"))
            continue
        problem = book.check(ev)
        if problem is not None:
            out.append(Violation(i, problem[0], problem[1]))
            continue
        if ev.kind is EventKind.ADD:
            seen.add(ev.order_id)
        book.apply(ev, i)
    return report


def validate_stream(stream: EventStream) -> ValidationReport:
    return validate_events(stream.events)
