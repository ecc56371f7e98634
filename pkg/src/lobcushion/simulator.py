"""Zero-intelligence model of the liquidity cushion.

N orders arrive at equal spacing T/N. Each is buy or sell with probability
1/2 and a market order with probability ``P_market``. A market order takes
the whole opposite best level. A limit order picks a level ``l`` with
probability proportional to ``exp(-l/l0)``, rests ``l+1`` ticks inside the
opposite best quote and is cancelled after ``t_lt * exp(l/l_lt)`` unless it
has traded before.

Random draws come from one stream of uniforms in a fixed order per order:
side, then market/limit, then (limit orders only) level. Skipped orders still
consume their draws, so variants that differ only in lifetimes see the same
draw sequence.
"""

from __future__ import annotations

import dataclasses
import enum
import heapq
import math
import os
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .book import BookState
from .events import EventKind, EventStream, OrderEvent, Side, validate_stream

RNG_FAMILY = "numpy.PCG64"
_BLOCK = 8192

BUY = Side.BUY
SELL = Side.SELL


class Variant(enum.Enum):
    FULL = "FULL"
    UNIFORM_LIFETIME = "UNIFORM_LIFETIME"
    UNIFORM_ALL = "UNIFORM_ALL"


@dataclass
class SimParams:
    N: int
    T_ms: int
    L: int
    P_market: float
    l0: float
    t_lt_ms: float
    l_lt: float
    S0_ticks: int = 2340
    initial_orders_per_tick: int = 10
    initial_lifetime_ms: float = 30_000
    order_volume_shares: int = 205
    uniform_lifetime_ms: float = 30_019
    variant: Variant = Variant.FULL
    seed: int = 1

    def __post_init__(self):
        if isinstance(self.variant, str):
            self.variant = Variant(self.variant.upper())
        self.validate()

    @classmethod
    def default_session(cls, **overrides) -> "SimParams":
        """A 6.5 h session of 273,835 orders on a 25-level cushion; keywords override fields."""
        base = dict(
            N=273_835,
            T_ms=23_400_000,
            L=25,
            P_market=0.0147,
            l0=3.045,
            t_lt_ms=13_240.0,
            l_lt=5.46,
        )
        base.update(overrides)
        return cls(**base)

    def validate(self) -> None:
        problems = []
        if self.N < 0:
            problems.append("N must be >= 0")
        if self.T_ms <= 0:
            problems.append("T_ms must be > 0")
        if self.L < 1:
            problems.append("L must be >= 1")
        if not 0.0 <= self.P_market <= 1.0:
            problems.append("P_market must lie in [0, 1]")
        for name in ("l0", "t_lt_ms", "l_lt", "initial_lifetime_ms", "uniform_lifetime_ms"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                problems.append(f"{name} must be a positive finite number")
        if self.S0_ticks <= self.L:
            problems.append("S0_ticks must exceed L")
        if self.initial_orders_per_tick < 0:
            problems.append("initial_orders_per_tick must be >= 0")
        if self.order_volume_shares < 1:
            problems.append("order_volume_shares must be >= 1")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must be an unsigned 64-bit integer")
        if problems:
            raise ValueError("invalid SimParams: " + "; ".join(problems))

    def as_dict(self) -> Dict[str, object]:
        d = dataclasses.asdict(self)
        d["variant"] = self.variant.value
        return d


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SimParams)}


def parse_config(text: str) -> SimParams:
    """Read a flat ``key = value`` config; ``#`` starts a comment."""
    values: Dict[str, object] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ValueError(f"config line {n}: expected 'key = value'")
        if key not in _FIELD_TYPES:
            raise ValueError(f"config line {n}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"config line {n}: duplicate key {key!r}")
        kind = _FIELD_TYPES[key]
        try:
            if kind == "int":
                values[key] = int(value.replace("_", ""))
            elif kind == "float":
                values[key] = float(value)
            else:
                values[key] = Variant(value.upper())
        except ValueError:
            raise ValueError(f"config line {n}: bad value {value!r} for {key}") from None
    missing = [f.name for f in dataclasses.fields(SimParams) if f.default is dataclasses.MISSING and f.name not in values]
    if missing:
        raise ValueError(f"config lacks required keys: {', '.join(missing)}")
    return SimParams(**values)


def load_config(path: str | os.PathLike) -> SimParams:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(params: SimParams) -> str:
    return "".join(f"{k} = {v}\n" for k, v in params.as_dict().items())


def level_probabilities(params: SimParams) -> List[float]:
    L = params.L
    if params.variant is Variant.UNIFORM_ALL:
        return [1.0 / L] * L
    weights = [math.exp(-l / params.l0) for l in range(L)]
    total = math.fsum(weights)
    return [w / total for w in weights]


def lifetime_for_level(params: SimParams, l: int) -> float:
    """Lifetime in ms assigned to a limit order inserted at level *l*."""
    if not 0 <= l < params.L:
        raise ValueError(f"level {l} outside [0, {params.L})")
    if params.variant is Variant.FULL:
        return params.t_lt_ms * math.exp(l / params.l_lt)
    return float(params.uniform_lifetime_ms)


class UniformStream:
    """Sequential uniform draws on [0, 1), fetched from the generator in blocks."""

    def __init__(self, seed: int):
        self._gen = np.random.Generator(np.random.PCG64(seed))
        self._buf: List[float] = []
        self._pos = 0
        self.drawn = 0

    def next(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._gen.random(_BLOCK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        self.drawn += 1
        return u


@dataclass
class RunReport:
    market_orders: int = 0
    market_skipped: int = 0
    limit_orders: int = 0
    limit_skipped: int = 0
    cancellations: int = 0
    executions: int = 0
    executed_shares: int = 0
    initial_orders: int = 0
    level_draws: List[int] = field(default_factory=list)
    params: Optional[SimParams] = None

    @property
    def draws(self) -> int:
        return self.market_orders + self.market_skipped + self.limit_orders + self.limit_skipped

    def as_dict(self) -> Dict[str, object]:
        d = {
            "rng_family": RNG_FAMILY,
            "draws": self.draws,
            "market_orders": self.market_orders,
            "market_skipped": self.market_skipped,
            "limit_orders": self.limit_orders,
            "limit_skipped": self.limit_skipped,
            "cancellations": self.cancellations,
            "executions": self.executions,
            "executed_shares": self.executed_shares,
            "initial_orders": self.initial_orders,
            "level_draws": list(self.level_draws),
        }
        if self.params is not None:
            d["params"] = self.params.as_dict()
        return d


class SimState:
    def __init__(self, params: SimParams):
        self.book = BookState()
        self.clock_ms: float = 0.0
        # (expiry_ms, order_id); entries of traded orders are skipped when popped
        self.pending_cancellations: List[tuple] = []
        self.next_order_index = 0
        self.next_order_id = 1
        self.event_ledger: List[OrderEvent] = []
        self.report = RunReport(level_draws=[0] * params.L, params=params)
        self._cum = np.cumsum(level_probabilities(params)).tolist()

    def emit(self, event: OrderEvent) -> None:
        self.book.apply(event)
        self.event_ledger.append(event)

    def add_limit(self, t_ms: int, side: Side, price: int, volume: int, expiry_ms: float) -> int:
        oid = self.next_order_id
        self.next_order_id += 1
        self.emit(OrderEvent(t_ms, EventKind.ADD, oid, side, price, volume))
        heapq.heappush(self.pending_cancellations, (expiry_ms, oid))
        return oid

    def cancel_due(self, until_ms: float, cap_ms: Optional[int] = None) -> None:
        """Cancel every still-live order whose expiry is ``<= until_ms``."""
        heap = self.pending_cancellations
        live = self.book.live_orders
        while heap and heap[0][0] <= until_ms:
            expiry, oid = heapq.heappop(heap)
            rec = live.get(oid)
            if rec is None:
                continue
            side, price, _ = rec
            t = math.floor(expiry)
            if cap_ms is not None and t > cap_ms:
                t = cap_ms
            self.emit(OrderEvent(t, EventKind.CANCEL, oid, side, price, self.book.remaining(oid)))
            self.report.cancellations += 1


def init_book_state(params: SimParams) -> SimState:
    state = SimState(params)
    S0 = params.S0_ticks
    for k in range(1, params.L + 1):
        for _ in range(params.initial_orders_per_tick):
            state.add_limit(0, BUY, S0 - k, params.order_volume_shares, float(params.initial_lifetime_ms))
            state.report.initial_orders += 1
    for k in range(1, params.L + 1):
        for _ in range(params.initial_orders_per_tick):
            state.add_limit(0, SELL, S0 + k, params.order_volume_shares, float(params.initial_lifetime_ms))
            state.report.initial_orders += 1
    return state


def step(state: SimState, params: SimParams, rng: UniformStream) -> SimState:
    """Insert the next order, after cancelling everything that expired up to its arrival."""
    k = state.next_order_index + 1
    if k > params.N:
        raise IndexError("all N orders have been inserted")
    clock = k * params.T_ms / params.N
    t = (k * params.T_ms) // params.N
    state.cancel_due(clock)
    state.clock_ms = clock
    state.next_order_index = k

    side = BUY if rng.next() < 0.5 else SELL
    is_market = rng.next() < params.P_market
    book = state.book
    report = state.report
    if is_market:
        # a buy takes the whole best ask level, a sell the whole best bid level
        opposite = SELL if side is BUY else BUY
        best = book.best(opposite)
        if best is None:
            report.market_skipped += 1
            return state
        levels = book.asks if opposite is SELL else book.bids
        for oid, remaining in list(levels[best].items()):
            state.emit(OrderEvent(t, EventKind.EXECUTE, oid, opposite, best, remaining))
            report.executions += 1
            report.executed_shares += remaining
        report.market_orders += 1
        return state

    cum = state._cum
    level = min(bisect_right(cum, rng.next() * cum[-1]), params.L - 1)
    report.level_draws[level] += 1
    if side is BUY:
        ref = book.best_ask_ticks
        price = None if ref is None else ref - (level + 1)
    else:
        ref = book.best_bid_ticks
        price = None if ref is None else ref + (level + 1)
    if price is None or price <= 0:
        report.limit_skipped += 1
        return state
    state.add_limit(t, side, price, params.order_volume_shares, clock + lifetime_for_level(params, level))
    report.limit_orders += 1
    return state


def run_simulation(params: SimParams, validate: bool = True):
    """Run one session; returns ``(EventStream, RunReport)``.

    Orders still live after the last arrival are cancelled at their expiry,
    capped at ``T_ms``.
    """
    params.validate()
    state = init_book_state(params)
    rng = UniformStream(params.seed)
    for _ in range(params.N):
        step(state, params, rng)
    state.cancel_due(math.inf, cap_ms=params.T_ms)
    stream = EventStream(
        state.event_ledger,
        market_open_ms=0,
        market_close_ms=params.T_ms,
        session_start_ms=0,
        session_end_ms=params.T_ms,
    )
    if validate:
        report = validate_stream(stream)
        if not report.ok:
            raise AssertionError("simulator emitted an invalid stream:\n" + report.format())
    return stream, state.report
