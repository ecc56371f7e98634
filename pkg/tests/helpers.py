"""Random valid event streams and brute-force oracles shared by the tests."""

import random

from lobcushion.events import EventKind, EventStream, OrderEvent, Side

A, C, X, E, P, H = (
    EventKind.ADD,
    EventKind.CANCEL,
    EventKind.CANCEL_PARTIAL,
    EventKind.EXECUTE,
    EventKind.EXECUTE_PARTIAL,
    EventKind.HIDDEN_TRADE,
)
B, S = Side.BUY, Side.SELL


def random_events(n, seed=0, center=2340, spread_max=6, depth=30, max_dt=40):
    """*n* valid events: adds never cross, removals carry exact remaining volume."""
    rng = random.Random(seed)
    live = {}  # oid -> [side, price, remaining]
    ids = []  # live order ids, for O(1) random choice
    pos = {}
    bids, asks = {}, {}  # price -> number of live orders
    out = []
    t = 0
    next_id = 1
    while len(out) < n:
        t += rng.randrange(0, max_dt)
        u = rng.random()
        if u < 0.45 or len(live) < 4:
            side = B if rng.random() < 0.5 else S
            best_bid = max(bids) if bids else None
            best_ask = min(asks) if asks else None
            if side is B:
                ref = best_ask if best_ask is not None else (best_bid + 1 if best_bid is not None else center + 1)
                price = ref - rng.randint(1, depth)
            else:
                ref = best_bid if best_bid is not None else (best_ask - 1 if best_ask is not None else center - 1)
                price = ref + rng.randint(1, depth)
            if price <= 0:
                continue
            vol = rng.choice([1, 50, 100, 100, 200, 500, 1000])
            oid = next_id
            next_id += rng.randint(1, 3)
            live[oid] = [side, price, vol]
            pos[oid] = len(ids)
            ids.append(oid)
            book = bids if side is B else asks
            book[price] = book.get(price, 0) + 1
            out.append(OrderEvent(t, A, oid, side, price, vol))
        elif u < 0.5:
            out.append(OrderEvent(t, H, 0, rng.choice([B, S]), center, rng.randint(1, 300)))
        else:
            oid = ids[rng.randrange(len(ids))]
            side, price, rem = live[oid]
            partial = rem > 1 and rng.random() < 0.3
            if partial:
                vol = rng.randint(1, rem - 1)
                live[oid][2] = rem - vol
                kind = X if rng.random() < 0.5 else P
            else:
                vol = rem
                kind = C if rng.random() < 0.7 else E
                del live[oid]
                last = ids.pop()
                if last != oid:
                    ids[pos[oid]] = last
                    pos[last] = pos[oid]
                del pos[oid]
                book = bids if side is B else asks
                book[price] -= 1
                if not book[price]:
                    del book[price]
            out.append(OrderEvent(t, kind, oid, side, price, vol))
    return out


def random_stream(n, seed=0, **kw):
    events = random_events(n, seed, **kw)
    close = max(events[-1].timestamp_ms, 1)
    return EventStream(events, market_open_ms=0, market_close_ms=close)


class NaiveBook:
    """Book kept as flat dicts; best quotes by full scans."""

    def __init__(self):
        self.orders = {}  # oid -> [side, price, remaining]

    def apply(self, ev):
        if ev.kind is H:
            return
        if ev.kind is A:
            self.orders[ev.order_id] = [ev.side, ev.price_ticks, ev.volume_shares]
        elif ev.kind in (X, P):
            self.orders[ev.order_id][2] -= ev.volume_shares
        else:
            del self.orders[ev.order_id]

    def volumes(self, side=None):
        out = {}
        for s, p, v in self.orders.values():
            if side is None or s is side:
                out[p] = out.get(p, 0) + v
        return out

    def counts(self, side):
        out = {}
        for s, p, _ in self.orders.values():
            if s is side:
                out[p] = out.get(p, 0) + 1
        return out

    def best_bid(self):
        prices = [p for s, p, _ in self.orders.values() if s is B]
        return max(prices) if prices else None

    def best_ask(self):
        prices = [p for s, p, _ in self.orders.values() if s is S]
        return min(prices) if prices else None


def naive_final_volumes(events):
    """Per-price visible volume after replaying every event, recomputed from scratch."""
    book = NaiveBook()
    for ev in events:
        book.apply(ev)
    return book.volumes()
