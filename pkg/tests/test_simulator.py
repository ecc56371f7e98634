import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from lobcushion.analytics import build_order_records, level_statistics
from lobcushion.events import EventKind, OrderEvent, Side, stream_to_text, validate_stream
from lobcushion.simulator import (
    SimParams,
    SimState,
    UniformStream,
    Variant,
    format_config,
    init_book_state,
    level_probabilities,
    lifetime_for_level,
    parse_config,
    run_simulation,
    step,
)


class FixedDraws:
    def __init__(self, *values):
        self.values = list(values)

    def next(self):
        return self.values.pop(0)


def test_uniform_level_probabilities():
    p = level_probabilities(SimParams.default_session(variant=Variant.UNIFORM_ALL))
    assert p == [0.04] * 25


def test_single_level_probability():
    assert level_probabilities(SimParams.default_session(L=1, l0=0.7)) == [1.0]


def test_level_probabilities_against_summation_and_closed_form():
    params = SimParams.default_session()
    p = level_probabilities(params)
    total = 0.0
    for l in range(25):
        total += math.exp(-l / 3.045)
    assert p[0] == pytest.approx(1.0 / total, rel=1e-14)
    c = (1 - math.exp(-1 / 3.045)) / (1 - math.exp(-25 / 3.045))
    assert p[0] == pytest.approx(c, rel=1e-13)
    assert math.fsum(p) == pytest.approx(1.0, abs=1e-15)
    assert level_probabilities(SimParams.default_session(variant=Variant.UNIFORM_LIFETIME)) == p


def test_lifetime_for_level():
    full = SimParams.default_session()
    assert lifetime_for_level(full, 0) == 13_240
    getcontext().prec = 40
    want = Decimal("13240") * (Decimal(5) / Decimal("5.46")).exp()
    assert lifetime_for_level(full, 5) == pytest.approx(float(want), rel=1e-15)
    uniform = SimParams.default_session(variant=Variant.UNIFORM_LIFETIME)
    assert {lifetime_for_level(uniform, l) for l in range(25)} == {30_019}
    with pytest.raises(ValueError):
        lifetime_for_level(full, 25)


def test_initial_book():
    params = SimParams.default_session()
    state = init_book_state(params)
    book = state.book
    assert len(state.event_ledger) == 500
    assert sum(1 for ev in state.event_ledger if ev.side is Side.BUY) == 250
    assert book.best_bid_ticks == 2339 and book.best_ask_ticks == 2341
    assert book.quote().spread_ticks == 2 and book.quote().midpoint_ticks == 2340
    assert all(len(q) == 10 for q in list(book.bids.values()) + list(book.asks.values()))
    assert len(state.pending_cancellations) == 500


def test_initial_book_single_level():
    state = init_book_state(SimParams.default_session(L=1))
    assert list(state.book.bids) == [2339] and list(state.book.asks) == [2341]


def test_market_order_takes_whole_level():
    params = SimParams.default_session(N=10, T_ms=10_000, L=3, P_market=1.0, initial_orders_per_tick=3)
    state = init_book_state(params)
    before = len(state.event_ledger)
    step(state, params, FixedDraws(0.1, 0.0))  # buy, market
    execs = state.event_ledger[before:]
    assert [ev.kind for ev in execs] == [EventKind.EXECUTE] * 3
    assert sum(ev.volume_shares for ev in execs) == 615
    assert 2341 not in state.book.asks and state.book.best_ask_ticks == 2342
    assert all(ev.timestamp_ms == 1000 for ev in execs)


def test_limit_order_placement_and_skip():
    params = SimParams.default_session(N=10, T_ms=10_000, L=3)
    state = init_book_state(params)
    step(state, params, FixedDraws(0.9, 0.5, 0.0))  # sell, limit, level 0
    ev = state.event_ledger[-1]
    assert (ev.kind, ev.side, ev.price_ticks) == (EventKind.ADD, Side.SELL, 2340)
    empty = SimState(params)
    step(empty, params, FixedDraws(0.1, 0.5, 0.0))
    assert empty.report.limit_skipped == 1 and not empty.event_ledger


def test_cancellations_precede_arrival_in_expiry_then_id_order():
    params = SimParams.default_session(N=2, T_ms=60_000, L=2, initial_orders_per_tick=2)
    state = init_book_state(params)
    # the first arrival lands at 30 s, exactly when the initial orders expire
    step(state, params, FixedDraws(0.1, 0.5, 0.0))
    cancels = state.event_ledger[8:]
    assert [ev.kind for ev in cancels] == [EventKind.CANCEL] * 8
    assert [ev.order_id for ev in cancels] == list(range(1, 9))
    assert all(ev.timestamp_ms == 30_000 for ev in cancels)
    # the buy then finds no ask to price against
    assert state.report.limit_skipped == 1


def test_no_market_orders_means_no_executions():
    stream, report = run_simulation(SimParams.default_session(N=5000, T_ms=430_000, P_market=0.0))
    assert not any(ev.kind is EventKind.EXECUTE for ev in stream.events)
    adds = sum(ev.kind is EventKind.ADD for ev in stream.events)
    cancels = sum(ev.kind is EventKind.CANCEL for ev in stream.events)
    assert adds == cancels == 5000 + 500 - report.limit_skipped


def test_zero_orders_gives_initial_adds_and_cancels():
    stream, report = run_simulation(SimParams.default_session(N=0))
    assert len(stream.events) == 1000
    assert all(ev.kind is EventKind.ADD and ev.timestamp_ms == 0 for ev in stream.events[:500])
    assert all(ev.kind is EventKind.CANCEL and ev.timestamp_ms == 30_000 for ev in stream.events[500:])
    assert report.initial_orders == 500 and report.draws == 0


def test_drain_is_capped_at_session_end():
    stream, _ = run_simulation(SimParams.default_session(N=100, T_ms=10_000))
    assert stream.events[-1].timestamp_ms == 10_000
    assert stream.session_end_ms == 10_000


def test_conservation_and_accounting(small_run, small_params):
    stream, report = small_run
    assert validate_stream(stream).ok
    added = {}
    removed = {}
    for ev in stream.events:
        if ev.kind is EventKind.ADD:
            added[ev.order_id] = ev.volume_shares
        else:
            removed[ev.order_id] = removed.get(ev.order_id, 0) + ev.volume_shares
    assert added == removed
    assert report.draws == small_params.N
    n_add = sum(ev.kind is EventKind.ADD for ev in stream.events)
    assert n_add == report.limit_orders + report.initial_orders
    assert report.limit_orders == small_params.N - report.market_orders - report.market_skipped - report.limit_skipped


def test_market_order_count_is_binomial(small_run, small_params):
    _, report = small_run
    n, p = small_params.N, small_params.P_market
    draws = report.market_orders + report.market_skipped
    assert abs(draws - n * p) <= 3 * math.sqrt(n * p * (1 - p))


@pytest.mark.slow
def test_default_session_market_count_and_validity():
    params = SimParams.default_session(seed=1)
    stream, report = run_simulation(params)
    assert validate_stream(stream).ok
    n, p = params.N, params.P_market
    assert abs(report.market_orders + report.market_skipped - n * p) <= 3 * math.sqrt(n * p * (1 - p))
    assert report.limit_orders == n - report.market_orders - report.market_skipped - report.limit_skipped


def test_determinism():
    params = SimParams.default_session(N=3000, T_ms=260_000, seed=99)
    assert stream_to_text(run_simulation(params)[0]) == stream_to_text(run_simulation(params)[0])
    other = SimParams.default_session(N=3000, T_ms=260_000, seed=100)
    assert stream_to_text(run_simulation(other)[0]) != stream_to_text(run_simulation(params)[0])


def test_variants_share_the_draw_sequence():
    full = SimParams.default_session(N=20_000, T_ms=1_700_000, seed=3)
    uni = SimParams.default_session(N=20_000, T_ms=1_700_000, seed=3, variant=Variant.UNIFORM_LIFETIME)
    _, r_full = run_simulation(full, validate=False)
    _, r_uni = run_simulation(uni, validate=False)
    assert r_full.level_draws == r_uni.level_draws
    assert r_full.market_orders + r_full.market_skipped == r_uni.market_orders + r_uni.market_skipped


@pytest.mark.slow
def test_level_draws_converge():
    params = SimParams.default_session(N=1_000_000, T_ms=85_000_000, P_market=0.0, seed=5)
    _, report = run_simulation(params, validate=False)
    counts = np.array(report.level_draws)
    freq = counts / counts.sum()
    assert counts.sum() == 1_000_000
    assert np.max(np.abs(freq - level_probabilities(params))) < 5e-3


def test_uniform_all_insertion_levels_are_uniform():
    params = SimParams.default_session(N=42_130, T_ms=3_600_000, seed=11, variant=Variant.UNIFORM_ALL)
    stream, _ = run_simulation(params, validate=False)
    stats = level_statistics(build_order_records(stream), params.L, min_insertion_ms=1)
    n = stats.counts.sum()
    p = 1 / params.L
    sd = math.sqrt(n * p * (1 - p))
    assert np.max(np.abs(stats.counts - n * p)) < 3 * sd


def test_uniform_stream_is_reproducible():
    a, b = UniformStream(8), UniformStream(8)
    xs = [a.next() for _ in range(5000)]
    assert xs == [b.next() for _ in range(5000)]
    assert xs[:3] == np.random.Generator(np.random.PCG64(8)).random(3).tolist()
    assert a.drawn == 5000


def test_config_roundtrip_and_errors():
    params = SimParams.default_session(seed=4, variant=Variant.UNIFORM_ALL)
    assert parse_config(format_config(params)) == params
    base = "N = 10\nT_ms = 1000\nL = 3\nP_market = 0.1\nl0 = 1\nt_lt_ms = 5\nl_lt = 2\n"
    assert parse_config(base + "# comment\nseed = 3 # trailing\n").seed == 3
    for bad in (base + "bogus = 1\n", base + "N = 4\n", "N = 10\n", base + "seed = x\n", base + "S0_ticks = 2\n"):
        with pytest.raises(ValueError):
            parse_config(bad)


def test_params_validation():
    with pytest.raises(ValueError):
        SimParams.default_session(L=3000)
    with pytest.raises(ValueError):
        SimParams.default_session(P_market=1.5)
    with pytest.raises(ValueError):
        SimParams.default_session(seed=-1)
