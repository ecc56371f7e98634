"""Command line entry point: ``lobcushion <subcommand> ...``.

Exit codes: 0 success, 1 usage, 2 validation failure, 3 I/O, 4 internal
invariant breach.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import analytics as an
from .book import BookState, IntegrityError, quote_series
from .events import EventStream, ParseError, read_events, validate_stream, write_events
from .io import atomic_write_text, write_csv
from .simulator import SimParams, Variant, load_config, run_simulation

log = logging.getLogger("lobcushion")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3, 4

WEIGHTS = ("none", "lifetime", "volume", "lifetime-volume")
ANALYSES = ("lifetimes", "volumes", "relprices", "occupation", "returns", "spread", "levels", "summary", "grid", "filling")


class UsageError(Exception):
    pass


class ValidationFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _same_path(a: str, b: str) -> bool:
    return os.path.abspath(a) == os.path.abspath(b)


def _check_outputs(inputs: Sequence[str], outputs: Sequence[Optional[str]]) -> None:
    for out in outputs:
        if out is None:
            continue
        for inp in inputs:
            if _same_path(inp, out):
                raise UsageError(f"output {out} would overwrite input {inp}")


def _window(stream: EventStream, args) -> tuple:
    lo = stream.market_open_ms if args.open_ms is None else args.open_ms
    hi = stream.market_close_ms if args.close_ms is None else args.close_ms
    if not lo < hi:
        raise UsageError(f"analysis window must satisfy open < close, got {lo}, {hi}")
    return lo, hi


def _load(path: str) -> EventStream:
    stream = read_events(path)
    report = validate_stream(stream)
    if not report.ok:
        raise ValidationFailed(f"{path}: " + report.format(limit=10))
    return stream


# -- simulate -----------------------------------------------------------


def cmd_simulate(args) -> int:
    _check_outputs([args.config], [args.out, args.report])
    params = load_config(args.config)
    if args.seed is not None:
        params.seed = args.seed
    stream, report = run_simulation(params)
    write_events(stream, args.out)
    if args.report:
        _write_report(args.report, report.as_dict())
    log.info("wrote %d events to %s", len(stream), args.out)
    return EXIT_OK


def _write_report(path: str, data: dict) -> None:
    if path.endswith(".csv"):
        rows = []
        for k, v in data.items():
            if isinstance(v, dict):
                rows += [(f"{k}.{kk}", vv) for kk, vv in v.items()]
            elif isinstance(v, list):
                rows += [(f"{k}[{i}]", vv) for i, vv in enumerate(v)]
            else:
                rows.append((k, v))
        write_csv(path, ("key", "value"), rows)
    else:
        atomic_write_text(path, json.dumps(data, indent=2, sort_keys=False) + "\n")


# -- reconstruct --------------------------------------------------------


def cmd_reconstruct(args) -> int:
    _check_outputs([args.events], [args.quotes_out, args.depth_out])
    stream = _load(args.events)
    quotes = quote_series(stream.events)
    write_csv(
        args.quotes_out,
        ("timestamp_ms", "best_bid_ticks", "best_ask_ticks", "spread_ticks", "midpoint_half_ticks"),
        ((q.timestamp_ms, q.best_bid_ticks, q.best_ask_ticks, q.spread_ticks, q.midpoint_half_ticks) for q in quotes),
    )
    if args.depth_out:
        rows = []
        book = BookState()
        events = stream.events
        idx = 0
        for t in range(stream.session_start_ms, stream.session_end_ms + 1, args.sample_ms):
            while idx < len(events) and events[idx].timestamp_ms <= t:
                book.apply(events[idx], idx)
                idx += 1
            q = book.quote(t)
            if q is None:
                continue
            for rel, side, vol in book.depth_snapshot(q.midpoint_half_ticks, args.window_ticks):
                rows.append((t, rel, side.value, vol))
        write_csv(args.depth_out, ("timestamp_ms", "p_rel_half_ticks", "side", "volume_shares"), rows)
    return EXIT_OK


# -- analyze ------------------------------------------------------------


def _weights(records, mode: str) -> Optional[np.ndarray]:
    if mode == "none":
        return None
    life = np.array([r.lifetime_ms for r in records], dtype=float)
    vol = np.array([r.initial_volume for r in records], dtype=float)
    return {"lifetime": life, "volume": vol, "lifetime-volume": life * vol}[mode]


def _regime_icdf_rows(values, weights, regimes, note=None, integral=False):
    values = np.asarray(values, dtype=float)
    w = np.ones_like(values) if weights is None else np.asarray(weights, dtype=float)
    xs = np.unique(values)
    total = w.sum()
    if not total > 0:
        raise ValueError("total weight is zero")
    cols = [an.icdf(values, xs, w)]
    for regime in (an.Regime.CUSHION, an.Regime.DISTANT_FIELD, an.Regime.UNCLASSIFIED):
        mask = np.array([r is regime for r in regimes], dtype=bool)
        # contributions are normalised by the weight of all orders
        part = w * mask
        cols.append(an.icdf(values, xs, part) * part.sum() / total if part.sum() > 0 else np.zeros_like(xs))
    for i, x in enumerate(xs.tolist()):
        row = [int(x) if integral else x] + [float(c[i]) for c in cols]
        if note is not None:
            row.append(note(x))
        yield row


def cmd_analyze(args) -> int:
    files = args.events
    _check_outputs(files, [args.out])
    what = args.what
    if what != "summary" and len(files) != 1:
        raise UsageError(f"analyze {what} takes exactly one --events file")
    if what == "summary":
        rows = []
        for path in files:
            stream = _load(path)
            s = an.summarize_dataset(stream, range_half_ticks=2 * args.range_ticks)
            rows.append([path] + s.row())
        write_csv(args.out, ("file",) + an.DatasetSummary.COLUMNS, rows)
        return EXIT_OK

    stream = _load(files[0])
    lo, hi = _window(stream, args)

    if what in ("lifetimes", "volumes", "relprices"):
        records = [r for r in an.build_order_records(stream) if lo <= r.insertion_time_ms < hi]
        if what == "relprices":
            records = [r for r in records if r.relative_insertion_price is not None]
        if not records:
            raise ValidationFailed("no limit orders inside the analysis window")
        if args.width is not None:
            width = args.width
        else:
            width, _ = an.cushion_width(an.occupation_profile(stream, (lo, hi), 2 * args.range_ticks))
        regimes = [an.classify_regime(r, width) for r in records]
        w = _weights(records, args.weight)
        header_tail = ("icdf", "icdf_cushion", "icdf_distant", "icdf_unclassified")
        if what == "lifetimes":
            vals = [r.lifetime_ms for r in records]
            rows = _regime_icdf_rows(vals, w, regimes, note=lambda x: "<1 ms" if x == 0 else "", integral=True)
            header = ("lifetime_ms",) + header_tail + ("note",)
        elif what == "volumes":
            vals = [r.initial_volume for r in records]
            rows = _regime_icdf_rows(vals, w, regimes, integral=True)
            header = ("volume_shares",) + header_tail
        else:
            vals = [r.relative_insertion_price for r in records]
            rows = _regime_icdf_rows(vals, w, regimes)
            header = ("p_rel",) + header_tail
        write_csv(args.out, header, rows)
    elif what == "occupation":
        prof = an.occupation_profile(stream, (lo, hi), 2 * args.range_ticks)
        write_csv(args.out, ("p_rel_half_ticks", "o_av"), sorted(prof.occupation.items()))
    elif what == "returns":
        quotes = quote_series(stream.events)
        sample = args.sample_ms if args.sample_ms is not None else args.delta_ms
        t = np.arange(lo, hi - args.delta_ms + 1, sample, dtype=np.int64)
        m0 = an.quotes.midpoint_at(quotes, t)
        m1 = an.quotes.midpoint_at(quotes, t + args.delta_ms)
        ok = ~(np.isnan(m0) | np.isnan(m1))
        r = np.log(m1[ok] / m0[ok])
        write_csv(args.out, ("t_ms", "delta_ms", "log_return"), zip(t[ok].tolist(), [args.delta_ms] * len(r), r.tolist()))
    elif what == "spread":
        hist = an.spread_histogram(quote_series(stream.events), lo, hi)
        write_csv(args.out, ("spread_ticks", "time_fraction"), hist.items())
    elif what == "levels":
        records = an.build_order_records(stream)
        st = an.level_statistics(records, args.levels, min_insertion_ms=lo, max_insertion_ms=hi)
        write_csv(
            args.out,
            ("level", "insertion_count", "frequency", "mean_lifetime_ms"),
            (
                (l, int(st.counts[l]), float(st.frequencies[l]), None if math.isnan(st.mean_lifetime_ms[l]) else float(st.mean_lifetime_ms[l]))
                for l in range(args.levels)
            ),
        )
        log.info("%d orders without opposite quote excluded, %d beyond level %d", st.excluded, st.beyond, args.levels - 1)
    elif what == "grid":
        grid = an.order_count_grid(stream, (lo, hi), 2 * args.range_ticks, args.sample_ms or 1000, args.bin_ticks)
        write_csv(args.out, ("t_ms", "p_rel_half_ticks", "side", "order_count", "volume_per_level"), grid.rows())
    elif what == "filling":
        fill = an.average_filling(stream, args.levels, (lo, hi))
        write_csv(
            args.out,
            ("level", "buy_mean_count", "sell_mean_count", "mean_count"),
            ((k, float(fill.buy[k]), float(fill.sell[k]), float(fill.mean[k])) for k in range(args.levels)),
        )
    return EXIT_OK


# -- fit ----------------------------------------------------------------


def _fit_dict(fit: an.ModelFit) -> dict:
    return {
        "l0": fit.l0,
        "t_lt_ms": fit.t_lt_ms,
        "l_lt": fit.l_lt,
        "market_share": fit.market_share,
        "n_market_orders": fit.n_market_orders,
        "n_limit_orders": fit.n_limit_orders,
    }


def cmd_fit(args) -> int:
    _check_outputs([args.events], [args.out])
    stream = _load(args.events)
    fit = an.fit_model_parameters(stream, args.levels, warmup_ms=args.warmup_ms)
    data = _fit_dict(fit)
    if args.out:
        write_csv(args.out, ("parameter", "value"), data.items())
    else:
        print(json.dumps(data, indent=2))
    return EXIT_OK


# -- validate -----------------------------------------------------------


def cmd_validate(args) -> int:
    stream = read_events(args.events)
    report = validate_stream(stream)
    print(report.format())
    return EXIT_OK if report.ok else EXIT_INVALID


# -- roundtrip ----------------------------------------------------------


def _rel_err(fitted: float, target: float) -> Optional[float]:
    if target == 0:
        return abs(fitted)
    return (fitted - target) / target


def roundtrip(params: SimParams, workdir: Optional[str] = None) -> dict:
    """simulate -> validate -> reconstruct -> analyze -> fit; report fitted vs configured values."""
    stage = "simulate"
    try:
        stream, sim_report = run_simulation(params, validate=False)
        if workdir:
            path = os.path.join(workdir, "events.csv")
            write_events(stream, path)
            stream = read_events(path)
        stage = "validate"
        check = validate_stream(stream)
        if not check.ok:
            raise ValidationFailed(check.format(limit=10))
        stage = "reconstruct"
        quotes = quote_series(stream.events)
        records = an.build_order_records(stream)
        lo, hi = stream.window
        stage = "analyze"
        spread = an.spread_histogram(quotes, lo, hi)
        rets = an.returns_series(quotes, 1000, 1000, lo, hi)
        profile = an.occupation_profile(stream, (lo, hi), 4 * params.L)
        width, o_max = an.cushion_width(profile)
        stage = "fit"
        fit = an.fit_model_parameters(stream, params.L, warmup_ms=int(params.initial_lifetime_ms), records=records)
    except (ValidationFailed, IntegrityError, ValueError) as exc:
        raise RuntimeError(f"roundtrip stage {stage!r} failed: {exc}") from exc

    if params.variant is Variant.FULL:
        t_lt_target, l_lt_target = params.t_lt_ms, params.l_lt
    else:
        t_lt_target, l_lt_target = params.uniform_lifetime_ms, math.inf
    l0_target = math.inf if params.variant is Variant.UNIFORM_ALL else params.l0
    comparisons = {
        "l0": (l0_target, fit.l0),
        "t_lt_ms": (t_lt_target, fit.t_lt_ms),
        "l_lt": (l_lt_target, fit.l_lt),
        "market_share": (params.P_market, fit.market_share),
        "cushion_width_ticks": (2 * params.L - 1, width),
    }
    rows = {}
    for name, (target, fitted) in comparisons.items():
        err = None if not math.isfinite(target) else _rel_err(fitted, target)
        rows[name] = {"configured": target, "fitted": fitted, "relative_error": err}
    return {
        "params": params.as_dict(),
        "simulation": {k: v for k, v in sim_report.as_dict().items() if k != "params"},
        "comparison": rows,
        "spread_histogram": {str(k): v for k, v in spread.items()},
        "returns_1s": {"n": int(rets.size), "excess_kurtosis": an.excess_kurtosis(rets) if rets.size else None},
        "o_max": o_max,
        "level_counts": fit.levels.counts.tolist(),
        "level_mean_lifetime_ms": [None if math.isnan(x) else x for x in fit.levels.mean_lifetime_ms.tolist()],
    }


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    return obj


def cmd_roundtrip(args) -> int:
    _check_outputs([args.config], [args.out])
    params = load_config(args.config)
    if args.seed is not None:
        params.seed = args.seed
    report = roundtrip(params)
    text = json.dumps(_json_safe(report), indent=2) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- wiring -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lobcushion", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("simulate", help="run the zero-intelligence cushion model")
    p.add_argument("--config", required=True, help="key = value file with SimParams fields")
    p.add_argument("--out", required=True, help="event file to write")
    p.add_argument("--report", help="run report (.json, or .csv for key,value rows)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="rebuild the book and export quotes / depth")
    p.add_argument("--events", required=True)
    p.add_argument("--quotes-out", required=True, help="CSV of quote changes")
    p.add_argument("--depth-out", help="CSV of sampled depth around the midpoint")
    p.add_argument("--sample-ms", type=int, default=1000, help="depth sampling interval (ms)")
    p.add_argument("--window-ticks", type=int, default=50, help="depth half-window around the midpoint (ticks)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("analyze", help="compute one statistic as CSV")
    p.add_argument("what", choices=ANALYSES)
    p.add_argument("--events", required=True, action="append", help="event file (repeat for summary)")
    p.add_argument("--out", required=True)
    p.add_argument("--weight", choices=WEIGHTS, default="none", help="icdf weighting")
    p.add_argument("--delta-ms", type=int, default=1000, help="return horizon (ms)")
    p.add_argument("--sample-ms", type=int, help="sampling interval for returns/grid (ms)")
    p.add_argument("--bin-ticks", type=int, default=1, help="grid price bin width (ticks)")
    p.add_argument("--range-ticks", type=int, default=50, help="relative price half-range (ticks)")
    p.add_argument("--levels", type=int, default=25, help="number of insertion / filling levels")
    p.add_argument("--width", type=float, help="cushion width override for regime split (ticks)")
    p.add_argument("--open-ms", type=int, help="analysis window start (default: header open_ms)")
    p.add_argument("--close-ms", type=int, help="analysis window end (default: header close_ms)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit l0, t_lt, l_lt and market share from a stream")
    p.add_argument("--events", required=True)
    p.add_argument("--levels", type=int, default=25)
    p.add_argument("--warmup-ms", type=int, default=0, help="ignore orders inserted this long after open")
    p.add_argument("--out", help="CSV of parameter,value (default: JSON on stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", help="check stream integrity")
    p.add_argument("--events", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("roundtrip", help="simulate, reconstruct, analyze and fit in one go")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="JSON report (default: stdout)")
    p.set_defaults(func=cmd_roundtrip)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"lobcushion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lobcushion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailed as exc:
        print(f"lobcushion: validation failed: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ParseError as exc:
        print(f"lobcushion: parse error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"lobcushion: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (IntegrityError, AssertionError) as exc:
        print(f"lobcushion: internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as exc:
        # malformed configs and degenerate inputs
        print(f"lobcushion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"lobcushion: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
