"""Liquidity statistics computed from event streams and reconstructed books."""

from .distributions import (
    ExpFit,
    WeightedSample,
    excess_kurtosis,
    fit_exponential_loglinear,
    fit_power_law_slope,
    fit_power_tail,
    icdf,
    icdf_samples,
    icdf_table,
    spearman,
)
from .occupation import (
    CountGrid,
    Filling,
    OccupationProfile,
    average_filling,
    cushion_width,
    occupation_profile,
    order_count_grid,
)
from .quotes import (
    count_quote_changes,
    gaussian_tail_share,
    midpoint_at,
    returns_series,
    spread_histogram,
    time_averages,
    volatility,
)
from .records import OrderRecord, Regime, build_order_records, classify_distance, classify_regime
from .summary import (
    DatasetSummary,
    LevelStats,
    ModelFit,
    count_market_orders,
    fit_model_parameters,
    level_statistics,
    summarize_dataset,
)
