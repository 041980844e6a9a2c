"""Exact-arithmetic laboratory for markets quoted with a proportional spread.

Everything downstream of the JSON wire format works in ``fractions.Fraction``:
tree and market validation, self-financing checks, liquidation values,
consistent price systems found by exact linear programming, supermartingale
decompositions, and the bound-propagation counterexample generators.
"""

from .cps import (
    ABSOLUTELY_CONTINUOUS,
    DEFAULT_EPSILON,
    EQUIVALENT,
    BruteForceResult,
    ConsistentPriceSystem,
    CpsError,
    CpsInfeasibility,
    CpsQuery,
    FindCpsResult,
    brute_force_cps,
    cps_threshold,
    cps_to_doc,
    find_cps,
    load_cps,
    max_equivalence_margin,
    scale_cps,
    verify_cps,
)
from .counterexamples import (
    DETERMINISTIC,
    STOCHASTIC,
    CounterexampleReport,
    deterministic_counterexample,
    report_to_doc,
    stochastic_counterexample,
    up_price_for_target_loss,
)
from .market import Market, MarketError, bid_ask, load_market, make_market, market_to_doc, validate_market
from .rationals import format_rational, parse_rational
from .strategy import (
    SelfFinancingReport,
    Strategy,
    StrategyError,
    check_self_financing,
    derive_bond_account,
    ensure_strategy,
    load_strategy,
    pre_trade_holdings,
    stock_delta,
    strategy_to_doc,
    total_variation,
    trade_decomposition,
    trade_slack,
)
from .theorems import (
    LONG,
    SHORT,
    Decomposition,
    OssmReport,
    ReplayResult,
    ShadowDecomposition,
    TheoremVerdict,
    TheoremWitness,
    check_admissibility_theorem,
    check_ossm,
    default_fee_grid,
    doob_decompose,
    frictionless_check,
    replay_admissibility_argument,
    shadow_decomposition,
    shadow_values,
)
from .tree import (
    AdaptedProcess,
    EventTree,
    NodeId,
    NullEventError,
    PredictableProcess,
    TreeError,
    conditional_expectation,
    ensure_adapted,
    ensure_predictable,
    load_tree,
    one_step_drift,
)
from .valuation import (
    NUMERAIRE_BASED,
    NUMERAIRE_FREE,
    AdmissibilityReport,
    admissibility_bound,
    liquidation_value,
    shadow_value,
)

__version__ = "0.1.0"

__all__ = [
    "ABSOLUTELY_CONTINUOUS",
    "AdaptedProcess",
    "AdmissibilityReport",
    "BruteForceResult",
    "ConsistentPriceSystem",
    "CounterexampleReport",
    "CpsError",
    "CpsInfeasibility",
    "CpsQuery",
    "DEFAULT_EPSILON",
    "DETERMINISTIC",
    "Decomposition",
    "EQUIVALENT",
    "EventTree",
    "FindCpsResult",
    "LONG",
    "Market",
    "MarketError",
    "NUMERAIRE_BASED",
    "NUMERAIRE_FREE",
    "NodeId",
    "NullEventError",
    "OssmReport",
    "PredictableProcess",
    "ReplayResult",
    "SHORT",
    "STOCHASTIC",
    "SelfFinancingReport",
    "ShadowDecomposition",
    "Strategy",
    "StrategyError",
    "TheoremVerdict",
    "TheoremWitness",
    "TreeError",
    "admissibility_bound",
    "bid_ask",
    "brute_force_cps",
    "check_admissibility_theorem",
    "check_ossm",
    "check_self_financing",
    "conditional_expectation",
    "cps_threshold",
    "cps_to_doc",
    "default_fee_grid",
    "derive_bond_account",
    "deterministic_counterexample",
    "doob_decompose",
    "ensure_adapted",
    "ensure_predictable",
    "ensure_strategy",
    "find_cps",
    "format_rational",
    "frictionless_check",
    "liquidation_value",
    "load_cps",
    "load_market",
    "load_strategy",
    "load_tree",
    "make_market",
    "market_to_doc",
    "max_equivalence_margin",
    "one_step_drift",
    "parse_rational",
    "pre_trade_holdings",
    "replay_admissibility_argument",
    "report_to_doc",
    "scale_cps",
    "shadow_decomposition",
    "shadow_value",
    "shadow_values",
    "stochastic_counterexample",
    "stock_delta",
    "strategy_to_doc",
    "total_variation",
    "trade_decomposition",
    "trade_slack",
    "up_price_for_target_loss",
    "validate_market",
    "verify_cps",
]
