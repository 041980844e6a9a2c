"""Position values under transaction costs and admissibility bounds.

Two values matter for a position (b, s) at a node.  The liquidation value
is what immediate unwinding fetches: long stock sells at the bid, short
stock covers at the ask.  The shadow value prices the stock leg at any
point inside the spread and always dominates liquidation.

A strategy is admissible at level M when liquidation never dips below -M
along the tree; on a finite tree such an M always exists, and this module
computes the smallest one.  Two normalizations are supported: the bound
in bond units, or divided through by 1 + S(n) so that it is insensitive
to which account plays the numeraire.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .market import Market
from .strategy import Strategy, ensure_strategy, pre_trade_holdings
from .tree import AdaptedProcess, EventTree, NodeId

NUMERAIRE_BASED = "numeraire_based"
NUMERAIRE_FREE = "numeraire_free"


def liquidation_value(market: Market, bond: Fraction, stock: Fraction, node: NodeId) -> Fraction:
    """Cash left after closing the stock leg at the node's quotes."""
    ask = market.price[node]
    bid = (1 - market.fee) * ask
    if stock >= 0:
        return bond + stock * bid
    return bond + stock * ask


def shadow_value(
    tree: EventTree,
    strategy: Strategy,
    shadow_price: AdaptedProcess,
    node: NodeId,
    pre_trade: bool = False,
) -> Fraction:
    """Mark the position to a single in-spread price instead of unwinding."""
    if pre_trade:
        bond, stock = pre_trade_holdings(tree, strategy, node)
    else:
        bond, stock = strategy.bond[node], strategy.stock[node]
    return bond + stock * shadow_price[node]


@dataclass(frozen=True)
class AdmissibilityReport:
    mode: str
    minimal_bound: Fraction
    worst_node: NodeId
    per_node: AdaptedProcess


def admissibility_bound(market: Market, strategy: Strategy, mode: str = NUMERAIRE_BASED) -> AdmissibilityReport:
    """Smallest M with liquidation value >= -M throughout the strategy.

    Both the incoming and the post-trade position are valued at each node:
    the incoming one because the market moved against holdings chosen
    earlier, the post-trade one because the node's own trade may burn
    money.  Per-node requirements are floored at zero (a position that
    never goes negative needs no cushion), and in the numeraire-free mode
    each requirement is divided by 1 + S(n) first.
    """
    if mode not in (NUMERAIRE_BASED, NUMERAIRE_FREE):
        raise ValueError(f"unknown admissibility mode {mode!r}")
    tree = market.tree
    ensure_strategy(tree, strategy)
    per_node: dict[NodeId, Fraction] = {}
    worst: NodeId = tree.root
    bound = Fraction(0)
    for n in tree.nodes:
        bond_in, stock_in = pre_trade_holdings(tree, strategy, n)
        v_pre = liquidation_value(market, bond_in, stock_in, n)
        v_post = liquidation_value(market, strategy.bond[n], strategy.stock[n], n)
        need = max(-v_pre, -v_post)
        if mode == NUMERAIRE_FREE:
            need /= 1 + market.price[n]
        need = max(need, Fraction(0))
        per_node[n] = need
        if need > bound:
            bound = need
            worst = n
    return AdmissibilityReport(
        mode=mode,
        minimal_bound=bound,
        worst_node=worst,
        per_node=AdaptedProcess(per_node),
    )
