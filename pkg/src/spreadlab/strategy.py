"""Trading strategies: post-trade holdings and the self-financing test.

A strategy records, at every node, the bond and stock positions held
*after* trading there.  The pre-trade position at a node is the parent's
post-trade position (zero at the root), so each node sees exactly one
rebalancing at that node's quotes.

Self-financing is an inequality, not an identity: purchases are funded at
the ask, sales credited at the bid, and throwing money away is allowed.
The slack at a node measures exactly how much was thrown away there.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .market import Market
from .rationals import format_rational, parse_rational
from .tree import AdaptedProcess, EventTree, NodeId, TreeError, ensure_adapted


class StrategyError(ValueError):
    """An invalid strategy description."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class Strategy:
    """Post-trade holdings per node: bond units and stock units."""

    bond: AdaptedProcess
    stock: AdaptedProcess


@dataclass(frozen=True)
class TradeDecomposition:
    """Stock increments split into cumulative-minimal buy and sell legs.

    buy(n) - sell(n) is the stock increment at n, with buy(n), sell(n) >= 0
    and at most one of them nonzero.
    """

    buy: AdaptedProcess
    sell: AdaptedProcess


@dataclass(frozen=True)
class SelfFinancingReport:
    ok: bool
    slack: AdaptedProcess
    violations: tuple[NodeId, ...]


def ensure_strategy(tree: EventTree, strategy: Strategy) -> None:
    ensure_adapted(tree, strategy.bond, "bond holdings")
    ensure_adapted(tree, strategy.stock, "stock holdings")


def pre_trade_holdings(tree: EventTree, strategy: Strategy, node: NodeId) -> tuple[Fraction, Fraction]:
    """Holdings carried into a node before it trades; (0, 0) at the root."""
    parent = tree.parent[node]
    if parent is None:
        return Fraction(0), Fraction(0)
    return strategy.bond[parent], strategy.stock[parent]


def stock_delta(tree: EventTree, strategy: Strategy, node: NodeId) -> Fraction:
    """Stock units traded at a node (positive = bought)."""
    _, stock_in = pre_trade_holdings(tree, strategy, node)
    return strategy.stock[node] - stock_in


def trade_decomposition(tree: EventTree, strategy: Strategy) -> TradeDecomposition:
    """Canonical split of each node's stock trade into buy and sell parts."""
    buys: dict[NodeId, Fraction] = {}
    sells: dict[NodeId, Fraction] = {}
    for n in tree.nodes:
        d = stock_delta(tree, strategy, n)
        buys[n] = d if d > 0 else Fraction(0)
        sells[n] = -d if d < 0 else Fraction(0)
    return TradeDecomposition(buy=AdaptedProcess(buys), sell=AdaptedProcess(sells))


def trade_slack(market: Market, strategy: Strategy, node: NodeId) -> Fraction:
    """Cash left on the table by the trade at ``node``.

    The bond can increase by at most the bid proceeds of stock sold, minus
    the ask cost of stock bought; the slack is that ceiling minus the
    actual bond increment.  Nonnegative slack everywhere is exactly the
    self-financing property.
    """
    tree = market.tree
    bond_in, stock_in = pre_trade_holdings(tree, strategy, node)
    d = strategy.stock[node] - stock_in
    ask = market.price[node]
    bid = (1 - market.fee) * ask
    ceiling = bid * (-d if d < 0 else Fraction(0)) - ask * (d if d > 0 else Fraction(0))
    return ceiling - (strategy.bond[node] - bond_in)


def check_self_financing(market: Market, strategy: Strategy) -> SelfFinancingReport:
    tree = market.tree
    ensure_strategy(tree, strategy)
    slack: dict[NodeId, Fraction] = {}
    bad: list[NodeId] = []
    for n in tree.nodes:
        s = trade_slack(market, strategy, n)
        slack[n] = s
        if s < 0:
            bad.append(n)
    return SelfFinancingReport(ok=not bad, slack=AdaptedProcess(slack), violations=tuple(bad))


def derive_bond_account(market: Market, stock_plan: AdaptedProcess) -> Strategy:
    """Complete a stock plan into the tight self-financing strategy.

    Every trade settles at its exact quote with zero slack: the bond
    account is credited the full bid proceeds of sales and debited the
    full ask cost of purchases, starting from zero before the root trade.
    """
    tree = market.tree
    ensure_adapted(tree, stock_plan, "stock plan")
    bond: dict[NodeId, Fraction] = {}
    for n in tree.nodes:
        p = tree.parent[n]
        bond_in = Fraction(0) if p is None else bond[p]
        stock_in = Fraction(0) if p is None else stock_plan[p]
        d = stock_plan[n] - stock_in
        ask = market.price[n]
        bid = (1 - market.fee) * ask
        bond[n] = bond_in + bid * (-d if d < 0 else Fraction(0)) - ask * (d if d > 0 else Fraction(0))
    return Strategy(bond=AdaptedProcess(bond), stock=stock_plan)


def total_variation(tree: EventTree, strategy: Strategy) -> tuple[Fraction, Fraction]:
    """Componentwise total variation: the largest, over root-to-leaf paths,
    of the summed absolute increments of each account (root trade included).
    """
    tv_bond = Fraction(0)
    tv_stock = Fraction(0)
    for leaf in tree.leaves:
        b = Fraction(0)
        s = Fraction(0)
        for n in tree.path(leaf):
            bond_in, stock_in = pre_trade_holdings(tree, strategy, n)
            b += abs(strategy.bond[n] - bond_in)
            s += abs(strategy.stock[n] - stock_in)
        tv_bond = max(tv_bond, b)
        tv_stock = max(tv_stock, s)
    return tv_bond, tv_stock


def load_strategy(document: Mapping, tree: EventTree) -> Strategy:
    """Parse holdings from {"holdings": [{"node", "phi0", "phi1"}, ...]}.

    Nodes omitted from the document inherit their parent's post-trade
    holdings (no trade); an omitted root starts flat at (0, 0).
    """
    problems: list[str] = []
    if not isinstance(document, Mapping) or "holdings" not in document:
        raise StrategyError(["strategy document must be an object with 'holdings'"])

    given: dict[NodeId, tuple[Fraction, Fraction]] = {}
    for i, spec in enumerate(document["holdings"]):
        if not isinstance(spec, Mapping) or "node" not in spec:
            problems.append(f"holdings[{i}]: each entry needs a 'node'")
            continue
        node = spec["node"]
        if node not in tree.node_set:
            problems.append(f"node {node}: not in tree")
            continue
        if node in given:
            problems.append(f"node {node}: duplicate entry")
            continue
        try:
            phi0 = parse_rational(spec["phi0"]) if "phi0" in spec else None
            phi1 = parse_rational(spec["phi1"]) if "phi1" in spec else None
        except ValueError as exc:
            problems.append(f"node {node}: {exc}")
            continue
        if phi0 is None or phi1 is None:
            problems.append(f"node {node}: needs both 'phi0' and 'phi1'")
            continue
        given[node] = (phi0, phi1)
    if problems:
        raise StrategyError(problems)

    bond: dict[NodeId, Fraction] = {}
    stock: dict[NodeId, Fraction] = {}
    for n in tree.nodes:
        if n in given:
            bond[n], stock[n] = given[n]
        else:
            p = tree.parent[n]
            if p is None:
                bond[n], stock[n] = Fraction(0), Fraction(0)
            else:
                bond[n], stock[n] = bond[p], stock[p]
    return Strategy(bond=AdaptedProcess(bond), stock=AdaptedProcess(stock))


def strategy_to_doc(tree: EventTree, strategy: Strategy) -> dict:
    """Serialize holdings at every node (explicit, no inheritance)."""
    return {
        "holdings": [
            {
                "node": n,
                "phi0": format_rational(strategy.bond[n]),
                "phi1": format_rational(strategy.stock[n]),
            }
            for n in tree.nodes
        ]
    }
