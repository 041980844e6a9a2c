"""Consistent price systems: existence, construction, verification.

A consistent price system at cost level lambda' is a pair (S-tilde, Q):
a shadow price lying inside every node's spread together with a measure
under which it is a martingale.  Parametrizing Q by its density process Z
and substituting Y = Z * S-tilde turns the bilinear search into a linear
feasibility problem, solved exactly; infeasibility comes back with a
checkable certificate.

Equivalence of Q and the reference measure is approximated by the leaf
floor Z(leaf) >= epsilon (strict inequalities are not expressible in a
linear program); epsilon = 0 switches to the absolutely continuous mode
where Z may die out and the shadow price is only defined on the support.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from . import simplex
from .market import Market, MarketError, validate_market
from .rationals import format_rational, parse_rational
from .simplex import Constraint, FarkasCertificate
from .tree import AdaptedProcess, EventTree, NodeId

EQUIVALENT = "equivalent"
ABSOLUTELY_CONTINUOUS = "absolutely_continuous"

DEFAULT_EPSILON = Fraction(1, 10**6)


class CpsError(ValueError):
    """An invalid price-system description or query."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class CpsQuery:
    """What to search for: cost level, equivalence floor, and mode."""

    fee: Fraction
    epsilon: Fraction = DEFAULT_EPSILON
    mode: str = EQUIVALENT

    def __post_init__(self):
        object.__setattr__(self, "fee", Fraction(self.fee))
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        problems = []
        if not (0 <= self.fee < 1):
            problems.append(f"cost level must satisfy 0 <= lambda' < 1, got {self.fee}")
        if self.epsilon < 0:
            problems.append(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.mode not in (EQUIVALENT, ABSOLUTELY_CONTINUOUS):
            problems.append(f"unknown mode {self.mode!r}")
        elif (self.epsilon > 0) != (self.mode == EQUIVALENT):
            problems.append(
                f"mode {self.mode} and epsilon {self.epsilon} disagree: "
                "equivalent mode needs epsilon > 0, absolutely continuous needs epsilon = 0"
            )
        if problems:
            raise CpsError(problems)


@dataclass(frozen=True)
class ConsistentPriceSystem:
    """Shadow price inside the spread plus the measure that makes it a
    martingale, the measure given as a density process against the
    reference measure.

    ``shadow_price`` may be partial: in the absolutely continuous mode it
    is only defined where the density is positive, and ``off_support``
    lists the nodes left out.
    """

    shadow_price: Mapping[NodeId, Fraction]
    density: AdaptedProcess
    fee: Fraction
    off_support: tuple[NodeId, ...] = ()

    def leaf_measure(self, tree: EventTree) -> dict[NodeId, Fraction]:
        """The measure Q as leaf weights: Q(leaf) = Z(leaf) * P(leaf)."""
        return {leaf: self.density[leaf] * tree.node_prob[leaf] for leaf in tree.leaves}


@dataclass(frozen=True)
class CpsInfeasibility:
    """Proof that no price system exists at the queried level.

    The certificate aggregates the stored constraint rows into a
    contradiction; verify() recomputes that aggregation from scratch.
    """

    fee: Fraction
    epsilon: Fraction
    certificate: FarkasCertificate
    num_vars: int
    constraints: tuple[Constraint, ...]

    def verify(self) -> bool:
        return self.certificate.verify(self.num_vars, self.constraints)


@dataclass(frozen=True)
class FindCpsResult:
    feasible: bool
    cps: "ConsistentPriceSystem | None" = None
    price_mass: "AdaptedProcess | None" = None
    infeasibility: "CpsInfeasibility | None" = None


def _cps_constraints(
    market: Market, fee: Fraction, epsilon: Fraction
) -> tuple[int, list[Constraint], dict[NodeId, int]]:
    """Feasibility system in 2N nonnegative variables: mass z per node,
    then price-weighted mass y = z * S-tilde per node."""
    tree = market.tree
    pos = {n: i for i, n in enumerate(tree.nodes)}
    count = len(tree.nodes)
    cons: list[Constraint] = []

    cons.append(Constraint({pos[tree.root]: Fraction(1)}, simplex.EQ, Fraction(1), "unit_root_mass"))
    for n in tree.internal:
        zrow = {pos[n]: Fraction(-1)}
        yrow = {count + pos[n]: Fraction(-1)}
        for c in tree.children[n]:
            zrow[pos[c]] = tree.cond_prob[c]
            yrow[count + pos[c]] = tree.cond_prob[c]
        cons.append(Constraint(zrow, simplex.EQ, Fraction(0), f"mass_drift:{n}"))
        cons.append(Constraint(yrow, simplex.EQ, Fraction(0), f"price_drift:{n}"))
    for n in tree.nodes:
        lo = (1 - fee) * market.price[n]
        hi = market.price[n]
        cons.append(
            Constraint({count + pos[n]: Fraction(1), pos[n]: -lo}, simplex.GE, Fraction(0), f"bid:{n}")
        )
        cons.append(
            Constraint({count + pos[n]: Fraction(1), pos[n]: -hi}, simplex.LE, Fraction(0), f"ask:{n}")
        )
    if epsilon > 0:
        for leaf in tree.leaves:
            cons.append(Constraint({pos[leaf]: Fraction(1)}, simplex.GE, epsilon, f"floor:{leaf}"))
    return 2 * count, cons, pos


def _system_from_solution(
    tree: EventTree, x, pos: Mapping[NodeId, int], fee: Fraction
) -> tuple[ConsistentPriceSystem, AdaptedProcess]:
    count = len(tree.nodes)
    density = {n: x[pos[n]] for n in tree.nodes}
    mass_price = {n: x[count + pos[n]] for n in tree.nodes}
    shadow = {n: mass_price[n] / density[n] for n in tree.nodes if density[n] > 0}
    off = tuple(n for n in tree.nodes if density[n] == 0)
    cps = ConsistentPriceSystem(
        shadow_price=shadow,
        density=AdaptedProcess(density),
        fee=fee,
        off_support=off,
    )
    return cps, AdaptedProcess(mass_price)


def find_cps(market: Market, query: CpsQuery) -> FindCpsResult:
    """Search for a price system at the queried cost level.

    Feasible outcomes carry the system plus the raw price-weighted mass
    process y = z * S-tilde; infeasible outcomes carry an exact
    certificate over the very constraints that were solved.
    """
    problems = validate_market(market)
    if problems:
        raise MarketError(problems)
    num_vars, cons, pos = _cps_constraints(market, query.fee, query.epsilon)
    result = simplex.solve(num_vars, cons)
    if result.status == simplex.INFEASIBLE:
        return FindCpsResult(
            feasible=False,
            infeasibility=CpsInfeasibility(
                fee=query.fee,
                epsilon=query.epsilon,
                certificate=result.certificate,
                num_vars=num_vars,
                constraints=tuple(cons),
            ),
        )
    cps, price_mass = _system_from_solution(market.tree, result.x, pos, query.fee)
    return FindCpsResult(feasible=True, cps=cps, price_mass=price_mass)


def verify_cps(
    market: Market,
    cps: ConsistentPriceSystem,
    fee: "Fraction | None" = None,
    epsilon: "Fraction | None" = None,
) -> tuple[bool, list[str]]:
    """Check every defining property of a price system, exactly.

    Checks: density domain, Z(root) = 1, Z >= 0, zero one-step drift of Z
    and of Z * S-tilde, shadow price present on the support and inside the
    spread, and (when epsilon is given) the leaf floor.  Returns all
    violations found, each naming its node.
    """
    tree = market.tree
    if fee is None:
        fee = cps.fee
    violations: list[str] = []

    missing = [n for n in tree.nodes if n not in cps.density]
    if missing:
        return False, [f"density missing at nodes {missing}"]

    if cps.density[tree.root] != 1:
        violations.append(f"node {tree.root}: density at root is {cps.density[tree.root]}, expected 1")
    for n in tree.nodes:
        if cps.density[n] < 0:
            violations.append(f"node {n}: density {cps.density[n]} is negative")

    mass_price: dict[NodeId, Fraction] = {}
    for n in tree.nodes:
        z = cps.density[n]
        if n in cps.shadow_price:
            s = cps.shadow_price[n]
            lo = (1 - fee) * market.price[n]
            hi = market.price[n]
            if not (lo <= s <= hi):
                violations.append(
                    f"node {n}: shadow price {s} outside spread [{lo}, {hi}]"
                )
            mass_price[n] = z * s
        elif z == 0:
            mass_price[n] = Fraction(0)
        else:
            violations.append(f"node {n}: shadow price missing on support (density {z})")
            mass_price[n] = Fraction(0)

    for n in tree.internal:
        kids = tree.children[n]
        z_next = sum(tree.cond_prob[c] * cps.density[c] for c in kids)
        if z_next != cps.density[n]:
            violations.append(
                f"node {n}: density drift {z_next - cps.density[n]} (martingale property fails)"
            )
        y_next = sum(tree.cond_prob[c] * mass_price[c] for c in kids)
        if y_next != mass_price[n]:
            violations.append(
                f"node {n}: shadow price drift under Q (weighted drift {y_next - mass_price[n]})"
            )

    if epsilon is not None and epsilon > 0:
        for leaf in tree.leaves:
            if cps.density[leaf] < epsilon:
                violations.append(
                    f"node {leaf}: leaf density {cps.density[leaf]} below floor {epsilon}"
                )
    return not violations, violations


def max_equivalence_margin(
    market: Market, fee: Fraction
) -> "tuple[Fraction | None, ConsistentPriceSystem | None]":
    """Best achievable equivalence: maximize the minimum leaf density.

    Returns (margin, system at that margin), or (None, None) when not
    even an absolutely continuous system exists.  A margin of zero means
    the cost level is attainable only with a degenerate measure.
    """
    problems = validate_market(market)
    if problems:
        raise MarketError(problems)
    tree = market.tree
    num_vars, cons, pos = _cps_constraints(market, Fraction(fee), Fraction(0))
    t = num_vars
    for leaf in tree.leaves:
        cons.append(
            Constraint({pos[leaf]: Fraction(1), t: Fraction(-1)}, simplex.GE, Fraction(0), f"margin:{leaf}")
        )
    result = simplex.solve(num_vars + 1, cons, objective={t: Fraction(1)}, maximize=True)
    if result.status == simplex.INFEASIBLE:
        return None, None
    if result.status != simplex.OPTIMAL:
        raise AssertionError("margin is bounded by the unit root mass")
    cps, _ = _system_from_solution(tree, result.x, pos, Fraction(fee))
    return result.objective, cps


def cps_threshold(
    market: Market,
    epsilon: Fraction = DEFAULT_EPSILON,
    resolution: Fraction = Fraction(1, 1024),
) -> Fraction:
    """Smallest feasible cost level, located by bisection.

    Returns 0 immediately when level 0 is feasible.  Otherwise bisects
    over [0, 1); the returned value is the smallest midpoint found
    feasible, and the true threshold lies within ``resolution`` below it.
    Some feasible level always exists: once the widest spread covers the
    price range a constant shadow price works.
    """
    resolution = Fraction(resolution)
    if resolution <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    epsilon = Fraction(epsilon)
    mode = EQUIVALENT if epsilon > 0 else ABSOLUTELY_CONTINUOUS

    def feasible(fee: Fraction) -> bool:
        return find_cps(market, CpsQuery(fee, epsilon, mode)).feasible

    if feasible(Fraction(0)):
        return Fraction(0)
    lo = Fraction(0)
    hi = Fraction(1)
    hi_ok = False
    while (not hi_ok) or hi - lo > resolution:
        mid = (lo + hi) / 2
        if feasible(mid):
            hi, hi_ok = mid, True
        else:
            lo = mid
    return hi


def scale_cps(
    cps: ConsistentPriceSystem, fee: Fraction, alpha: Fraction
) -> tuple[ConsistentPriceSystem, ConsistentPriceSystem]:
    """The two rescalings that promote a low-cost system to level ``fee``.

    Multiplying the shadow price by (1 - alpha), or by (1 - fee)/(1 - alpha),
    keeps it a martingale under the same measure; the parameter window
    below keeps both inside the wider spread.
    """
    fee = Fraction(fee)
    alpha = Fraction(alpha)
    if not (cps.fee <= alpha <= fee):
        raise ValueError(
            f"parameter ordering violated: need {cps.fee} <= alpha <= {fee}, got alpha = {alpha}"
        )
    if (1 - alpha) * (1 - cps.fee) < (1 - fee):
        raise ValueError(
            f"scaling by 1 - alpha = {1 - alpha} would exit the spread: "
            f"need (1-alpha)(1-{cps.fee}) >= {1 - fee}"
        )
    down = Fraction(1) - alpha
    up = (Fraction(1) - fee) / (Fraction(1) - alpha)
    first = ConsistentPriceSystem(
        shadow_price={n: down * s for n, s in cps.shadow_price.items()},
        density=cps.density,
        fee=fee,
        off_support=cps.off_support,
    )
    second = ConsistentPriceSystem(
        shadow_price={n: up * s for n, s in cps.shadow_price.items()},
        density=cps.density,
        fee=fee,
        off_support=cps.off_support,
    )
    return first, second


@dataclass(frozen=True)
class BruteForceResult:
    feasible: bool
    witness: "ConsistentPriceSystem | None"
    margin: "Fraction | None"
    grid_resolution: int


def _spread_grid(market: Market, fee: Fraction, steps: int) -> dict[NodeId, list[Fraction]]:
    """Uniform grid over each node's spread, enriched with every spread
    endpoint from anywhere in the tree that happens to fall inside."""
    tree = market.tree
    endpoints = []
    for n in tree.nodes:
        lo = (1 - fee) * market.price[n]
        endpoints.append(lo)
        endpoints.append(market.price[n])
    grids: dict[NodeId, list[Fraction]] = {}
    for n in tree.nodes:
        lo = (1 - fee) * market.price[n]
        hi = market.price[n]
        values = {lo + Fraction(k, steps) * (hi - lo) for k in range(steps + 1)}
        for e in endpoints:
            if lo <= e <= hi:
                values.add(e)
        grids[n] = sorted(values)
    return grids


def _straddle_possible(v: Fraction, lows: list[Fraction], highs: list[Fraction]) -> bool:
    """Can value v sit strictly between child values drawn from two
    distinct children?  lows/highs are per-child minima and maxima."""
    below = [i for i, lo in enumerate(lows) if lo < v]
    above = [i for i, hi in enumerate(highs) if hi > v]
    if not below or not above:
        return False
    return len(below) > 1 or len(above) > 1 or below[0] != above[0]


def brute_force_cps(
    market: Market,
    fee: Fraction,
    epsilon: Fraction = DEFAULT_EPSILON,
    grid_resolution: int = 8,
) -> BruteForceResult:
    """Independent small-scale oracle for find_cps.

    Discretizes each spread and decides, exactly, whether some assignment
    of on-grid shadow values admits a valid measure: an assignment works
    iff at every internal node the value either equals all child values or
    lies strictly between two of them (that is the existence criterion for
    strictly positive one-step weights).  Sweeping that criterion bottom-up
    over per-node feasible value sets decides all grid assignments at once,
    which is equivalent to enumerating them.

    In the equivalent mode a witness system is extracted and its weights
    are chosen to maximize the minimum leaf density for the selected
    values; the result is feasible only if that margin reaches epsilon.
    Soundness is one-sided: a reported witness always verifies, while
    infeasibility only speaks for the given grid.
    """
    fee = Fraction(fee)
    epsilon = Fraction(epsilon)
    tree = market.tree
    if tree.horizon > 3 or any(len(tree.children[n]) > 3 for n in tree.internal):
        raise ValueError(
            "oracle scale exceeded: needs at most 3 periods and 3 children per node"
        )
    if not (0 <= fee < 1):
        raise ValueError(f"cost level must satisfy 0 <= lambda' < 1, got {fee}")
    if grid_resolution < 1:
        raise ValueError(f"grid resolution must be at least 1, got {grid_resolution}")

    grids = _spread_grid(market, fee, grid_resolution)
    equivalent = epsilon > 0

    feasible_values: dict[NodeId, set] = {}
    for n in reversed(tree.nodes):
        kids = tree.children[n]
        if not kids:
            feasible_values[n] = set(grids[n])
            continue
        child_sets = [feasible_values[c] for c in kids]
        if equivalent and any(not s for s in child_sets):
            feasible_values[n] = set()
            continue
        live = [s for s in child_sets if s]
        if not live:
            feasible_values[n] = set()
            continue
        lows = [min(s) for s in live]
        highs = [max(s) for s in live]
        ok = set()
        for v in grids[n]:
            if equivalent:
                if all(v in s for s in child_sets) or _straddle_possible(v, lows, highs):
                    ok.add(v)
            else:
                if any(v in s for s in live) or _straddle_possible(v, lows, highs):
                    ok.add(v)
        feasible_values[n] = ok

    root_values = feasible_values[tree.root]
    if not root_values:
        return BruteForceResult(False, None, None, grid_resolution)
    if not equivalent:
        return BruteForceResult(True, None, None, grid_resolution)

    shadow: dict[NodeId, Fraction] = {}

    def assign(n: NodeId, v: Fraction) -> None:
        shadow[n] = v
        kids = tree.children[n]
        if not kids:
            return
        if all(v in feasible_values[c] for c in kids):
            for c in kids:
                assign(c, v)
            return
        # straddle: grab the widest available bracket around v
        best = None
        for c1 in kids:
            lo = min(feasible_values[c1])
            if lo >= v:
                continue
            for c2 in kids:
                if c2 == c1:
                    continue
                hi = max(feasible_values[c2])
                if hi <= v:
                    continue
                score = (v - lo) * (hi - v)
                if best is None or score > best[0]:
                    best = (score, c1, lo, c2, hi)
        _, c_lo, u_lo, c_hi, u_hi = best
        assign(c_lo, u_lo)
        assign(c_hi, u_hi)
        for c in kids:
            if c in (c_lo, c_hi):
                continue
            if v in feasible_values[c]:
                assign(c, v)
            else:
                assign(c, min(feasible_values[c], key=lambda u: abs(u - v)))

    # prefer the root value with the roomiest bracket; ties to the middle
    assign(tree.root, sorted(root_values)[len(root_values) // 2])

    weights: dict[NodeId, dict[NodeId, Fraction]] = {}

    def weigh(n: NodeId) -> Fraction:
        """Pick one-step weights below n maximizing the minimum relative
        leaf density of the subtree; returns that minimum (for Z(n) = 1).

        With subtree margins m_c already fixed, the node's contribution is
        min_c (q_c / p_c) m_c, maximized subject to q > 0 summing to 1 and
        matching the shadow value; the optimum of that one-dimensional
        problem has a closed form in the three bounds computed below."""
        kids = tree.children[n]
        if not kids:
            return Fraction(1)
        sub = [weigh(c) for c in kids]
        v = shadow[n]
        u = [shadow[c] for c in kids]
        beta = [tree.cond_prob[c] / m for c, m in zip(kids, sub)]
        umin, umax = min(u), max(u)
        bounds = [Fraction(1) / sum(beta)]
        d_lo = sum(b * (ui - umin) for b, ui in zip(beta, u))
        d_hi = sum(b * (umax - ui) for b, ui in zip(beta, u))
        if d_lo > 0:
            bounds.append((v - umin) / d_lo)
        if d_hi > 0:
            bounds.append((umax - v) / d_hi)
        t = min(bounds)
        q = [t * b for b in beta]
        if umax > umin:
            # residual mass goes to the extreme children; the split is the
            # unique one preserving both the total and the mean
            sigma = 1 - sum(q)
            tau = v - sum(qc * uc for qc, uc in zip(q, u))
            r_hi = (tau - sigma * umin) / (umax - umin)
            r_lo = sigma - r_hi
            q[u.index(umin)] += r_lo
            q[u.index(umax)] += r_hi
        else:
            total = sum(q)
            q = [qc / total for qc in q]
        weights[n] = dict(zip(kids, q))
        return min(qc * mc / tree.cond_prob[c] for c, qc, mc in zip(kids, q, sub))

    margin = weigh(tree.root)
    density: dict[NodeId, Fraction] = {tree.root: Fraction(1)}
    for n in tree.nodes:
        if n == tree.root:
            continue
        up = tree.parent[n]
        density[n] = density[up] * weights[up][n] / tree.cond_prob[n]
    witness = ConsistentPriceSystem(
        shadow_price=dict(shadow),
        density=AdaptedProcess(density),
        fee=fee,
        off_support=(),
    )
    if margin >= epsilon:
        return BruteForceResult(True, witness, margin, grid_resolution)
    return BruteForceResult(False, witness, margin, grid_resolution)


def load_cps(document: Mapping, tree: EventTree) -> tuple[ConsistentPriceSystem, Fraction]:
    """Parse a price-system document; returns the system and its epsilon.

    Expected keys: "S_tilde" and "Z" as maps from node id text to rational
    text, "lambda_prime", "epsilon".  "S_tilde" may omit nodes (taken as
    off-support); "Z" must cover every node.
    """
    problems: list[str] = []
    for key in ("S_tilde", "Z", "lambda_prime", "epsilon"):
        if key not in document:
            problems.append(f"missing '{key}'")
    if problems:
        raise CpsError(problems)

    def parse_map(raw: Mapping, label: str) -> dict[NodeId, Fraction]:
        out: dict[NodeId, Fraction] = {}
        for key, value in raw.items():
            try:
                node = int(key)
            except (TypeError, ValueError):
                problems.append(f"{label}: bad node id {key!r}")
                continue
            if node not in tree.node_set:
                problems.append(f"{label}: node {node} not in tree")
                continue
            try:
                out[node] = parse_rational(value)
            except ValueError as exc:
                problems.append(f"{label}: node {node}: {exc}")
        return out

    shadow = parse_map(document["S_tilde"], "S_tilde")
    density = parse_map(document["Z"], "Z")
    try:
        fee = parse_rational(document["lambda_prime"])
    except ValueError as exc:
        problems.append(f"lambda_prime: {exc}")
        fee = Fraction(0)
    try:
        epsilon = parse_rational(document["epsilon"])
    except ValueError as exc:
        problems.append(f"epsilon: {exc}")
        epsilon = Fraction(0)
    missing = [n for n in tree.nodes if n not in density]
    if missing:
        problems.append(f"Z: missing nodes {missing}")
    if problems:
        raise CpsError(problems)

    cps = ConsistentPriceSystem(
        shadow_price=shadow,
        density=AdaptedProcess(density),
        fee=fee,
        off_support=tuple(n for n in tree.nodes if n not in shadow),
    )
    return cps, epsilon


def cps_to_doc(cps: ConsistentPriceSystem, epsilon: Fraction) -> dict:
    """Serialize to the documented wire shape (node ids become text keys)."""
    return {
        "S_tilde": {str(n): format_rational(s) for n, s in sorted(cps.shadow_price.items())},
        "Z": {str(n): format_rational(cps.density[n]) for n in sorted(cps.density.values)},
        "lambda_prime": format_rational(cps.fee),
        "epsilon": format_rational(epsilon),
    }
