import random
from fractions import Fraction

import pytest

from spreadlab import (
    ABSOLUTELY_CONTINUOUS,
    DEFAULT_EPSILON,
    EQUIVALENT,
    AdaptedProcess,
    ConsistentPriceSystem,
    CpsError,
    CpsQuery,
    brute_force_cps,
    cps_threshold,
    cps_to_doc,
    deterministic_counterexample,
    find_cps,
    load_cps,
    load_market,
    max_equivalence_margin,
    scale_cps,
    stochastic_counterexample,
    verify_cps,
)

from helpers import random_market

F = Fraction


def binary_market(fee="0", p_up="1/3", up="2", down="1/2"):
    # one-period market whose only martingale weight on {up, down} is q
    return load_market({
        "times": ["0", "1"],
        "lambda": fee,
        "nodes": [
            {"id": 0, "parent": None, "prob": "1", "S": "1"},
            {"id": 1, "parent": 0, "prob": p_up, "S": up},
            {"id": 2, "parent": 0, "prob": str(F(1) - F(p_up)), "S": down},
        ],
    })


def increasing_chain(fee="1/4"):
    return load_market({
        "times": ["0", "1"],
        "lambda": fee,
        "nodes": [
            {"id": 0, "parent": None, "prob": "1", "S": "1"},
            {"id": 1, "parent": 0, "prob": "1", "S": "2"},
        ],
    })


class TestQuery:
    def test_defaults(self):
        q = CpsQuery(F(1, 4))
        assert q.epsilon == DEFAULT_EPSILON and q.mode == EQUIVALENT

    def test_fee_range(self):
        with pytest.raises(CpsError, match="cost level"):
            CpsQuery(F(1))
        with pytest.raises(CpsError, match="cost level"):
            CpsQuery(F(-1, 8))

    def test_mode_epsilon_consistency(self):
        with pytest.raises(CpsError, match="mode"):
            CpsQuery(F(1, 4), epsilon=F(0), mode=EQUIVALENT)
        with pytest.raises(CpsError, match="mode"):
            CpsQuery(F(1, 4), epsilon=F(1, 10), mode=ABSOLUTELY_CONTINUOUS)
        with pytest.raises(CpsError, match="unknown mode"):
            CpsQuery(F(1, 4), mode="exact")


class TestFindCps:
    def test_counterexample_market_at_its_own_level(self):
        market = deterministic_counterexample(F(1, 2)).market
        result = find_cps(market, CpsQuery(F(1, 2)))
        assert result.feasible
        # a deterministic martingale is constant, and the spread pins it
        assert all(s == F(1, 2) for s in result.cps.shadow_price.values())
        assert all(z == 1 for z in result.cps.density.values.values())
        ok, violations = verify_cps(market, result.cps, epsilon=DEFAULT_EPSILON)
        assert ok, violations

    def test_martingale_market_takes_its_own_price(self):
        rng = random.Random(67)
        for _ in range(10):
            market = random_market(rng, martingale=True)
            for fee in (F(0), F(1, 4)):
                result = find_cps(market, CpsQuery(fee) if fee else CpsQuery(fee, F(1, 10**6)))
                assert result.feasible
                handmade = ConsistentPriceSystem(
                    shadow_price=dict(market.price.values),
                    density=AdaptedProcess.constant(market.tree, F(1)),
                    fee=fee,
                )
                ok, violations = verify_cps(market, handmade)
                assert ok, violations

    def test_below_threshold_is_infeasible_with_certificate(self):
        market = deterministic_counterexample(F(1, 2)).market
        result = find_cps(market, CpsQuery(F(1, 4)))
        assert not result.feasible
        assert result.infeasibility.verify()

    def test_monotone_in_fee(self):
        rng = random.Random(71)
        checked = 0
        while checked < 12:
            market = random_market(rng)
            result = find_cps(market, CpsQuery(F(1, 8)))
            if not result.feasible:
                continue
            for wider in (F(1, 4), F(1, 2), F(7, 8)):
                ok, violations = verify_cps(market, result.cps, fee=wider)
                assert ok, violations
            checked += 1

    def test_shadow_price_is_mass_quotient(self):
        rng = random.Random(73)
        checked = 0
        while checked < 12:
            market = random_market(rng)
            result = find_cps(market, CpsQuery(F(1, 4)))
            if not result.feasible:
                continue
            for n in market.tree.nodes:
                z = result.cps.density[n]
                assert z > 0
                assert result.cps.shadow_price[n] == result.price_mass[n] / z
            checked += 1

    def test_rejects_invalid_market(self):
        from spreadlab import Market, MarketError

        market = deterministic_counterexample(F(1, 2)).market
        broken = Market(tree=market.tree, price=market.price, fee=F(3, 2))
        with pytest.raises(MarketError):
            find_cps(broken, CpsQuery(F(1, 4)))


class TestVerifyCps:
    def test_drift_violation_named(self):
        market = increasing_chain()
        cps = ConsistentPriceSystem(
            shadow_price=dict(market.price.values),
            density=AdaptedProcess.constant(market.tree, F(1)),
            fee=F(1, 4),
        )
        ok, violations = verify_cps(market, cps)
        assert not ok
        assert any("drift" in v for v in violations)

    def test_spread_violation_named(self):
        market = increasing_chain()
        cps = ConsistentPriceSystem(
            shadow_price={0: F(3), 1: F(3)},
            density=AdaptedProcess.constant(market.tree, F(1)),
            fee=F(1, 4),
        )
        ok, violations = verify_cps(market, cps)
        assert not ok
        assert any("spread" in v for v in violations)

    def test_root_density_and_negativity_checked(self):
        market = increasing_chain()
        cps = ConsistentPriceSystem(
            shadow_price={0: F(1), 1: F(2)},
            density=AdaptedProcess({0: F(2), 1: F(-1)}),
            fee=F(3, 4),
        )
        ok, violations = verify_cps(market, cps)
        assert not ok
        assert any("root" in v for v in violations)
        assert any("negative" in v for v in violations)

    def test_floor_enforced_when_epsilon_given(self):
        market = binary_market(fee="1/2")
        cps = ConsistentPriceSystem(
            shadow_price={0: F(1), 1: F(3, 2), 2: F(1, 2)},
            density=AdaptedProcess({0: F(1), 1: F(3, 2), 2: F(3, 4)}),
            fee=F(1, 2),
        )
        ok, violations = verify_cps(market, cps, epsilon=F(1, 2))
        assert ok, violations
        ok, violations = verify_cps(market, cps, epsilon=F(7, 8))
        assert not ok
        assert any("floor" in v or "epsilon" in v for v in violations)

    def test_stochastic_witness_verifies(self):
        report = stochastic_counterexample()
        ok, violations = verify_cps(report.market, report.cps_witness, fee=F(1, 4))
        assert ok, violations


class TestThreshold:
    def test_martingale_market_is_free(self):
        rng = random.Random(79)
        market = random_market(rng, martingale=True)
        assert cps_threshold(market) == 0

    def test_counterexample_market(self):
        market = deterministic_counterexample(F(1, 2)).market
        assert cps_threshold(market) == F(1, 2)
        market = deterministic_counterexample(F(1, 4)).market
        assert cps_threshold(market) == F(1, 4)

    def test_stochastic_market_threshold(self):
        market = stochastic_counterexample().market
        threshold = cps_threshold(market, resolution=F(1, 64))
        assert threshold <= F(1, 4)
        assert find_cps(market, CpsQuery(threshold)).feasible

    def test_resolution_validated(self):
        market = increasing_chain()
        with pytest.raises(ValueError, match="resolution"):
            cps_threshold(market, resolution=F(0))


class TestBruteForce:
    def test_deterministic_market_at_level(self):
        market = deterministic_counterexample(F(1, 2)).market
        result = brute_force_cps(market, F(1, 2))
        assert result.feasible
        assert all(v == F(1, 2) for v in result.witness.shadow_price.values())
        ok, violations = verify_cps(market, result.witness, epsilon=result.margin)
        assert ok, violations

    def test_deterministic_market_below_level(self):
        market = deterministic_counterexample(F(1, 2)).market
        assert not brute_force_cps(market, F(1, 4)).feasible

    def test_single_node_tree(self):
        market = load_market({
            "times": ["0"],
            "lambda": "1/4",
            "nodes": [{"id": 0, "parent": None, "prob": "1", "S": "3"}],
        })
        result = brute_force_cps(market, F(1, 8))
        assert result.feasible
        assert result.margin == 1

    def test_known_margin(self):
        # with S jumping from 1 to {2, 1/2} at lambda'=0, the only
        # martingale weights are (1/3, 2/3); against P = (1/2, 1/2) the
        # density is (2/3, 4/3), so the margin is 2/3
        market = binary_market(p_up="1/2")
        result = brute_force_cps(market, F(0))
        assert result.feasible
        assert result.margin == F(2, 3)

    def test_scale_preconditions(self):
        rng = random.Random(83)
        market = random_market(rng, max_depth=3)
        with pytest.raises(ValueError, match="grid resolution"):
            brute_force_cps(market, F(1, 4), grid_resolution=0)
        deep = load_market({
            "times": ["0", "1", "2", "3", "4"],
            "lambda": "1/4",
            "nodes": [{"id": 0, "parent": None, "prob": "1", "S": "1"}] + [
                {"id": i, "parent": i - 1, "prob": "1", "S": "1"} for i in range(1, 5)
            ],
        })
        with pytest.raises(ValueError, match="scale"):
            brute_force_cps(deep, F(1, 4))

    def test_agrees_with_lp_on_random_markets(self):
        rng = random.Random(89)
        for _ in range(40):
            market = random_market(rng)
            fee = rng.choice([F(0), F(1, 8), F(1, 4), F(1, 2)])
            oracle = brute_force_cps(market, fee)
            lp = find_cps(market, CpsQuery(fee, DEFAULT_EPSILON, EQUIVALENT)
                          if fee >= 0 else None)
            if oracle.feasible:
                assert lp.feasible
                ok, violations = verify_cps(market, oracle.witness, epsilon=DEFAULT_EPSILON)
                assert ok, violations
            elif lp.feasible:
                assert brute_force_cps(market, fee, grid_resolution=1024).feasible


class TestMargin:
    def test_known_value(self):
        market = binary_market(p_up="1/2")
        margin, cps = max_equivalence_margin(market, F(0))
        assert margin == F(2, 3)
        ok, violations = verify_cps(market, cps, epsilon=margin)
        assert ok, violations

    def test_infeasible_market_returns_none(self):
        margin, cps = max_equivalence_margin(increasing_chain(), F(1, 4))
        assert margin is None and cps is None


class TestScaleCps:
    def flat_cps(self):
        market = load_market({
            "times": ["0", "1"],
            "lambda": "1/2",
            "nodes": [
                {"id": 0, "parent": None, "prob": "1", "S": "1"},
                {"id": 1, "parent": 0, "prob": "1", "S": "1"},
            ],
        })
        cps = ConsistentPriceSystem(
            shadow_price={0: F(7, 8), 1: F(7, 8)},
            density=AdaptedProcess.constant(market.tree, F(1)),
            fee=F(1, 8),
        )
        return market, cps

    def test_both_outputs_land_in_the_wider_spread(self):
        market, cps = self.flat_cps()
        first, second = scale_cps(cps, F(1, 2), F(1, 4))
        assert first.shadow_price[0] == F(21, 32)
        assert second.shadow_price[0] == F(7, 12)
        for scaled in (first, second):
            ok, violations = verify_cps(market, scaled, fee=F(1, 2))
            assert ok, violations
            assert scaled.fee == F(1, 2)

    def test_ordering_window(self):
        _, cps = self.flat_cps()
        with pytest.raises(ValueError, match="ordering"):
            scale_cps(cps, F(1, 2), F(1, 16))
        with pytest.raises(ValueError, match="ordering"):
            scale_cps(cps, F(1, 2), F(3, 4))

    def test_spread_exit_window(self):
        _, cps = self.flat_cps()
        # alpha close to fee shrinks prices below the wider bid
        with pytest.raises(ValueError, match="spread"):
            scale_cps(cps, F(3, 16), F(3, 16))


class TestWire:
    def test_round_trip(self):
        market = deterministic_counterexample(F(1, 2)).market
        result = find_cps(market, CpsQuery(F(1, 2)))
        doc = cps_to_doc(result.cps, DEFAULT_EPSILON)
        assert set(doc) == {"S_tilde", "Z", "lambda_prime", "epsilon"}
        assert all(isinstance(k, str) for k in doc["S_tilde"])
        cps, epsilon = load_cps(doc, market.tree)
        assert epsilon == DEFAULT_EPSILON
        assert cps.fee == F(1, 2)
        assert cps.shadow_price == result.cps.shadow_price
        assert cps.density.values == result.cps.density.values

    def test_partial_shadow_price_marks_off_support(self):
        market = binary_market(fee="1/2")
        doc = {
            "S_tilde": {"0": "1", "2": "1/2"},
            "Z": {"0": "1", "1": "0", "2": "3/2"},
            "lambda_prime": "1/2",
            "epsilon": "0",
        }
        cps, epsilon = load_cps(doc, market.tree)
        assert epsilon == 0
        assert cps.off_support == (1,)
        assert 1 not in cps.shadow_price

    def test_missing_keys_rejected(self):
        market = binary_market()
        with pytest.raises(CpsError, match="missing 'Z'"):
            load_cps({"S_tilde": {}, "lambda_prime": "0", "epsilon": "0"}, market.tree)

    def test_unknown_node_rejected(self):
        market = binary_market()
        doc = {
            "S_tilde": {"0": "1", "1": "2", "2": "1/2", "9": "1"},
            "Z": {"0": "1", "1": "1", "2": "1"},
            "lambda_prime": "0",
            "epsilon": "1/1000000",
        }
        with pytest.raises(CpsError, match="node 9"):
            load_cps(doc, market.tree)

    def test_density_must_cover_every_node(self):
        market = binary_market()
        doc = {
            "S_tilde": {"0": "1", "1": "2", "2": "1/2"},
            "Z": {"0": "1", "1": "1"},
            "lambda_prime": "0",
            "epsilon": "1/1000000",
        }
        with pytest.raises(CpsError, match="Z: missing nodes"):
            load_cps(doc, market.tree)


class TestAbsolutelyContinuousMode:
    def kill_branch_market(self):
        # the left branch jumps 1/2 -> 5, so at lambda'=0 any measure in
        # which it survives breaks the martingale property
        return load_market({
            "times": ["0", "1", "2"],
            "lambda": "1/2",
            "nodes": [
                {"id": 0, "parent": None, "prob": "1", "S": "1"},
                {"id": 1, "parent": 0, "prob": "1/2", "S": "1/2"},
                {"id": 2, "parent": 0, "prob": "1/2", "S": "1"},
                {"id": 3, "parent": 1, "prob": "1", "S": "5"},
                {"id": 4, "parent": 2, "prob": "1", "S": "1"},
            ],
        })

    def test_equivalent_infeasible_but_ac_feasible(self):
        market = self.kill_branch_market()
        assert not find_cps(market, CpsQuery(F(0), F(1, 10**12))).feasible
        result = find_cps(market, CpsQuery(F(0), F(0), ABSOLUTELY_CONTINUOUS))
        assert result.feasible
        assert result.cps.off_support == (1, 3)
        assert result.cps.density[2] == 2
        assert 1 not in result.cps.shadow_price
        ok, violations = verify_cps(market, result.cps)
        assert ok, violations

    def test_ac_doc_round_trip(self):
        market = self.kill_branch_market()
        result = find_cps(market, CpsQuery(F(0), F(0), ABSOLUTELY_CONTINUOUS))
        doc = cps_to_doc(result.cps, F(0))
        assert set(doc["S_tilde"]) == {"0", "2", "4"}
        cps, _ = load_cps(doc, market.tree)
        assert cps.off_support == (1, 3)
