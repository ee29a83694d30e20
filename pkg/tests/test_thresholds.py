"""Threshold algebra tests.

Derived expectations are computed by independent oracles: brute-force
truncated series summation for utilities, bisection and grid search for
the exponential-belief maximizer.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandit_thresholds.thresholds import (
    BracketError,
    DiscountSpec,
    DeltaStarResult,
    ExponentialBelief,
    ThresholdQuery,
    exploration_utility,
    exponential_delta_star,
    gamma_dist_condition,
    greedy_utility,
    median_gamma_threshold,
    should_explore_finite,
    should_explore_geometric,
    solve_scalar_root,
)


def series_exploration_utility(q_bar_j, delta, p_i, b, t, discount):
    """Brute-force summation of the two-bracket exploration bound.

    Geometric series truncate where the remaining tail is below 1e-18 of
    the total mass; math.fsum keeps the partial sums exactly rounded.
    """
    explore_bracket = (q_bar_j + delta) * p_i + b * (1.0 - p_i)
    greedy_bracket = (q_bar_j + delta) * p_i + q_bar_j * (1.0 - p_i)
    if discount.kind == "geometric":
        gamma = discount.gamma
        if gamma == 0.0:
            k_max = t + 1
        else:
            k_max = int(math.log(1e-18 * (1.0 - gamma)) / math.log(gamma)) + t + 2
        weights = [gamma**k for k in range(k_max)]
    else:
        weights = [1.0] * (discount.n + 1)
    head = [w * explore_bracket for w in weights[:t]]
    tail = [w * greedy_bracket for w in weights[t:]]
    return math.fsum(head + tail)


def series_greedy_utility(q_bar_j, discount):
    if discount.kind == "geometric":
        gamma = discount.gamma
        k_max = 1 if gamma == 0.0 else int(math.log(1e-18 * (1.0 - gamma)) / math.log(gamma)) + 2
        return math.fsum(q_bar_j * gamma**k for k in range(k_max))
    return math.fsum(q_bar_j for _ in range(discount.n + 1))


class TestDiscountSpec:
    def test_geometric_masses_match_series(self):
        spec = DiscountSpec.geometric(0.9)
        assert spec.total_mass() == pytest.approx(10.0, abs=1e-12)
        for t in (0, 1, 2, 7):
            head = math.fsum(0.9**k for k in range(t))
            assert spec.head_mass(t) == pytest.approx(head, abs=1e-12)
            assert spec.tail_mass(t) == pytest.approx(spec.total_mass() - head, abs=1e-10)

    def test_uniform_finite_masses(self):
        spec = DiscountSpec.uniform_finite(7)
        assert spec.total_mass() == 8.0
        assert spec.head_mass(3) == 3.0
        assert spec.tail_mass(3) == 5.0
        assert spec.tail_mass(20) == 0.0
        assert spec.head_mass(20) == 8.0

    def test_weights(self):
        geo = DiscountSpec.geometric(0.5)
        assert [geo.weight(k) for k in range(4)] == [1.0, 0.5, 0.25, 0.125]
        fin = DiscountSpec.uniform_finite(2)
        assert [fin.weight(k) for k in range(4)] == [1.0, 1.0, 1.0, 0.0]

    def test_gamma_one_diverges(self):
        with pytest.raises(ValueError):
            DiscountSpec.geometric(1.0)

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            DiscountSpec.geometric(-0.1)
        with pytest.raises(ValueError):
            DiscountSpec.uniform_finite(-1)
        with pytest.raises(ValueError):
            DiscountSpec(kind="nope")


class TestExplorationUtility:
    def test_certain_upside_collapses_to_full_mass(self):
        # p_i = 1 pays q_bar_j + delta on every step regardless of t
        query = ThresholdQuery(
            q_bar_j=0.4, delta=0.2, p_i=1.0, b=0.0, t=1, discount=DiscountSpec.geometric(0.5)
        )
        assert exploration_utility(query) == pytest.approx(1.2, abs=1e-12)

    def test_equal_branches_are_t_and_p_invariant(self):
        # delta = 0 with b = q_bar_j makes both brackets equal q_bar_j
        for t in (1, 3, 10):
            for p in (0.0, 0.3, 1.0):
                query = ThresholdQuery(
                    q_bar_j=0.6, delta=0.0, p_i=p, b=0.6, t=t,
                    discount=DiscountSpec.geometric(0.8),
                )
                assert exploration_utility(query) == pytest.approx(3.0, abs=1e-12)

    def test_matches_series_oracle_fixture(self):
        query = ThresholdQuery(
            q_bar_j=0.5, delta=0.1, p_i=0.3, b=0.0, t=2, discount=DiscountSpec.geometric(0.9)
        )
        value = exploration_utility(query)
        assert value == pytest.approx(4.635, abs=1e-12)
        oracle = series_exploration_utility(0.5, 0.1, 0.3, 0.0, 2, DiscountSpec.geometric(0.9))
        assert value == pytest.approx(oracle, abs=1e-12)

    def test_matches_series_oracle_randomized(self):
        rng = np.random.default_rng(1234)
        for _ in range(300):
            q = rng.uniform(0.0, 1.0)
            b = rng.uniform(0.0, q)
            delta = rng.uniform(-0.5, 1.0)
            p = rng.uniform(0.0, 1.0)
            t = int(rng.integers(1, 20))
            if rng.random() < 0.5:
                discount = DiscountSpec.geometric(rng.uniform(0.0, 0.99))
            else:
                discount = DiscountSpec.uniform_finite(int(rng.integers(0, 100)))
            query = ThresholdQuery(q_bar_j=q, delta=delta, p_i=p, b=b, t=t, discount=discount)
            oracle = series_exploration_utility(q, delta, p, b, t, discount)
            assert exploration_utility(query) == pytest.approx(oracle, abs=1e-12)

    def test_invalid_query(self):
        with pytest.raises(ValueError):
            ThresholdQuery(q_bar_j=0.5, delta=0.1, p_i=1.5, b=0.0, t=1,
                           discount=DiscountSpec.geometric(0.5))
        with pytest.raises(ValueError):
            ThresholdQuery(q_bar_j=0.5, delta=0.1, p_i=0.5, b=0.0, t=0,
                           discount=DiscountSpec.geometric(0.5))
        with pytest.raises(ValueError):
            ThresholdQuery(q_bar_j=0.1, delta=0.1, p_i=0.5, b=0.2, t=1,
                           discount=DiscountSpec.geometric(0.5))


class TestGreedyUtility:
    def test_geometric(self):
        assert greedy_utility(0.5, DiscountSpec.geometric(0.9)) == pytest.approx(5.0, abs=1e-12)

    def test_zero_mean(self):
        assert greedy_utility(0.0, DiscountSpec.geometric(0.7)) == 0.0
        assert greedy_utility(0.0, DiscountSpec.uniform_finite(9)) == 0.0

    def test_uniform_finite_matches_series(self):
        value = greedy_utility(0.25, DiscountSpec.uniform_finite(7))
        assert value == pytest.approx(2.0, abs=1e-12)
        assert value == pytest.approx(
            series_greedy_utility(0.25, DiscountSpec.uniform_finite(7)), abs=1e-12
        )


class TestShouldExploreGeometric:
    def test_median_case_threshold(self):
        # at p = 1/2 the rule reduces to gamma > (q - delta) / q = 0.8
        assert should_explore_geometric(0.5, 0.1, 0.5, 0.9) is True
        assert should_explore_geometric(0.5, 0.1, 0.5, 0.7) is False
        assert should_explore_geometric(0.5, 0.1, 0.5, 0.8) is False  # boundary: exploit

    def test_certain_upside_always_explores(self):
        for gamma in (0.0, 0.5, 0.99):
            assert should_explore_geometric(0.3, 0.05, 1.0, gamma) is True

    def test_high_mean_low_probability_exploits(self):
        # lhs = (0.9 - 0.95*0.2) / (0.8*0.9) = 0.9861... > 0.8
        assert should_explore_geometric(0.9, 0.05, 0.2, 0.8) is False
        # cross-check against the utility comparison
        discount = DiscountSpec.geometric(0.8)
        query = ThresholdQuery(q_bar_j=0.9, delta=0.05, p_i=0.2, b=0.0, t=1, discount=discount)
        assert exploration_utility(query) <= greedy_utility(0.9, discount)

    def test_zero_mean_explores_iff_some_upside(self):
        assert should_explore_geometric(0.0, 0.2, 0.1, 0.0) is True
        assert should_explore_geometric(0.0, 0.2, 0.0, 0.9) is False

    def test_rejects_nonpositive_delta(self):
        with pytest.raises(ValueError):
            should_explore_geometric(0.5, 0.0, 0.5, 0.9)
        with pytest.raises(ValueError):
            should_explore_geometric(0.5, -0.1, 0.5, 0.9)

    def test_matches_utility_comparison_randomized(self):
        rng = np.random.default_rng(99)
        checked = 0
        while checked < 1000:
            q = rng.uniform(0.01, 1.0)
            delta = rng.uniform(1e-6, 1.0)
            p = rng.uniform(0.0, 1.0)
            gamma = rng.uniform(0.0, 0.999)
            discount = DiscountSpec.geometric(gamma)
            u = exploration_utility(
                ThresholdQuery(q_bar_j=q, delta=delta, p_i=p, b=0.0, t=1, discount=discount)
            )
            g = greedy_utility(q, discount)
            if abs(u - g) <= 1e-12 * max(1.0, abs(g)):
                continue  # boundary: either verdict is defensible
            assert should_explore_geometric(q, delta, p, gamma) == (u > g)
            checked += 1


class TestMedianGammaThreshold:
    def test_basic(self):
        assert median_gamma_threshold(0.5, 0.1) == pytest.approx(0.8, abs=1e-12)

    def test_margin_equals_mean(self):
        assert median_gamma_threshold(0.4, 0.4) == 0.0

    def test_matches_decision_boundary_by_bisection(self):
        q, delta = 0.6, 0.3
        threshold = median_gamma_threshold(q, delta)
        assert threshold == pytest.approx(0.5, abs=1e-12)
        # bisect the decision rule at p = 1/2 to locate the flip point
        lo, hi = 0.0, 0.999999
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if should_explore_geometric(q, delta, 0.5, mid):
                hi = mid
            else:
                lo = mid
        assert 0.5 * (lo + hi) == pytest.approx(threshold, abs=1e-9)

    def test_degenerate_mean_raises(self):
        with pytest.raises(ValueError):
            median_gamma_threshold(0.0, 0.1)


class TestShouldExploreFinite:
    def test_zero_probability_never_explores(self):
        for n in (1, 10, 100):
            assert should_explore_finite(0.5, 0.1, 0.0, n) is False

    def test_examples_match_series_oracle(self):
        cases = [(0.5, 0.1, 0.5, 10, True), (0.9, 0.1, 0.1, 1, False)]
        for q, delta, p, n, expected in cases:
            assert should_explore_finite(q, delta, p, n) is expected
            discount = DiscountSpec.uniform_finite(n)
            u = series_exploration_utility(q, delta, p, 0.0, 1, discount)
            g = series_greedy_utility(q, discount)
            assert (u > g) is expected

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            should_explore_finite(0.5, 0.0, 0.5, 10)
        with pytest.raises(ValueError):
            should_explore_finite(0.5, 0.1, 0.5, 0)


class TestGammaDistCondition:
    def test_gamma_one_limit(self):
        assert gamma_dist_condition(1e-9, 5.0, 1.0) is True
        assert gamma_dist_condition(0.0, 5.0, 1.0) is False

    def test_exponential_belief_grid_oracle(self):
        belief = ExponentialBelief(beta=1.0, mu=0.0)
        q = 1.0
        grid = np.arange(1e-4, 10.0 + 1e-4, 1e-4)
        tails = np.exp(-belief.beta * (q + grid - belief.mu))
        f = grid * tails / (1.0 - tails)
        f_max = float(f.max())
        assert f_max == pytest.approx(0.1586, abs=1e-3)
        assert gamma_dist_condition(f_max, q, 0.99) is True
        assert gamma_dist_condition(f_max, q, 0.8) is False


class TestExponentialBelief:
    def test_tail_shape(self):
        belief = ExponentialBelief(beta=2.0, mu=0.3)
        assert belief.tail(0.0) == 1.0
        assert belief.tail(0.3) == 1.0
        assert belief.tail(0.8) == pytest.approx(math.exp(-1.0), abs=1e-12)
        deltas = np.linspace(-1, 5, 200)
        tails = [belief.tail(d) for d in deltas]
        assert all(a >= b for a, b in zip(tails, tails[1:]))

    def test_requires_positive_rate(self):
        with pytest.raises(ValueError):
            ExponentialBelief(beta=0.0)


class TestExponentialDeltaStar:
    def test_unit_case_against_bisection_and_grid(self):
        result = exponential_delta_star(ExponentialBelief(beta=1.0, mu=0.0), 1.0)
        assert result.delta_star == pytest.approx(0.8414, abs=1e-3)
        assert not result.degenerate
        # bisection oracle on the stationarity residual
        root = solve_scalar_root(
            lambda d: math.exp(1.0 + d) * (1.0 - d) - 1.0, 0.5, 0.99, 1e-12
        )
        assert result.delta_star == pytest.approx(root, abs=1e-9)
        # grid-search maximization oracle
        grid = np.linspace(1e-6, 10.0, 100_000)
        f = grid / np.expm1(1.0 * (1.0 + grid))
        assert result.delta_star == pytest.approx(grid[np.argmax(f)], abs=1e-3)
        assert result.f_at_star >= f.max() - 1e-9

    def test_scaling_identity(self):
        unit = exponential_delta_star(ExponentialBelief(beta=1.0, mu=0.0), 1.0)
        scaled = exponential_delta_star(ExponentialBelief(beta=2.0, mu=0.0), 0.5)
        assert scaled.delta_star == pytest.approx(unit.delta_star / 2.0, abs=1e-6)
        assert scaled.delta_star == pytest.approx(0.4207, abs=1e-3)

    def test_stationarity_residual_small(self):
        for beta, q in ((1.0, 1.0), (2.0, 0.5), (0.3, 2.0), (5.0, 0.04)):
            result = exponential_delta_star(ExponentialBelief(beta=beta, mu=0.0), q)
            residual = math.exp(beta * (q + result.delta_star)) * (1.0 - beta * result.delta_star) - 1.0
            assert abs(residual) <= 1e-10

    def test_zero_gap_is_degenerate(self):
        result = exponential_delta_star(ExponentialBelief(beta=4.0, mu=0.25), 0.25)
        assert result == DeltaStarResult(0.0, 0.25, True)

    def test_negative_gap_rejected(self):
        with pytest.raises(ValueError):
            exponential_delta_star(ExponentialBelief(beta=1.0, mu=0.5), 0.2)


class TestSolveScalarRoot:
    def test_linear(self):
        assert solve_scalar_root(lambda x: x - 2.0, 0.0, 5.0, 1e-10) == pytest.approx(2.0, abs=1e-9)

    def test_sqrt_two(self):
        root = solve_scalar_root(lambda x: x * x - 2.0, 0.0, 2.0, 1e-8)
        assert root == pytest.approx(1.41421356, abs=1e-7)

    def test_exponential_residual(self):
        root = solve_scalar_root(
            lambda d: math.exp(1.0 + d) * (1.0 - d) - 1.0, 0.5, 0.99, 1e-10
        )
        assert root == pytest.approx(0.8414, abs=1e-3)

    def test_no_sign_change(self):
        with pytest.raises(BracketError):
            solve_scalar_root(lambda x: x * x + 1.0, -1.0, 1.0, 1e-8)

    def test_bad_tolerance(self):
        with pytest.raises(ValueError):
            solve_scalar_root(lambda x: x, -1.0, 1.0, 0.0)


# -- property suite ---------------------------------------------------------

geometric_discounts = st.floats(0.0, 0.99).map(DiscountSpec.geometric)
finite_discounts = st.integers(0, 80).map(DiscountSpec.uniform_finite)


@settings(max_examples=300, deadline=None)
@given(
    q=st.floats(0.0, 1.0),
    b_frac=st.floats(0.0, 1.0),
    delta=st.floats(-0.5, 1.0),
    p=st.floats(0.0, 1.0),
    t=st.integers(1, 50),
    discount=st.one_of(geometric_discounts, finite_discounts),
)
def test_commitment_never_helps(q, b_frac, delta, p, t, discount):
    # one-step commitments dominate longer ones whenever b <= q_bar_j
    b = b_frac * q
    u_one = exploration_utility(
        ThresholdQuery(q_bar_j=q, delta=delta, p_i=p, b=b, t=1, discount=discount)
    )
    u_t = exploration_utility(
        ThresholdQuery(q_bar_j=q, delta=delta, p_i=p, b=b, t=t, discount=discount)
    )
    assert u_one >= u_t - 1e-12


@settings(max_examples=300, deadline=None)
@given(
    q=st.floats(0.01, 1.0),
    delta_frac=st.floats(0.01, 0.99),
    gamma=st.floats(0.001, 0.999),
)
def test_median_rule_consistent_with_general_rule(q, delta_frac, gamma):
    delta = delta_frac * q
    threshold = median_gamma_threshold(q, delta)
    if abs(gamma - threshold) < 1e-12:
        return
    assert should_explore_geometric(q, delta, 0.5, gamma) == (gamma > threshold)


@settings(max_examples=300, deadline=None)
@given(
    q=st.floats(0.01, 1.0),
    delta=st.floats(1e-6, 1.0),
    p=st.floats(0.0, 0.999),
    n=st.integers(1, 100),
)
def test_finite_rule_matches_return_comparison(q, delta, p, n):
    discount = DiscountSpec.uniform_finite(n)
    u = series_exploration_utility(q, delta, p, 0.0, 1, discount)
    g = series_greedy_utility(q, discount)
    if abs(u - g) <= 1e-12 * max(1.0, g):
        return
    assert should_explore_finite(q, delta, p, n) == (u > g)
